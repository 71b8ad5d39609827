//! Acceptance gate: every release-blocking behavior of the toolkit, checked
//! at its stated tolerance, one verdict line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the verdict
//! lines on success as well as on failure.
//!
//! The heavyweight fixtures (the 200-video corpus and the experiment trained
//! on it) are built once and shared across the criteria that need them.

use std::f64::consts::PI;
use std::sync::LazyLock;
use std::time::Instant;

use ndarray::Array3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use faintprint::acbnet::{
    self, flip_horizontal, flip_vertical, gradients, AcbModel, Mode, NetConfig, Prediction,
    TrainConfig,
};
use faintprint::armodel::{ar_frame_coeffs, biased_autocorrelation, fit_ar, levinson_durbin};
use faintprint::config::RunConfig;
use faintprint::eval::{BranchMetrics, ScoredSegment};
use faintprint::fingerprint::{write_map, MapKind};
use faintprint::pipeline::{
    estimate_heart_rate, extract_video, fuse_predictions, order_sweep, run_map_experiment,
    ExperimentOutcome, LabeledMap, SweepVideo, VideoInput,
};
use faintprint::synth::{smooth_image, synth_fake, synth_video, FakeKind, SynthSpec};

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// Canonical forgery used by the corpus: phase disruption plus upsample
/// smoothing, so both fingerprint families have something to find.
const BOTH: FakeKind = FakeKind::Both {
    sigma_rad: PI,
    factor: 2,
};

fn corpus_specs() -> Vec<SynthSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
    let mut specs = Vec::with_capacity(200);
    for i in 0..100 {
        let hr = 50.0 + 100.0 * rng.random::<f64>();
        specs.push(SynthSpec::new(hr, 160, 10_000 + i, format!("real_{i:03}")));
    }
    for i in 0..100 {
        let hr = 50.0 + 100.0 * rng.random::<f64>();
        specs.push(SynthSpec::new_fake(
            hr,
            160,
            20_000 + i,
            BOTH,
            format!("fake_{i:03}"),
        ));
    }
    specs
}

fn synthesize(spec: &SynthSpec) -> VideoInput {
    let (frames, landmarks) = if spec.fake.is_fake() {
        synth_fake(spec).unwrap()
    } else {
        synth_video(spec).unwrap()
    };
    VideoInput::new(frames, landmarks).unwrap()
}

struct Experiment {
    outcome: ExperimentOutcome<f64>,
    /// Every map extracted from the corpus, both kinds, with labels.
    maps: Vec<LabeledMap>,
    extract_secs: f64,
    experiment_secs: f64,
}

/// The flagship run: extract both fingerprint kinds from the 200-video
/// corpus and train + evaluate both branches on a 70/30 video split.
static EXPERIMENT: LazyLock<Experiment> = LazyLock::new(|| {
    let config = RunConfig::default();
    let t0 = Instant::now();
    let mut maps = Vec::new();
    for spec in corpus_specs() {
        let video = synthesize(&spec);
        let fake = spec.fake.is_fake();
        let fp = extract_video::<f64>(&video, &config).unwrap();
        for map in fp.ppg.into_iter().chain(fp.ar) {
            maps.push(LabeledMap { map, fake });
        }
    }
    let extract_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let outcome = run_map_experiment::<f64>(&maps, 0.7, &config, &TrainConfig::default()).unwrap();
    let experiment_secs = t1.elapsed().as_secs_f64();
    Experiment {
        outcome,
        maps,
        extract_secs,
        experiment_secs,
    }
});

fn verdict(criterion: u32, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Heart-rate recovery
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_heart_rate_recovery() {
    let config = RunConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases: Vec<(f64, VideoInput)> = (0..20)
        .map(|i| {
            let hr = 50.0 + 100.0 * rng.random::<f64>();
            let spec = SynthSpec {
                noise_sigma: 1.0,
                ..SynthSpec::new(hr, 300, 300 + i, format!("hr_{i:02}"))
            };
            (hr, synthesize(&spec))
        })
        .collect();

    let t0 = Instant::now();
    let mut hits = 0;
    let mut worst = 0.0f64;
    for (truth, video) in &cases {
        let est = estimate_heart_rate::<f64>(video, &config).unwrap();
        let err = (est.bpm - truth).abs();
        worst = worst.max(err);
        if err <= 2.0 {
            hits += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        hits >= 19 && secs < 5.0,
        &format!("{hits}/20 within ±2 bpm (worst error {worst:.3} bpm), estimation {secs:.2} s (budget 5 s)"),
    );
}

// ---------------------------------------------------------------------------
// 2. Asymmetric-kernel fusion equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_fusion_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let config = NetConfig {
            input_rows: 12 + (seed as usize % 3) * 12,
            input_cols: 32,
            conv_strides: if seed % 2 == 0 { [1, 1] } else { [2, 2] },
            ..NetConfig::default()
        };
        let train_model = AcbModel::<f64>::init(config.clone(), 1000 + seed);
        assert_eq!(train_model.mode, Mode::Train);
        let mut fused_model = train_model.clone();
        fused_model.fuse();

        let input = Array3::from_shape_fn(
            (config.input_rows, config.input_cols, config.input_channels),
            |_| rng.random::<f64>(),
        );
        let a = train_model.forward_trace(&input);
        let b = fused_model.forward_trace(&input);
        for (x, y) in [(&a.pre1, &b.pre1), (&a.pre2, &b.pre2)] {
            for (u, v) in x.iter().zip(y.iter()) {
                worst = worst.max((u - v).abs());
            }
        }
        worst = worst.max((a.logit - b.logit).abs());
    }
    verdict(
        2,
        worst <= 1e-6,
        &format!("max |train − fused| = {worst:.3e} over 100 models (tolerance 1e-6)"),
    );
}

// ---------------------------------------------------------------------------
// 3. Gradient check
// ---------------------------------------------------------------------------

fn batch_loss(model: &AcbModel<f64>, batch: &[(&Array3<f64>, f64)]) -> f64 {
    fn softplus(z: f64) -> f64 {
        z.max(0.0) + (-z.abs()).exp().ln_1p()
    }
    let mut total = 0.0;
    for (input, label) in batch {
        let logit = model.forward_trace(input).logit;
        total += softplus(logit) - label * logit;
    }
    total / batch.len() as f64
}

#[test]
fn criterion_3_gradient_check() {
    let config = NetConfig {
        input_rows: 8,
        input_cols: 12,
        input_channels: 3,
        conv_channels: [2, 3],
        conv_strides: [1, 1],
    };
    let model = AcbModel::<f64>::init(config.clone(), 33);
    let params = model.param_count();
    assert!(params <= 5000, "check model has {params} params");

    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let inputs: Vec<Array3<f64>> = (0..3)
        .map(|_| {
            Array3::from_shape_fn((config.input_rows, config.input_cols, 3), |_| {
                rng.random::<f64>()
            })
        })
        .collect();
    let batch: Vec<(&Array3<f64>, f64)> = inputs.iter().zip([1.0, 0.0, 1.0]).collect();

    let (grads, _) = gradients(&model, &batch).unwrap();
    let analytic = grads.to_vec();
    assert_eq!(analytic.len(), params);

    let h = 1e-5;
    let theta = model.params_vec();
    let mut worst = 0.0f64;
    let mut worst_idx = 0usize;
    for i in 0..params {
        let mut plus = theta.clone();
        plus[i] += h;
        let mut minus = theta.clone();
        minus[i] -= h;
        let mut m = model.clone();
        m.set_params(&plus);
        let lp = batch_loss(&m, &batch);
        m.set_params(&minus);
        let lm = batch_loss(&m, &batch);
        let fd = (lp - lm) / (2.0 * h);
        let denom = fd.abs().max(analytic[i].abs());
        let rel = if denom < 1e-10 {
            0.0
        } else {
            (fd - analytic[i]).abs() / denom
        };
        if rel > worst {
            worst = rel;
            worst_idx = i;
        }
    }
    verdict(
        3,
        worst < 1e-4,
        &format!(
            "max relative error {worst:.3e} at parameter {worst_idx} of {params} (tolerance 1e-4)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Autoregression recovery and solver agreement
// ---------------------------------------------------------------------------

fn ar1_series(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = 0.0;
    // Burn in past the transient so the series is stationary.
    for _ in 0..500 {
        x = phi * x + noise.sample(&mut rng);
    }
    (0..n)
        .map(|_| {
            x = phi * x + noise.sample(&mut rng);
            x
        })
        .collect()
}

/// Plain Gaussian elimination with partial pivoting; deliberately
/// independent of the recursion it cross-checks.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row: Vec<f64> = a[col][col..].to_vec();
        for row in col + 1..n {
            let f = a[row][col] / pivot_row[0];
            for (v, p) in a[row][col..].iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

#[test]
fn criterion_4_ar_recovery_and_solver_agreement() {
    let n = 10_000;
    let mut details = Vec::new();
    let mut pass = true;
    for (i, phi) in [0.5, 0.9].into_iter().enumerate() {
        let series = ar1_series(phi, n, 44 + i as u64);
        let fit = fit_ar::<f64>(&series, 1).unwrap();
        let err = (fit.coefficients[0] - phi).abs();
        pass &= err <= 0.02;
        details.push(format!("φ={phi}: φ̂₁ error {err:.4}"));
    }

    // Order-36 coefficients: recursion vs direct normal-equations solve.
    let series = ar1_series(0.9, n, 46);
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let order = 36;
    let r = biased_autocorrelation::<f64>(&centered, order);
    let (ld, _) = levinson_durbin(&r).unwrap();
    let toeplitz: Vec<Vec<f64>> = (0..order)
        .map(|i| (0..order).map(|j| r[i.abs_diff(j)]).collect())
        .collect();
    let direct = solve_dense(toeplitz, r[1..=order].to_vec());
    let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = ld
        .iter()
        .zip(&direct)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let rel = diff / scale;
    pass &= rel <= 1e-8;
    details.push(format!("order-36 recursion vs direct solve: {rel:.3e}"));
    verdict(4, pass, &details.join("; "));
}

// ---------------------------------------------------------------------------
// 5. Smoothing detectability
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_smoothing_detectability() {
    let planes = 100;
    let mut raw = Vec::with_capacity(planes);
    let mut smoothed = Vec::with_capacity(planes);
    for seed in 0..planes as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5_000 + seed);
        let noise = Normal::new(128.0f64, 40.0).unwrap();
        let img = image::RgbImage::from_fn(72, 72, |_, _| {
            let mut px = [0u8; 3];
            for p in &mut px {
                *p = noise.sample(&mut rng).clamp(0.0, 255.0) as u8;
            }
            image::Rgb(px)
        });
        let up = smooth_image(&img, 2);
        raw.push(ar_frame_coeffs::<f64>(&img, 1).channels[1][0]);
        smoothed.push(ar_frame_coeffs::<f64>(&up, 1).channels[1][0]);
    }

    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // 99% normal confidence interval for the mean.
        let half = 2.576 * (var / n).sqrt();
        (mean, half)
    };
    let (m_raw, h_raw) = stats(&raw);
    let (m_up, h_up) = stats(&smoothed);
    let shift = m_up - m_raw;
    let separated = (m_up - h_up) > (m_raw + h_raw);
    verdict(
        5,
        shift >= 0.2 && separated,
        &format!(
            "mean φ̂₁ raw {m_raw:.3}±{h_raw:.3} vs upsampled {m_up:.3}±{h_up:.3}; shift {shift:.3} (≥0.2, 99% CIs disjoint: {separated})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. End-to-end separation on the synthetic corpus
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_end_to_end_separation() {
    let exp = &*EXPERIMENT;
    let report = &exp.outcome.report;
    let video_auc = report.video.auc.unwrap_or(0.0);
    let video_acc = report.video.accuracy;
    let fused_acc = report.fused.accuracy;
    let branch_best = report
        .ppg
        .iter()
        .chain(&report.ar)
        .map(|b| b.accuracy)
        .fold(0.0f64, f64::max);
    let secs = exp.extract_secs + exp.experiment_secs;
    let pass =
        video_auc >= 0.95 && video_acc >= 0.90 && fused_acc >= branch_best - 0.02 && secs < 600.0;
    verdict(
        6,
        pass,
        &format!(
            "video AUC {video_auc:.4} (≥0.95), video accuracy {video_acc:.3} (≥0.90), fused segment accuracy {fused_acc:.3} vs best branch {branch_best:.3} (−0.02 allowed); extract {:.0} s + train/eval {:.0} s (budget 600 s)",
            exp.extract_secs, exp.experiment_secs
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Order-sweep trend
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_order_sweep_trend() {
    let config = RunConfig::default();
    let videos: Vec<SweepVideo> = corpus_specs()
        .iter()
        .map(|spec| {
            let video = synthesize(spec);
            SweepVideo::prepare(&video, spec.fake.is_fake(), &config).unwrap()
        })
        .collect();
    let points =
        order_sweep::<f64>(&videos, &[1, 5, 36], &config, &TrainConfig::default()).unwrap();
    drop(videos);
    let auc: Vec<f64> = points.iter().map(|p| p.auc).collect();
    let pass = auc[2] >= auc[1] - 0.02 && auc[1] >= auc[0] - 0.02;
    verdict(
        7,
        pass,
        &format!(
            "AUC order 1: {:.4}, order 5: {:.4}, order 36: {:.4} (rising within ±0.02)",
            auc[0], auc[1], auc[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Flip tolerance
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_flip_tolerance() {
    let exp = &*EXPERIMENT;
    let test_set: std::collections::BTreeSet<&str> =
        exp.outcome.test_ids.iter().map(String::as_str).collect();
    let labels: std::collections::BTreeMap<&str, bool> = exp
        .maps
        .iter()
        .map(|lm| (lm.map.source_id.as_str(), lm.fake))
        .collect();

    let mut flipped: std::collections::BTreeMap<MapKind, Vec<Prediction>> = Default::default();
    for lm in &exp.maps {
        if !test_set.contains(lm.map.source_id.as_str()) {
            continue;
        }
        let model = match lm.map.kind {
            MapKind::Ppg => exp.outcome.ppg_model.as_ref().unwrap(),
            MapKind::Ar => exp.outcome.ar_model.as_ref().unwrap(),
        };
        let input = flip_vertical(&flip_horizontal(&acbnet::map_input::<f64>(&lm.map)));
        let p = model.forward_input(&input).unwrap();
        flipped.entry(lm.map.kind).or_default().push(Prediction {
            p_fake: p,
            source_id: lm.map.source_id.clone(),
            start_frame: lm.map.segment.start_frame,
            segment_len: lm.map.segment.len,
            kind: lm.map.kind,
        });
    }
    let empty = Vec::new();
    let fused = fuse_predictions(
        flipped.get(&MapKind::Ppg).unwrap_or(&empty),
        flipped.get(&MapKind::Ar).unwrap_or(&empty),
    )
    .unwrap();
    let scored: Vec<ScoredSegment> = fused
        .iter()
        .map(|f| ScoredSegment::new(f.source_id.clone(), f.score, labels[f.source_id.as_str()]))
        .collect();
    let flipped_acc = BranchMetrics::from_scored(&scored).unwrap().accuracy;
    let straight_acc = exp.outcome.report.fused.accuracy;
    let gap = (straight_acc - flipped_acc).abs();
    verdict(
        8,
        gap <= 0.05,
        &format!(
            "fused segment accuracy unflipped {straight_acc:.3}, flipped {flipped_acc:.3}, gap {gap:.3} (≤0.05)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Determinism
// ---------------------------------------------------------------------------

/// One complete small pipeline run: synthesize, extract, write fingerprints,
/// train both branches, write models and the evaluation report.
fn full_run(dir: &std::path::Path) {
    let config = RunConfig::default();
    let train_config = TrainConfig {
        epochs: 8,
        ..TrainConfig::default()
    };
    let mut maps = Vec::new();
    for i in 0..12u64 {
        let fake = i % 2 == 1;
        let spec = if fake {
            SynthSpec::new_fake(
                60.0 + 7.0 * i as f64,
                160,
                900 + i,
                BOTH,
                format!("v{i:02}"),
            )
        } else {
            SynthSpec::new(60.0 + 7.0 * i as f64, 160, 900 + i, format!("v{i:02}"))
        };
        let video = synthesize(&spec);
        let fp = extract_video::<f64>(&video, &config).unwrap();
        for map in fp.ppg.into_iter().chain(fp.ar) {
            let path = dir.join(format!("{}_{}.png", map.source_id, map.file_stem()));
            write_map(&map, &path).unwrap();
            maps.push(LabeledMap { map, fake });
        }
    }
    let outcome = run_map_experiment::<f64>(&maps, 0.7, &config, &train_config).unwrap();
    outcome
        .ppg_model
        .as_ref()
        .unwrap()
        .save(&dir.join("model_ppg.json"))
        .unwrap();
    outcome
        .ar_model
        .as_ref()
        .unwrap()
        .save(&dir.join("model_ar.json"))
        .unwrap();
    let report = serde_json::to_string_pretty(&outcome.report).unwrap();
    std::fs::write(dir.join("report.json"), report).unwrap();
}

#[test]
fn criterion_9_determinism() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    full_run(&a);
    full_run(&b);

    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let names_b: std::collections::BTreeSet<String> = std::fs::read_dir(&b)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(
        names
            .iter()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>(),
        names_b,
        "the two runs produced different file sets"
    );
    let mut bytes = 0usize;
    let mut mismatched = Vec::new();
    for name in &names {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        bytes += x.len();
        if x != y {
            mismatched.push(name.clone());
        }
    }
    verdict(
        9,
        mismatched.is_empty(),
        &format!(
            "{} artifacts ({} bytes) byte-identical across two runs{}",
            names.len(),
            bytes,
            if mismatched.is_empty() {
                String::new()
            } else {
                format!("; mismatched: {mismatched:?}")
            }
        ),
    );
}
