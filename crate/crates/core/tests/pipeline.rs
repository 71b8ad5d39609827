//! Integration tests exercising the full video-to-fingerprint path through
//! the public API, checking the physical behaviors the maps are built to
//! capture.

use faintprint::config::RunConfig;
use faintprint::fingerprint::{read_map, write_map, MapKind};
use faintprint::pipeline::{extract_video, VideoInput};
use faintprint::synth::{synth_fake, synth_video, FakeKind, SynthSpec};

fn video_from(spec: &SynthSpec) -> VideoInput {
    let (frames, landmarks) = if spec.fake.is_fake() {
        synth_fake(spec).unwrap()
    } else {
        synth_video(spec).unwrap()
    };
    VideoInput::new(frames, landmarks).unwrap()
}

/// Self-similarity at the given lag: Pearson correlation between the series
/// and its lagged copy over their overlap.
fn acf(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    assert!(lag < n);
    let (a, b) = (&x[..n - lag], &x[lag..]);
    let m = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / m, b.iter().sum::<f64>() / m);
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&p, &q) in a.iter().zip(b) {
        num += (p - ma) * (q - mb);
        va += (p - ma) * (p - ma);
        vb += (q - mb) * (q - mb);
    }
    num / (va * vb).sqrt()
}

/// One plane of a map averaged across all rows. Every grid cell sees the
/// same pulse while its sensor noise is independent, so the column mean is
/// the map's consensus pulse trace.
fn consensus_row(map: &faintprint::FingerprintMap, plane: usize) -> Vec<f64> {
    let rows = map.rows();
    (0..map.n())
        .map(|t| {
            (0..rows)
                .map(|r| map.pixels.get_pixel(t as u32, r as u32).0[plane] as f64)
                .sum::<f64>()
                / rows as f64
        })
        .collect()
}

/// A uniform brightness change is an offset in every trace and every pixel;
/// band-passing and per-map normalization are built to cancel it, so the
/// fingerprints must agree to within one quantization level.
#[test]
fn brightness_offset_barely_changes_fingerprints() {
    let config = RunConfig::default();
    let base = SynthSpec::new(66.0, 200, 31, "lighting_a");
    let mut brighter = base.clone();
    brighter.base_color = [
        base.base_color[0] + 20,
        base.base_color[1] + 20,
        base.base_color[2] + 20,
    ];
    brighter.source_id = "lighting_b".into();

    let fp_a = extract_video::<f64>(&video_from(&base), &config).unwrap();
    let fp_b = extract_video::<f64>(&video_from(&brighter), &config).unwrap();
    assert_eq!(fp_a.ppg.len(), 1);

    for (ma, mb) in fp_a
        .ppg
        .iter()
        .zip(&fp_b.ppg)
        .chain(fp_a.ar.iter().zip(&fp_b.ar))
    {
        let mut worst = 0u8;
        for (pa, pb) in ma.pixels.pixels().zip(mb.pixels.pixels()) {
            for c in 0..3 {
                worst = worst.max(pa.0[c].abs_diff(pb.0[c]));
            }
        }
        assert!(
            worst <= 1,
            "{:?} map drifted by {worst} gray levels under a +20 offset",
            ma.kind
        );
    }
}

/// The pulse plane of a genuine video's map repeats at the heart period.
#[test]
fn pulse_plane_is_periodic_at_the_heart_rate() {
    // 72 bpm at 30 fps: period exactly 25 frames.
    let spec = SynthSpec {
        noise_sigma: 1.0,
        ..SynthSpec::new(72.0, 200, 77, "periodic")
    };
    let fp = extract_video::<f64>(&video_from(&spec), &RunConfig::default()).unwrap();
    let map = &fp.ppg[0];
    assert_eq!(map.kind, MapKind::Ppg);
    // The blue plane carries the differenced pulse signal.
    let rho = acf(&consensus_row(map, 2), 25);
    assert!(rho > 0.9, "autocorrelation at one period: {rho}");
    // A quarter period off, the pulse should be far less self-similar.
    let off = acf(&consensus_row(map, 2), 19);
    assert!(off < 0.3, "off-period autocorrelation {off} vs {rho}");
}

/// Phase jitter is designed to break exactly that periodicity, and the maps
/// must show it: over several seeds the jittered pulse decorrelates at one
/// period while the genuine one stays coherent.
#[test]
fn phase_jitter_destroys_pulse_periodicity() {
    let config = RunConfig::default();
    let mut real_mean = 0.0;
    let mut fake_mean = 0.0;
    let seeds = 6u64;
    for seed in 0..seeds {
        let real = SynthSpec {
            noise_sigma: 1.0,
            ..SynthSpec::new(72.0, 200, 500 + seed, format!("r{seed}"))
        };
        let fake = SynthSpec {
            noise_sigma: 1.0,
            ..SynthSpec::new_fake(
                72.0,
                200,
                900 + seed,
                FakeKind::PhaseJitter { sigma_rad: 1.5 },
                format!("f{seed}"),
            )
        };
        let fp_real = extract_video::<f64>(&video_from(&real), &config).unwrap();
        let fp_fake = extract_video::<f64>(&video_from(&fake), &config).unwrap();
        real_mean += acf(&consensus_row(&fp_real.ppg[0], 2), 25);
        fake_mean += acf(&consensus_row(&fp_fake.ppg[0], 2), 25);
    }
    real_mean /= seeds as f64;
    fake_mean /= seeds as f64;
    assert!(real_mean > 0.9, "genuine periodicity too weak: {real_mean}");
    assert!(
        fake_mean < 0.5,
        "jittered periodicity too strong: {fake_mean}"
    );
}

/// Maps produced by the real pipeline survive the PNG + sidecar round trip
/// bit for bit.
#[test]
fn extracted_maps_round_trip_through_files() {
    let spec = SynthSpec::new(90.0, 160, 4, "roundtrip");
    let fp = extract_video::<f64>(&video_from(&spec), &RunConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for map in fp.ppg.iter().chain(&fp.ar) {
        let path = dir.path().join(format!("{}.png", map.file_stem()));
        write_map(map, &path).unwrap();
        let back = read_map(&path).unwrap();
        assert_eq!(back.kind, map.kind);
        assert_eq!(back.source_id, map.source_id);
        assert_eq!(back.segment, map.segment);
        assert_eq!(back.fps, map.fps);
        assert_eq!(back.pixels.as_raw(), map.pixels.as_raw());
    }
}
