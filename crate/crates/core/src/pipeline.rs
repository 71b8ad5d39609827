//! End-to-end orchestration: frames and landmarks in, fingerprint maps,
//! trained classifiers, and evaluation reports out.
//!
//! Per-frame work (rectification, pixel-autoregression fits) runs on a
//! thread pool; everything downstream reduces in deterministic order, so a
//! fixed seed reproduces every artifact byte-for-byte at any thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;
use thiserror::Error;

use crate::acbnet::{self, AcbModel, NetConfig, NetError, Prediction, TrainConfig};
use crate::armodel::{
    ar_frame_coeffs, biased_autocorrelation, channel_plane, levinson_durbin, serpentine_scan,
    ArError, FrameCoeffs, ZERO_VARIANCE_FLOOR,
};
use crate::chromppg::music::{estimate_hr_music, HrEstimate, MusicConfig};
use crate::chromppg::{self, ChannelTraces, SignalError};
use crate::config::{ConfigError, RunConfig};
use crate::eval::{
    split_videos, video_metrics, BranchMetrics, EvalError, EvalReport, ScoredSegment,
};
use crate::fingerprint::{
    build_ar_map, build_ppg_map, window_segments, FingerprintError, FingerprintMap, MapKind,
};

use crate::ingest::{
    load_frame_sequence, load_landmarks, rectify_roi, CheekLandmarks, FrameSequence, IngestError,
};
use crate::scalar::Real;
use crate::synth::SynthError;

/// Unified error for whole-pipeline operations.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Ar(#[from] ArError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// A video ready for processing: frames plus per-frame cheek quads, bounds
/// already validated.
#[derive(Debug, Clone)]
pub struct VideoInput {
    pub frames: FrameSequence,
    pub landmarks: CheekLandmarks,
}

impl VideoInput {
    /// Pairs a frame sequence with its landmarks, checking that counts match
    /// and every quad lies inside the frame.
    pub fn new(frames: FrameSequence, landmarks: CheekLandmarks) -> Result<Self, PipelineError> {
        if landmarks.len() != frames.len() {
            return Err(IngestError::CountMismatch {
                got: landmarks.len(),
                want: frames.len(),
            }
            .into());
        }
        let (w, h) = frames.dimensions();
        landmarks.validate_bounds(w, h)?;
        Ok(Self { frames, landmarks })
    }

    pub fn source_id(&self) -> &str {
        self.frames.source_id()
    }
}

/// Loads a frame directory and its landmark file into a validated input.
pub fn load_video(
    frames_dir: &Path,
    landmarks_path: &Path,
    default_fps: f64,
) -> Result<VideoInput, PipelineError> {
    let frames = load_frame_sequence(frames_dir, default_fps)?;
    let landmarks = load_landmarks(landmarks_path, frames.len())?;
    VideoInput::new(frames, landmarks)
}

/// Rectifies every frame's cheek quad to the configured patch size.
pub fn rectify_video(
    video: &VideoInput,
    config: &RunConfig,
) -> Result<Vec<RgbImage>, PipelineError> {
    let h = config.roi_rows as u32;
    let w = config.roi_cols as u32;
    let rois: Result<Vec<RgbImage>, IngestError> = video
        .frames
        .frames()
        .par_iter()
        .zip(video.landmarks.quads().par_iter())
        .map(|(frame, quad)| rectify_roi(frame, quad, h, w))
        .collect();
    Ok(rois?)
}

/// Mean R/G/B traces of every grid cell across a run of rectified patches,
/// in row-major cell order.
pub fn cell_traces<T: Real>(
    rois: &[RgbImage],
    config: &RunConfig,
    fps: f64,
) -> Vec<ChannelTraces<T>> {
    let cell_h = config.roi_rows / config.grid_rows;
    let cell_w = config.roi_cols / config.grid_cols;
    let cells = config.grid_cells();
    // frame-major means: one [r, g, b] per cell per frame.
    let per_frame: Vec<Vec<[f64; 3]>> = rois
        .par_iter()
        .map(|roi| {
            let mut means = Vec::with_capacity(cells);
            for gy in 0..config.grid_rows {
                for gx in 0..config.grid_cols {
                    let mut acc = [0.0f64; 3];
                    for y in 0..cell_h {
                        for x in 0..cell_w {
                            let p =
                                roi.get_pixel((gx * cell_w + x) as u32, (gy * cell_h + y) as u32);
                            for (a, &v) in acc.iter_mut().zip(&p.0) {
                                *a += v as f64;
                            }
                        }
                    }
                    let count = (cell_h * cell_w) as f64;
                    means.push([acc[0] / count, acc[1] / count, acc[2] / count]);
                }
            }
            means
        })
        .collect();
    (0..cells)
        .map(|cell| {
            let mut tr = ChannelTraces {
                r: Vec::with_capacity(rois.len()),
                g: Vec::with_capacity(rois.len()),
                b: Vec::with_capacity(rois.len()),
                fps,
            };
            for frame in &per_frame {
                tr.r.push(T::c(frame[cell][0]));
                tr.g.push(T::c(frame[cell][1]));
                tr.b.push(T::c(frame[cell][2]));
            }
            tr
        })
        .collect()
}

/// Both fingerprint branches extracted from one video.
#[derive(Debug, Clone)]
pub struct VideoFingerprints {
    pub ppg: Vec<FingerprintMap>,
    pub ar: Vec<FingerprintMap>,
    /// Count of `(frame, color channel)` pairs whose autoregression fit was
    /// degenerate (near-zero variance) and therefore zero-filled.
    pub degenerate_channels: usize,
}

/// Runs the full extraction for one video: rectify every frame once, then
/// cut segments and build one pulse map and one autoregression map per
/// segment.
pub fn extract_video<T: Real>(
    video: &VideoInput,
    config: &RunConfig,
) -> Result<VideoFingerprints, PipelineError> {
    config.validate()?;
    let rois = rectify_video(video, config)?;
    let fps = video.frames.fps();
    let source_id = video.source_id();
    let segments = window_segments(video.frames.len(), config.n, config.effective_stride())?;

    let traces = cell_traces::<T>(&rois, config, fps);
    let coeffs: Vec<FrameCoeffs<T>> = rois
        .par_iter()
        .map(|roi| ar_frame_coeffs(roi, config.ar_order))
        .collect();
    let degenerate_channels = coeffs
        .iter()
        .map(|fc| fc.degenerate.iter().filter(|&&d| d).count())
        .sum();

    let mut ppg = Vec::with_capacity(segments.len());
    let mut ar = Vec::with_capacity(segments.len());
    for seg in segments {
        let windowed: Vec<ChannelTraces<T>> = traces
            .iter()
            .map(|tr| tr.window(seg.start_frame, seg.len))
            .collect();
        ppg.push(build_ppg_map(
            &windowed,
            config.band_lo_hz,
            config.band_hi_hz,
            seg,
            source_id,
        )?);
        ar.push(build_ar_map(
            &coeffs[seg.start_frame..seg.start_frame + seg.len],
            config.ar_order,
            seg,
            source_id,
            fps,
        )?);
    }
    Ok(VideoFingerprints {
        ppg,
        ar,
        degenerate_channels,
    })
}

/// Estimates the subject's heart rate from the whole video: one mean trace
/// over the full rectified patch, band-passed, differenced, and scanned with
/// the subspace pseudo-spectrum.
pub fn estimate_heart_rate<T: Real>(
    video: &VideoInput,
    config: &RunConfig,
) -> Result<HrEstimate<T>, PipelineError> {
    config.validate()?;
    let rois = rectify_video(video, config)?;
    let fps = video.frames.fps();
    let refs: Vec<&RgbImage> = rois.iter().collect();
    let traces = chromppg::mean_channel::<T>(&refs, fps);
    let rf = chromppg::bandpass(&traces.r, fps, config.band_lo_hz, config.band_hi_hz)?;
    let gf = chromppg::bandpass(&traces.g, fps, config.band_lo_hz, config.band_hi_hz)?;
    let bf = chromppg::bandpass(&traces.b, fps, config.band_lo_hz, config.band_hi_hz)?;
    let (xs, ys) = chromppg::chrom_signals(&rf, &gf, &bf);
    let s = chromppg::s_hat(&xs, &ys);
    let ppg = chromppg::ppg_signal(&s, fps)?;
    Ok(estimate_hr_music(&ppg, &MusicConfig::default())?)
}

/// A fingerprint map tagged with its video's ground truth.
#[derive(Debug, Clone)]
pub struct LabeledMap {
    pub map: FingerprintMap,
    pub fake: bool,
}

/// Collects the distinct source ids of a map set in first-appearance order,
/// verifying each source carries one consistent label.
fn source_ids(maps: &[LabeledMap]) -> Result<Vec<String>, EvalError> {
    let mut seen: BTreeMap<&str, bool> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for lm in maps {
        let id = lm.map.source_id.as_str();
        match seen.get(id) {
            None => {
                seen.insert(id, lm.fake);
                order.push(id.to_string());
            }
            Some(label) if *label != lm.fake => {
                return Err(EvalError::InconsistentLabel {
                    source_id: id.to_string(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(order)
}

fn training_set<T: Real>(maps: &[&LabeledMap]) -> Vec<(ndarray::Array3<T>, T)> {
    maps.iter()
        .map(|lm| {
            (
                acbnet::map_input::<T>(&lm.map),
                if lm.fake { T::one() } else { T::zero() },
            )
        })
        .collect()
}

/// Trains one branch classifier on the given maps (all of one kind and
/// shape).
pub fn train_branch<T: Real>(
    maps: &[&LabeledMap],
    net_seed: u64,
    train_config: &TrainConfig,
) -> Result<AcbModel<T>, PipelineError> {
    let first = maps.first().ok_or(NetError::EmptyInput)?;
    let rows = first.map.rows();
    let cols = first.map.n();
    for lm in maps {
        if lm.map.rows() != rows || lm.map.n() != cols {
            return Err(NetError::ShapeMismatch {
                got: (lm.map.rows(), lm.map.n(), 3),
                want: (rows, cols, 3),
            }
            .into());
        }
    }
    let mut model = AcbModel::init(
        NetConfig::for_maps(acbnet::input_rows(rows), cols),
        net_seed,
    );
    let data = training_set::<T>(maps);
    acbnet::train(&mut model, &data, train_config)?;
    model.fuse();
    Ok(model)
}

/// Scores maps with a trained model, in input order.
pub fn score_maps<T: Real>(
    model: &AcbModel<T>,
    maps: &[&FingerprintMap],
) -> Result<Vec<Prediction>, PipelineError> {
    maps.iter().map(|m| Ok(model.forward(m)?)).collect()
}

/// One segment's fused score across available branches.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSegment {
    pub source_id: String,
    pub start_frame: usize,
    pub score: f64,
}

/// Joins per-branch predictions by segment identity and averages the scores
/// of whichever branches are present, in `(source, start frame)` order.
pub fn fuse_predictions(
    ppg: &[Prediction],
    ar: &[Prediction],
) -> Result<Vec<FusedSegment>, PipelineError> {
    type Key = (String, usize, usize);
    let mut table: BTreeMap<Key, (Option<Prediction>, Option<Prediction>)> = BTreeMap::new();
    for p in ppg {
        let key = (p.source_id.clone(), p.start_frame, p.segment_len);
        table.entry(key).or_default().0 = Some(p.clone());
    }
    for a in ar {
        let key = (a.source_id.clone(), a.start_frame, a.segment_len);
        table.entry(key).or_default().1 = Some(a.clone());
    }
    let mut fused = Vec::with_capacity(table.len());
    for ((source_id, start_frame, _), (p, a)) in table {
        let score = acbnet::predict_segment(p.as_ref(), a.as_ref())?;
        fused.push(FusedSegment {
            source_id,
            start_frame,
            score,
        });
    }
    Ok(fused)
}

/// Everything produced by a train-and-evaluate experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome<T> {
    pub ppg_model: Option<AcbModel<T>>,
    pub ar_model: Option<AcbModel<T>>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub report: EvalReport,
    /// Fused per-segment scores with truth, over the test split.
    pub test_scores: Vec<ScoredSegment>,
}

/// Splits the labeled maps by video identity, trains each branch present on
/// the training side, scores the test side, and summarizes.
///
/// The split fraction is the share of videos assigned to training. Branch
/// models see only their own kind of map; fused scores average the branches
/// available for each segment.
pub fn run_map_experiment<T: Real>(
    maps: &[LabeledMap],
    train_frac: f64,
    config: &RunConfig,
    train_config: &TrainConfig,
) -> Result<ExperimentOutcome<T>, PipelineError> {
    if maps.is_empty() {
        return Err(NetError::EmptyInput.into());
    }
    let ids = source_ids(maps)?;
    let (train_ids, test_ids) = split_videos(&ids, train_frac, config.seed)?;
    let train_set: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
    let test_set: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
    let labels: BTreeMap<&str, bool> = maps
        .iter()
        .map(|lm| (lm.map.source_id.as_str(), lm.fake))
        .collect();

    let side = |kind: MapKind, set: &BTreeSet<&str>| -> Vec<&LabeledMap> {
        maps.iter()
            .filter(|lm| lm.map.kind == kind && set.contains(lm.map.source_id.as_str()))
            .collect()
    };

    let mut branch_scored: BTreeMap<MapKind, Vec<ScoredSegment>> = BTreeMap::new();
    let mut predictions: BTreeMap<MapKind, Vec<Prediction>> = BTreeMap::new();
    let mut models: BTreeMap<MapKind, AcbModel<T>> = BTreeMap::new();
    for (offset, kind) in [(11u64, MapKind::Ppg), (22u64, MapKind::Ar)] {
        let train_maps = side(kind, &train_set);
        let test_maps = side(kind, &test_set);
        if train_maps.is_empty() && test_maps.is_empty() {
            continue;
        }
        if train_maps.is_empty() || test_maps.is_empty() {
            return Err(NetError::EmptyInput.into());
        }
        let model = train_branch::<T>(&train_maps, config.seed.wrapping_add(offset), train_config)?;
        let refs: Vec<&FingerprintMap> = test_maps.iter().map(|lm| &lm.map).collect();
        let preds = score_maps(&model, &refs)?;
        let scored = preds
            .iter()
            .map(|p| {
                ScoredSegment::new(p.source_id.clone(), p.p_fake, labels[p.source_id.as_str()])
            })
            .collect();
        branch_scored.insert(kind, scored);
        predictions.insert(kind, preds);
        models.insert(kind, model);
    }
    if models.is_empty() {
        return Err(NetError::EmptyInput.into());
    }

    let empty: Vec<Prediction> = Vec::new();
    let fused = fuse_predictions(
        predictions.get(&MapKind::Ppg).unwrap_or(&empty),
        predictions.get(&MapKind::Ar).unwrap_or(&empty),
    )?;
    let fused_scored: Vec<ScoredSegment> = fused
        .iter()
        .map(|f| ScoredSegment::new(f.source_id.clone(), f.score, labels[f.source_id.as_str()]))
        .collect();

    let report = EvalReport {
        ppg: branch_scored
            .get(&MapKind::Ppg)
            .map(|s| BranchMetrics::from_scored(s))
            .transpose()?,
        ar: branch_scored
            .get(&MapKind::Ar)
            .map(|s| BranchMetrics::from_scored(s))
            .transpose()?,
        fused: BranchMetrics::from_scored(&fused_scored)?,
        video: video_metrics(&fused_scored)?,
    };
    Ok(ExperimentOutcome {
        ppg_model: models.remove(&MapKind::Ppg),
        ar_model: models.remove(&MapKind::Ar),
        train_ids,
        test_ids,
        report,
        test_scores: fused_scored,
    })
}

/// Per-frame autoregression coefficients at several orders from one shared
/// autocorrelation pass per color plane.
///
/// Produces, per requested order, exactly what fitting that order directly
/// would produce, because lag autocorrelations do not depend on the largest
/// lag requested.
pub fn multi_order_frame_coeffs<T: Real>(roi: &RgbImage, orders: &[usize]) -> Vec<FrameCoeffs<T>> {
    let max_order = *orders.iter().max().expect("at least one order");
    assert!(orders.iter().all(|&o| o >= 1), "orders must be positive");
    let h = roi.height() as usize;
    let w = roi.width() as usize;
    assert!(
        2 * h * w > 4 * max_order,
        "patch too small for order {max_order}"
    );
    let mut per_order: Vec<FrameCoeffs<T>> = orders
        .iter()
        .map(|&o| FrameCoeffs {
            channels: [vec![T::zero(); o], vec![T::zero(); o], vec![T::zero(); o]],
            degenerate: [false; 3],
        })
        .collect();
    for c in 0..3 {
        let plane = channel_plane(roi, c);
        let seq = serpentine_scan::<T>(&plane, h, w);
        let n = T::c(seq.values.len() as f64);
        let mean = seq.values.iter().copied().sum::<T>() / n;
        let centered: Vec<T> = seq.values.iter().map(|&v| v - mean).collect();
        let r = biased_autocorrelation(&centered, max_order);
        if r[0].as_f64() < ZERO_VARIANCE_FLOOR {
            for fc in &mut per_order {
                fc.degenerate[c] = true;
            }
            continue;
        }
        for (fc, &order) in per_order.iter_mut().zip(orders) {
            match levinson_durbin(&r[..=order]) {
                Ok((coeffs, _)) => fc.channels[c] = coeffs,
                Err(_) => fc.degenerate[c] = true,
            }
        }
    }
    per_order
}

/// One row of an order-sweep result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub order: usize,
    /// Segment-level AUC of the autoregression branch on the test split.
    pub auc: f64,
}

/// A video prepared for the order sweep: rectified patches plus label.
pub struct SweepVideo {
    pub rois: Vec<RgbImage>,
    pub source_id: String,
    pub fps: f64,
    pub fake: bool,
}

impl SweepVideo {
    /// Rectifies a labeled video into sweep form.
    pub fn prepare(
        video: &VideoInput,
        fake: bool,
        config: &RunConfig,
    ) -> Result<Self, PipelineError> {
        Ok(Self {
            rois: rectify_video(video, config)?,
            source_id: video.source_id().to_string(),
            fps: video.frames.fps(),
            fake,
        })
    }
}

/// Trains and evaluates the autoregression branch at each requested order
/// and reports the test AUC per order.
///
/// Autocorrelations are computed once per frame at the largest order and
/// reused, so sweeping many orders costs little more than the largest one.
pub fn order_sweep<T: Real>(
    videos: &[SweepVideo],
    orders: &[usize],
    config: &RunConfig,
    train_config: &TrainConfig,
) -> Result<Vec<SweepPoint>, PipelineError> {
    assert!(!orders.is_empty(), "need at least one order");
    config.validate()?;

    // Shared heavy pass: per video, per frame, coefficients at every order.
    let per_video: Vec<Vec<Vec<FrameCoeffs<T>>>> = videos
        .iter()
        .map(|v| {
            v.rois
                .par_iter()
                .map(|roi| multi_order_frame_coeffs(roi, orders))
                .collect()
        })
        .collect();

    let mut points = Vec::with_capacity(orders.len());
    for (oi, &order) in orders.iter().enumerate() {
        let mut maps = Vec::new();
        for (v, frames) in videos.iter().zip(&per_video) {
            let coeffs: Vec<FrameCoeffs<T>> = frames.iter().map(|f| f[oi].clone()).collect();
            let segments = window_segments(v.rois.len(), config.n, config.effective_stride())?;
            for seg in segments {
                let map = build_ar_map(
                    &coeffs[seg.start_frame..seg.start_frame + seg.len],
                    order,
                    seg,
                    &v.source_id,
                    v.fps,
                )?;
                maps.push(LabeledMap { map, fake: v.fake });
            }
        }
        let outcome = run_map_experiment::<T>(&maps, 0.7, config, train_config)?;
        let auc = outcome
            .report
            .ar
            .as_ref()
            .and_then(|m| m.auc)
            .unwrap_or(0.5);
        points.push(SweepPoint { order, auc });
    }
    Ok(points)
}

/// Builds and installs a bounded rayon thread pool when `jobs` is non-zero;
/// with zero, the default pool (all cores) is kept.
pub fn configure_jobs(jobs: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    if jobs == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
}
