//! Faint-signal video forensics: pulse and pixel-correlation fingerprints
//! for forged-face detection.
//!
//! Face forgeries disturb two subtle statistical signals that genuine camera
//! footage carries. First, live skin exhibits a faint periodic color
//! variation driven by the heartbeat; splicing and generative synthesis
//! break its spatial coherence. Second, the resampling and blending steps of
//! a face swap smooth neighboring pixels, shifting the coefficients of an
//! autoregressive model fitted across the image. This crate extracts both
//! signals from fixed-length video segments, renders each as a small RGB
//! "fingerprint map", and classifies the maps with a tiny asymmetric-
//! convolution network whose three training branches fuse into a single
//! kernel for inference.
//!
//! The processing chain:
//!
//! 1. [`ingest`] — load frames and cheek-quad landmarks, rectify the quad to
//!    an upright patch, subdivide it into a grid of measurement cells.
//! 2. [`chromppg`] — per-cell mean color traces, zero-phase band-pass
//!    filtering, chrominance pulse recovery, and subspace heart-rate
//!    estimation.
//! 3. [`armodel`] — serpentine pixel scans and Yule-Walker/Levinson-Durbin
//!    autoregression per frame and color plane.
//! 4. [`fingerprint`] — segment windowing and map construction for both
//!    branches, plus PNG/JSON persistence.
//! 5. [`acbnet`] — the classifier: train/fused forward passes, exact kernel
//!    fusion, backpropagation, and SGD training.
//! 6. [`eval`] — ROC/AUC analysis and leakage-safe video-identity splits.
//! 7. [`synth`] — a synthetic face-video generator with known heart rate and
//!    controllable forgery artifacts, used as ground truth by the test
//!    suite.
//! 8. [`pipeline`] — orchestration from videos to trained models and
//!    reports; [`config`] carries the run parameters.
//!
//! All numeric code is generic over [`scalar::Real`] (`f32` or `f64`);
//! the crate root exposes double-precision aliases for the common case.
//! Every random choice flows from explicit seeds, and parallel sections
//! reduce in fixed order, so equal seeds give byte-identical artifacts.

pub mod acbnet;
pub mod armodel;
pub mod chromppg;
pub mod config;
pub mod eval;
pub mod fingerprint;
pub mod ingest;
pub mod pipeline;
pub mod scalar;
pub mod synth;

pub use acbnet::{AcbModel, NetConfig, Prediction, TrainConfig};
pub use chromppg::music::HrEstimate;
pub use config::RunConfig;
pub use eval::EvalReport;
pub use fingerprint::{FingerprintMap, MapKind, Segment};
pub use ingest::{CheekLandmarks, FrameSequence, Quad};
pub use pipeline::{PipelineError, VideoInput};
pub use scalar::Real;

/// The classifier at the default double precision.
pub type Model = AcbModel<f64>;
/// Single-precision classifier for memory-constrained use.
pub type Model32 = AcbModel<f32>;
/// Heart-rate estimate at the default double precision.
pub type HeartRate = HrEstimate<f64>;
