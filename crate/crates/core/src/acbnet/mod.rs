//! Asymmetric-convolution classifier over fingerprint maps.
//!
//! Each convolution block runs three parallel branches at train time — a 3x3
//! kernel plus 1x3 and 3x1 companions whose padded outputs align with the
//! square branch — and collapses them into one 3x3 kernel for inference by
//! adding the asymmetric kernels into the square kernel's central row and
//! column. The network is deliberately tiny: two blocks with ReLU and 2x2
//! mean pooling, then a single logistic output scoring a fingerprint map as
//! forged.

mod conv;
pub mod train;

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array3, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

pub use conv::{flip_horizontal, flip_vertical};
pub use train::{gradients, train, Gradients, TrainConfig};

use crate::fingerprint::{FingerprintMap, MapKind};
use crate::scalar::Real;

/// Model file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Errors raised by the classifier.
#[derive(Debug, Error)]
pub enum NetError {
    #[error(
        "input shape {got:?} does not match the model's expected {want:?} (rows, cols, channels)"
    )]
    ShapeMismatch {
        got: (usize, usize, usize),
        want: (usize, usize, usize),
    },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("training data contains only one class")]
    SingleClassDataset,
    #[error("predictions cover different segments: {a} vs {b}")]
    SegmentMismatch { a: String, b: String },
    #[error("no inputs supplied")]
    EmptyInput,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    BadModel {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: model format version {got}, this build reads {want}")]
    VersionMismatch { path: String, got: u32, want: u32 },
}

/// Whether a block runs its three branches or the collapsed kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Fused,
}

/// Weights of one asymmetric-convolution block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcbKernel<T> {
    /// `(3, 3, cin, cout)` square branch.
    pub k33: Array4<T>,
    /// `(1, 3, cin, cout)` horizontal branch.
    pub k13: Array4<T>,
    /// `(3, 1, cin, cout)` vertical branch.
    pub k31: Array4<T>,
    /// One bias per output channel, shared by the whole block.
    pub bias: Array1<T>,
}

impl<T: Real> AcbKernel<T> {
    /// All-zero block of the given shape.
    pub fn zeros(cin: usize, cout: usize) -> Self {
        Self {
            k33: Array4::zeros((3, 3, cin, cout)),
            k13: Array4::zeros((1, 3, cin, cout)),
            k31: Array4::zeros((3, 1, cin, cout)),
            bias: Array1::zeros(cout),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.k33.dim().2
    }

    pub fn out_channels(&self) -> usize {
        self.k33.dim().3
    }

    /// Collapses the three branches into a single 3x3 kernel: the 1x3 adds
    /// into the central row, the 3x1 into the central column. With matching
    /// padding this reproduces the summed branch outputs exactly (up to
    /// floating-point rounding).
    pub fn fused(&self) -> Array4<T> {
        let (_, _, cin, cout) = self.k33.dim();
        let mut f = self.k33.clone();
        for ci in 0..cin {
            for co in 0..cout {
                for j in 0..3 {
                    f[(1, j, ci, co)] += self.k13[(0, j, ci, co)];
                }
                for i in 0..3 {
                    f[(i, 1, ci, co)] += self.k31[(i, 0, ci, co)];
                }
            }
        }
        f
    }

    fn weight_count(&self) -> usize {
        self.k33.len() + self.k13.len() + self.k31.len() + self.bias.len()
    }
}

/// One asymmetric-convolution block application.
///
/// In [`Mode::Train`] the three branches run separately (3x3 padded `(1,1)`,
/// 1x3 padded `(0,1)`, 3x1 padded `(1,0)`) and their outputs are summed; in
/// [`Mode::Fused`] the collapsed kernel runs once. Both share the bias and
/// produce identically shaped outputs for any stride.
pub fn acb_forward<T: Real>(
    input: &Array3<T>,
    kernel: &AcbKernel<T>,
    mode: Mode,
    stride: usize,
) -> Array3<T> {
    let mut out = match mode {
        Mode::Train => {
            let mut acc = conv::conv2d(input, &kernel.k33, (1, 1), stride);
            let o13 = conv::conv2d(input, &kernel.k13, (0, 1), stride);
            let o31 = conv::conv2d(input, &kernel.k31, (1, 0), stride);
            acc.zip_mut_with(&o13, |a, b| *a += *b);
            acc.zip_mut_with(&o31, |a, b| *a += *b);
            acc
        }
        Mode::Fused => conv::conv2d(input, &kernel.fused(), (1, 1), stride),
    };
    conv::add_bias(&mut out, &kernel.bias);
    out
}

/// A `(height, width)` pair.
pub type Dims = (usize, usize);

/// Network architecture parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetConfig {
    pub input_rows: usize,
    pub input_cols: usize,
    pub input_channels: usize,
    /// Output channels of the two blocks.
    pub conv_channels: [usize; 2],
    /// Strides of the two blocks.
    pub conv_strides: [usize; 2],
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input_rows: 36,
            input_cols: 128,
            input_channels: 3,
            conv_channels: [6, 12],
            conv_strides: [1, 1],
        }
    }
}

fn conv_out(d: usize, stride: usize) -> usize {
    (d - 1) / stride + 1
}

impl NetConfig {
    /// A config sized for maps of the given dimensions, otherwise default.
    pub fn for_maps(rows: usize, cols: usize) -> Self {
        Self {
            input_rows: rows,
            input_cols: cols,
            ..Self::default()
        }
    }

    /// Shapes flowing through the network:
    /// `(after_block1, after_pool1, after_block2, after_pool2)`.
    pub fn feature_shapes(&self) -> (Dims, Dims, Dims, Dims) {
        let b1 = (
            conv_out(self.input_rows, self.conv_strides[0]),
            conv_out(self.input_cols, self.conv_strides[0]),
        );
        let p1 = (b1.0 / 2, b1.1 / 2);
        let b2 = (
            conv_out(p1.0, self.conv_strides[1]),
            conv_out(p1.1, self.conv_strides[1]),
        );
        let p2 = (b2.0 / 2, b2.1 / 2);
        (b1, p1, b2, p2)
    }

    /// Flattened feature length feeding the dense layer.
    pub fn flat_len(&self) -> usize {
        let (_, _, _, p2) = self.feature_shapes();
        p2.0 * p2.1 * self.conv_channels[1]
    }

    fn validate(&self) {
        let (_, p1, _, p2) = self.feature_shapes();
        assert!(
            p1.0 >= 1 && p1.1 >= 1 && p2.0 >= 1 && p2.1 >= 1,
            "input {}x{} too small for two pooled blocks",
            self.input_rows,
            self.input_cols
        );
        assert!(self.input_channels >= 1);
        assert!(self.conv_channels.iter().all(|&c| c >= 1));
        assert!(self.conv_strides.iter().all(|&s| s >= 1));
    }
}

/// The two-block asymmetric-convolution classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcbModel<T> {
    pub config: NetConfig,
    pub mode: Mode,
    pub conv1: AcbKernel<T>,
    pub conv2: AcbKernel<T>,
    pub dense_w: Array1<T>,
    pub dense_b: T,
}

/// One scored fingerprint map.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Prediction {
    /// Probability the segment is forged.
    pub p_fake: f64,
    pub source_id: String,
    pub start_frame: usize,
    pub segment_len: usize,
    pub kind: MapKind,
}

impl<T: Real> AcbModel<T> {
    /// Random initialization: scaled normal weights (each branch scaled so
    /// the three-branch sum keeps a He-like variance), zero biases.
    pub fn init(config: NetConfig, seed: u64) -> Self {
        config.validate();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut draw = |std: f64| -> T { T::c(std_normal.sample(&mut rng) * std) };

        let mut make_block = |cin: usize, cout: usize| {
            let mut k = AcbKernel::zeros(cin, cout);
            let std33 = (2.0 / (3.0 * 9.0 * cin as f64)).sqrt();
            let std13 = (2.0 / (3.0 * 3.0 * cin as f64)).sqrt();
            for v in k.k33.iter_mut() {
                *v = draw(std33);
            }
            for v in k.k13.iter_mut() {
                *v = draw(std13);
            }
            for v in k.k31.iter_mut() {
                *v = draw(std13);
            }
            k
        };
        let conv1 = make_block(config.input_channels, config.conv_channels[0]);
        let conv2 = make_block(config.conv_channels[0], config.conv_channels[1]);
        let flat = config.flat_len();
        let dense_std = (1.0 / flat as f64).sqrt();
        let mut dense_w = Array1::zeros(flat);
        for v in dense_w.iter_mut() {
            *v = draw(dense_std);
        }
        Self {
            config,
            mode: Mode::Train,
            conv1,
            conv2,
            dense_w,
            dense_b: T::zero(),
        }
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.conv1.weight_count() + self.conv2.weight_count() + self.dense_w.len() + 1
    }

    /// Switches the model to fused single-kernel inference.
    pub fn fuse(&mut self) {
        self.mode = Mode::Fused;
    }

    /// The collapsed kernels of both blocks.
    pub fn fused_kernels(&self) -> (Array4<T>, Array4<T>) {
        (self.conv1.fused(), self.conv2.fused())
    }

    fn expected_shape(&self) -> (usize, usize, usize) {
        (
            self.config.input_rows,
            self.config.input_cols,
            self.config.input_channels,
        )
    }

    /// Forward pass to the forgery probability, honoring the current mode.
    pub fn forward_input(&self, input: &Array3<T>) -> Result<T, NetError> {
        if input.dim() != self.expected_shape() {
            return Err(NetError::ShapeMismatch {
                got: input.dim(),
                want: self.expected_shape(),
            });
        }
        Ok(sigmoid(self.forward_trace(input).logit))
    }

    fn dense_logit(&self, features: &Array3<T>) -> T {
        let fs = features.as_slice().expect("standard layout");
        debug_assert_eq!(fs.len(), self.dense_w.len());
        let ws = self.dense_w.as_slice().expect("standard layout");
        let mut acc = self.dense_b;
        for (f, w) in fs.iter().zip(ws) {
            acc += *f * *w;
        }
        acc
    }

    /// Intermediate activations of a forward pass, honoring the current
    /// mode. No shape check: callers needing one go through
    /// [`Self::forward_input`].
    pub fn forward_trace(&self, input: &Array3<T>) -> ForwardTrace<T> {
        self.trace_in(input, self.mode)
    }

    /// Trace worker with an explicit mode; backpropagation always traces in
    /// train mode so its gradients decompose over the three kernel branches.
    pub(crate) fn trace_in(&self, input: &Array3<T>, mode: Mode) -> ForwardTrace<T> {
        let pre1 = acb_forward(input, &self.conv1, mode, self.config.conv_strides[0]);
        let act1 = conv::relu(&pre1);
        let pool1 = conv::mean_pool2(&act1);
        let pre2 = acb_forward(&pool1, &self.conv2, mode, self.config.conv_strides[1]);
        let act2 = conv::relu(&pre2);
        let pool2 = conv::mean_pool2(&act2);
        let logit = self.dense_logit(&pool2);
        ForwardTrace {
            pre1,
            pool1,
            pre2,
            pool2,
            logit,
        }
    }

    /// Scores a fingerprint map.
    pub fn forward(&self, map: &FingerprintMap) -> Result<Prediction, NetError> {
        let input = map_input::<T>(map);
        let p = self.forward_input(&input)?;
        Ok(Prediction {
            p_fake: p.as_f64(),
            source_id: map.source_id.clone(),
            start_frame: map.segment.start_frame,
            segment_len: map.segment.len,
            kind: map.kind,
        })
    }

    /// Flattened parameter vector in canonical order (block 1 kernels and
    /// bias, block 2 kernels and bias, dense weights, dense bias).
    pub fn params_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.param_count());
        for k in [&self.conv1, &self.conv2] {
            v.extend(k.k33.iter().copied());
            v.extend(k.k13.iter().copied());
            v.extend(k.k31.iter().copied());
            v.extend(k.bias.iter().copied());
        }
        v.extend(self.dense_w.iter().copied());
        v.push(self.dense_b);
        v
    }

    /// Overwrites parameters from a canonical-order vector.
    pub fn set_params(&mut self, params: &[T]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter().copied();
        for k in [&mut self.conv1, &mut self.conv2] {
            for v in k.k33.iter_mut() {
                *v = it.next().unwrap();
            }
            for v in k.k13.iter_mut() {
                *v = it.next().unwrap();
            }
            for v in k.k31.iter_mut() {
                *v = it.next().unwrap();
            }
            for v in k.bias.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        for v in self.dense_w.iter_mut() {
            *v = it.next().unwrap();
        }
        self.dense_b = it.next().unwrap();
    }
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Activations of one forward pass, retained for backpropagation and
/// available for inspection.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// Block-one pre-activation feature maps.
    pub pre1: Array3<T>,
    /// Block-one features after ReLU and pooling.
    pub pool1: Array3<T>,
    /// Block-two pre-activation feature maps.
    pub pre2: Array3<T>,
    /// Block-two features after ReLU and pooling.
    pub pool2: Array3<T>,
    /// Dense-layer output before the sigmoid.
    pub logit: T,
}

/// Converts a fingerprint map into the network input layout
/// `(rows, cols, 3)` with pixel values scaled to `[0, 1]`.
pub fn map_input<T: Real>(map: &FingerprintMap) -> Array3<T> {
    let rows = map.rows();
    let cols = map.n();
    Array3::from_shape_fn((input_rows(rows), cols, 3), |(y, x, c)| {
        T::c(map.pixels.get_pixel(x as u32, (y % rows) as u32).0[c] as f64 / 255.0)
    })
}

/// Fewest input rows the two halving pools can digest.
pub const MIN_INPUT_ROWS: usize = 4;

/// Input height used for maps of the given row count: maps shorter than
/// [`MIN_INPUT_ROWS`] are tiled cyclically to the smallest whole multiple
/// that reaches it, so low-order autoregression maps (one or two rows)
/// remain classifiable without changing their content.
pub fn input_rows(rows: usize) -> usize {
    assert!(rows >= 1);
    rows * MIN_INPUT_ROWS.div_ceil(rows)
}

/// Fuses per-segment branch scores: the mean of whichever of the two
/// predictions are present.
///
/// Both predictions, when given, must describe the same segment of the same
/// video; supplying neither is an error.
pub fn predict_segment(ppg: Option<&Prediction>, ar: Option<&Prediction>) -> Result<f64, NetError> {
    match (ppg, ar) {
        (None, None) => Err(NetError::EmptyInput),
        (Some(p), None) => Ok(p.p_fake),
        (None, Some(a)) => Ok(a.p_fake),
        (Some(p), Some(a)) => {
            if p.source_id != a.source_id
                || p.start_frame != a.start_frame
                || p.segment_len != a.segment_len
            {
                return Err(NetError::SegmentMismatch {
                    a: format!("{}@{}+{}", p.source_id, p.start_frame, p.segment_len),
                    b: format!("{}@{}+{}", a.source_id, a.start_frame, a.segment_len),
                });
            }
            Ok((p.p_fake + a.p_fake) / 2.0)
        }
    }
}

/// A video-level decision aggregated over its segment scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VideoVerdict {
    /// Mean of the segment scores.
    pub score: f64,
    /// Forged verdict; a score of exactly 0.5 counts as forged.
    pub fake: bool,
}

/// Averages segment scores into a video verdict. Ties at exactly 0.5 are
/// labeled forged.
pub fn aggregate_video(scores: &[f64]) -> Result<VideoVerdict, NetError> {
    if scores.is_empty() {
        return Err(NetError::EmptyInput);
    }
    let score = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(VideoVerdict {
        score,
        fake: score >= 0.5,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    version: u32,
    model: AcbModel<T>,
}

impl<T: Real + Serialize + DeserializeOwned> AcbModel<T> {
    /// Writes the model as versioned JSON.
    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string(&file).expect("model serializes");
        fs::write(path, text).map_err(|e| NetError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Reads a model written by [`Self::save`], checking the format version.
    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = fs::read_to_string(path).map_err(|e| NetError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: ModelFile<T> = serde_json::from_str(&text).map_err(|e| NetError::BadModel {
            path: path.display().to_string(),
            source: e,
        })?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(NetError::VersionMismatch {
                path: path.display().to_string(),
                got: file.version,
                want: MODEL_FORMAT_VERSION,
            });
        }
        Ok(file.model)
    }
}
