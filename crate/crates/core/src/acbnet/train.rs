//! Gradient computation and SGD training for the asymmetric-convolution
//! classifier.
//!
//! Losses use the numerically safe logit form of binary cross-entropy, and
//! per-sample gradients are evaluated in parallel but reduced in sample
//! order, so a fixed seed reproduces training bit-for-bit regardless of
//! thread count.

use ndarray::{Array1, Array3, Array4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::conv;
use super::{sigmoid, AcbKernel, AcbModel, Mode, NetError};
use crate::scalar::Real;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seed for the per-epoch shuffle.
    pub seed: u64,
    /// L2 penalty applied to weights (never biases).
    pub l2: f64,
    /// Also train on left-right mirrored copies of every input.
    pub augment_flip: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 16,
            epochs: 40,
            seed: 7,
            l2: 1e-4,
            augment_flip: false,
        }
    }
}

/// Gradient of one block's weights.
#[derive(Debug, Clone)]
pub struct KernelGrad<T> {
    pub k33: Array4<T>,
    pub k13: Array4<T>,
    pub k31: Array4<T>,
    pub bias: Array1<T>,
}

/// Loss gradient with respect to every model parameter.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub conv1: KernelGrad<T>,
    pub conv2: KernelGrad<T>,
    pub dense_w: Array1<T>,
    pub dense_b: T,
}

impl<T: Real> Gradients<T> {
    fn zeros_like(model: &AcbModel<T>) -> Self {
        let zero_kernel = |k: &AcbKernel<T>| KernelGrad {
            k33: Array4::zeros(k.k33.dim()),
            k13: Array4::zeros(k.k13.dim()),
            k31: Array4::zeros(k.k31.dim()),
            bias: Array1::zeros(k.bias.len()),
        };
        Self {
            conv1: zero_kernel(&model.conv1),
            conv2: zero_kernel(&model.conv2),
            dense_w: Array1::zeros(model.dense_w.len()),
            dense_b: T::zero(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in [
            (&mut self.conv1, &other.conv1),
            (&mut self.conv2, &other.conv2),
        ] {
            a.k33.zip_mut_with(&b.k33, |x, y| *x += *y);
            a.k13.zip_mut_with(&b.k13, |x, y| *x += *y);
            a.k31.zip_mut_with(&b.k31, |x, y| *x += *y);
            a.bias.zip_mut_with(&b.bias, |x, y| *x += *y);
        }
        self.dense_w.zip_mut_with(&other.dense_w, |x, y| *x += *y);
        self.dense_b += other.dense_b;
    }

    fn scale(&mut self, s: T) {
        for k in [&mut self.conv1, &mut self.conv2] {
            k.k33.mapv_inplace(|v| v * s);
            k.k13.mapv_inplace(|v| v * s);
            k.k31.mapv_inplace(|v| v * s);
            k.bias.mapv_inplace(|v| v * s);
        }
        self.dense_w.mapv_inplace(|v| v * s);
        self.dense_b *= s;
    }

    /// Canonical-order flattening, matching [`AcbModel::params_vec`].
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::new();
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
}

/// `ln(1 + e^z)` without overflow for large `|z|`.
fn softplus<T: Real>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Binary cross-entropy expressed in terms of the logit.
fn bce_from_logit<T: Real>(logit: T, label: T) -> T {
    softplus(logit) - label * logit
}

/// Per-channel sum of a gradient map — the bias gradient of a block.
fn bias_grad<T: Real>(grad: &Array3<T>) -> Array1<T> {
    let (_, _, c) = grad.dim();
    let mut b = Array1::<T>::zeros(c);
    let bs = b.as_slice_mut().expect("standard layout");
    for px in grad.as_slice().expect("standard layout").chunks_exact(c) {
        for (acc, g) in bs.iter_mut().zip(px) {
            *acc += *g;
        }
    }
    b
}

struct BlockBackward<T> {
    grad: KernelGrad<T>,
    d_input: Array3<T>,
}

/// Backpropagates through one three-branch block.
fn acb_backward<T: Real>(
    input: &Array3<T>,
    kernel: &AcbKernel<T>,
    d_pre: &Array3<T>,
    stride: usize,
) -> BlockBackward<T> {
    let k33 = conv::conv2d_grad_kernel(input, d_pre, (1, 1), stride, (3, 3));
    let k13 = conv::conv2d_grad_kernel(input, d_pre, (0, 1), stride, (1, 3));
    let k31 = conv::conv2d_grad_kernel(input, d_pre, (1, 0), stride, (3, 1));
    let mut d_input = conv::conv2d_grad_input(d_pre, &kernel.k33, (1, 1), stride, input.dim());
    let d13 = conv::conv2d_grad_input(d_pre, &kernel.k13, (0, 1), stride, input.dim());
    let d31 = conv::conv2d_grad_input(d_pre, &kernel.k31, (1, 0), stride, input.dim());
    d_input.zip_mut_with(&d13, |a, b| *a += *b);
    d_input.zip_mut_with(&d31, |a, b| *a += *b);
    BlockBackward {
        grad: KernelGrad {
            k33,
            k13,
            k31,
            bias: bias_grad(d_pre),
        },
        d_input,
    }
}

/// Loss and full gradient for a single `(input, label)` pair.
fn sample_gradients<T: Real>(
    model: &AcbModel<T>,
    input: &Array3<T>,
    label: T,
) -> (Gradients<T>, T) {
    let trace = model.trace_in(input, Mode::Train);
    let loss = bce_from_logit(trace.logit, label);
    let d_logit = sigmoid(trace.logit) - label;

    // Dense layer.
    let pool2_flat = trace.pool2.as_slice().expect("standard layout");
    let mut dense_w_grad = Array1::<T>::zeros(pool2_flat.len());
    for (g, f) in dense_w_grad.iter_mut().zip(pool2_flat) {
        *g = d_logit * *f;
    }
    let mut d_pool2 = Array3::<T>::zeros(trace.pool2.dim());
    for (d, w) in d_pool2
        .as_slice_mut()
        .expect("standard layout")
        .iter_mut()
        .zip(model.dense_w.iter())
    {
        *d = d_logit * *w;
    }

    // Second block.
    let d_act2 = conv::mean_pool2_grad(&d_pool2, trace.pre2.dim());
    let d_pre2 = conv::relu_grad(&d_act2, &trace.pre2);
    let back2 = acb_backward(
        &trace.pool1,
        &model.conv2,
        &d_pre2,
        model.config.conv_strides[1],
    );

    // First block.
    let d_act1 = conv::mean_pool2_grad(&back2.d_input, trace.pre1.dim());
    let d_pre1 = conv::relu_grad(&d_act1, &trace.pre1);
    let back1 = acb_backward(input, &model.conv1, &d_pre1, model.config.conv_strides[0]);

    (
        Gradients {
            conv1: back1.grad,
            conv2: back2.grad,
            dense_w: dense_w_grad,
            dense_b: d_logit,
        },
        loss,
    )
}

/// Mean loss and mean gradients over a batch.
///
/// Gradients always flow through the three-branch form; fused models are
/// trained the same way since fusion never changes the function computed.
pub fn gradients<T: Real>(
    model: &AcbModel<T>,
    batch: &[(&Array3<T>, T)],
) -> Result<(Gradients<T>, T), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyInput);
    }
    for (input, _) in batch {
        if input.dim()
            != (
                model.config.input_rows,
                model.config.input_cols,
                model.config.input_channels,
            )
        {
            return Err(NetError::ShapeMismatch {
                got: input.dim(),
                want: (
                    model.config.input_rows,
                    model.config.input_cols,
                    model.config.input_channels,
                ),
            });
        }
    }
    let per_sample: Vec<(Gradients<T>, T)> = batch
        .par_iter()
        .map(|(input, label)| sample_gradients(model, input, *label))
        .collect();
    let mut total = Gradients::zeros_like(model);
    let mut loss_sum = T::zero();
    for (g, l) in &per_sample {
        total.add_assign(g);
        loss_sum += *l;
    }
    let inv = T::one() / T::c(batch.len() as f64);
    total.scale(inv);
    Ok((total, loss_sum * inv))
}

/// Loss trajectory of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean loss per epoch, in epoch order.
    pub epoch_losses: Vec<f64>,
}

fn sgd_step<T: Real>(model: &mut AcbModel<T>, grads: &Gradients<T>, lr: T, l2: T) {
    let update_kernel = |k: &mut AcbKernel<T>, g: &KernelGrad<T>| {
        k.k33.zip_mut_with(&g.k33, |w, d| *w -= lr * (*d + l2 * *w));
        k.k13.zip_mut_with(&g.k13, |w, d| *w -= lr * (*d + l2 * *w));
        k.k31.zip_mut_with(&g.k31, |w, d| *w -= lr * (*d + l2 * *w));
        k.bias.zip_mut_with(&g.bias, |w, d| *w -= lr * *d);
    };
    update_kernel(&mut model.conv1, &grads.conv1);
    update_kernel(&mut model.conv2, &grads.conv2);
    model
        .dense_w
        .zip_mut_with(&grads.dense_w, |w, d| *w -= lr * (*d + l2 * *w));
    model.dense_b -= lr * grads.dense_b;
}

/// Trains the model in place by mini-batch SGD and reports per-epoch losses.
///
/// Labels are `0` (genuine) and `1` (forged); the dataset must contain both
/// classes. A fused model is temporarily switched back to the branch form
/// and restored afterwards.
pub fn train<T: Real>(
    model: &mut AcbModel<T>,
    samples: &[(Array3<T>, T)],
    config: &TrainConfig,
) -> Result<TrainReport, NetError> {
    if samples.is_empty() {
        return Err(NetError::EmptyInput);
    }
    let half = T::c(0.5);
    let has_pos = samples.iter().any(|(_, y)| *y >= half);
    let has_neg = samples.iter().any(|(_, y)| *y < half);
    if !(has_pos && has_neg) {
        return Err(NetError::SingleClassDataset);
    }
    assert!(config.batch_size >= 1, "batch size must be positive");
    assert!(
        config.learning_rate > 0.0 && config.learning_rate.is_finite(),
        "learning rate must be positive and finite"
    );
    assert!(config.l2 >= 0.0 && config.l2.is_finite());

    let restore_mode = model.mode;
    model.mode = Mode::Train;
    let lr = T::c(config.learning_rate);
    let l2 = T::c(config.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let flipped: Vec<Array3<T>> = if config.augment_flip {
        samples
            .iter()
            .map(|(x, _)| conv::flip_horizontal(x))
            .collect()
    } else {
        Vec::new()
    };

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut batch: Vec<(&Array3<T>, T)> = Vec::with_capacity(chunk.len() * 2);
            for &i in chunk {
                batch.push((&samples[i].0, samples[i].1));
                if config.augment_flip {
                    batch.push((&flipped[i], samples[i].1));
                }
            }
            let (grads, loss) = gradients(model, &batch)?;
            if !loss.as_f64().is_finite() {
                model.mode = restore_mode;
                return Err(NetError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            sgd_step(model, &grads, lr, l2);
            loss_sum += loss.as_f64();
            batches += 1;
        }
        epoch_losses.push(loss_sum / batches as f64);
    }
    model.mode = restore_mode;
    Ok(TrainReport { epoch_losses })
}
