//! Chrominance-based pulse extraction from sub-region mean traces.
//!
//! Each grid cell yields per-frame R/G/B mean traces. After band-pass
//! filtering to the plausible pulse band, two chrominance projections are
//! combined into a single pulse estimate whose first difference is the
//! temporal signature used by the fingerprint maps, and whose spectrum yields
//! a heart-rate estimate.

pub mod filter;
pub mod music;

use image::RgbImage;
use thiserror::Error;

pub use filter::{bandpass, BandpassFilter};
pub use music::{estimate_hr_music, HrEstimate, MusicConfig};

use crate::scalar::Real;

/// Standardized skin-tone vector (R, G, B). The chrominance projections below
/// already fold these constants in; the vector is kept as the single source
/// of truth they were derived from.
pub const SKIN_TONE: [f64; 3] = [0.7682, 0.5121, 0.3841];

/// Errors raised by trace filtering and spectral estimation.
#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("signal too short: {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("band [{lo}, {hi}] Hz invalid for {fs} fps (need 0 < lo < hi < fps/2)")]
    BandOutOfRange { lo: f64, hi: f64, fs: f64 },
    #[error("signal variance below degeneracy floor; no pulse content to analyze")]
    DegenerateSignal,
    #[error("pseudo-spectrum has no dominant peak (max/median below 2)")]
    NoPeak,
}

/// Per-frame R/G/B mean traces for one measurement site.
#[derive(Debug, Clone)]
pub struct ChannelTraces<T> {
    pub r: Vec<T>,
    pub g: Vec<T>,
    pub b: Vec<T>,
    pub fps: f64,
}

impl<T: Real> ChannelTraces<T> {
    /// Number of frames covered by the traces.
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Copies the window `[start, start + len)` out of the traces.
    pub fn window(&self, start: usize, len: usize) -> ChannelTraces<T> {
        ChannelTraces {
            r: self.r[start..start + len].to_vec(),
            g: self.g[start..start + len].to_vec(),
            b: self.b[start..start + len].to_vec(),
            fps: self.fps,
        }
    }
}

/// Averages each color channel over every pixel of the same cell across
/// frames, producing one R/G/B trace triple.
pub fn mean_channel<T: Real>(cell_frames: &[&RgbImage], fps: f64) -> ChannelTraces<T> {
    let mut r = Vec::with_capacity(cell_frames.len());
    let mut g = Vec::with_capacity(cell_frames.len());
    let mut b = Vec::with_capacity(cell_frames.len());
    for img in cell_frames {
        let m = mean_rgb(img);
        r.push(T::c(m[0]));
        g.push(T::c(m[1]));
        b.push(T::c(m[2]));
    }
    ChannelTraces { r, g, b, fps }
}

/// Mean R/G/B of a single image, accumulated in f64.
pub(crate) fn mean_rgb(img: &RgbImage) -> [f64; 3] {
    let mut acc = [0.0f64; 3];
    for p in img.pixels() {
        for (a, &v) in acc.iter_mut().zip(&p.0) {
            *a += v as f64;
        }
    }
    let n = (img.width() * img.height()) as f64;
    [acc[0] / n, acc[1] / n, acc[2] / n]
}

/// Chrominance projections of band-passed traces:
/// `Xs = 3*cRf - 2*cGf` and `Ys = 1.5*cRf + cGf - 1.5*cBf`.
pub fn chrom_signals<T: Real>(r_f: &[T], g_f: &[T], b_f: &[T]) -> (Vec<T>, Vec<T>) {
    assert!(
        r_f.len() == g_f.len() && g_f.len() == b_f.len(),
        "channel traces must share a length"
    );
    let three = T::c(3.0);
    let two = T::c(2.0);
    let threehalf = T::c(1.5);
    let xs = r_f
        .iter()
        .zip(g_f)
        .map(|(&r, &g)| three * r - two * g)
        .collect();
    let ys = r_f
        .iter()
        .zip(g_f.iter().zip(b_f))
        .map(|(&r, (&g, &b))| threehalf * r + g - threehalf * b)
        .collect();
    (xs, ys)
}

/// Pulse estimate `S = Xs - Ys`, i.e. `1.5*cRf - 3*cGf + 1.5*cBf`.
pub fn s_hat<T: Real>(xs: &[T], ys: &[T]) -> Vec<T> {
    assert_eq!(xs.len(), ys.len(), "projections must share a length");
    xs.iter().zip(ys).map(|(&x, &y)| x - y).collect()
}

/// First difference of the pulse estimate: `C(t) = S(t+1) - S(t)`.
///
/// The output is one sample shorter than the input; fails with `TooShort`
/// when there are not at least two samples to difference.
pub fn ppg_signal<T: Real>(s: &[T], fps: f64) -> Result<PpgSignal<T>, SignalError> {
    if s.len() < 2 {
        return Err(SignalError::TooShort {
            got: s.len(),
            need: 2,
        });
    }
    let values = s.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(PpgSignal { values, fps })
}

/// The differenced chrominance-pulse signal for one measurement site.
#[derive(Debug, Clone)]
pub struct PpgSignal<T> {
    pub values: Vec<T>,
    pub fps: f64,
}

impl<T: Real> PpgSignal<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Min-max normalizes a slice onto `[0, 255]`, rounding half away from zero.
/// A constant input maps to all zeros.
pub fn normalize_u8<T: Real>(x: &[T]) -> Vec<u8> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut lo = x[0];
    let mut hi = x[0];
    for &v in x {
        debug_assert!(v.is_finite(), "normalize_u8 expects finite values");
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let range = hi - lo;
    if range <= T::zero() {
        return vec![0u8; x.len()];
    }
    let top = T::c(255.0);
    x.iter()
        .map(|&v| {
            let scaled = (v - lo) / range * top;
            scaled.round().to_u8().expect("value scaled into [0, 255]")
        })
        .collect()
}
