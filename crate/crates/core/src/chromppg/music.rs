//! Heart-rate estimation via the MUSIC pseudo-spectrum.
//!
//! The pulse signal's sample autocorrelation is arranged into a Toeplitz
//! covariance matrix; its eigenvectors split into a small signal subspace
//! (one real sinusoid occupies two dimensions) and a noise subspace. The
//! pseudo-spectrum `P(f) = 1 / ||E_n^H a(f)||^2` peaks where the steering
//! vector `a(f)` is orthogonal to the noise subspace, and the strongest peak
//! in the plausible pulse band is read out as beats per minute.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{PpgSignal, SignalError};
use crate::scalar::Real;

/// Variance floor below which the signal is considered degenerate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// A pseudo-spectrum peak must exceed the spectrum median by this factor to
/// count as a detection.
pub const PEAK_TO_MEDIAN_FLOOR: f64 = 2.0;

/// Parameters of the subspace estimator.
#[derive(Debug, Clone)]
pub struct MusicConfig {
    /// Covariance (and steering vector) dimension.
    pub order: usize,
    /// Dimensions assigned to the signal subspace; a single real sinusoid
    /// needs two.
    pub signal_dims: usize,
    /// Scan band lower edge, Hz.
    pub scan_lo_hz: f64,
    /// Scan band upper edge, Hz.
    pub scan_hi_hz: f64,
    /// Scan resolution, Hz.
    pub scan_step_hz: f64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            order: 24,
            signal_dims: 2,
            scan_lo_hz: 0.70,
            scan_hi_hz: 4.00,
            scan_step_hz: 0.005,
        }
    }
}

/// Result of a heart-rate scan.
#[derive(Debug, Clone)]
pub struct HrEstimate<T> {
    /// Estimated heart rate, beats per minute.
    pub bpm: T,
    /// Frequency of the winning peak, Hz.
    pub peak_hz: T,
    /// The scanned pseudo-spectrum as `(hz, power)` pairs.
    pub pseudo_spectrum: Vec<(T, T)>,
}

/// Estimates the dominant pulse frequency of a differenced chrominance
/// signal.
///
/// Fails with `DegenerateSignal` when the signal variance sits below
/// [`VARIANCE_FLOOR`], and with `NoPeak` when the pseudo-spectrum is too
/// flat to contain a defensible maximum.
pub fn estimate_hr_music<T: Real>(
    ppg: &PpgSignal<T>,
    cfg: &MusicConfig,
) -> Result<HrEstimate<T>, SignalError> {
    assert!(
        cfg.order > cfg.signal_dims,
        "noise subspace must be non-empty"
    );
    assert!(
        cfg.scan_lo_hz > 0.0 && cfg.scan_lo_hz < cfg.scan_hi_hz && cfg.scan_step_hz > 0.0,
        "scan band must be a positive, ordered interval"
    );
    let n = ppg.len();
    let need = (2 * cfg.order).max(64);
    if n < need {
        return Err(SignalError::TooShort { got: n, need });
    }

    // The eigenproblem runs in f64 regardless of the pipeline scalar; the
    // subspace split is the precision-critical step.
    let x: Vec<f64> = ppg.values.iter().map(|v| v.as_f64()).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var < VARIANCE_FLOOR {
        return Err(SignalError::DegenerateSignal);
    }

    // Biased sample autocorrelation up to lag order-1, Toeplitz-arranged.
    let m = cfg.order;
    let mut r = vec![0.0f64; m];
    for (lag, slot) in r.iter_mut().enumerate() {
        let mut acc = 0.0;
        for t in 0..n - lag {
            acc += x[t] * x[t + lag];
        }
        *slot = acc / n as f64;
    }
    let cov = DMatrix::from_fn(m, m, |i, j| r[i.abs_diff(j)]);

    // Symmetric eigendecomposition; columns beyond the top signal_dims
    // eigenvalues span the noise subspace.
    let eig = cov.symmetric_eigen();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let noise_cols: Vec<usize> = idx[cfg.signal_dims..].to_vec();

    // Scan the band on an inclusive integer-stepped grid.
    let steps = ((cfg.scan_hi_hz - cfg.scan_lo_hz) / cfg.scan_step_hz).round() as usize;
    let fps = ppg.fps;
    let mut spectrum = Vec::with_capacity(steps + 1);
    let mut best = (0usize, f64::MIN);
    for s in 0..=steps {
        let f = cfg.scan_lo_hz + s as f64 * cfg.scan_step_hz;
        // ||E_n^H a(f)||^2 with a_i = exp(-j 2 pi f i / fps); the
        // eigenvectors are real, so the projection splits into cos/sin sums.
        let mut denom = 0.0;
        for &col in &noise_cols {
            let mut re = 0.0;
            let mut im = 0.0;
            for i in 0..m {
                let ph = 2.0 * PI * f * i as f64 / fps;
                let e = eig.eigenvectors[(i, col)];
                re += e * ph.cos();
                im -= e * ph.sin();
            }
            denom += re * re + im * im;
        }
        let p = 1.0 / denom.max(1e-300);
        if p > best.1 {
            best = (s, p);
        }
        spectrum.push((f, p));
    }

    let mut powers: Vec<f64> = spectrum.iter().map(|(_, p)| *p).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = powers[powers.len() / 2];
    if best.1 / median < PEAK_TO_MEDIAN_FLOOR {
        return Err(SignalError::NoPeak);
    }

    let peak_hz = spectrum[best.0].0;
    Ok(HrEstimate {
        bpm: T::c(60.0 * peak_hz),
        peak_hz: T::c(peak_hz),
        pseudo_spectrum: spectrum
            .into_iter()
            .map(|(f, p)| (T::c(f), T::c(p)))
            .collect(),
    })
}
