//! Spatial pixel-autoregression fingerprinting.
//!
//! Each color plane of a rectified ROI is unrolled into a one-dimensional
//! sequence by a serpentine traversal (boustrophedon rows followed by
//! boustrophedon columns), and an autoregressive model is fitted to the
//! sequence by solving the Yule-Walker equations with the Levinson-Durbin
//! recursion. Resampling artifacts smooth neighboring pixels and push the
//! low-order AR coefficients toward one, which is the signal the spatial
//! fingerprint maps capture.

use image::RgbImage;
use thiserror::Error;

use crate::scalar::Real;

/// Autocorrelation floor below which a sequence counts as constant.
pub const ZERO_VARIANCE_FLOOR: f64 = 1e-12;

/// Errors raised by the autoregressive fit.
#[derive(Debug, Error, PartialEq)]
pub enum ArError {
    #[error("sequence has (near-)zero variance; AR fit undefined")]
    ZeroVariance,
    #[error("Levinson-Durbin recursion broke down at stage {stage} (prediction error {error})")]
    NumericalBreakdown { stage: usize, error: f64 },
}

/// A color plane unrolled into one dimension.
#[derive(Debug, Clone)]
pub struct PixelSequence<T> {
    pub values: Vec<T>,
}

/// Unrolls a single `height` x `width` plane (row-major `u8` samples) into a
/// serpentine sequence of length `2 * height * width`.
///
/// Rows are traversed first — odd rows (1-based) left to right, even rows
/// right to left — followed by the columns — odd columns top to bottom, even
/// columns bottom to top. Every pixel therefore appears exactly twice, and
/// consecutive samples are spatial neighbors across row and column seams
/// alike.
pub fn serpentine_scan<T: Real>(plane: &[u8], height: usize, width: usize) -> PixelSequence<T> {
    assert!(height >= 2 && width >= 2, "plane must be at least 2x2");
    assert_eq!(plane.len(), height * width, "plane size mismatch");
    let mut values = Vec::with_capacity(2 * height * width);
    for y in 0..height {
        if y % 2 == 0 {
            for x in 0..width {
                values.push(T::c(plane[y * width + x] as f64));
            }
        } else {
            for x in (0..width).rev() {
                values.push(T::c(plane[y * width + x] as f64));
            }
        }
    }
    for x in 0..width {
        if x % 2 == 0 {
            for y in 0..height {
                values.push(T::c(plane[y * width + x] as f64));
            }
        } else {
            for y in (0..height).rev() {
                values.push(T::c(plane[y * width + x] as f64));
            }
        }
    }
    PixelSequence { values }
}

/// Extracts one color plane of an image as row-major bytes.
pub fn channel_plane(img: &RgbImage, channel: usize) -> Vec<u8> {
    assert!(channel < 3);
    img.pixels().map(|p| p.0[channel]).collect()
}

/// Biased sample autocorrelation `r[lag] = sum(x[t] x[t+lag]) / N` for lags
/// `0..=max_lag` of a zero-mean sequence.
pub fn biased_autocorrelation<T: Real>(x: &[T], max_lag: usize) -> Vec<T> {
    assert!(max_lag < x.len(), "need more samples than lags");
    let n = T::c(x.len() as f64);
    (0..=max_lag)
        .map(|lag| {
            let mut acc = T::zero();
            for t in 0..x.len() - lag {
                acc += x[t] * x[t + lag];
            }
            acc / n
        })
        .collect()
}

/// Solves the Yule-Walker equations for autocorrelations `r[0..=p]` via the
/// Levinson-Durbin recursion, returning the `p` AR coefficients and the
/// final prediction-error variance.
///
/// Coefficients follow the regression convention
/// `x[t] = sum(phi[i] * x[t-1-i]) + e[t]`. The recursion fails with
/// `NumericalBreakdown` if a prediction-error variance stops being positive
/// before the final stage, which only happens on numerically hostile input.
pub fn levinson_durbin<T: Real>(r: &[T]) -> Result<(Vec<T>, T), ArError> {
    assert!(r.len() >= 2, "need r[0] and at least one further lag");
    let p = r.len() - 1;
    if r[0].as_f64() < ZERO_VARIANCE_FLOOR {
        return Err(ArError::ZeroVariance);
    }
    let mut phi = vec![T::zero(); p];
    let mut err = r[0];
    for m in 1..=p {
        let mut num = r[m];
        for i in 1..m {
            num -= phi[i - 1] * r[m - i];
        }
        let k = num / err;
        if !k.is_finite() {
            return Err(ArError::NumericalBreakdown {
                stage: m,
                error: err.as_f64(),
            });
        }
        let prev: Vec<T> = phi[..m - 1].to_vec();
        phi[m - 1] = k;
        for i in 1..m {
            phi[i - 1] = prev[i - 1] - k * prev[m - 1 - i];
        }
        err *= T::one() - k * k;
        if err <= T::zero() && m < p {
            return Err(ArError::NumericalBreakdown {
                stage: m,
                error: err.as_f64(),
            });
        }
    }
    Ok((phi, err.max(T::zero())))
}

/// An autoregressive fit of one pixel sequence.
#[derive(Debug, Clone)]
pub struct ArFit<T> {
    /// AR coefficients, lag 1 first.
    pub coefficients: Vec<T>,
    /// Final prediction-error variance.
    pub noise_variance: T,
    /// The sequence mean was subtracted before fitting (always true for this
    /// estimator; recorded so consumers need not guess).
    pub mean_removed: bool,
}

/// Fits an AR model of the given order to a sequence: removes the mean,
/// estimates the biased autocorrelation, and runs Levinson-Durbin.
pub fn fit_ar<T: Real>(seq: &[T], order: usize) -> Result<ArFit<T>, ArError> {
    assert!(order >= 1, "order must be positive");
    assert!(
        seq.len() > 4 * order,
        "sequence length {} too short for order {order}",
        seq.len()
    );
    let n = T::c(seq.len() as f64);
    let mean = seq.iter().copied().sum::<T>() / n;
    let centered: Vec<T> = seq.iter().map(|&v| v - mean).collect();
    let r = biased_autocorrelation(&centered, order);
    let (coefficients, noise_variance) = levinson_durbin(&r)?;
    Ok(ArFit {
        coefficients,
        noise_variance,
        mean_removed: true,
    })
}

/// Per-channel AR coefficients of one rectified ROI frame.
#[derive(Debug, Clone)]
pub struct FrameCoeffs<T> {
    /// Coefficient vectors for R, G, B, each of length `order`.
    pub channels: [Vec<T>; 3],
    /// True where the channel plane was degenerate (constant, or the
    /// recursion broke down) and the coefficients were zero-filled.
    pub degenerate: [bool; 3],
}

/// Fits an AR model to each color plane of a rectified ROI frame.
///
/// Degenerate planes (constant color, or numerically broken fits) yield an
/// all-zero coefficient vector with the corresponding flag set rather than
/// failing the frame.
pub fn ar_frame_coeffs<T: Real>(roi: &RgbImage, order: usize) -> FrameCoeffs<T> {
    let h = roi.height() as usize;
    let w = roi.width() as usize;
    let mut channels: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut degenerate = [false; 3];
    for c in 0..3 {
        let plane = channel_plane(roi, c);
        let seq = serpentine_scan::<T>(&plane, h, w);
        match fit_ar(&seq.values, order) {
            Ok(fit) => channels[c] = fit.coefficients,
            Err(_) => {
                channels[c] = vec![T::zero(); order];
                degenerate[c] = true;
            }
        }
    }
    FrameCoeffs {
        channels,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn serpentine_of_2x2_matches_hand_trace() {
        // Plane [[1, 2], [3, 4]]: rows give 1,2 then 4,3; columns give
        // 1,3 then 4,2.
        let seq: PixelSequence<f64> = serpentine_scan(&[1, 2, 3, 4], 2, 2);
        assert_eq!(seq.values, vec![1.0, 2.0, 4.0, 3.0, 1.0, 3.0, 4.0, 2.0]);
    }

    #[test]
    fn serpentine_of_3x3_matches_hand_trace() {
        let plane = [1, 2, 3, 4, 5, 6, 7, 8, 9];
        let seq: PixelSequence<f64> = serpentine_scan(&plane, 3, 3);
        let want = [
            1.0, 2.0, 3.0, // row 1 ->
            6.0, 5.0, 4.0, // row 2 <-
            7.0, 8.0, 9.0, // row 3 ->
            1.0, 4.0, 7.0, // col 1 v
            8.0, 5.0, 2.0, // col 2 ^
            3.0, 6.0, 9.0, // col 3 v
        ];
        assert_eq!(seq.values, want);
    }

    #[test]
    fn serpentine_visits_every_pixel_twice() {
        let plane: Vec<u8> = (0..(6 * 4)).map(|i| i as u8).collect();
        let seq: PixelSequence<f64> = serpentine_scan(&plane, 4, 6);
        assert_eq!(seq.values.len(), 2 * 4 * 6);
        let mut counts = std::collections::HashMap::new();
        for v in &seq.values {
            *counts.entry(*v as usize).or_insert(0usize) += 1;
        }
        assert!(plane.iter().all(|p| counts[&(*p as usize)] == 2));
    }

    #[test]
    fn autocorrelation_matches_direct_sums() {
        let x = [1.0f64, -2.0, 0.5, 3.0];
        let r = biased_autocorrelation(&x, 2);
        let r0 = (1.0 + 4.0 + 0.25 + 9.0) / 4.0;
        let r1 = (1.0 * -2.0 + -2.0 * 0.5 + 0.5 * 3.0) / 4.0;
        let r2 = (1.0 * 0.5 + -2.0 * 3.0) / 4.0;
        assert!((r[0] - r0).abs() < 1e-12);
        assert!((r[1] - r1).abs() < 1e-12);
        assert!((r[2] - r2).abs() < 1e-12);
    }

    #[test]
    fn ar1_autocorrelation_closed_form() {
        // For AR(1) with r[k] = phi^k, Levinson-Durbin must return exactly
        // phi and zero out the higher orders.
        let phi = 0.8;
        let r: Vec<f64> = (0..5).map(|k| phi_pow(phi, k)).collect();
        let (a, err) = levinson_durbin(&r).unwrap();
        assert!((a[0] - phi).abs() < 1e-12);
        for &c in &a[1..] {
            assert!(c.abs() < 1e-12, "higher lags should vanish, got {c}");
        }
        assert!((err - (1.0 - phi * phi)).abs() < 1e-12);
    }

    fn phi_pow(phi: f64, k: usize) -> f64 {
        phi.powi(k as i32)
    }

    #[test]
    fn recovers_ar1_process_parameters() {
        for &phi in &[0.5f64, 0.9] {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let noise = Normal::new(0.0, 1.0).unwrap();
            let n = 10_000;
            let mut x = vec![0.0f64; n];
            for t in 1..n {
                x[t] = phi * x[t - 1] + noise.sample(&mut rng);
            }
            let fit = fit_ar(&x, 1).unwrap();
            assert!(
                (fit.coefficients[0] - phi).abs() <= 0.02,
                "phi {phi}: estimated {}",
                fit.coefficients[0]
            );
        }
    }

    #[test]
    fn white_noise_coefficients_are_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..20_000).map(|_| noise.sample(&mut rng)).collect();
        let fit = fit_ar(&x, 5).unwrap();
        for &c in &fit.coefficients {
            assert!(c.abs() < 0.05, "white-noise coefficient {c} too large");
        }
        // Noise variance stays near the driving variance.
        assert!((fit.noise_variance - 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_sequence_is_zero_variance() {
        let x = vec![17.0f64; 400];
        assert_eq!(fit_ar(&x, 4).unwrap_err(), ArError::ZeroVariance);
    }

    #[test]
    fn constant_plane_flags_degenerate_and_zero_fills() {
        let roi = RgbImage::from_pixel(72, 72, Rgb([120, 120, 120]));
        let fc: FrameCoeffs<f64> = ar_frame_coeffs(&roi, 36);
        for c in 0..3 {
            assert!(fc.degenerate[c]);
            assert_eq!(fc.channels[c].len(), 36);
            assert!(fc.channels[c].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn smooth_gradient_has_strong_first_coefficient() {
        // A smooth ramp is highly predictable from its neighbor.
        let roi = RgbImage::from_fn(72, 72, |x, y| {
            let v = ((x + y) * 255 / 142) as u8;
            Rgb([v, v, v])
        });
        let fc: FrameCoeffs<f64> = ar_frame_coeffs(&roi, 8);
        for c in 0..3 {
            assert!(!fc.degenerate[c]);
            assert!(
                fc.channels[c][0] > 0.9,
                "gradient lag-1 coefficient {} too small",
                fc.channels[c][0]
            );
        }
    }

    #[test]
    fn levinson_matches_direct_toeplitz_solve() {
        // Independent oracle: solve the Yule-Walker system R phi = r with a
        // dense LU factorization and compare.
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        let noise = Normal::new(0.0, 1.0).unwrap();
        for trial in 0..10 {
            // Stationary AR(2)-ish data makes the Toeplitz matrix well
            // conditioned without being trivial.
            let n = 4096;
            let mut x = vec![0.0f64; n];
            for t in 2..n {
                x[t] = 0.6 * x[t - 1] - 0.2 * x[t - 2] + noise.sample(&mut rng);
            }
            let p = 8;
            let r = biased_autocorrelation(&x, p);
            let (fast, _) = levinson_durbin(&r).unwrap();

            let mat = nalgebra::DMatrix::from_fn(p, p, |i, j| r[i.abs_diff(j)]);
            let rhs = nalgebra::DVector::from_fn(p, |i, _| r[i + 1]);
            let direct = mat.lu().solve(&rhs).expect("well-conditioned system");
            for i in 0..p {
                assert!(
                    (fast[i] - direct[i]).abs() <= 1e-8,
                    "trial {trial} lag {i}: {} vs {}",
                    fast[i],
                    direct[i]
                );
            }
        }
    }

    #[test]
    fn upsampled_noise_raises_lag_one_coefficient() {
        // Smoothing by down/upsampling correlates neighbors; the lag-1 AR
        // coefficient must move up by a wide margin. The full Monte-Carlo
        // version lives in the acceptance suite; this is a quick screen.
        let mut deltas = Vec::new();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let raw = RgbImage::from_fn(72, 72, |_, _| {
                let v: u8 = rng.random();
                Rgb([v, v, v])
            });
            let smooth = crate::synth::smooth_image(&raw, 2);
            let phi_raw: FrameCoeffs<f64> = ar_frame_coeffs(&raw, 1);
            let phi_smooth: FrameCoeffs<f64> = ar_frame_coeffs(&smooth, 1);
            deltas.push(phi_smooth.channels[0][0] - phi_raw.channels[0][0]);
        }
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        assert!(mean >= 0.2, "mean lag-1 shift {mean} below 0.2");
    }

    #[test]
    fn f32_fit_tracks_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0f64; 5000];
        for t in 1..x.len() {
            x[t] = 0.7 * x[t - 1] + noise.sample(&mut rng);
        }
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let f64fit = fit_ar(&x, 4).unwrap();
        let f32fit = fit_ar(&x32, 4).unwrap();
        for i in 0..4 {
            assert!((f64fit.coefficients[i] - f32fit.coefficients[i] as f64).abs() < 1e-3);
        }
    }
}
