//! Zero-phase Butterworth band-pass filtering.
//!
//! The filter is designed in the analog domain (Butterworth low-pass
//! prototype, low-pass→band-pass transform), mapped to the digital domain
//! with the bilinear transform, and factored into second-order sections.
//! Zero-phase response comes from forward-backward application over an
//! odd-symmetric edge extension, with each pass seeded by the cascade's
//! step-response steady state so edge transients stay small.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::SignalError;
use crate::scalar::Real;

/// Default prototype order; the band-pass realization doubles it.
pub const DEFAULT_ORDER: usize = 4;

/// A designed band-pass filter held as cascaded biquads.
#[derive(Debug, Clone)]
pub struct BandpassFilter<T> {
    sections: Vec<Biquad<T>>,
    padlen: usize,
}

#[derive(Debug, Clone, Copy)]
struct Biquad<T> {
    b0: T,
    b1: T,
    b2: T,
    a1: T,
    a2: T,
}

impl<T: Real> Biquad<T> {
    /// Initial transposed-direct-form-II state producing the step-response
    /// steady state for a unit input.
    fn unit_step_state(&self) -> (T, T) {
        let one = T::one();
        let det = one + self.a1 + self.a2;
        let r1 = self.b1 - self.a1 * self.b0;
        let r2 = self.b2 - self.a2 * self.b0;
        let s1 = (r1 + r2) / det;
        let s2 = (-self.a2 * r1 + (one + self.a1) * r2) / det;
        (s1, s2)
    }

    /// DC gain `H(1)`; exactly zero for the band-pass sections built here.
    fn dc_gain(&self) -> T {
        (self.b0 + self.b1 + self.b2) / (T::one() + self.a1 + self.a2)
    }

    /// Runs the biquad in place from `scale` times the unit-step steady
    /// state, so a cascade fed a constant passes it through transient-free.
    fn run_scaled(&self, x: &mut [T], scale: T) {
        let (zi1, zi2) = self.unit_step_state();
        let mut s1 = zi1 * scale;
        let mut s2 = zi2 * scale;
        for v in x.iter_mut() {
            let xn = *v;
            let yn = self.b0 * xn + s1;
            s1 = self.b1 * xn - self.a1 * yn + s2;
            s2 = self.b2 * xn - self.a2 * yn;
            *v = yn;
        }
    }
}

impl<T: Real> BandpassFilter<T> {
    /// Designs an order-`order` Butterworth band-pass between `lo_hz` and
    /// `hi_hz` for a sample rate of `fs` Hz.
    pub fn design(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<Self, SignalError> {
        assert!(order >= 1, "filter order must be at least 1");
        if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0 && fs.is_finite()) {
            return Err(SignalError::BandOutOfRange {
                lo: lo_hz,
                hi: hi_hz,
                fs,
            });
        }

        // Normalized band edges pre-warped for the bilinear transform. The
        // design runs at a nominal fs of 2 so the warp is 4*tan(pi*w/2) with
        // w in (0, 1).
        let warp = |w: f64| 4.0 * (PI * w / 2.0).tan();
        let w1 = warp(lo_hz / (fs / 2.0));
        let w2 = warp(hi_hz / (fs / 2.0));
        let wo = (w1 * w2).sqrt();
        let bw = w2 - w1;

        // Butterworth low-pass prototype: unit-circle poles in the left
        // half-plane, no finite zeros, unit gain.
        let proto: Vec<Complex64> = (0..order)
            .map(|k| {
                let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();

        // Low-pass -> band-pass: each prototype pole splits in two; `order`
        // zeros appear at s = 0; the gain picks up bw^order.
        let mut apoles = Vec::with_capacity(2 * order);
        for p in &proto {
            let pb = p * (bw / 2.0);
            let disc = (pb * pb - Complex64::new(wo * wo, 0.0)).sqrt();
            apoles.push(pb + disc);
            apoles.push(pb - disc);
        }
        let again = bw.powi(order as i32);

        // Bilinear transform at nominal fs = 2 (fs2 = 4). Analog zeros at 0
        // map to z = 1; the order surplus poles contribute zeros at z = -1.
        let fs2 = 4.0;
        let dpoles: Vec<Complex64> = apoles
            .iter()
            .map(|p| (Complex64::new(fs2, 0.0) + p) / (Complex64::new(fs2, 0.0) - p))
            .collect();
        let num: Complex64 = Complex64::new(fs2.powi(order as i32), 0.0);
        let den: Complex64 = apoles
            .iter()
            .map(|p| Complex64::new(fs2, 0.0) - p)
            .product();
        let dgain = again * (num / den).re;
        debug_assert!(dgain > 0.0, "digital gain must come out positive");

        // Pair poles into conjugate biquads. Complex poles pair with their
        // conjugates; real poles (possible only through rounding) pair among
        // themselves.
        let im_eps = 1e-10;
        let mut upper: Vec<Complex64> = dpoles.iter().copied().filter(|p| p.im > im_eps).collect();
        upper.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        let mut reals: Vec<f64> = dpoles
            .iter()
            .filter(|p| p.im.abs() <= im_eps)
            .map(|p| p.re)
            .collect();
        reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            reals.len().is_multiple_of(2) && upper.len() * 2 + reals.len() == 2 * order,
            "pole set must split into conjugate/real pairs"
        );

        let nsections = order;
        let gsec = dgain.powf(1.0 / nsections as f64);
        let mut sections = Vec::with_capacity(nsections);
        for p in &upper {
            debug_assert!(p.norm() < 1.0, "digital pole must be stable");
            sections.push(Biquad {
                b0: T::c(gsec),
                b1: T::zero(),
                b2: T::c(-gsec),
                a1: T::c(-2.0 * p.re),
                a2: T::c(p.norm_sqr()),
            });
        }
        for pair in reals.chunks(2) {
            sections.push(Biquad {
                b0: T::c(gsec),
                b1: T::zero(),
                b2: T::c(-gsec),
                a1: T::c(-(pair[0] + pair[1])),
                a2: T::c(pair[0] * pair[1]),
            });
        }

        // Forward-backward padding: three times the equivalent tap count,
        // matching common practice for transient suppression.
        let padlen = 3 * (2 * nsections + 1);
        Ok(Self { sections, padlen })
    }

    /// Number of second-order sections in the cascade.
    pub fn section_count(&self) -> usize {
        self.sections.len()
    }

    /// Minimum input length accepted by [`Self::filtfilt`].
    pub fn min_input_len(&self) -> usize {
        self.padlen + 1
    }

    fn run_cascade(&self, x: &mut [T]) {
        // Section k starts from the steady state a constant x[0] would have
        // driven it to, which is x[0] times the DC gain accumulated over the
        // sections before it. Band-pass sections block DC, so every section
        // past the first starts at rest.
        let mut scale = x[0];
        for s in &self.sections {
            s.run_scaled(x, scale);
            scale *= s.dc_gain();
        }
    }

    /// Applies the filter forward and backward over an odd-symmetric edge
    /// extension, yielding zero phase distortion.
    pub fn filtfilt(&self, x: &[T]) -> Result<Vec<T>, SignalError> {
        let n = x.len();
        if n <= self.padlen {
            return Err(SignalError::TooShort {
                got: n,
                need: self.padlen + 1,
            });
        }
        let two = T::c(2.0);
        let mut ext = Vec::with_capacity(n + 2 * self.padlen);
        for i in (1..=self.padlen).rev() {
            ext.push(two * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=self.padlen {
            ext.push(two * x[n - 1] - x[n - 1 - i]);
        }

        self.run_cascade(&mut ext);
        ext.reverse();
        self.run_cascade(&mut ext);
        ext.reverse();

        Ok(ext[self.padlen..self.padlen + n].to_vec())
    }
}

/// Band-passes a trace with the default 4th-order design.
pub fn bandpass<T: Real>(x: &[T], fs: f64, lo_hz: f64, hi_hz: f64) -> Result<Vec<T>, SignalError> {
    BandpassFilter::design(DEFAULT_ORDER, lo_hz, hi_hz, fs)?.filtfilt(x)
}
