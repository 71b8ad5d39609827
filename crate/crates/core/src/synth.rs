//! Synthetic face-video oracle.
//!
//! Generates videos with a known ground truth: a constant base color carrying
//! a sinusoidal "pulse" at a chosen heart rate (per-channel gains mimic the
//! way blood volume modulates skin color), plus white pixel noise. Forgery
//! modes degrade exactly the properties the fingerprints measure: phase
//! jitter breaks the pulse's temporal coherence in 16-frame blocks, and
//! down/up-sampling smooths the pixel noise field. Everything is driven by a
//! seeded generator, so a spec reproduces its video bit for bit.

use image::{Rgb, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ingest::{CheekLandmarks, FrameSequence, Quad};

/// Side length of generated frames. The full frame doubles as the cheek ROI,
/// with landmarks pinned to the corners.
pub const FRAME_SIZE: u32 = 72;

/// Per-channel pulse gains (R, G, B): green carries the strongest blood-volume
/// signal, blue the weakest-but-present one.
pub const CHANNEL_GAIN: [f64; 3] = [0.33, 0.77, 0.53];

/// Phase jitter is re-drawn once per this many frames.
pub const JITTER_BLOCK_FRAMES: usize = 16;

/// Errors raised by video synthesis.
#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthesis spec: {0}")]
    SpecInvalid(String),
}

/// Forgery mode applied on top of the clean pulse video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FakeKind {
    /// No forgery: a genuine pulse video.
    None,
    /// Gaussian phase offsets (std `sigma_rad`) drawn per 16-frame block.
    PhaseJitter { sigma_rad: f64 },
    /// Box-downsample by `factor`, bilinear-upsample back.
    Smooth { factor: u32 },
    /// Both degradations combined.
    Both { sigma_rad: f64, factor: u32 },
}

impl FakeKind {
    /// True for any of the forged variants.
    pub fn is_fake(self) -> bool {
        !matches!(self, FakeKind::None)
    }

    fn jitter_sigma(self) -> Option<f64> {
        match self {
            FakeKind::PhaseJitter { sigma_rad } | FakeKind::Both { sigma_rad, .. } => {
                Some(sigma_rad)
            }
            _ => None,
        }
    }

    fn smooth_factor(self) -> Option<u32> {
        match self {
            FakeKind::Smooth { factor } | FakeKind::Both { factor, .. } => Some(factor),
            _ => None,
        }
    }
}

/// Full description of one synthetic video.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub hr_bpm: f64,
    pub fps: f64,
    pub frames: usize,
    pub base_color: [u8; 3],
    pub pulse_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub fake: FakeKind,
    pub source_id: String,
}

impl SynthSpec {
    /// A spec with pipeline-friendly defaults: skin-like base color, 30 fps,
    /// amplitude 2, noise sigma 2.
    pub fn new(hr_bpm: f64, frames: usize, seed: u64, source_id: impl Into<String>) -> Self {
        Self {
            hr_bpm,
            fps: 30.0,
            frames,
            base_color: [177, 118, 88],
            pulse_amplitude: 2.0,
            noise_sigma: 2.0,
            seed,
            fake: FakeKind::None,
            source_id: source_id.into(),
        }
    }

    /// Same defaults with a forgery mode attached.
    pub fn new_fake(
        hr_bpm: f64,
        frames: usize,
        seed: u64,
        fake: FakeKind,
        source_id: impl Into<String>,
    ) -> Self {
        let mut s = Self::new(hr_bpm, frames, seed, source_id);
        s.fake = fake;
        s
    }

    /// Validates the physical and numeric ranges.
    ///
    /// Heart rate must be physiological (42-240 bpm), the video must be
    /// longer than one default segment, and the pulse amplitude is either
    /// exactly zero (a deliberately pulse-free video) or within [0.5, 5] so
    /// the signal neither vanishes into quantization nor clips.
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::SpecInvalid(msg));
        if !(42.0..=240.0).contains(&self.hr_bpm) {
            return fail(format!("hr_bpm {} outside [42, 240]", self.hr_bpm));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return fail(format!("fps {} must be positive", self.fps));
        }
        if self.hr_bpm / 60.0 >= self.fps / 2.0 {
            return fail(format!(
                "hr {} bpm is not observable at {} fps",
                self.hr_bpm, self.fps
            ));
        }
        if self.frames <= 128 {
            return fail(format!("frames {} must exceed 128", self.frames));
        }
        if self.pulse_amplitude != 0.0 && !(0.5..=5.0).contains(&self.pulse_amplitude) {
            return fail(format!(
                "pulse_amplitude {} must be 0 or within [0.5, 5]",
                self.pulse_amplitude
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!(
                "noise_sigma {} must be non-negative",
                self.noise_sigma
            ));
        }
        if let Some(s) = self.fake.jitter_sigma() {
            if !(s >= 0.0 && s.is_finite()) {
                return fail(format!("jitter sigma {s} must be non-negative"));
            }
        }
        if let Some(f) = self.fake.smooth_factor() {
            if f < 2 || !FRAME_SIZE.is_multiple_of(f) {
                return fail(format!(
                    "smooth factor {f} must be >= 2 and divide {FRAME_SIZE}"
                ));
            }
        }
        Ok(())
    }
}

/// Generates a genuine pulse video. The spec's fake mode must be
/// [`FakeKind::None`].
pub fn synth_video(spec: &SynthSpec) -> Result<(FrameSequence, CheekLandmarks), SynthError> {
    if spec.fake.is_fake() {
        return Err(SynthError::SpecInvalid(
            "synth_video requires fake = none; use synth_fake".into(),
        ));
    }
    generate(spec)
}

/// Generates a forged video. The spec's fake mode must not be
/// [`FakeKind::None`].
pub fn synth_fake(spec: &SynthSpec) -> Result<(FrameSequence, CheekLandmarks), SynthError> {
    if !spec.fake.is_fake() {
        return Err(SynthError::SpecInvalid(
            "synth_fake requires a forgery mode; use synth_video".into(),
        ));
    }
    generate(spec)
}

fn generate(spec: &SynthSpec) -> Result<(FrameSequence, CheekLandmarks), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let size = FRAME_SIZE;
    let freq = spec.hr_bpm / 60.0;

    // Per-block phase offsets are drawn up front, before any pixel noise, so
    // the draw order (and thus the video) is a pure function of the spec.
    let blocks = spec.frames.div_ceil(JITTER_BLOCK_FRAMES);
    let jitter: Vec<f64> = match spec.fake.jitter_sigma() {
        Some(sigma) if sigma > 0.0 => {
            let dist = Normal::new(0.0, sigma).expect("validated sigma");
            (0..blocks).map(|_| dist.sample(&mut rng)).collect()
        }
        _ => vec![0.0; blocks],
    };

    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).expect("validated sigma"))
    } else {
        None
    };

    let mut frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let phase = 2.0 * std::f64::consts::PI * freq * t as f64 / spec.fps
            + jitter[t / JITTER_BLOCK_FRAMES];
        let pulse = spec.pulse_amplitude * phase.sin();
        let mut img = RgbImage::new(size, size);
        for y in 0..size {
            for x in 0..size {
                let mut px = [0u8; 3];
                for c in 0..3 {
                    let mut v = spec.base_color[c] as f64 + pulse * CHANNEL_GAIN[c];
                    if let Some(dist) = &noise {
                        v += dist.sample(&mut rng);
                    }
                    px[c] = v.round().clamp(0.0, 255.0) as u8;
                }
                img.put_pixel(x, y, Rgb(px));
            }
        }
        if let Some(factor) = spec.fake.smooth_factor() {
            img = smooth_image(&img, factor);
        }
        frames.push(img);
    }

    let corner = (size - 1) as f64;
    let quad = Quad([[0.0, 0.0], [corner, 0.0], [corner, corner], [0.0, corner]]);
    let landmarks = CheekLandmarks::new(vec![quad; spec.frames]).expect("full-frame quad is valid");
    let seq = FrameSequence::new(frames, spec.fps, spec.source_id.clone())
        .expect("validated spec produces a valid sequence");
    Ok((seq, landmarks))
}

/// Box-downsamples an image by `factor` (plain block averaging) and
/// bilinear-upsamples it back to the original size, the classic low-pass
/// footprint of resampling-based forgeries.
pub fn smooth_image(img: &RgbImage, factor: u32) -> RgbImage {
    let (w, h) = img.dimensions();
    assert!(factor >= 2 && w % factor == 0 && h % factor == 0);
    let dw = w / factor;
    let dh = h / factor;
    let mut down = RgbImage::new(dw, dh);
    let area = (factor * factor) as f64;
    for y in 0..dh {
        for x in 0..dw {
            let mut acc = [0.0f64; 3];
            for dy in 0..factor {
                for dx in 0..factor {
                    let p = img.get_pixel(x * factor + dx, y * factor + dy).0;
                    for c in 0..3 {
                        acc[c] += p[c] as f64;
                    }
                }
            }
            down.put_pixel(
                x,
                y,
                Rgb([
                    (acc[0] / area).round() as u8,
                    (acc[1] / area).round() as u8,
                    (acc[2] / area).round() as u8,
                ]),
            );
        }
    }

    // Upsample with centre-aligned bilinear sampling.
    let mut up = RgbImage::new(w, h);
    let fx = dw as f64 / w as f64;
    let fy = dh as f64 / h as f64;
    for y in 0..h {
        for x in 0..w {
            let sx = (x as f64 + 0.5) * fx - 0.5;
            let sy = (y as f64 + 0.5) * fy - 0.5;
            let rgb = crate::ingest::bilinear_rgb(&down, sx, sy);
            up.put_pixel(
                x,
                y,
                Rgb([
                    rgb[0].round() as u8,
                    rgb[1].round() as u8,
                    rgb[2].round() as u8,
                ]),
            );
        }
    }
    up
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chromppg;

    #[test]
    fn spec_validation_ranges() {
        let ok = SynthSpec::new(72.0, 300, 1, "v");
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.hr_bpm = 30.0;
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.frames = 128;
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.pulse_amplitude = 0.3;
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.pulse_amplitude = 0.0;
        assert!(
            bad.validate().is_ok(),
            "zero amplitude is a valid null video"
        );
        bad = ok.clone();
        bad.fake = FakeKind::Smooth { factor: 5 };
        assert!(bad.validate().is_err(), "factor must divide the frame size");
    }

    #[test]
    fn mode_constructor_guards() {
        let real = SynthSpec::new(72.0, 200, 1, "v");
        assert!(synth_fake(&real).is_err());
        let fake = SynthSpec::new_fake(72.0, 200, 1, FakeKind::Smooth { factor: 2 }, "v");
        assert!(synth_video(&fake).is_err());
        assert!(synth_fake(&fake).is_ok());
    }

    #[test]
    fn same_seed_reproduces_bytes() {
        let spec = SynthSpec::new(95.0, 150, 77, "v");
        let (a, _) = synth_video(&spec).unwrap();
        let (b, _) = synth_video(&spec).unwrap();
        for (fa, fb) in a.frames().iter().zip(b.frames()) {
            assert_eq!(fa.as_raw(), fb.as_raw());
        }
        let mut other = spec.clone();
        other.seed = 78;
        let (c, _) = synth_video(&other).unwrap();
        assert_ne!(a.frame(0).as_raw(), c.frame(0).as_raw());
    }

    #[test]
    fn clean_pulse_peaks_at_exact_bin() {
        // hr = 72 bpm -> 1.2 Hz; with 300 frames at 30 fps that frequency
        // falls exactly on DFT bin 12, so the mean-G trace spectrum must
        // peak there.
        let mut spec = SynthSpec::new(72.0, 300, 3, "v");
        spec.noise_sigma = 0.0;
        let (seq, _) = synth_video(&spec).unwrap();
        let g: Vec<f64> = seq
            .frames()
            .iter()
            .map(|f| chromppg::mean_channel::<f64>(&[f], 30.0).g[0])
            .collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let mut best = (0usize, f64::MIN);
        for bin in 1..=149 {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &v) in g.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * bin as f64 * t as f64 / 300.0;
                re += (v - mean) * ph.cos();
                im += (v - mean) * ph.sin();
            }
            let p = re * re + im * im;
            if p > best.1 {
                best = (bin, p);
            }
        }
        assert!(
            (best.0 as i64 - 12).unsigned_abs() <= 1,
            "G-trace spectrum peaks at bin {} instead of 12",
            best.0
        );
    }

    #[test]
    fn quantization_carries_the_pulse() {
        // Even with amplitude 2 the rounded frames must retain a usable
        // sinusoid in the mean trace (dithered by pixel noise).
        let spec = SynthSpec::new(60.0, 150, 9, "v");
        let (seq, _) = synth_video(&spec).unwrap();
        let g: Vec<f64> = seq
            .frames()
            .iter()
            .map(|f| chromppg::mean_channel::<f64>(&[f], 30.0).g[0])
            .collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let amp = g.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        assert!(amp > 0.8, "mean-G modulation {amp} too small");
    }

    #[test]
    fn smoothing_preserves_means_but_kills_high_frequency() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let img = RgbImage::from_fn(72, 72, |_, _| {
            use rand::Rng;
            Rgb([rng.random(), rng.random(), rng.random()])
        });
        let sm = smooth_image(&img, 2);
        let m0 = chromppg::mean_rgb(&img);
        let m1 = chromppg::mean_rgb(&sm);
        for c in 0..3 {
            assert!(
                (m0[c] - m1[c]).abs() < 2.0,
                "channel {c} mean moved too far"
            );
        }
        // Neighbor correlation: smoothed image must be much smoother.
        let rough = |im: &RgbImage| {
            let mut acc = 0.0;
            for y in 0..72 {
                for x in 0..71 {
                    let a = im.get_pixel(x, y).0[0] as f64;
                    let b = im.get_pixel(x + 1, y).0[0] as f64;
                    acc += (a - b).abs();
                }
            }
            acc
        };
        assert!(rough(&sm) < 0.5 * rough(&img));
    }

    #[test]
    fn landmarks_cover_the_full_frame() {
        let spec = SynthSpec::new(80.0, 130, 2, "v");
        let (seq, lm) = synth_video(&spec).unwrap();
        assert_eq!(lm.len(), seq.len());
        assert_eq!(
            lm.quad(0).0,
            [[0.0, 0.0], [71.0, 0.0], [71.0, 71.0], [0.0, 71.0]]
        );
        lm.validate_bounds(72, 72).unwrap();
    }
}
