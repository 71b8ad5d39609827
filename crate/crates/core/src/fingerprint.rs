//! Fingerprint maps: fixed-size images summarizing a video segment's
//! temporal pulse signature or spatial autoregression signature.
//!
//! A video is cut into fixed-length frame windows. For each window, the
//! pulse map stacks one row per grid cell with the band-passed R trace, the
//! band-passed G trace, and the differenced pulse signal in the R/G/B planes
//! respectively; the autoregression map stacks one column per frame holding
//! the per-channel AR coefficient vectors. Both are min-max normalized to
//! `u8` and stored as PNG with a JSON metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::armodel::FrameCoeffs;
use crate::chromppg::music::VARIANCE_FLOOR;
use crate::chromppg::{self, ChannelTraces, SignalError};
use crate::scalar::Real;

/// Shortest segment the maps are defined for.
pub const MIN_SEGMENT_LEN: usize = 64;

/// Zeroes a signal whose mean square sits below the degeneracy floor, so
/// that numerical dust left by filtering an (effectively) constant trace is
/// not amplified into full-range noise by min-max normalization.
fn squash_degenerate<T: Real>(v: &mut [T]) {
    let n = T::c(v.len() as f64);
    let ms = v.iter().map(|&x| x * x).sum::<T>() / n;
    if ms.as_f64() < VARIANCE_FLOOR {
        v.fill(T::zero());
    }
}

/// Errors raised while building or persisting fingerprint maps.
#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error(
        "video too short: {video_len} frames cannot host a {n}-frame segment (need at least n+1)"
    )]
    TooShortVideo { video_len: usize, n: usize },
    #[error("input length {got} does not match segment length {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("{path}: image is {got_w}x{got_h} but metadata says {want_w}x{want_h}")]
    ShapeError {
        path: String,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("metadata sidecar missing for {path}")]
    MetadataMissing { path: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    BadMeta {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    BadImage {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// A half-open frame window `[start_frame, start_frame + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub len: usize,
}

/// Which signature a map carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Ppg,
    Ar,
}

impl MapKind {
    /// Short tag used in file names.
    pub fn tag(self) -> &'static str {
        match self {
            MapKind::Ppg => "ppg",
            MapKind::Ar => "ar",
        }
    }
}

/// Cuts a `video_len`-frame video into `n`-frame segments starting at
/// multiples of `stride`, keeping every window that fits.
///
/// A video must be strictly longer than `n`; equal length is rejected so a
/// segment never swallows a whole video without slack for the difference
/// signal's final sample.
pub fn window_segments(
    video_len: usize,
    n: usize,
    stride: usize,
) -> Result<Vec<Segment>, FingerprintError> {
    assert!(
        n >= MIN_SEGMENT_LEN,
        "segment length must be at least {MIN_SEGMENT_LEN}"
    );
    assert!(stride >= 1, "stride must be positive");
    if video_len <= n {
        return Err(FingerprintError::TooShortVideo { video_len, n });
    }
    let mut segments = Vec::new();
    let mut start = 0;
    while start + n <= video_len {
        segments.push(Segment {
            start_frame: start,
            len: n,
        });
        start += stride;
    }
    Ok(segments)
}

/// A fingerprint map plus the identity of the segment it came from.
#[derive(Debug, Clone)]
pub struct FingerprintMap {
    pub kind: MapKind,
    /// `rows` x `n` pixels; row count is the grid-cell count for pulse maps
    /// and the AR order for autoregression maps.
    pub pixels: RgbImage,
    pub segment: Segment,
    pub source_id: String,
    pub fps: f64,
}

impl FingerprintMap {
    /// Map width, equal to the segment length.
    pub fn n(&self) -> usize {
        self.pixels.width() as usize
    }

    /// Map height.
    pub fn rows(&self) -> usize {
        self.pixels.height() as usize
    }

    /// Canonical file stem for this map: `seg_<start>_<kind>`.
    pub fn file_stem(&self) -> String {
        format!("seg_{:06}_{}", self.segment.start_frame, self.kind.tag())
    }
}

/// Builds the pulse fingerprint map for one segment from per-cell traces
/// already cut to the segment window.
///
/// Each trace triple is band-passed to `[lo_hz, hi_hz]`; row `i` of the map
/// holds the normalized band-passed R trace, G trace, and differenced pulse
/// signal (its last value repeated once to restore full length) in the three
/// color planes.
pub fn build_ppg_map<T: Real>(
    traces: &[ChannelTraces<T>],
    lo_hz: f64,
    hi_hz: f64,
    segment: Segment,
    source_id: &str,
) -> Result<FingerprintMap, FingerprintError> {
    assert!(!traces.is_empty(), "need at least one grid cell");
    let n = segment.len;
    for tr in traces {
        if tr.len() != n {
            return Err(FingerprintError::LengthMismatch {
                got: tr.len(),
                want: n,
            });
        }
    }
    let fps = traces[0].fps;
    let mut pixels = RgbImage::new(n as u32, traces.len() as u32);
    for (row, tr) in traces.iter().enumerate() {
        let mut rf = chromppg::bandpass(&tr.r, fps, lo_hz, hi_hz)?;
        let mut gf = chromppg::bandpass(&tr.g, fps, lo_hz, hi_hz)?;
        let mut bf = chromppg::bandpass(&tr.b, fps, lo_hz, hi_hz)?;
        squash_degenerate(&mut rf);
        squash_degenerate(&mut gf);
        squash_degenerate(&mut bf);
        let (xs, ys) = chromppg::chrom_signals(&rf, &gf, &bf);
        let s = chromppg::s_hat(&xs, &ys);
        let mut pulse = chromppg::ppg_signal(&s, fps)?.values;
        let last = *pulse.last().expect("difference of n >= 64 samples");
        pulse.push(last);
        squash_degenerate(&mut pulse);

        let r_row = chromppg::normalize_u8(&rf);
        let g_row = chromppg::normalize_u8(&gf);
        let b_row = chromppg::normalize_u8(&pulse);
        for t in 0..n {
            pixels.put_pixel(t as u32, row as u32, Rgb([r_row[t], g_row[t], b_row[t]]));
        }
    }
    Ok(FingerprintMap {
        kind: MapKind::Ppg,
        pixels,
        segment,
        source_id: source_id.to_string(),
        fps,
    })
}

/// Builds the autoregression fingerprint map for one segment from per-frame
/// coefficient vectors already cut to the segment window.
///
/// Column `t` of color plane `c` holds frame `t`'s AR coefficients for
/// channel `c`; each plane is min-max normalized as a whole so coefficient
/// contrast is preserved across rows.
pub fn build_ar_map<T: Real>(
    frames: &[FrameCoeffs<T>],
    order: usize,
    segment: Segment,
    source_id: &str,
    fps: f64,
) -> Result<FingerprintMap, FingerprintError> {
    let n = segment.len;
    if frames.len() != n {
        return Err(FingerprintError::LengthMismatch {
            got: frames.len(),
            want: n,
        });
    }
    for fc in frames {
        for ch in &fc.channels {
            assert_eq!(ch.len(), order, "coefficient vector must match order");
        }
    }
    let mut pixels = RgbImage::new(n as u32, order as u32);
    for c in 0..3 {
        // Flatten the whole plane (row-major) and normalize it in one pass.
        let mut plane = Vec::with_capacity(order * n);
        for row in 0..order {
            for fc in frames {
                plane.push(fc.channels[c][row]);
            }
        }
        let bytes = chromppg::normalize_u8(&plane);
        for row in 0..order {
            for t in 0..n {
                pixels.get_pixel_mut(t as u32, row as u32).0[c] = bytes[row * n + t];
            }
        }
    }
    Ok(FingerprintMap {
        kind: MapKind::Ar,
        pixels,
        segment,
        source_id: source_id.to_string(),
        fps,
    })
}

/// JSON sidecar schema stored beside each map PNG.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct MapMeta {
    kind: MapKind,
    source_id: String,
    start_frame: usize,
    n: usize,
    fps: f64,
    rows: usize,
}

fn sidecar_path(png_path: &Path) -> PathBuf {
    png_path.with_extension("json")
}

/// Writes a map as PNG plus JSON sidecar (same path with a `.json`
/// extension).
pub fn write_map(map: &FingerprintMap, png_path: &Path) -> Result<(), FingerprintError> {
    if let Some(parent) = png_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| FingerprintError::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    map.pixels
        .save(png_path)
        .map_err(|e| FingerprintError::BadImage {
            path: png_path.display().to_string(),
            source: e,
        })?;
    let meta = MapMeta {
        kind: map.kind,
        source_id: map.source_id.clone(),
        start_frame: map.segment.start_frame,
        n: map.n(),
        fps: map.fps,
        rows: map.rows(),
    };
    let side = sidecar_path(png_path);
    let text = serde_json::to_string(&meta).expect("metadata serializes");
    fs::write(&side, text).map_err(|e| FingerprintError::Io {
        path: side.display().to_string(),
        source: e,
    })
}

/// Reads a map PNG plus sidecar back, validating that the image shape
/// matches the metadata.
pub fn read_map(png_path: &Path) -> Result<FingerprintMap, FingerprintError> {
    let side = sidecar_path(png_path);
    if !side.exists() {
        return Err(FingerprintError::MetadataMissing {
            path: png_path.display().to_string(),
        });
    }
    let text = fs::read_to_string(&side).map_err(|e| FingerprintError::Io {
        path: side.display().to_string(),
        source: e,
    })?;
    let meta: MapMeta = serde_json::from_str(&text).map_err(|e| FingerprintError::BadMeta {
        path: side.display().to_string(),
        source: e,
    })?;
    let pixels = image::open(png_path)
        .map_err(|e| FingerprintError::BadImage {
            path: png_path.display().to_string(),
            source: e,
        })?
        .into_rgb8();
    let (got_w, got_h) = pixels.dimensions();
    if (got_w as usize, got_h as usize) != (meta.n, meta.rows) {
        return Err(FingerprintError::ShapeError {
            path: png_path.display().to_string(),
            got_w,
            got_h,
            want_w: meta.n as u32,
            want_h: meta.rows as u32,
        });
    }
    Ok(FingerprintMap {
        kind: meta.kind,
        pixels,
        segment: Segment {
            start_frame: meta.start_frame,
            len: meta.n,
        },
        source_id: meta.source_id,
        fps: meta.fps,
    })
}
