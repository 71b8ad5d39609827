//! Video ingestion: frame sequences, cheek landmarks, ROI rectification, and
//! grid subdivision.
//!
//! Videos enter the pipeline as directories of numbered PNG frames plus a
//! landmark file giving a four-point cheek quadrilateral per frame. The quad
//! is warped onto a fixed-size upright rectangle (piecewise-affine over the
//! two triangles either side of the TL→BR diagonal) and then cut into a
//! uniform grid of sub-regions that downstream signal extraction treats as
//! independent measurement sites.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum accepted quad area in square pixels; anything smaller cannot hold
/// a meaningful skin patch and is rejected as degenerate.
pub const MIN_QUAD_AREA: f64 = 16.0;

/// Errors raised while loading or preparing video data.
#[derive(Debug, Error)]
pub enum IngestError {
    /// Frame numbering must be contiguous starting at `frame_000001.png`,
    /// and a sequence needs at least two frames.
    #[error("missing frame_{0:06}.png (frames must be numbered contiguously from 000001)")]
    MissingFrame(usize),
    #[error("frame {index}: {got_w}x{got_h} differs from first frame ({want_w}x{want_h})")]
    DimensionMismatch {
        index: usize,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("cannot decode {path}: {source}")]
    BadImage {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("landmark count {got} does not match frame count {want}")]
    CountMismatch { got: usize, want: usize },
    #[error("frame {index}: degenerate cheek quad (area {area:.3} px^2, self-intersecting or too small)")]
    DegenerateQuad { index: usize, area: f64 },
    #[error("frame {index}: landmark ({x:.1}, {y:.1}) lies outside the {w}x{h} frame")]
    LandmarkOutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        w: u32,
        h: u32,
    },
    #[error("invalid fps {0} (must be finite and positive)")]
    BadFps(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    BadJson {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A decoded video: frames of identical dimensions plus timing metadata.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<RgbImage>,
    fps: f64,
    source_id: String,
}

impl FrameSequence {
    /// Builds a sequence from decoded frames, validating that there are at
    /// least two, that all share the first frame's dimensions, and that the
    /// frame rate is positive and finite.
    pub fn new(frames: Vec<RgbImage>, fps: f64, source_id: String) -> Result<Self, IngestError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(IngestError::BadFps(fps));
        }
        if frames.len() < 2 {
            return Err(IngestError::MissingFrame(frames.len() + 1));
        }
        let (want_w, want_h) = frames[0].dimensions();
        for (i, f) in frames.iter().enumerate() {
            let (got_w, got_h) = f.dimensions();
            if (got_w, got_h) != (want_w, want_h) {
                return Err(IngestError::DimensionMismatch {
                    index: i + 1,
                    got_w,
                    got_h,
                    want_w,
                    want_h,
                });
            }
        }
        Ok(Self {
            frames,
            fps,
            source_id,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// `(width, height)` shared by every frame.
    pub fn dimensions(&self) -> (u32, u32) {
        self.frames[0].dimensions()
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }

    pub fn frame(&self, index: usize) -> &RgbImage {
        &self.frames[index]
    }
}

/// Four cheek corner points in screen coordinates, ordered top-left,
/// top-right, bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad(pub [[f64; 2]; 4]);

impl Quad {
    /// Signed area by the shoelace formula; positive for the documented
    /// TL, TR, BR, BL ordering in screen coordinates (y grows downward).
    pub fn signed_area(&self) -> f64 {
        let q = &self.0;
        let mut acc = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            acc += q[i][0] * q[j][1] - q[j][0] * q[i][1];
        }
        acc / 2.0
    }

    /// True when opposite edges do not cross, i.e. the polygon is simple.
    pub fn is_simple(&self) -> bool {
        let q = &self.0;
        // A quad is non-simple exactly when one of the two pairs of
        // non-adjacent edges intersects properly.
        !segments_cross(q[0], q[1], q[2], q[3]) && !segments_cross(q[1], q[2], q[3], q[0])
    }

    /// Validates shape: simple polygon with positive area of at least
    /// [`MIN_QUAD_AREA`]. `index` is the 1-based frame number for reporting.
    pub fn validate(&self, index: usize) -> Result<(), IngestError> {
        let area = self.signed_area();
        if !self.is_simple() || area < MIN_QUAD_AREA || area.is_nan() {
            return Err(IngestError::DegenerateQuad { index, area });
        }
        Ok(())
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Proper intersection test for segments `ab` and `cd` (shared endpoints do
/// not count as crossing).
fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Per-frame cheek quads for one video.
#[derive(Debug, Clone)]
pub struct CheekLandmarks {
    quads: Vec<Quad>,
}

impl CheekLandmarks {
    /// Wraps per-frame quads, validating each for degeneracy.
    pub fn new(quads: Vec<Quad>) -> Result<Self, IngestError> {
        for (i, q) in quads.iter().enumerate() {
            q.validate(i + 1)?;
        }
        Ok(Self { quads })
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    pub fn quads(&self) -> &[Quad] {
        &self.quads
    }

    pub fn quad(&self, frame: usize) -> &Quad {
        &self.quads[frame]
    }

    /// Checks that every corner of every quad lies inside a `w`x`h` frame.
    pub fn validate_bounds(&self, w: u32, h: u32) -> Result<(), IngestError> {
        for (i, q) in self.quads.iter().enumerate() {
            for p in &q.0 {
                if !(p[0] >= 0.0 && p[0] <= (w - 1) as f64 && p[1] >= 0.0 && p[1] <= (h - 1) as f64)
                {
                    return Err(IngestError::LandmarkOutOfBounds {
                        index: i + 1,
                        x: p[0],
                        y: p[1],
                        w,
                        h,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct LandmarkFile {
    frames: Vec<[[f64; 2]; 4]>,
}

#[derive(Serialize, Deserialize)]
struct FrameMeta {
    fps: f64,
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a directory of `frame_NNNNNN.png` files (numbered from 000001,
/// contiguous) as a [`FrameSequence`].
///
/// `fps` supplies the frame rate; a `meta.json` sidecar in the directory with
/// an `fps` field takes precedence when present. The sequence's source id is
/// the directory's base name.
pub fn load_frame_sequence(dir: &Path, fps: f64) -> Result<FrameSequence, IngestError> {
    let mut indices = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name
            .strip_prefix("frame_")
            .and_then(|s| s.strip_suffix(".png"))
        {
            if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
                indices.push(stem.parse::<usize>().expect("six ascii digits"));
            }
        }
    }
    indices.sort_unstable();
    for (i, idx) in indices.iter().enumerate() {
        if *idx != i + 1 {
            return Err(IngestError::MissingFrame(i + 1));
        }
    }

    let mut fps = fps;
    let meta_path = dir.join("meta.json");
    if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
        let meta: FrameMeta = serde_json::from_str(&text).map_err(|e| IngestError::BadJson {
            path: meta_path.display().to_string(),
            source: e,
        })?;
        fps = meta.fps;
    }

    let mut frames = Vec::with_capacity(indices.len());
    for idx in &indices {
        let path = dir.join(format!("frame_{idx:06}.png"));
        let img = image::open(&path)
            .map_err(|e| IngestError::BadImage {
                path: path.display().to_string(),
                source: e,
            })?
            .into_rgb8();
        frames.push(img);
    }

    let source_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".to_string());
    FrameSequence::new(frames, fps, source_id)
}

/// Loads a landmark JSON file (`{"frames": [[[x,y], ...4 points], ...]}`),
/// validating the entry count against `frame_count` and each quad's shape.
pub fn load_landmarks(path: &Path, frame_count: usize) -> Result<CheekLandmarks, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: LandmarkFile = serde_json::from_str(&text).map_err(|e| IngestError::BadJson {
        path: path.display().to_string(),
        source: e,
    })?;
    if file.frames.len() != frame_count {
        return Err(IngestError::CountMismatch {
            got: file.frames.len(),
            want: frame_count,
        });
    }
    CheekLandmarks::new(file.frames.into_iter().map(Quad).collect())
}

/// Writes a frame sequence back to `dir` in the layout understood by
/// [`load_frame_sequence`]: numbered PNGs plus a `meta.json` with the fps.
pub fn write_frame_sequence(dir: &Path, seq: &FrameSequence) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (i, frame) in seq.frames().iter().enumerate() {
        let path = dir.join(format!("frame_{:06}.png", i + 1));
        frame.save(&path).map_err(|e| IngestError::BadImage {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string(&FrameMeta { fps: seq.fps() }).expect("fps serializes");
    fs::write(&meta_path, text).map_err(|e| io_err(&meta_path, e))
}

/// Writes landmarks in the JSON layout understood by [`load_landmarks`].
pub fn write_landmarks(path: &Path, landmarks: &CheekLandmarks) -> Result<(), IngestError> {
    let file = LandmarkFile {
        frames: landmarks.quads().iter().map(|q| q.0).collect(),
    };
    let text = serde_json::to_string(&file).expect("landmarks serialize");
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Bilinear sample with clamp-to-edge semantics, returning one value per
/// channel. Coordinates are in pixel-centre space.
pub(crate) fn bilinear_rgb(img: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = img.dimensions();
    let cx = x.clamp(0.0, (w - 1) as f64);
    let cy = y.clamp(0.0, (h - 1) as f64);
    let x0 = cx.floor() as u32;
    let y0 = cy.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = cx - x0 as f64;
    let fy = cy - y0 as f64;
    let p00 = img.get_pixel(x0, y0).0;
    let p10 = img.get_pixel(x1, y0).0;
    let p01 = img.get_pixel(x0, y1).0;
    let p11 = img.get_pixel(x1, y1).0;
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// A cheek quad warped onto an upright rectangle, tagged with the frame it
/// came from.
#[derive(Debug, Clone)]
pub struct RectifiedRoi {
    pub pixels: RgbImage,
    pub frame_index: usize,
}

/// Warps the cheek quad of one frame onto an upright `target_w` x `target_h`
/// rectangle.
///
/// The quad is split along its TL→BR diagonal into two triangles, each mapped
/// by its own affine transform, and source pixels are read with bilinear
/// interpolation (clamped at the frame edge). An axis-aligned rectangular
/// quad at integer coordinates whose size already matches the target
/// reproduces the underlying pixels exactly.
pub fn rectify_roi(
    frame: &RgbImage,
    quad: &Quad,
    target_h: u32,
    target_w: u32,
) -> Result<RgbImage, IngestError> {
    assert!(
        target_h >= 6 && target_w >= 6,
        "rectified ROI must be at least 6x6"
    );
    quad.validate(0)?;

    let q = &quad.0;
    let tw = (target_w - 1) as f64;
    let th = (target_h - 1) as f64;
    // Target corners in the same TL, TR, BR, BL order as the quad.
    let t = [[0.0, 0.0], [tw, 0.0], [tw, th], [0.0, th]];

    // Affine maps (target -> source) for the triangles (TL, TR, BR) and
    // (TL, BR, BL) either side of the TL->BR diagonal.
    let upper = affine_from_triangles([t[0], t[1], t[2]], [q[0], q[1], q[2]]);
    let lower = affine_from_triangles([t[0], t[2], t[3]], [q[0], q[2], q[3]]);
    let (upper, lower) = match (upper, lower) {
        (Some(u), Some(l)) => (u, l),
        _ => {
            return Err(IngestError::DegenerateQuad {
                index: 0,
                area: quad.signed_area(),
            })
        }
    };

    let mut out = RgbImage::new(target_w, target_h);
    for y in 0..target_h {
        for x in 0..target_w {
            let xf = x as f64;
            let yf = y as f64;
            // The diagonal runs (0,0) -> (tw,th); points with
            // x*th - y*tw >= 0 fall on the (TL, TR, BR) side.
            let m = if xf * th - yf * tw >= 0.0 {
                &upper
            } else {
                &lower
            };
            let sx = m[0] * xf + m[1] * yf + m[2];
            let sy = m[3] * xf + m[4] * yf + m[5];
            let rgb = bilinear_rgb(frame, sx, sy);
            out.put_pixel(
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
    Ok(out)
}

/// Solves for the affine transform `[a b c; d e f]` mapping triangle `from`
/// onto triangle `to`. Returns `None` when `from` is (near-)degenerate.
fn affine_from_triangles(from: [[f64; 2]; 3], to: [[f64; 2]; 3]) -> Option<[f64; 6]> {
    let [p0, p1, p2] = from;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    if det.abs() < 1e-9 {
        return None;
    }
    // Solve the 2x2 system for the linear part using the edge vectors, then
    // recover the translation from p0.
    let u1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let u2 = [p2[0] - p0[0], p2[1] - p0[1]];
    let v1 = [to[1][0] - to[0][0], to[1][1] - to[0][1]];
    let v2 = [to[2][0] - to[0][0], to[2][1] - to[0][1]];
    let a = (v1[0] * u2[1] - v2[0] * u1[1]) / det;
    let b = (v2[0] * u1[0] - v1[0] * u2[0]) / det;
    let d = (v1[1] * u2[1] - v2[1] * u1[1]) / det;
    let e = (v2[1] * u1[0] - v1[1] * u2[0]) / det;
    let c = to[0][0] - a * p0[0] - b * p0[1];
    let f = to[0][1] - d * p0[0] - e * p0[1];
    Some([a, b, c, d, e, f])
}

/// A rectified ROI cut into `rows` x `cols` equally sized cells, row-major.
#[derive(Debug, Clone)]
pub struct SubregionGrid {
    cells: Vec<RgbImage>,
    rows: u32,
    cols: u32,
}

impl SubregionGrid {
    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    /// Number of cells (`rows * cols`).
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell at row-major index `i`.
    pub fn cell(&self, i: usize) -> &RgbImage {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[RgbImage] {
        &self.cells
    }

    /// Stitches the cells back into a single image (inverse of
    /// [`subdivide`]; mainly useful for verification).
    pub fn reassemble(&self) -> RgbImage {
        let (cw, ch) = self.cells[0].dimensions();
        let mut out = RgbImage::new(cw * self.cols, ch * self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let cell = &self.cells[(r * self.cols + c) as usize];
                for y in 0..ch {
                    for x in 0..cw {
                        out.put_pixel(c * cw + x, r * ch + y, *cell.get_pixel(x, y));
                    }
                }
            }
        }
        out
    }
}

/// Cuts a rectified ROI into a `rows` x `cols` grid of equally sized cells.
/// The ROI dimensions must be divisible by the grid shape; the cells tile the
/// ROI exactly, without overlap.
pub fn subdivide(roi: &RgbImage, rows: u32, cols: u32) -> SubregionGrid {
    let (w, h) = roi.dimensions();
    assert!(rows > 0 && cols > 0, "grid must be non-empty");
    assert!(
        h % rows == 0 && w % cols == 0,
        "ROI {w}x{h} not divisible by grid {cols}x{rows}"
    );
    let ch = h / rows;
    let cw = w / cols;
    let mut cells = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let mut cell = RgbImage::new(cw, ch);
            for y in 0..ch {
                for x in 0..cw {
                    cell.put_pixel(x, y, *roi.get_pixel(c * cw + x, r * ch + y));
                }
            }
            cells.push(cell);
        }
    }
    SubregionGrid { cells, rows, cols }
}
