//! `extract`, `extract-ar`, and `fingerprint`: turn one video into
//! fingerprint map files.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::ValueEnum;
use faintprint::armodel::{ar_frame_coeffs, FrameCoeffs};
use faintprint::config::RunConfig;
use faintprint::fingerprint::{
    build_ar_map, build_ppg_map, window_segments, write_map, FingerprintMap,
};
use faintprint::pipeline::{cell_traces, load_video, rectify_video, VideoInput};
use serde::Serialize;

/// Which fingerprint branches to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Ppg,
    Ar,
    Both,
}

/// Input flags shared by every per-video command.
#[derive(clap::Args)]
pub struct VideoArgs {
    /// Directory of numbered frame PNGs (frame_000001.png ...).
    #[arg(long, value_name = "DIR")]
    frames: PathBuf,

    /// Landmark JSON with one cheek quad per frame.
    #[arg(long, value_name = "FILE")]
    landmarks: PathBuf,

    /// Fallback frames-per-second when the frame directory carries no
    /// meta.json.
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
}

impl VideoArgs {
    pub fn load(&self) -> Result<VideoInput> {
        Ok(load_video(&self.frames, &self.landmarks, self.fps)?)
    }
}

#[derive(clap::Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    video: VideoArgs,

    /// Directory to write map PNGs and sidecars into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct ExtractArArgs {
    #[command(flatten)]
    video: VideoArgs,

    /// Autoregression order, overriding the configuration.
    #[arg(long)]
    order: Option<usize>,

    /// Directory to write map PNGs and sidecars into.
    #[arg(long, value_name = "DIR", required_unless_present = "dump_coeffs")]
    out: Option<PathBuf>,

    /// Emit the raw per-frame coefficients as CSV on stdout
    /// (frame, channel, phi_1..phi_p) instead of the summary JSON.
    #[arg(long)]
    dump_coeffs: bool,
}

#[derive(clap::Args)]
pub struct FingerprintArgs {
    #[command(flatten)]
    video: VideoArgs,

    /// Which branches to build.
    #[arg(long, value_enum, default_value_t = Kind::Both)]
    kind: Kind,

    /// Segment length in frames, overriding the configuration.
    #[arg(long)]
    n: Option<usize>,

    /// Segment stride in frames, overriding the configuration.
    #[arg(long)]
    stride: Option<usize>,

    /// Directory to write map PNGs and sidecars into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

/// What one extraction produced, reported as JSON on stdout.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Summary {
    source_id: String,
    segments: usize,
    /// Count of (frame, color channel) pairs whose autoregression fit was
    /// degenerate and zero-filled.
    degenerate_channels: usize,
    maps: Vec<String>,
}

/// Maps extracted from one video, with the degeneracy tally for the
/// autoregression side.
struct Extraction {
    segments: usize,
    maps: Vec<FingerprintMap>,
    degenerate_channels: usize,
}

/// Builds the requested branches. Frames are rectified once; the pulse
/// branch reuses the per-cell traces across segments and the autoregression
/// branch reuses the per-frame fits.
fn extract_kinds(video: &VideoInput, config: &RunConfig, kind: Kind) -> Result<Extraction> {
    config.validate()?;
    let rois = rectify_video(video, config)?;
    let fps = video.frames.fps();
    let source_id = video.source_id();
    let segments = window_segments(video.frames.len(), config.n, config.effective_stride())?;

    let traces = match kind {
        Kind::Ar => None,
        _ => Some(cell_traces::<f64>(&rois, config, fps)),
    };
    let coeffs: Option<Vec<FrameCoeffs<f64>>> = match kind {
        Kind::Ppg => None,
        _ => Some(
            rois.iter()
                .map(|roi| ar_frame_coeffs(roi, config.ar_order))
                .collect(),
        ),
    };
    let degenerate_channels = coeffs
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .map(|fc| fc.degenerate.iter().filter(|&&d| d).count())
        .sum();

    let mut maps = Vec::new();
    for seg in &segments {
        if let Some(traces) = &traces {
            let windowed: Vec<_> = traces
                .iter()
                .map(|tr| tr.window(seg.start_frame, seg.len))
                .collect();
            maps.push(build_ppg_map(
                &windowed,
                config.band_lo_hz,
                config.band_hi_hz,
                *seg,
                source_id,
            )?);
        }
        if let Some(coeffs) = &coeffs {
            maps.push(build_ar_map(
                &coeffs[seg.start_frame..seg.start_frame + seg.len],
                config.ar_order,
                *seg,
                source_id,
                fps,
            )?);
        }
    }
    Ok(Extraction {
        segments: segments.len(),
        maps,
        degenerate_channels,
    })
}

/// Writes each map to `out/<source id>/<stem>.png` and returns the paths.
fn write_maps(maps: &[FingerprintMap], out: &Path) -> Result<Vec<String>> {
    let mut paths = Vec::with_capacity(maps.len());
    for map in maps {
        let path = out
            .join(&map.source_id)
            .join(format!("{}.png", map.file_stem()));
        write_map(map, &path)?;
        paths.push(path.display().to_string());
    }
    Ok(paths)
}

fn emit_summary(video: &VideoInput, extraction: &Extraction, paths: Vec<String>) -> Result<()> {
    let summary = Summary {
        source_id: video.source_id().to_string(),
        segments: extraction.segments,
        degenerate_channels: extraction.degenerate_channels,
        maps: paths,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn run_extract(args: &ExtractArgs, config: &RunConfig) -> Result<()> {
    let video = args.video.load()?;
    eprintln!(
        "extracting {} ({} frames @ {:.1} fps)",
        video.source_id(),
        video.frames.len(),
        video.frames.fps()
    );
    let extraction = extract_kinds(&video, config, Kind::Both)?;
    let paths = write_maps(&extraction.maps, &args.out)?;
    emit_summary(&video, &extraction, paths)
}

pub fn run_fingerprint(args: &FingerprintArgs, config: &RunConfig) -> Result<()> {
    let mut config = config.clone();
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(stride) = args.stride {
        config.stride = Some(stride);
    }
    let video = args.video.load()?;
    let extraction = extract_kinds(&video, &config, args.kind)?;
    let paths = write_maps(&extraction.maps, &args.out)?;
    emit_summary(&video, &extraction, paths)
}

pub fn run_extract_ar(args: &ExtractArArgs, config: &RunConfig) -> Result<()> {
    let mut config = config.clone();
    if let Some(order) = args.order {
        config.ar_order = order;
    }
    config.validate()?;
    let video = args.video.load()?;
    let rois = rectify_video(&video, &config)?;
    let coeffs: Vec<FrameCoeffs<f64>> = rois
        .iter()
        .map(|roi| ar_frame_coeffs(roi, config.ar_order))
        .collect();

    let extraction = match &args.out {
        Some(_) => Some(ar_maps_from_coeffs(&video, &config, &coeffs)?),
        None => None,
    };
    let paths = match (&args.out, &extraction) {
        (Some(out), Some(extraction)) => write_maps(&extraction.maps, out)?,
        _ => Vec::new(),
    };
    if args.dump_coeffs {
        dump_coeffs(&coeffs, config.ar_order)?;
        return Ok(());
    }
    let extraction = extraction.expect("--out present when not dumping");
    emit_summary(&video, &extraction, paths)
}

/// Cuts pre-computed per-frame fits into segment maps.
fn ar_maps_from_coeffs(
    video: &VideoInput,
    config: &RunConfig,
    coeffs: &[FrameCoeffs<f64>],
) -> Result<Extraction> {
    let segments = window_segments(video.frames.len(), config.n, config.effective_stride())?;
    let mut maps = Vec::with_capacity(segments.len());
    for seg in &segments {
        maps.push(build_ar_map(
            &coeffs[seg.start_frame..seg.start_frame + seg.len],
            config.ar_order,
            *seg,
            video.source_id(),
            video.frames.fps(),
        )?);
    }
    Ok(Extraction {
        segments: segments.len(),
        maps,
        degenerate_channels: coeffs
            .iter()
            .map(|fc| fc.degenerate.iter().filter(|&&d| d).count())
            .sum(),
    })
}

/// Writes the raw per-frame coefficient table as CSV on stdout: one row per
/// (frame, color channel), coefficients lag 1 first.
fn dump_coeffs(coeffs: &[FrameCoeffs<f64>], order: usize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let header: Vec<String> = (1..=order).map(|i| format!("phi_{i}")).collect();
    writeln!(out, "frame,channel,{}", header.join(","))?;
    for (frame, fc) in coeffs.iter().enumerate() {
        for (channel, name) in ["r", "g", "b"].iter().enumerate() {
            let row: Vec<String> = fc.channels[channel].iter().map(f64::to_string).collect();
            writeln!(out, "{frame},{name},{}", row.join(","))?;
        }
    }
    Ok(())
}
