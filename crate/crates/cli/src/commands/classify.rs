//! `classify`: score fingerprint maps with trained models.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use faintprint::acbnet::aggregate_video;
use faintprint::fingerprint::{read_map, FingerprintMap, MapKind};
use faintprint::pipeline::{fuse_predictions, score_maps};
use faintprint::{Model, Prediction};
use serde::Serialize;

use crate::corpus::find_maps;

#[derive(clap::Args)]
pub struct Args {
    /// Directory of fingerprint maps (searched recursively).
    #[arg(long, value_name = "DIR")]
    maps: PathBuf,

    /// Trained pulse-branch model; at least one model is required.
    #[arg(long, value_name = "FILE", required_unless_present = "ar_model")]
    ppg_model: Option<PathBuf>,

    /// Trained autoregression-branch model.
    #[arg(long, value_name = "FILE")]
    ar_model: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SegmentOut {
    source_id: String,
    start_frame: usize,
    score: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VideoOut {
    source_id: String,
    score: f64,
    fake: bool,
}

#[derive(Serialize)]
struct Output {
    segments: Vec<SegmentOut>,
    videos: Vec<VideoOut>,
}

/// Scores every map whose kind has a loaded model. Maps of a kind without a
/// model are skipped with a note on stderr.
fn score_kind(
    model: &Option<Model>,
    maps: &[FingerprintMap],
    kind: MapKind,
) -> Result<Vec<Prediction>> {
    let of_kind: Vec<&FingerprintMap> = maps.iter().filter(|m| m.kind == kind).collect();
    match model {
        Some(model) if !of_kind.is_empty() => Ok(score_maps(model, &of_kind)?),
        Some(_) | None => {
            if !of_kind.is_empty() {
                eprintln!(
                    "note: skipping {} {} map(s); no model for that branch",
                    of_kind.len(),
                    kind.tag()
                );
            }
            Ok(Vec::new())
        }
    }
}

pub fn run(args: &Args, _config: &faintprint::RunConfig) -> Result<()> {
    let ppg_model = args.ppg_model.as_deref().map(Model::load).transpose()?;
    let ar_model = args.ar_model.as_deref().map(Model::load).transpose()?;

    let mut maps = Vec::new();
    for path in find_maps(&args.maps)? {
        maps.push(read_map(&path)?);
    }
    let ppg_preds = score_kind(&ppg_model, &maps, MapKind::Ppg)?;
    let ar_preds = score_kind(&ar_model, &maps, MapKind::Ar)?;
    if ppg_preds.is_empty() && ar_preds.is_empty() {
        bail!("no map matched a loaded model");
    }
    let fused = fuse_predictions(&ppg_preds, &ar_preds)?;

    let mut by_video: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for seg in &fused {
        by_video.entry(&seg.source_id).or_default().push(seg.score);
    }
    let videos = by_video
        .into_iter()
        .map(|(source_id, scores)| {
            let verdict = aggregate_video(&scores)?;
            Ok(VideoOut {
                source_id: source_id.to_string(),
                score: verdict.score,
                fake: verdict.fake,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let segments = fused
        .into_iter()
        .map(|seg| SegmentOut {
            source_id: seg.source_id,
            start_frame: seg.start_frame,
            score: seg.score,
        })
        .collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&Output { segments, videos })?
    );
    Ok(())
}
