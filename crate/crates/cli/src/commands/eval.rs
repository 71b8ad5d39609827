//! `eval`: measure trained models on a labeled fingerprint corpus.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use faintprint::eval::{
    check_leakage, roc_curve, split_videos, video_metrics, BranchMetrics, ScoredSegment,
};
use faintprint::fingerprint::MapKind;
use faintprint::pipeline::{fuse_predictions, score_maps, LabeledMap};
use faintprint::{EvalReport, Model, Prediction};

use super::train::SplitFile;
use crate::corpus::{label_lookup, load_labeled_maps, read_labels};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of fingerprint maps (searched recursively).
    #[arg(long, value_name = "DIR")]
    maps: PathBuf,

    /// labels.csv with one row per source video.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,

    /// Trained pulse-branch model; at least one model is required.
    #[arg(long, value_name = "FILE", required_unless_present = "ar_model")]
    ppg_model: Option<PathBuf>,

    /// Trained autoregression-branch model.
    #[arg(long, value_name = "FILE")]
    ar_model: Option<PathBuf>,

    /// Reuse a split.json written by `train`; evaluation runs on its test
    /// side. Without it a fresh 70/30 video-identity split is drawn from the
    /// run seed.
    #[arg(long, value_name = "FILE")]
    split: Option<PathBuf>,

    /// Also write the fused ROC curve as CSV (columns threshold, tpr, fpr).
    #[arg(long, value_name = "FILE")]
    roc: Option<PathBuf>,
}

/// The test-side video ids: either the stored split (leakage-checked) or a
/// fresh seeded split over the corpus at hand.
fn test_ids(args: &Args, maps: &[LabeledMap], seed: u64) -> Result<Vec<String>> {
    if let Some(path) = &args.split {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read split file {}", path.display()))?;
        let split: SplitFile = serde_json::from_str(&text)
            .with_context(|| format!("malformed split file {}", path.display()))?;
        check_leakage(&split.train, &split.test).map_err(faintprint::PipelineError::from)?;
        return Ok(split.test);
    }
    let mut ids: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for lm in maps {
        if seen.insert(lm.map.source_id.clone()) {
            ids.push(lm.map.source_id.clone());
        }
    }
    let (_, test) = split_videos(&ids, 0.7, seed).map_err(faintprint::PipelineError::from)?;
    Ok(test)
}

fn scored(preds: &[Prediction], maps: &[&LabeledMap]) -> Vec<ScoredSegment> {
    let labels: std::collections::BTreeMap<&str, bool> = maps
        .iter()
        .map(|lm| (lm.map.source_id.as_str(), lm.fake))
        .collect();
    preds
        .iter()
        .map(|p| ScoredSegment::new(p.source_id.clone(), p.p_fake, labels[p.source_id.as_str()]))
        .collect()
}

pub fn run(args: &Args, config: &faintprint::RunConfig) -> Result<()> {
    let labels = label_lookup(&read_labels(&args.labels)?)?;
    let maps = load_labeled_maps(&args.maps, &labels)?;
    let ppg_model = args.ppg_model.as_deref().map(Model::load).transpose()?;
    let ar_model = args.ar_model.as_deref().map(Model::load).transpose()?;

    let test: BTreeSet<String> = test_ids(args, &maps, config.seed)?.into_iter().collect();
    let test_maps: Vec<&LabeledMap> = maps
        .iter()
        .filter(|lm| test.contains(&lm.map.source_id))
        .collect();
    if test_maps.is_empty() {
        bail!("no map belongs to a test-side video");
    }
    eprintln!(
        "evaluating {} test maps across {} videos",
        test_maps.len(),
        test.len()
    );

    let branch = |model: &Option<Model>,
                  kind: MapKind|
     -> Result<Option<(Vec<Prediction>, Vec<ScoredSegment>)>> {
        let Some(model) = model else { return Ok(None) };
        let of_kind: Vec<&LabeledMap> = test_maps
            .iter()
            .copied()
            .filter(|lm| lm.map.kind == kind)
            .collect();
        if of_kind.is_empty() {
            bail!(
                "a {} model was given but the corpus has no such maps",
                kind.tag()
            );
        }
        let refs: Vec<_> = of_kind.iter().map(|lm| &lm.map).collect();
        let preds = score_maps(model, &refs)?;
        let scored = scored(&preds, &of_kind);
        Ok(Some((preds, scored)))
    };
    let ppg = branch(&ppg_model, MapKind::Ppg)?;
    let ar = branch(&ar_model, MapKind::Ar)?;

    let empty: Vec<Prediction> = Vec::new();
    let fused = fuse_predictions(
        ppg.as_ref().map_or(&empty, |(p, _)| p),
        ar.as_ref().map_or(&empty, |(p, _)| p),
    )?;
    let fused_scored: Vec<ScoredSegment> = fused
        .iter()
        .map(|f| ScoredSegment::new(f.source_id.clone(), f.score, labels[f.source_id.as_str()]))
        .collect();

    if let Some(path) = &args.roc {
        let pairs: Vec<(f64, bool)> = fused_scored.iter().map(|s| (s.score, s.fake)).collect();
        let mut text = String::from("threshold,tpr,fpr\n");
        for (threshold, tpr, fpr) in roc_curve(&pairs) {
            text.push_str(&format!("{threshold},{tpr},{fpr}\n"));
        }
        std::fs::write(path, text)
            .with_context(|| format!("cannot write ROC curve {}", path.display()))?;
    }

    let to_metrics = |s: &[ScoredSegment]| BranchMetrics::from_scored(s);
    let report = EvalReport {
        ppg: ppg.as_ref().map(|(_, s)| to_metrics(s)).transpose()?,
        ar: ar.as_ref().map(|(_, s)| to_metrics(s)).transpose()?,
        fused: BranchMetrics::from_scored(&fused_scored)?,
        video: video_metrics(&fused_scored)?,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
