//! `train`: fit the two-branch classifier on a labeled fingerprint corpus.

use std::path::PathBuf;

use anyhow::{Context, Result};
use faintprint::acbnet::TrainConfig;
use faintprint::config::RunConfig;
use faintprint::pipeline::run_map_experiment;
use serde::{Deserialize, Serialize};

use crate::corpus::{label_lookup, load_labeled_maps, read_labels};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of fingerprint maps (searched recursively).
    #[arg(long, value_name = "DIR")]
    maps: PathBuf,

    /// labels.csv with one row per source video.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,

    /// Directory for model, split, and report files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Share of videos assigned to the training side.
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,

    /// Training epochs.
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,

    /// Also train on left-right mirrored copies of every map.
    #[arg(long)]
    augment_flip: bool,
}

/// The video-identity split used for training, written alongside the models
/// so later evaluations can reuse the exact same test side.
#[derive(Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn run(args: &Args, config: &RunConfig) -> Result<()> {
    let labels = label_lookup(&read_labels(&args.labels)?)?;
    let maps = load_labeled_maps(&args.maps, &labels)?;
    eprintln!("training on {} maps", maps.len());
    let train_config = TrainConfig {
        epochs: args.epochs,
        augment_flip: args.augment_flip,
        seed: config.seed,
        ..TrainConfig::default()
    };
    let outcome = run_map_experiment::<f64>(&maps, args.train_frac, config, &train_config)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    if let Some(model) = &outcome.ppg_model {
        model.save(&args.out.join("model_ppg.json"))?;
    }
    if let Some(model) = &outcome.ar_model {
        model.save(&args.out.join("model_ar.json"))?;
    }
    let split = SplitFile {
        train: outcome.train_ids.clone(),
        test: outcome.test_ids.clone(),
    };
    std::fs::write(
        args.out.join("split.json"),
        serde_json::to_string_pretty(&split)?,
    )?;
    let report = serde_json::to_string_pretty(&outcome.report)?;
    std::fs::write(args.out.join("report.json"), &report)?;
    eprintln!(
        "trained on {} videos, evaluated on {}",
        outcome.train_ids.len(),
        outcome.test_ids.len()
    );
    println!("{report}");
    Ok(())
}
