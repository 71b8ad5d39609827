//! `order-sweep`: train and evaluate the autoregression branch across model
//! orders and report AUC per order.

use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use faintprint::acbnet::TrainConfig;
use faintprint::config::RunConfig;
use faintprint::pipeline::{load_video, order_sweep, SweepVideo};

use crate::corpus::read_labels;

#[derive(clap::Args)]
pub struct Args {
    /// Corpus directory as written by `synthesize`: one frame folder per
    /// video plus labels.csv.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Comma-separated autoregression orders to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    orders: Vec<usize>,

    /// Also write the CSV to a file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub fn run(args: &Args, config: &RunConfig) -> Result<()> {
    let max_order = *args.orders.iter().max().expect("clap enforces one order");
    if args.orders.contains(&0) {
        bail!("autoregression orders must be positive");
    }
    let scan_len = 2 * config.roi_rows * config.roi_cols;
    if scan_len <= 4 * max_order {
        bail!(
            "order {max_order} too high for a {}x{} patch ({scan_len} samples per scan)",
            config.roi_rows,
            config.roi_cols
        );
    }

    let rows = read_labels(&args.corpus.join("labels.csv"))?;
    if rows.is_empty() {
        bail!("corpus {} has an empty labels.csv", args.corpus.display());
    }
    let mut videos = Vec::with_capacity(rows.len());
    for row in &rows {
        let dir = args.corpus.join(&row.source_id);
        let video = load_video(&dir, &dir.join("landmarks.json"), 30.0)
            .with_context(|| format!("cannot load corpus video {}", row.source_id))?;
        videos.push(SweepVideo::prepare(&video, row.fake(), config)?);
        eprintln!("prepared {}", row.source_id);
    }

    let train_config = TrainConfig {
        seed: config.seed,
        ..TrainConfig::default()
    };
    let points = order_sweep::<f64>(&videos, &args.orders, config, &train_config)?;

    let mut csv = String::from("order,auc\n");
    for point in &points {
        csv.push_str(&format!("{},{}\n", point.order, point.auc));
    }
    if let Some(path) = &args.out {
        std::fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let mut out = std::io::stdout().lock();
    write!(out, "{csv}")?;
    Ok(())
}
