//! `estimate-hr`: recover the subject's heart rate from one video.

use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use faintprint::config::RunConfig;
use faintprint::pipeline::estimate_heart_rate;

use super::extract::VideoArgs;

#[derive(clap::Args)]
pub struct Args {
    #[command(flatten)]
    video: VideoArgs,

    /// Also write the pseudo-spectrum as CSV (columns hz, power).
    #[arg(long, value_name = "FILE")]
    spectrum: Option<PathBuf>,
}

pub fn run(args: &Args, config: &RunConfig) -> Result<()> {
    let video = args.video.load()?;
    let est = estimate_heart_rate::<f64>(&video, config)?;
    if let Some(path) = &args.spectrum {
        let mut text = String::from("hz,power\n");
        for (hz, power) in &est.pseudo_spectrum {
            text.push_str(&format!("{hz},{power}\n"));
        }
        std::fs::write(path, text)
            .with_context(|| format!("cannot write spectrum {}", path.display()))?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{}",
        serde_json::json!({ "bpm": est.bpm, "peak_hz": est.peak_hz })
    )?;
    Ok(())
}
