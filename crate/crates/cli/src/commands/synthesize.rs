//! `synthesize`: generate a labeled corpus of synthetic pulse videos.

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use faintprint::config::RunConfig;
use faintprint::ingest::{write_frame_sequence, write_landmarks};
use faintprint::synth::{synth_fake, synth_video, FakeKind, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{merge_labels, LabelRow};

/// Forgery mode applied to every generated video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FakeMode {
    /// Genuine pulse videos.
    None,
    /// Per-block Gaussian phase offsets in the pulse.
    Jitter,
    /// Downsample-upsample smoothing of every frame.
    Smooth,
    /// Phase jitter and smoothing combined.
    Both,
}

impl FakeMode {
    /// The canonical forgery parameters: jitter sigma of pi radians,
    /// smoothing factor 2.
    fn kind(self) -> FakeKind {
        match self {
            FakeMode::None => FakeKind::None,
            FakeMode::Jitter => FakeKind::PhaseJitter { sigma_rad: PI },
            FakeMode::Smooth => FakeKind::Smooth { factor: 2 },
            FakeMode::Both => FakeKind::Both {
                sigma_rad: PI,
                factor: 2,
            },
        }
    }

    /// Source-id prefix and label-file tag.
    fn tag(self) -> &'static str {
        match self {
            FakeMode::None => "real",
            FakeMode::Jitter => "jitter",
            FakeMode::Smooth => "smooth",
            FakeMode::Both => "both",
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Number of videos to generate.
    #[arg(long)]
    count: usize,

    /// Forgery mode for the whole batch.
    #[arg(long, value_enum, default_value_t = FakeMode::None)]
    fake: FakeMode,

    /// Corpus directory; one frame folder per video plus labels.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Frames per video.
    #[arg(long, default_value_t = 160)]
    frames: usize,

    /// Per-channel Gaussian sensor noise, gray levels.
    #[arg(long, default_value_t = 2.0)]
    noise_sigma: f64,

    /// Peak pulse amplitude, gray levels.
    #[arg(long, default_value_t = 2.0)]
    pulse_amplitude: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Summary {
    generated: usize,
    fake: String,
    corpus: String,
    labels: String,
}

pub fn run(args: &Args, config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    // Heart rates come from the run seed; each video then owns a derived
    // seed so the whole corpus is a pure function of (seed, count, fake).
    let mut hr_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let kind = args.fake.kind();
    let mut rows = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let hr_bpm = 50.0 + 100.0 * hr_rng.random::<f64>();
        let seed = config.seed.wrapping_add(i as u64);
        let source_id = format!("{}_{:03}", args.fake.tag(), i);
        let spec = SynthSpec {
            noise_sigma: args.noise_sigma,
            pulse_amplitude: args.pulse_amplitude,
            fake: kind,
            ..SynthSpec::new(hr_bpm, args.frames, seed, source_id.clone())
        };
        let (frames, landmarks) = if kind.is_fake() {
            synth_fake(&spec)?
        } else {
            synth_video(&spec)?
        };
        let dir = args.out.join(&source_id);
        write_frame_sequence(&dir, &frames)?;
        write_landmarks(&dir.join("landmarks.json"), &landmarks)?;
        eprintln!(
            "synthesized {source_id} ({hr_bpm:.1} bpm, {} frames)",
            args.frames
        );
        rows.push(LabelRow {
            source_id,
            label: if kind.is_fake() { "fake" } else { "real" }.into(),
            hr_bpm,
            seed,
        });
    }
    let labels_path = args.out.join("labels.csv");
    merge_labels(&labels_path, &rows)?;
    let summary = Summary {
        generated: args.count,
        fake: args.fake.tag().into(),
        corpus: args.out.display().to_string(),
        labels: labels_path.display().to_string(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
