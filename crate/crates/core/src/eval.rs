//! Scoring, ROC analysis, and leakage-safe dataset splitting.
//!
//! Classifier quality is summarized two ways: threshold-free (area under the
//! ROC curve, computed by the standard threshold-sweep with correct tie
//! handling) and thresholded at one half. Splits operate on whole videos so
//! that segments of one recording never straddle the train/test boundary.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::acbnet::aggregate_video;

/// Errors raised while splitting or scoring datasets.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no scored segments supplied")]
    Empty,
    #[error("sources present in both train and test splits: {}", sources.join(", "))]
    LeakedSources { sources: Vec<String> },
    #[error("source {source_id} carries segments with conflicting labels")]
    InconsistentLabel { source_id: String },
    #[error("cannot split {videos} videos into two non-empty halves")]
    TooFewVideos { videos: usize },
}

/// One segment score paired with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegment {
    pub source_id: String,
    /// Classifier output in `[0, 1]`; higher means more likely forged.
    pub score: f64,
    /// Ground truth: `true` when the source video is forged.
    pub fake: bool,
}

impl ScoredSegment {
    pub fn new(source_id: impl Into<String>, score: f64, fake: bool) -> Self {
        Self {
            source_id: source_id.into(),
            score,
            fake,
        }
    }
}

fn sorted_desc(scores: &[(f64, bool)]) -> Vec<(f64, bool)> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores must be comparable"));
    v
}

/// Area under the ROC curve via a descending threshold sweep with trapezoids
/// bridging tied scores. Returns `None` when only one class is present.
pub fn roc_auc(scores: &[(f64, bool)]) -> Option<f64> {
    let pos = scores.iter().filter(|(_, y)| *y).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let sorted = sorted_desc(scores);
    let mut area = 0.0f64;
    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut tp_prev, mut fp_prev) = (0u64, 0u64);
    let mut last_score = f64::INFINITY;
    for (s, y) in sorted {
        if s != last_score {
            area += (fp - fp_prev) as f64 * (tp + tp_prev) as f64 / 2.0;
            last_score = s;
            tp_prev = tp;
            fp_prev = fp;
        }
        if y {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    area += (fp - fp_prev) as f64 * (tp + tp_prev) as f64 / 2.0;
    Some(area / (pos as f64 * neg as f64))
}

/// ROC operating points as `(threshold, true positive rate, false positive
/// rate)` rows in descending threshold order, one per distinct score.
///
/// A segment is called forged when `score >= threshold`, so the final row is
/// always `(lowest score, 1, 1)`. Empty when only one class is present.
pub fn roc_curve(scores: &[(f64, bool)]) -> Vec<(f64, f64, f64)> {
    let pos = scores.iter().filter(|(_, y)| *y).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Vec::new();
    }
    let sorted = sorted_desc(scores);
    let mut rows = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        rows.push((s, tp as f64 / pos as f64, fp as f64 / neg as f64));
    }
    rows
}

/// ROC curve as `(false positive rate, true positive rate)` points, one per
/// distinct threshold, beginning at `(0, 0)` and ending at `(1, 1)`.
pub fn roc_points(scores: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let curve = roc_curve(scores);
    if curve.is_empty() {
        return Vec::new();
    }
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(curve.into_iter().map(|(_, tpr, fpr)| (fpr, tpr)));
    pts
}

/// Threshold-at-one-half summary of a set of scored segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchMetrics {
    pub segments: usize,
    /// `None` when the set contains a single class.
    pub auc: Option<f64>,
    pub accuracy: f64,
}

impl BranchMetrics {
    /// Computes AUC and accuracy (score at or above one half counts as a
    /// forged call) over the given segments.
    pub fn from_scored(scored: &[ScoredSegment]) -> Result<Self, EvalError> {
        if scored.is_empty() {
            return Err(EvalError::Empty);
        }
        let pairs: Vec<(f64, bool)> = scored.iter().map(|s| (s.score, s.fake)).collect();
        let correct = scored.iter().filter(|s| (s.score >= 0.5) == s.fake).count();
        Ok(Self {
            segments: scored.len(),
            auc: roc_auc(&pairs),
            accuracy: correct as f64 / scored.len() as f64,
        })
    }
}

/// Video-level summary after averaging each source's segment scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VideoMetrics {
    pub videos: usize,
    pub accuracy: f64,
    /// `None` when all videos share one class.
    pub auc: Option<f64>,
}

/// Groups segments by source, averages each source's scores, and measures
/// accuracy of the resulting verdicts. Every segment of a source must carry
/// the same ground-truth label.
pub fn video_metrics(scored: &[ScoredSegment]) -> Result<VideoMetrics, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, bool)> = BTreeMap::new();
    for s in scored {
        let entry = groups
            .entry(&s.source_id)
            .or_insert_with(|| (Vec::new(), s.fake));
        if entry.1 != s.fake {
            return Err(EvalError::InconsistentLabel {
                source_id: s.source_id.clone(),
            });
        }
        entry.0.push(s.score);
    }
    let mut correct = 0usize;
    let mut pairs = Vec::with_capacity(groups.len());
    for (scores, truth) in groups.values() {
        let verdict = aggregate_video(scores).expect("group is non-empty");
        if verdict.fake == *truth {
            correct += 1;
        }
        pairs.push((verdict.score, *truth));
    }
    Ok(VideoMetrics {
        videos: groups.len(),
        accuracy: correct as f64 / groups.len() as f64,
        auc: roc_auc(&pairs),
    })
}

/// Splits video identifiers into train and test sets by shuffling with the
/// given seed and taking `round(train_frac * n)` for training, clamped so
/// both sides stay non-empty. Splitting happens at video granularity, never
/// by segment.
pub fn split_videos(
    ids: &[String],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), EvalError> {
    assert!(
        (0.0..=1.0).contains(&train_frac),
        "train fraction must lie in [0, 1], got {train_frac}"
    );
    if ids.len() < 2 {
        return Err(EvalError::TooFewVideos { videos: ids.len() });
    }
    let mut shuffled = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let n_train = ((train_frac * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}

/// Verifies that no source appears on both sides of a split.
pub fn check_leakage(train: &[String], test: &[String]) -> Result<(), EvalError> {
    let train_set: BTreeSet<&str> = train.iter().map(String::as_str).collect();
    let leaked: Vec<String> = test
        .iter()
        .filter(|id| train_set.contains(id.as_str()))
        .cloned()
        .collect();
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(EvalError::LeakedSources { sources: leaked })
    }
}

/// Full evaluation summary: per-branch segment metrics, fused segment
/// metrics, and the video-level roll-up of the fused scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppg: Option<BranchMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ar: Option<BranchMetrics>,
    pub fused: BranchMetrics,
    pub video: VideoMetrics,
}
