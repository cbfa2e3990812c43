//! Scoring for CUT detection and for localized segments.
//!
//! CUTs are matched one-to-one against ground truth within a frame
//! tolerance; unmatched predictions are insertions and unmatched ground
//! truth are deletions. Segments are scored with temporal IoU over
//! inclusive frame ranges, averaged per video in both directions and then
//! weighted across videos by ground-truth segment count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{CutList, Segment, SegmentSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutEvalReport {
    pub matched: usize,
    /// False positives.
    pub insertions: usize,
    /// False negatives.
    pub deletions: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl CutEvalReport {
    /// Builds a report from raw counts. With nothing predicted precision is
    /// 1; with nothing to find recall is 1.
    pub fn from_counts(matched: usize, insertions: usize, deletions: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(matched, matched + insertions);
        let recall = ratio(matched, matched + deletions);
        let f_score = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        CutEvalReport {
            matched,
            insertions,
            deletions,
            precision,
            recall,
            f_score,
        }
    }

    /// Pools counts from several videos.
    pub fn merge(reports: &[CutEvalReport]) -> Self {
        let sum = |f: fn(&CutEvalReport) -> usize| reports.iter().map(f).sum();
        Self::from_counts(sum(|r| r.matched), sum(|r| r.insertions), sum(|r| r.deletions))
    }
}

/// Walks ground truth in order, pairing each with the nearest unused
/// prediction within `tolerance` frames (the smaller index on ties).
pub fn eval_cuts(pred: &CutList, gt: &CutList, tolerance: i64) -> Result<CutEvalReport> {
    if tolerance < 0 {
        return Err(Error::InvalidParam(format!("tolerance must be non-negative, got {tolerance}")));
    }
    if pred.video_id != gt.video_id {
        return Err(Error::Consistency(format!(
            "predicted cuts for {} scored against ground truth for {}",
            pred.video_id, gt.video_id
        )));
    }
    let tol = tolerance as u64;
    let p = pred.cuts();
    let mut used = vec![false; p.len()];
    let mut matched = 0;
    for &g in gt.cuts() {
        let lo = p.partition_point(|&x| x < g.saturating_sub(tol));
        let mut best: Option<(u64, usize)> = None;
        for (j, &x) in p.iter().enumerate().skip(lo) {
            if x > g.saturating_add(tol) {
                break;
            }
            if used[j] {
                continue;
            }
            let dist = x.abs_diff(g);
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, j));
            }
        }
        if let Some((_, j)) = best {
            used[j] = true;
            matched += 1;
        }
    }
    Ok(CutEvalReport::from_counts(matched, p.len() - matched, gt.len() - matched))
}

/// `|a ∩ b| / |a ∪ b|` with inclusive frame counts.
pub fn segment_iou(a: &Segment, b: &Segment) -> f64 {
    let inter_start = a.start.max(b.start);
    let inter_end = a.end.min(b.end);
    let inter = if inter_start <= inter_end {
        inter_end - inter_start + 1
    } else {
        0
    };
    let union = a.n_frames() + b.n_frames() - inter;
    inter as f64 / union as f64
}

fn mean_best_overlap(from: &[Segment], against: &[Segment]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|s| against.iter().map(|t| segment_iou(s, t)).fold(0.0, f64::max))
        .sum();
    total / from.len() as f64
}

/// Per-video TIoU: the mean of (each ground-truth segment's best IoU over
/// predictions) and (each prediction's best IoU over ground truth).
/// Both sets empty scores 1; exactly one empty scores 0.
pub fn video_tiou(pred: &SegmentSet, gt: &SegmentSet) -> Result<f64> {
    if pred.video_id != gt.video_id {
        return Err(Error::Consistency(format!(
            "predictions for {} scored against ground truth for {}",
            pred.video_id, gt.video_id
        )));
    }
    Ok(match (pred.segments.is_empty(), gt.segments.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            0.5 * (mean_best_overlap(&gt.segments, &pred.segments) + mean_best_overlap(&pred.segments, &gt.segments))
        }
    })
}

/// `Σ n_i TIoU_i / Σ n_i`.
pub fn weighted_mean_tiou(per_video: &[(f64, usize)]) -> Result<f64> {
    let weight: usize = per_video.iter().map(|&(_, n)| n).sum();
    if weight == 0 {
        return Err(Error::UndefinedMean);
    }
    let total: f64 = per_video.iter().map(|&(t, n)| n as f64 * t).sum();
    Ok(total / weight as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTiou {
    pub video_id: String,
    pub tiou: f64,
    /// Ground-truth segment count, the video's weight.
    pub n_gt: usize,
    pub n_pred: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiouReport {
    pub per_video: Vec<VideoTiou>,
    pub weighted_mean: f64,
    /// Number of videos scored.
    pub n_videos: usize,
}

/// Scores every ground-truth video, treating a missing prediction set as
/// empty. Rows are sorted by video id.
pub fn evaluate_tiou(predictions: &[SegmentSet], ground_truth: &[SegmentSet]) -> Result<TiouReport> {
    let preds: BTreeMap<&str, &SegmentSet> = predictions.iter().map(|p| (p.video_id.as_str(), p)).collect();
    let mut gts: Vec<&SegmentSet> = ground_truth.iter().collect();
    gts.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let mut per_video = Vec::with_capacity(gts.len());
    for gt in gts {
        let empty = SegmentSet::new(gt.video_id.clone(), Vec::new());
        let pred = preds.get(gt.video_id.as_str()).copied().unwrap_or(&empty);
        per_video.push(VideoTiou {
            video_id: gt.video_id.clone(),
            tiou: video_tiou(pred, gt)?,
            n_gt: gt.segments.len(),
            n_pred: pred.segments.len(),
        });
    }
    let pairs: Vec<(f64, usize)> = per_video.iter().map(|v| (v.tiou, v.n_gt)).collect();
    Ok(TiouReport {
        weighted_mean: weighted_mean_tiou(&pairs)?,
        n_videos: per_video.len(),
        per_video,
    })
}
