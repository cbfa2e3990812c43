use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Segment, SegmentSet};
use crate::error::{Error, Result};
use crate::evalkit::evaluate_tiou;

/// Keeps segments with `end - start >= min_span`, in order.
pub fn filter_segments(segments: &[Segment], min_span: u64) -> Vec<Segment> {
    segments.iter().copied().filter(|s| s.span() >= min_span).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub t: u64,
    pub weighted_mean_tiou: f64,
    /// Predicted segments surviving the filter, over all videos.
    pub n_segments: usize,
}

/// Filters every video's predictions at each threshold and scores them
/// against ground truth with the weighted mean TIoU.
pub fn sweep_filter(predictions: &[SegmentSet], ground_truth: &[SegmentSet], t_values: &[u64]) -> Result<Vec<SweepRow>> {
    if t_values.is_empty() {
        return Err(Error::InvalidParam("threshold list is empty".into()));
    }
    let preds: BTreeMap<&str, &SegmentSet> = predictions.iter().map(|p| (p.video_id.as_str(), p)).collect();
    t_values
        .iter()
        .map(|&t| {
            let filtered: Vec<SegmentSet> = ground_truth
                .iter()
                .map(|gt| {
                    let segs = preds
                        .get(gt.video_id.as_str())
                        .map(|p| filter_segments(&p.segments, t))
                        .unwrap_or_default();
                    SegmentSet::new(gt.video_id.clone(), segs)
                })
                .collect();
            let report = evaluate_tiou(&filtered, ground_truth)?;
            Ok(SweepRow {
                t,
                weighted_mean_tiou: report.weighted_mean,
                n_segments: filtered.iter().map(|s| s.segments.len()).sum(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(s: u64, e: u64) -> Segment {
        Segment::new(s, e).unwrap()
    }

    #[test]
    fn threshold_fixtures() {
        let xs = vec![seg(0, 60), seg(100, 130)];
        assert_eq!(filter_segments(&xs, 0), xs);
        assert_eq!(filter_segments(&[seg(0, 59)], 60), vec![]);
        assert_eq!(filter_segments(&xs, 60), vec![seg(0, 60)]);
    }

    #[test]
    fn sweep_on_perfect_predictions() {
        let gt = vec![SegmentSet::new("a", vec![seg(0, 200), seg(300, 450)])];
        let rows = sweep_filter(&gt, &gt, &[0, 50, 100]).unwrap();
        assert!(rows.iter().all(|r| r.weighted_mean_tiou == 1.0));
        assert!(sweep_filter(&gt, &gt, &[]).is_err());
    }

    #[test]
    fn videos_without_predictions_score_zero() {
        let gt = vec![SegmentSet::new("a", vec![seg(0, 100)]), SegmentSet::new("b", vec![seg(0, 100)])];
        let pred = vec![SegmentSet::new("a", vec![seg(0, 100)])];
        let rows = sweep_filter(&pred, &gt, &[0]).unwrap();
        assert_eq!(rows[0].weighted_mean_tiou, 0.5);
    }

    proptest! {
        #[test]
        fn idempotent_and_monotone(spans in prop::collection::vec((0u64..1000, 0u64..150), 0..30), t1 in 0u64..120, t2 in 0u64..120) {
            let segs: Vec<Segment> = spans.iter().map(|&(s, d)| seg(s, s + d)).collect();
            let once = filter_segments(&segs, t1);
            prop_assert_eq!(filter_segments(&once, t1), once.clone());
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            prop_assert!(filter_segments(&segs, hi).len() <= filter_segments(&segs, lo).len());
        }
    }
}
