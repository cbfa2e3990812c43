use super::CutList;
use crate::error::{Error, Result};
use crate::features::DiffSeries;
use crate::learners::RandomForestModel;

/// Classifies each normalised difference `values[i] / feature_norm`; a
/// positive at `i` is a cut at `i + 1`.
pub fn detect_cuts(series: &DiffSeries, rf: &RandomForestModel, feature_norm: f64) -> Result<CutList> {
    if rf.n_features != 1 {
        return Err(Error::Shape {
            expected: 1,
            got: rf.n_features,
        });
    }
    if !(feature_norm > 0.0) {
        return Err(Error::InvalidParam("feature_norm must be positive".into()));
    }
    let mut cuts = Vec::new();
    for (i, &v) in series.values.iter().enumerate() {
        if rf.predict(&[v / feature_norm])?.0 == 1 {
            cuts.push(i as u64 + 1);
        }
    }
    CutList::new(series.video_id.clone(), series.values.len() as u64 + 1, cuts)
}
