use std::io::{Read, Seek};

use super::CutList;
use crate::error::{Error, Result};
use crate::features::{hog, HogParams};
use crate::ingest::FrameSource;

/// HOG samples for a camera model.
///
/// Every cut in a video's list contributes the HOG of its first frame,
/// labelled 1 when listed in that video's `positives` and 0 otherwise.
/// Frame 0 is included only when it is listed as a positive. The three
/// slices are aligned by position; output is ordered by video id, then
/// frame index.
pub fn build_cam_dataset<R: Read + Seek>(
    videos: &mut [FrameSource<R>],
    cuts: &[CutList],
    positives: &[Vec<u64>],
    params: &HogParams,
) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    if videos.len() != cuts.len() || videos.len() != positives.len() {
        return Err(Error::Consistency(format!(
            "{} videos, {} cut lists and {} positive lists",
            videos.len(),
            cuts.len(),
            positives.len()
        )));
    }

    let mut order: Vec<usize> = (0..videos.len()).collect();
    order.sort_by(|&a, &b| videos[a].meta().video_id.cmp(&videos[b].meta().video_id));

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for v in order {
        let (cut_list, pos) = (&cuts[v], &positives[v]);
        if cut_list.video_id != videos[v].meta().video_id {
            return Err(Error::Consistency(format!(
                "cut list for {} paired with video {}",
                cut_list.video_id,
                videos[v].meta().video_id
            )));
        }
        if let Some(&bad) = pos.iter().find(|&&p| p != 0 && !cut_list.contains(p)) {
            return Err(Error::Consistency(format!(
                "positive frame {bad} of {} is not a cut",
                cut_list.video_id
            )));
        }
        let mut indices: Vec<u64> = cut_list.cuts().to_vec();
        if pos.contains(&0) {
            indices.insert(0, 0);
        }
        for idx in indices {
            let frame = videos[v].frame_at(idx)?;
            samples.push(hog(&frame, params)?.values);
            labels.push(u8::from(pos.contains(&idx)));
        }
    }
    Ok((samples, labels))
}
