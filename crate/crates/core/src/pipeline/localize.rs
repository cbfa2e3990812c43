use std::io::{Read, Seek};

use serde::{Deserialize, Serialize};

use super::{CutList, Segment};
use crate::error::{Error, Result};
use crate::features::{hog, HogParams};
use crate::ingest::FrameSource;
use crate::learners::LinearSvmModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizeOptions {
    /// Frames examined at the start of each shot.
    pub first_k: usize,
    /// Positive frames (out of `first_k`) needed for a positive shot.
    pub min_votes: usize,
    /// Close a segment still open after the last cut at the final frame
    /// instead of dropping it.
    pub close_trailing: bool,
    /// Also classify frame 0 as if it followed a cut.
    pub include_first_frame: bool,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        LocalizeOptions {
            first_k: 1,
            min_votes: 1,
            close_trailing: false,
            include_first_frame: false,
        }
    }
}

impl LocalizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.min_votes == 0 || self.min_votes > self.first_k {
            return Err(Error::InvalidParam(format!(
                "need 1 <= min_votes <= first_k, got min_votes={} first_k={}",
                self.min_votes, self.first_k
            )));
        }
        Ok(())
    }
}

/// The stroke state machine over shot starts.
///
/// `predict(i, cut)` returns `(cam1, cam2)` for the shot beginning at
/// `cuts[i]`. Outside a segment a CAM1 shot opens one. Inside, a non-CAM2
/// shot closes it just before the cut (and a CAM1 shot reopens at the cut),
/// while a CAM2 shot closes it at the end of that shot.
pub fn localize_with<F>(cuts: &[u64], n_frames: u64, close_trailing: bool, mut predict: F) -> Result<Vec<Segment>>
where
    F: FnMut(usize, u64) -> Result<(bool, bool)>,
{
    let mut segments = Vec::new();
    let mut open: Option<u64> = None;
    for (i, &cut) in cuts.iter().enumerate() {
        let (cam1, cam2) = predict(i, cut)?;
        match open {
            None => {
                if cam1 {
                    open = Some(cut);
                }
            }
            Some(start) if !cam2 => {
                segments.push(Segment::new(start, cut - 1)?);
                open = cam1.then_some(cut);
            }
            Some(start) => {
                let end = match cuts.get(i + 1) {
                    Some(next) => next - 1,
                    None => n_frames - 1,
                };
                segments.push(Segment::new(start, end)?);
                open = None;
            }
        }
    }
    if let (Some(start), true) = (open, close_trailing) {
        segments.push(Segment::new(start, n_frames - 1)?);
    }
    Ok(segments)
}

/// Runs both camera models on the first frame(s) of every shot and feeds
/// the state machine.
pub fn localize_strokes<R: Read + Seek>(
    source: &mut FrameSource<R>,
    cuts: &CutList,
    cam1: &LinearSvmModel,
    cam2: &LinearSvmModel,
    params: &HogParams,
    opts: &LocalizeOptions,
) -> Result<Vec<Segment>> {
    opts.validate()?;
    let n_frames = source.n_frames();
    if let Some(&bad) = cuts.cuts().iter().find(|&&c| c >= n_frames) {
        return Err(Error::Range {
            index: bad,
            what: format!("cut beyond the video's {n_frames} frames"),
        });
    }

    let mut starts: Vec<u64> = Vec::with_capacity(cuts.len() + 1);
    if opts.include_first_frame && n_frames > 0 {
        starts.push(0);
    }
    starts.extend_from_slice(cuts.cuts());

    let shot_ends: Vec<u64> = starts
        .iter()
        .skip(1)
        .copied()
        .chain(std::iter::once(n_frames))
        .collect();

    localize_with(&starts, n_frames, opts.close_trailing, |i, start| {
        let stop = shot_ends[i].min(start + opts.first_k as u64);
        let (mut votes1, mut votes2) = (0usize, 0usize);
        for f in start..stop {
            let frame = source.frame_at(f)?;
            let desc = hog(&frame, params)?;
            votes1 += cam1.predict(&desc.values)? as usize;
            votes2 += cam2.predict(&desc.values)? as usize;
        }
        Ok((votes1 >= opts.min_votes, votes2 >= opts.min_votes))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn seg(s: u64, e: u64) -> Segment {
        Segment::new(s, e).unwrap()
    }

    fn table(preds: &[(u64, bool, bool)]) -> HashMap<u64, (bool, bool)> {
        preds.iter().map(|&(c, a, b)| (c, (a, b))).collect()
    }

    #[test]
    fn cam1_then_cam2_then_nothing() {
        let t = table(&[(10, true, false), (50, false, true), (90, false, false)]);
        let out = localize_with(&[10, 50, 90], 120, false, |_, c| Ok(t[&c])).unwrap();
        assert_eq!(out, vec![seg(10, 89)]);
    }

    #[test]
    fn trailing_open_segment_is_dropped() {
        let t = table(&[(10, true, false), (50, true, false)]);
        let out = localize_with(&[10, 50], 100, false, |_, c| Ok(t[&c])).unwrap();
        assert_eq!(out, vec![seg(10, 49)]);
        let closed = localize_with(&[10, 50], 100, true, |_, c| Ok(t[&c])).unwrap();
        assert_eq!(closed, vec![seg(10, 49), seg(50, 99)]);
    }

    #[test]
    fn cam2_at_last_cut_runs_to_the_final_frame() {
        let t = table(&[(10, true, false), (50, false, true)]);
        let out = localize_with(&[10, 50], 100, false, |_, c| Ok(t[&c])).unwrap();
        assert_eq!(out, vec![seg(10, 99)]);
    }

    #[test]
    fn no_cuts_no_segments() {
        let out = localize_with(&[], 100, true, |_, _| -> Result<(bool, bool)> { unreachable!() }).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn invalid_vote_options() {
        let bad = LocalizeOptions {
            first_k: 3,
            min_votes: 4,
            ..LocalizeOptions::default()
        };
        assert!(bad.validate().is_err());
        assert!(LocalizeOptions { min_votes: 0, ..LocalizeOptions::default() }.validate().is_err());
        assert!(LocalizeOptions::default().validate().is_ok());
    }
}
