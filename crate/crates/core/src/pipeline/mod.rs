//! The localization method proper: CUTs from a difference series, a
//! camera-model training set from first frames, and the stroke state
//! machine with its minimum-length filter.

mod camdata;
mod cuts;
mod filter;
mod localize;

pub use camdata::build_cam_dataset;
pub use cuts::detect_cuts;
pub use filter::{filter_segments, sweep_filter, SweepRow};
pub use localize::{localize_strokes, localize_with, LocalizeOptions};

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

/// Sorted, unique CUT positions. A cut at `c` means frame `c` is the first
/// frame of a new shot, so 0 never appears.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CutsFile", into = "CutsFile")]
pub struct CutList {
    pub video_id: String,
    pub n_frames: u64,
    cuts: Vec<u64>,
}

impl CutList {
    pub fn new(video_id: impl Into<String>, n_frames: u64, cuts: Vec<u64>) -> Result<Self> {
        for w in cuts.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Consistency(format!("cuts must be strictly increasing ({} then {})", w[0], w[1])));
            }
        }
        if let Some(&c) = cuts.iter().find(|&&c| c == 0 || c >= n_frames) {
            return Err(Error::Range {
                index: c,
                what: format!("cut must lie in [1, {}]", n_frames.saturating_sub(1)),
            });
        }
        Ok(CutList {
            video_id: video_id.into(),
            n_frames,
            cuts,
        })
    }

    pub fn empty(video_id: impl Into<String>, n_frames: u64) -> Self {
        CutList {
            video_id: video_id.into(),
            n_frames,
            cuts: Vec::new(),
        }
    }

    pub fn cuts(&self) -> &[u64] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn contains(&self, index: u64) -> bool {
        self.cuts.binary_search(&index).is_ok()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        write_json_line(w, self)
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CutsFile {
    format_version: String,
    video_id: String,
    n_frames: u64,
    cuts: Vec<u64>,
}

impl TryFrom<CutsFile> for CutList {
    type Error = Error;

    fn try_from(f: CutsFile) -> Result<Self> {
        check_version(&f.format_version)?;
        CutList::new(f.video_id, f.n_frames, f.cuts)
    }
}

impl From<CutList> for CutsFile {
    fn from(c: CutList) -> Self {
        CutsFile {
            format_version: FORMAT_VERSION.into(),
            video_id: c.video_id,
            n_frames: c.n_frames,
            cuts: c.cuts,
        }
    }
}

/// Inclusive frame interval `[start, end]`; serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u64; 2]", into = "[u64; 2]")]
pub struct Segment {
    pub start: u64,
    pub end: u64,
}

impl Segment {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidParam(format!("segment start {start} exceeds end {end}")));
        }
        Ok(Segment { start, end })
    }

    /// `end - start`, the length used by the minimum-length filter.
    pub fn span(&self) -> u64 {
        self.end - self.start
    }

    /// Inclusive frame count.
    pub fn n_frames(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn overlaps(&self, other: &Segment) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl TryFrom<[u64; 2]> for Segment {
    type Error = Error;

    fn try_from([s, e]: [u64; 2]) -> Result<Self> {
        Segment::new(s, e)
    }
}

impl From<Segment> for [u64; 2] {
    fn from(s: Segment) -> Self {
        [s.start, s.end]
    }
}

/// The segments of one video, predicted or ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentSet {
    pub video_id: String,
    pub segments: Vec<Segment>,
}

#[derive(Serialize, Deserialize)]
struct SegmentsFile {
    format_version: String,
    video_id: String,
    segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn new(video_id: impl Into<String>, segments: Vec<Segment>) -> Self {
        SegmentSet {
            video_id: video_id.into(),
            segments,
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        write_json_line(
            w,
            &SegmentsFile {
                format_version: FORMAT_VERSION.into(),
                video_id: self.video_id.clone(),
                segments: self.segments.clone(),
            },
        )
    }

    /// Reads a segments file. Extra fields (annotation revision and
    /// timestamp) are ignored.
    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let f: SegmentsFile = serde_json::from_reader(r)?;
        check_version(&f.format_version)?;
        Ok(SegmentSet {
            video_id: f.video_id,
            segments: f.segments,
        })
    }

    /// True if segments are sorted and pairwise disjoint.
    pub fn is_sorted_disjoint(&self) -> bool {
        self.segments.windows(2).all(|w| w[0].end < w[1].start)
    }
}

pub(crate) fn check_version(v: &str) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Version(v.to_owned()));
    }
    Ok(())
}

pub(crate) fn write_json_line<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
