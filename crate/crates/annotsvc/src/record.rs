use serde::{Deserialize, Serialize};
use serde_json::Value;
use strokeloc::pipeline::Segment;

/// Ground-truth segments for one video plus their edit revision. On disk
/// this is a segments file with two extra fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub format_version: String,
    pub video_id: String,
    pub segments: Vec<Segment>,
    /// Zero until the first accepted write.
    #[serde(default)]
    pub revision: u64,
    #[serde(default)]
    pub updated_at: Option<String>,
}

impl AnnotationRecord {
    pub fn empty(video_id: impl Into<String>) -> Self {
        AnnotationRecord {
            format_version: strokeloc::FORMAT_VERSION.into(),
            video_id: video_id.into(),
            segments: Vec::new(),
            revision: 0,
            updated_at: None,
        }
    }
}

/// A rejected request body, tied to the offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// A parsed and validated PUT body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationUpdate {
    /// Sorted by start.
    pub segments: Vec<Segment>,
    pub expected_revision: u64,
}

/// Parses `{"segments": [[s, e], ...], "revision": r}`. Other fields of a
/// record echoed back by a client are accepted; `video_id`, if present,
/// must match. Segments must satisfy `s <= e`, lie inside the video and
/// not overlap.
pub fn parse_update(body: &[u8], video_id: &str, n_frames: u64) -> Result<AnnotationUpdate, FieldError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| FieldError::new("body", format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| FieldError::new("body", "expected a JSON object"))?;

    if let Some(id) = obj.get("video_id") {
        if id.as_str() != Some(video_id) {
            return Err(FieldError::new("video_id", format!("does not match {video_id:?}")));
        }
    }
    let expected_revision = obj
        .get("revision")
        .ok_or_else(|| FieldError::new("revision", "missing"))?
        .as_u64()
        .ok_or_else(|| FieldError::new("revision", "expected a non-negative integer"))?;

    let raw = obj
        .get("segments")
        .ok_or_else(|| FieldError::new("segments", "missing"))?
        .as_array()
        .ok_or_else(|| FieldError::new("segments", "expected an array of [start, end] pairs"))?;
    let mut segments = Vec::with_capacity(raw.len());
    for (i, item) in raw.iter().enumerate() {
        let field = format!("segments[{i}]");
        let pair = item
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| FieldError::new(&field, "expected [start, end]"))?;
        let (Some(s), Some(e)) = (pair[0].as_u64(), pair[1].as_u64()) else {
            return Err(FieldError::new(&field, "bounds must be non-negative integers"));
        };
        if s > e {
            return Err(FieldError::new(&field, format!("start {s} exceeds end {e}")));
        }
        if e >= n_frames {
            return Err(FieldError::new(&field, format!("end {e} is past the last frame {}", n_frames.saturating_sub(1))));
        }
        segments.push((i, Segment { start: s, end: e }));
    }

    segments.sort_by_key(|&(_, seg)| seg);
    for w in segments.windows(2) {
        let ((i, a), (j, b)) = (w[0], w[1]);
        if a.overlaps(&b) {
            let (lo, hi) = (i.min(j), i.max(j));
            return Err(FieldError::new(format!("segments[{hi}]"), format!("overlaps segments[{lo}]")));
        }
    }
    Ok(AnnotationUpdate {
        segments: segments.into_iter().map(|(_, s)| s).collect(),
        expected_revision,
    })
}
