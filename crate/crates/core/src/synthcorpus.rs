//! Seeded synthetic videos with known CUTs and stroke segments.
//!
//! Every video is a sequence of hard-cut shots of three classes:
//!
//! * `Cam1` (class A): vertical intensity ramp, vertical stripes and a
//!   bright vertical bar.
//! * `Cam2` (class B): horizontal intensity ramp, horizontal stripes and a
//!   small bright disc.
//! * `Other` (class C): flat background with random discs.
//!
//! A `Cam1` shot, together with an immediately following `Cam2` shot if
//! there is one, forms a ground-truth stroke. Consecutive shots sit at
//! intensity levels at least [`MIN_LEVEL_GAP`] apart so every cut is an
//! abrupt histogram change. The first and last shots are never `Cam1`,
//! which keeps every stroke reachable from a cut and closed by a later one.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Frame, GryWriter, VideoMeta};
use crate::pipeline::{write_json_line, CutList, Segment, SegmentSet};
use crate::workspace::{ShotLabels, Splits, Workspace};

pub const MIN_LEVEL_GAP: i32 = 70;
const RAMP_SPAN: f64 = 40.0;
const STAMP_GAIN: f64 = 50.0;
const STRIPE_GAIN: f64 = 16.0;
const STRIPE_HALF_PERIOD: u32 = 4;
// Wide enough that every level has a neighbour at least MIN_LEVEL_GAP away.
const LEVEL_RANGE: (i32, i32) = (10, 150);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotClass {
    Cam1,
    Cam2,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_videos: usize,
    pub frames_per_video: u64,
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    /// Inclusive shot length range in frames.
    pub shot_len_range: (u64, u64),
    /// Probabilities of `Cam1`, `Cam2` and `Other` shots.
    pub class_mix: [f64; 3],
    /// Per-pixel Gaussian noise standard deviation, in intensity levels.
    pub noise_level: f64,
    /// Fraction of videos (taken from the end of the sorted id list) held
    /// out for evaluation.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_videos: 20,
            frames_per_video: 3000,
            width: 64,
            height: 48,
            fps: 25,
            shot_len_range: (40, 160),
            class_mix: [0.35, 0.3, 0.35],
            noise_level: 2.0,
            test_fraction: 0.3,
            seed: 42,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.shot_len_range;
        if lo < 2 || hi < lo {
            return Err(Error::Config(format!("shot length range [{lo}, {hi}] needs 2 <= min <= max")));
        }
        if self.frames_per_video < lo {
            return Err(Error::Config("videos must hold at least one minimum-length shot".into()));
        }
        if self.class_mix.iter().any(|p| !(*p >= 0.0)) || (self.class_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("class proportions must be non-negative and sum to 1".into()));
        }
        if !(self.noise_level >= 0.0) || !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::Config("noise must be >= 0 and test_fraction in [0, 1]".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::Config(format!("frames must be at least 16x16 (got {}x{})", self.width, self.height)));
        }
        VideoMeta::new("spec", self.width, self.height, self.fps, 0)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn video_id(index: usize) -> String {
        format!("synth_{index:03}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub start: u64,
    pub len: u64,
    pub class: ShotClass,
}

impl Shot {
    pub fn end(&self) -> u64 {
        self.start + self.len - 1
    }
}

/// Ground truth for one generated video.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub meta: VideoMeta,
    pub shots: Vec<Shot>,
    pub cuts: CutList,
    pub segments: Vec<Segment>,
}

/// Per-shot appearance parameters.
#[derive(Debug, Clone)]
struct ShotLook {
    level: f64,
    stamp: Stamp,
}

#[derive(Debug, Clone)]
enum Stamp {
    /// Vertical stripes plus a bright vertical bar at column `bar_x`.
    Cam1 { phase: u32, bar_x: f64 },
    /// Horizontal stripes plus a bright disc.
    Cam2 { phase: u32, disc: (f64, f64, f64) },
    /// Discs `(cx, cy, r, gain)` on a flat background.
    Other { discs: Vec<(f64, f64, f64, f64)> },
}

fn video_rng(spec: &CorpusSpec, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_class(rng: &mut ChaCha8Rng, mix: &[f64; 3]) -> ShotClass {
    let u: f64 = rng.random();
    if u < mix[0] {
        ShotClass::Cam1
    } else if u < mix[0] + mix[1] {
        ShotClass::Cam2
    } else {
        ShotClass::Other
    }
}

fn plan_shots(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Vec<Shot> {
    let (lo, hi) = spec.shot_len_range;
    let mut shots: Vec<Shot> = Vec::new();
    let mut start = 0;
    while start < spec.frames_per_video {
        let remaining = spec.frames_per_video - start;
        let len = rng.random_range(lo..=hi);
        let len = if remaining - len.min(remaining) < lo { remaining } else { len };
        shots.push(Shot {
            start,
            len,
            class: draw_class(rng, &spec.class_mix),
        });
        start += len;
    }

    let n = shots.len();
    shots[0].class = ShotClass::Other;
    if shots[n - 1].class == ShotClass::Cam1 {
        shots[n - 1].class = ShotClass::Other;
    }
    let has_stroke = shots.iter().any(|s| s.class == ShotClass::Cam1);
    if !has_stroke && n >= 3 {
        shots[1].class = ShotClass::Cam1;
    }
    shots
}

fn stroke_segments(shots: &[Shot]) -> Vec<Segment> {
    let mut out = Vec::new();
    for (i, s) in shots.iter().enumerate() {
        if s.class != ShotClass::Cam1 {
            continue;
        }
        let end = match shots.get(i + 1) {
            Some(next) if next.class == ShotClass::Cam2 => next.end(),
            _ => s.end(),
        };
        out.push(Segment { start: s.start, end });
    }
    out
}

fn plan_looks(spec: &CorpusSpec, shots: &[Shot], rng: &mut ChaCha8Rng) -> Vec<ShotLook> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let mut prev_level: Option<i32> = None;
    shots
        .iter()
        .map(|shot| {
            let level = loop {
                let l = rng.random_range(LEVEL_RANGE.0..=LEVEL_RANGE.1);
                if prev_level.is_none_or(|p| (l - p).abs() >= MIN_LEVEL_GAP) {
                    break l;
                }
            };
            prev_level = Some(level);
            let stamp = match shot.class {
                ShotClass::Cam1 => Stamp::Cam1 {
                    phase: rng.random_range(0..2 * STRIPE_HALF_PERIOD),
                    bar_x: w / 2.0 + rng.random_range(-w / 8.0..=w / 8.0),
                },
                ShotClass::Cam2 => Stamp::Cam2 {
                    phase: rng.random_range(0..2 * STRIPE_HALF_PERIOD),
                    disc: (
                        rng.random_range(w / 4.0..=3.0 * w / 4.0),
                        rng.random_range(h / 4.0..=3.0 * h / 4.0),
                        (w.min(h) / 16.0).max(1.5),
                    ),
                },
                ShotClass::Other => {
                    let n = rng.random_range(3..=5);
                    Stamp::Other {
                        discs: (0..n)
                            .map(|_| {
                                (
                                    rng.random_range(0.0..w),
                                    rng.random_range(0.0..h),
                                    rng.random_range(w.min(h) / 12.0..=w.min(h) / 5.0),
                                    rng.random_range(20.0..=60.0),
                                )
                            })
                            .collect(),
                    }
                }
            };
            ShotLook {
                level: level as f64,
                stamp,
            }
        })
        .collect()
}

fn stripe(coord: u32, phase: u32) -> f64 {
    if ((coord + phase) / STRIPE_HALF_PERIOD) % 2 == 1 {
        STRIPE_GAIN
    } else {
        0.0
    }
}

/// Noise-free intensity of a shot at pixel `(x, y)` of a `w`x`h` frame.
fn base_intensity(look: &ShotLook, x: u32, y: u32, w: u32, h: u32) -> f64 {
    let (xf, yf) = (x as f64, y as f64);
    let inside = |cx: f64, cy: f64, r: f64| (xf - cx).powi(2) + (yf - cy).powi(2) <= r * r;
    let ramp = |t: f64, len: u32| RAMP_SPAN * t / (len as f64 - 1.0).max(1.0);
    match &look.stamp {
        Stamp::Cam1 { phase, bar_x } => {
            let hf = h as f64;
            let bar = (xf - bar_x).abs() <= w as f64 / 12.0 && yf >= hf / 4.0 && yf <= 3.0 * hf / 4.0;
            look.level + ramp(yf, h) + stripe(x, *phase) + if bar { STAMP_GAIN } else { 0.0 }
        }
        Stamp::Cam2 { phase, disc: (cx, cy, r) } => {
            look.level + ramp(xf, w) + stripe(y, *phase) + if inside(*cx, *cy, *r) { STAMP_GAIN } else { 0.0 }
        }
        Stamp::Other { discs } => {
            let disc = discs
                .iter()
                .filter(|&&(cx, cy, r, _)| inside(cx, cy, r))
                .map(|d| d.3)
                .fold(0.0, f64::max);
            look.level + disc
        }
    }
}

/// Draws a video's structure and streams its frames into `sink`.
pub fn generate_video<W: Write>(spec: &CorpusSpec, index: usize, sink: W) -> Result<SynthVideo> {
    spec.validate()?;
    let mut rng = video_rng(spec, index);
    let shots = plan_shots(spec, &mut rng);
    let looks = plan_looks(spec, &shots, &mut rng);
    let video_id = CorpusSpec::video_id(index);
    let meta = VideoMeta::new(video_id.clone(), spec.width, spec.height, spec.fps, spec.frames_per_video)?;

    let (w, h) = (spec.width, spec.height);
    let noise = Normal::new(0.0, spec.noise_level.max(f64::MIN_POSITIVE)).expect("finite std dev");
    let mut writer = GryWriter::new(sink, meta.clone())?;
    for (shot, look) in shots.iter().zip(&looks) {
        let base: Vec<f64> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| base_intensity(look, x, y, w, h))
            .collect();
        for _ in 0..shot.len {
            let pixels = base
                .iter()
                .map(|&b| {
                    let n = if spec.noise_level > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (b + n).round().clamp(0.0, 255.0) as u8
                })
                .collect();
            writer.write_frame(&Frame::new(w, h, pixels)?)?;
        }
    }
    writer.finish()?;

    let cuts = CutList::new(video_id, spec.frames_per_video, shots.iter().skip(1).map(|s| s.start).collect())?;
    let segments = stroke_segments(&shots);
    Ok(SynthVideo {
        meta,
        shots,
        cuts,
        segments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub video_id: String,
    /// Relative to the workspace root.
    pub path: String,
    pub size: u64,
    pub n_frames: u64,
    pub cuts: Vec<u64>,
    pub segments: Vec<Segment>,
    pub shots: Vec<Shot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: String,
    pub spec: CorpusSpec,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusManifest {
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Writes every video, its ground-truth cuts, segments and shot labels, the
/// train/test split and `corpus.json` into the workspace.
pub fn generate_corpus(spec: &CorpusSpec, ws: &Workspace) -> Result<CorpusManifest> {
    spec.validate()?;
    ws.init()?;
    let mut entries = (0..spec.n_videos)
        .into_par_iter()
        .map(|i| -> Result<CorpusEntry> {
            let id = CorpusSpec::video_id(i);
            let path = ws.video_path(&id);
            let tmp = path.with_extension("gry.part");
            let file = File::create(&tmp).map_err(Error::io_at(&tmp))?;
            let video = generate_video(spec, i, BufWriter::new(file))?;
            fs::rename(&tmp, &path).map_err(Error::io_at(&path))?;

            let mut buf = Vec::new();
            video.cuts.write_json(&mut buf)?;
            crate::fsio::write_atomic(&ws.gt_cuts_path(&id), &buf)?;
            buf.clear();
            SegmentSet::new(id.clone(), video.segments.clone()).write_json(&mut buf)?;
            crate::fsio::write_atomic(&ws.gt_segments_path(&id), &buf)?;
            buf.clear();
            write_json_line(&mut buf, &ShotLabels::new(id.clone(), &video.shots))?;
            crate::fsio::write_atomic(&ws.shot_labels_path(&id), &buf)?;

            Ok(CorpusEntry {
                size: fs::metadata(&path).map_err(Error::io_at(&path))?.len(),
                path: ws.relative(&path),
                n_frames: video.meta.n_frames,
                cuts: video.cuts.cuts().to_vec(),
                segments: video.segments,
                shots: video.shots,
                video_id: id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let ids: Vec<String> = entries.iter().map(|e| e.video_id.clone()).collect();
    let n_test = (spec.test_fraction * ids.len() as f64).round() as usize;
    let splits = Splits {
        train: ids[..ids.len() - n_test].to_vec(),
        test: ids[ids.len() - n_test..].to_vec(),
    };
    ws.write_splits(&splits)?;

    let manifest = CorpusManifest {
        format_version: crate::FORMAT_VERSION.into(),
        spec: spec.clone(),
        entries,
    };
    let mut buf = Vec::new();
    write_json_line(&mut buf, &manifest)?;
    crate::fsio::write_atomic(&ws.corpus_manifest_path(), &buf)?;
    Ok(manifest)
}
