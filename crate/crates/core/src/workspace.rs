//! On-disk layout and the stage runners that read and write it.
//!
//! ```text
//! <root>/
//!   videos/{id}.gry                     decoded streams
//!   features/{id}.{kind}.txt            difference series
//!   features/{id}.hog                   HOG of predicted first frames
//!   models/sbd.json, cam1.json, cam2.json
//!   predictions/{id}.cuts.json          detected CUTs
//!   predictions/{id}.segments.json      localized strokes
//!   predictions/{id}.filtered.json      after the minimum-length filter
//!   annotations/{id}.cuts.json          ground-truth CUTs
//!   annotations/{id}.segments.json      ground-truth strokes
//!   annotations/{id}.shots.json         ground-truth camera classes
//!   reports/                            evaluation output
//!   runs/                               batch manifests (timings live here)
//!   splits.json, corpus.json
//! ```
//!
//! Every stage discovers its inputs by video id, so any stage can be rerun
//! alone. Nothing outside `runs/` depends on timing or worker count.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::batchrun::{plan_batches, run_plan, RunManifest, RunOptions, Task, VideoTask, WorkItem};
use crate::error::{Error, Result};
use crate::evalkit::{eval_cuts, evaluate_tiou, CutEvalReport, TiouReport};
use crate::features::{diff_series, hog, write_hog_block, DiffKind, DiffSeries, HogLayout, HogParams};
use crate::fsio::write_atomic;
use crate::ingest::FrameSource;
use crate::learners::{
    load_model, save_model, train_rf, train_svm, ForestConfig, LinearSvmModel, RandomForestModel, SvmConfig,
};
use crate::pipeline::{
    build_cam_dataset, check_version, detect_cuts, filter_segments, localize_strokes, sweep_filter, write_json_line,
    CutList, LocalizeOptions, SegmentSet, SweepRow,
};
use crate::synthcorpus::{Shot, ShotClass};
use crate::FORMAT_VERSION;

pub const ENV_ROOT: &str = "STROKELOC_WORKSPACE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    root: PathBuf,
}

const SUBDIRS: [&str; 7] = ["videos", "features", "models", "predictions", "annotations", "reports", "runs"];

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn init(&self) -> Result<()> {
        for d in SUBDIRS {
            let p = self.root.join(d);
            fs::create_dir_all(&p).map_err(Error::io_at(&p))?;
        }
        Ok(())
    }

    pub fn video_path(&self, id: &str) -> PathBuf {
        self.root.join("videos").join(format!("{id}.gry"))
    }

    pub fn diff_path(&self, id: &str, kind: DiffKind) -> PathBuf {
        self.root.join("features").join(format!("{id}.{kind}.txt"))
    }

    pub fn hog_path(&self, id: &str) -> PathBuf {
        self.root.join("features").join(format!("{id}.hog"))
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.json"))
    }

    pub fn pred_cuts_path(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.cuts.json"))
    }

    pub fn pred_segments_path(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.segments.json"))
    }

    pub fn filtered_segments_path(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.filtered.json"))
    }

    pub fn gt_cuts_path(&self, id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{id}.cuts.json"))
    }

    pub fn gt_segments_path(&self, id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{id}.segments.json"))
    }

    pub fn shot_labels_path(&self, id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{id}.shots.json"))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn run_manifest_path(&self, name: &str) -> PathBuf {
        self.root.join("runs").join(format!("{name}.json"))
    }

    pub fn splits_path(&self) -> PathBuf {
        self.root.join("splits.json")
    }

    pub fn corpus_manifest_path(&self) -> PathBuf {
        self.root.join("corpus.json")
    }

    /// `path` relative to the root with `/` separators.
    pub fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Ids of all `videos/*.gry`, sorted.
    pub fn list_videos(&self) -> Result<Vec<String>> {
        let dir = self.root.join("videos");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(Error::io_at(&dir))? {
            let path = entry.map_err(Error::io_at(&dir))?.path();
            if path.extension().is_some_and(|e| e == "gry") {
                if let Some(stem) = path.file_stem() {
                    ids.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn open_video(&self, id: &str) -> Result<FrameSource<BufReader<File>>> {
        let path = self.video_path(id);
        if !path.exists() {
            return Err(Error::NotFound(format!("video {id} ({})", self.relative(&path))));
        }
        FrameSource::open_path(&path)
    }

    pub fn read_splits(&self) -> Result<Option<Splits>> {
        let path = self.splits_path();
        if !path.exists() {
            return Ok(None);
        }
        let f: SplitsFile = read_json_file(&path)?;
        check_version(&f.format_version)?;
        Ok(Some(Splits {
            train: f.train,
            test: f.test,
        }))
    }

    pub fn write_splits(&self, s: &Splits) -> Result<()> {
        let file = SplitsFile {
            format_version: FORMAT_VERSION.into(),
            train: s.train.clone(),
            test: s.test.clone(),
        };
        write_json_file(&self.splits_path(), &file)
    }

    /// Video ids for a subset. Without `splits.json` every subset is the
    /// full video list.
    pub fn select(&self, subset: Subset) -> Result<Vec<String>> {
        let all = self.list_videos()?;
        let Some(splits) = self.read_splits()? else {
            return Ok(all);
        };
        let mut ids = match subset {
            Subset::All => return Ok(all),
            Subset::Train => splits.train,
            Subset::Test => splits.test,
        };
        ids.sort();
        Ok(ids)
    }

    pub fn read_gt_cuts(&self, id: &str) -> Result<CutList> {
        read_artifact(&self.gt_cuts_path(id), CutList::read_json)
    }

    pub fn read_pred_cuts(&self, id: &str) -> Result<CutList> {
        read_artifact(&self.pred_cuts_path(id), CutList::read_json)
    }

    pub fn read_gt_segments(&self, id: &str) -> Result<SegmentSet> {
        read_artifact(&self.gt_segments_path(id), SegmentSet::read_json)
    }

    pub fn read_segments(&self, id: &str, which: Predictions) -> Result<SegmentSet> {
        let path = match which {
            Predictions::Raw => self.pred_segments_path(id),
            Predictions::Filtered => self.filtered_segments_path(id),
        };
        read_artifact(&path, SegmentSet::read_json)
    }

    pub fn read_diff_series(&self, id: &str, kind: DiffKind) -> Result<DiffSeries> {
        read_artifact(&self.diff_path(id, kind), |r| DiffSeries::read_text(BufReader::new(r)))
    }

    pub fn read_shot_labels(&self, id: &str) -> Result<ShotLabels> {
        read_artifact(&self.shot_labels_path(id), |r| {
            let labels: ShotLabels = serde_json::from_reader(r)?;
            check_version(&labels.format_version)?;
            Ok(labels)
        })
    }

    pub fn load_forest(&self, name: &str) -> Result<RandomForestModel> {
        read_artifact(&self.model_path(name), load_model)?.into_forest()
    }

    pub fn load_svm(&self, name: &str) -> Result<LinearSvmModel> {
        read_artifact(&self.model_path(name), load_model)?.into_svm()
    }

    fn save(&self, name: &str, model: crate::learners::Model) -> Result<()> {
        let mut buf = Vec::new();
        save_model(&model, &mut buf)?;
        write_atomic(&self.model_path(name), &buf)
    }
}

fn read_artifact<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    match File::open(path) {
        Ok(f) => parse(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(path.display().to_string())),
        Err(e) => Err(Error::IoAt {
            path: path.to_owned(),
            source: e,
        }),
    }
}

fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_artifact(path, |r| Ok(serde_json::from_reader(r)?))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = Vec::new();
    write_json_line(&mut buf, value)?;
    write_atomic(path, &buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictions {
    Raw,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SplitsFile {
    format_version: String,
    train: Vec<String>,
    test: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotLabel {
    pub start: u64,
    pub class: ShotClass,
}

/// Ground-truth camera class of every shot in a video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotLabels {
    pub format_version: String,
    pub video_id: String,
    pub shots: Vec<ShotLabel>,
}

impl ShotLabels {
    pub fn new(video_id: impl Into<String>, shots: &[Shot]) -> Self {
        ShotLabels {
            format_version: FORMAT_VERSION.into(),
            video_id: video_id.into(),
            shots: shots
                .iter()
                .map(|s| ShotLabel {
                    start: s.start,
                    class: s.class,
                })
                .collect(),
        }
    }

    /// First frames of the shots of class `class`.
    pub fn positives(&self, class: ShotClass) -> Vec<u64> {
        self.shots.iter().filter(|s| s.class == class).map(|s| s.start).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Camera {
    Cam1,
    Cam2,
}

impl Camera {
    pub fn name(self) -> &'static str {
        match self {
            Camera::Cam1 => "cam1",
            Camera::Cam2 => "cam2",
        }
    }

    pub fn class(self) -> ShotClass {
        match self {
            Camera::Cam1 => ShotClass::Cam1,
            Camera::Cam2 => ShotClass::Cam2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub batch_size: usize,
    pub n_jobs: usize,
    pub sorted: bool,
    pub resume: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            batch_size: crate::batchrun::DEFAULT_BATCH_SIZE,
            n_jobs: crate::batchrun::DEFAULT_JOBS,
            sorted: true,
            resume: false,
        }
    }
}

fn diff_task(kind: DiffKind) -> Task {
    match kind {
        DiffKind::GrayHist => Task::HistDiffsGray,
        DiffKind::RgbHist => Task::HistDiffsRgb,
        DiffKind::WeightedChi2 => Task::WeightedChi2,
    }
}

fn work_items(ws: &Workspace, ids: &[String], task: Task) -> Result<Vec<WorkItem>> {
    ids.iter()
        .map(|id| {
            let path = ws.video_path(id);
            let size = fs::metadata(&path)
                .map_err(|_| Error::NotFound(format!("video {id}")))?
                .len();
            Ok(WorkItem {
                video_id: id.clone(),
                size,
                task,
            })
        })
        .collect()
}

fn run_stage(ws: &Workspace, name: &str, ids: &[String], task_kind: Task, task: &dyn VideoTask, batch: &BatchOptions) -> Result<RunManifest> {
    let plan = plan_batches(work_items(ws, ids, task_kind)?, batch.batch_size, batch.n_jobs, batch.sorted)?;
    let manifest = run_plan(&plan, ws.root(), task, RunOptions { resume: batch.resume })?;
    write_json_file(&ws.run_manifest_path(name), &manifest)?;
    Ok(manifest)
}

struct DiffTask<'a> {
    ws: &'a Workspace,
    kind: DiffKind,
    n_bins: usize,
}

impl VideoTask for DiffTask<'_> {
    fn output_path(&self, item: &WorkItem) -> PathBuf {
        PathBuf::from(self.ws.relative(&self.ws.diff_path(&item.video_id, self.kind)))
    }

    fn run(&self, item: &WorkItem) -> Result<Vec<u8>> {
        let mut src = self.ws.open_video(&item.video_id)?;
        Ok(diff_series(&mut src, self.kind, self.n_bins)?.to_text().into_bytes())
    }

    fn is_complete(&self, existing: &[u8]) -> bool {
        DiffSeries::read_text(existing).is_ok_and(|s| s.kind == self.kind && s.n_bins == self.n_bins)
    }
}

/// Difference series for every video in `ids`.
pub fn extract_diffs(ws: &Workspace, ids: &[String], kind: DiffKind, n_bins: usize, batch: &BatchOptions) -> Result<RunManifest> {
    let task = DiffTask { ws, kind, n_bins };
    run_stage(ws, &format!("extract_{kind}"), ids, diff_task(kind), &task, batch)
}

struct HogTask<'a> {
    ws: &'a Workspace,
    params: HogParams,
}

impl VideoTask for HogTask<'_> {
    fn output_path(&self, item: &WorkItem) -> PathBuf {
        PathBuf::from(self.ws.relative(&self.ws.hog_path(&item.video_id)))
    }

    fn run(&self, item: &WorkItem) -> Result<Vec<u8>> {
        let mut src = self.ws.open_video(&item.video_id)?;
        let cuts = self.ws.read_pred_cuts(&item.video_id)?;
        let meta = src.meta().clone();
        let dims = HogLayout::new(meta.width, meta.height, &self.params)?.len();
        let descs = cuts
            .cuts()
            .iter()
            .map(|&c| Ok(hog(&src.frame_at(c)?, &self.params)?.values))
            .collect::<Result<Vec<_>>>()?;
        let mut buf = Vec::new();
        write_hog_block(&mut buf, dims, &descs)?;
        Ok(buf)
    }

    fn is_complete(&self, existing: &[u8]) -> bool {
        crate::features::read_hog_block(existing).is_ok()
    }
}

/// HOG descriptors of the first frame at every predicted CUT.
pub fn extract_hog_firsts(ws: &Workspace, ids: &[String], params: &HogParams, batch: &BatchOptions) -> Result<RunManifest> {
    let task = HogTask { ws, params: *params };
    run_stage(ws, "extract_hog_firsts", ids, Task::HogFirsts, &task, batch)
}

fn pixel_norm(ws: &Workspace, id: &str) -> Result<f64> {
    Ok(ws.open_video(id)?.meta().pixel_count() as f64)
}

/// Trains the CUT forest on normalised difference values labelled by the
/// ground-truth CUT list and saves it as `models/sbd.json`.
pub fn train_sbd(ws: &Workspace, ids: &[String], kind: DiffKind, cfg: &ForestConfig) -> Result<RandomForestModel> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for id in ids {
        let series = ws.read_diff_series(id, kind)?;
        let gt = ws.read_gt_cuts(id)?;
        let norm = pixel_norm(ws, id)?;
        for (i, v) in series.values.iter().enumerate() {
            samples.push(vec![v / norm]);
            labels.push(u8::from(gt.contains(i as u64 + 1)));
        }
    }
    let model = train_rf(&samples, &labels, cfg)?;
    ws.save("sbd", model.clone().into())?;
    Ok(model)
}

/// Applies `models/sbd.json` to every video's series.
pub fn detect_all(ws: &Workspace, ids: &[String], kind: DiffKind) -> Result<Vec<CutList>> {
    let model = ws.load_forest("sbd")?;
    ids.iter()
        .map(|id| {
            let series = ws.read_diff_series(id, kind)?;
            let cuts = detect_cuts(&series, &model, pixel_norm(ws, id)?)?;
            let mut buf = Vec::new();
            cuts.write_json(&mut buf)?;
            write_atomic(&ws.pred_cuts_path(id), &buf)?;
            Ok(cuts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoCutReport {
    pub video_id: String,
    #[serde(flatten)]
    pub report: CutEvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbdReport {
    pub tolerance: i64,
    pub per_video: Vec<VideoCutReport>,
    /// Counts pooled over all videos.
    pub overall: CutEvalReport,
}

pub fn eval_sbd(ws: &Workspace, ids: &[String], tolerance: i64) -> Result<SbdReport> {
    let per_video = ids
        .iter()
        .map(|id| {
            Ok(VideoCutReport {
                video_id: id.clone(),
                report: eval_cuts(&ws.read_pred_cuts(id)?, &ws.read_gt_cuts(id)?, tolerance)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = CutEvalReport::merge(&per_video.iter().map(|v| v.report).collect::<Vec<_>>());
    let report = SbdReport {
        tolerance,
        per_video,
        overall,
    };
    write_json_file(&ws.report_path("sbd.json"), &report)?;
    Ok(report)
}

fn cam_dataset(ws: &Workspace, camera: Camera, ids: &[String], params: &HogParams) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let mut sources = Vec::with_capacity(ids.len());
    let mut cuts = Vec::with_capacity(ids.len());
    let mut positives = Vec::with_capacity(ids.len());
    for id in ids {
        sources.push(ws.open_video(id)?);
        cuts.push(ws.read_gt_cuts(id)?);
        positives.push(ws.read_shot_labels(id)?.positives(camera.class()));
    }
    build_cam_dataset(&mut sources, &cuts, &positives, params)
}

/// Trains a camera model on ground-truth first frames and saves it as
/// `models/{cam1,cam2}.json`.
pub fn train_cam(ws: &Workspace, camera: Camera, ids: &[String], params: &HogParams, cfg: &SvmConfig) -> Result<LinearSvmModel> {
    let (samples, labels) = cam_dataset(ws, camera, ids, params)?;
    let model = train_svm(&samples, &labels, cfg)?;
    ws.save(camera.name(), model.clone().into())?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamReport {
    pub camera: Camera,
    pub n_samples: usize,
    pub n_errors: usize,
    pub error_rate: f64,
}

/// Error rate of a saved camera model on ground-truth first frames.
pub fn eval_cam(ws: &Workspace, camera: Camera, ids: &[String], params: &HogParams) -> Result<CamReport> {
    let model = ws.load_svm(camera.name())?;
    let (samples, labels) = cam_dataset(ws, camera, ids, params)?;
    if samples.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut n_errors = 0;
    for (x, &y) in samples.iter().zip(&labels) {
        n_errors += usize::from(model.predict(x)? != y);
    }
    let report = CamReport {
        camera,
        n_samples: samples.len(),
        n_errors,
        error_rate: n_errors as f64 / samples.len() as f64,
    };
    write_json_file(&ws.report_path(&format!("{}.json", camera.name())), &report)?;
    Ok(report)
}

struct LocalizeTask<'a> {
    ws: &'a Workspace,
    cam1: LinearSvmModel,
    cam2: LinearSvmModel,
    params: HogParams,
    opts: LocalizeOptions,
}

impl VideoTask for LocalizeTask<'_> {
    fn output_path(&self, item: &WorkItem) -> PathBuf {
        PathBuf::from(self.ws.relative(&self.ws.pred_segments_path(&item.video_id)))
    }

    fn run(&self, item: &WorkItem) -> Result<Vec<u8>> {
        let mut src = self.ws.open_video(&item.video_id)?;
        let cuts = self.ws.read_pred_cuts(&item.video_id)?;
        let segments = localize_strokes(&mut src, &cuts, &self.cam1, &self.cam2, &self.params, &self.opts)?;
        let mut buf = Vec::new();
        SegmentSet::new(item.video_id.clone(), segments).write_json(&mut buf)?;
        Ok(buf)
    }

    fn is_complete(&self, existing: &[u8]) -> bool {
        SegmentSet::read_json(existing).is_ok()
    }
}

/// Runs the stroke state machine over every video's predicted CUTs.
pub fn localize_all(
    ws: &Workspace,
    ids: &[String],
    params: &HogParams,
    opts: &LocalizeOptions,
    batch: &BatchOptions,
) -> Result<RunManifest> {
    opts.validate()?;
    let task = LocalizeTask {
        ws,
        cam1: ws.load_svm("cam1")?,
        cam2: ws.load_svm("cam2")?,
        params: *params,
        opts: *opts,
    };
    run_stage(ws, "localize", ids, Task::Localize, &task, batch)
}

/// Writes `predictions/{id}.filtered.json` keeping segments with
/// `end - start >= t`.
pub fn filter_all(ws: &Workspace, ids: &[String], t: u64) -> Result<Vec<SegmentSet>> {
    ids.iter()
        .map(|id| {
            let raw = ws.read_segments(id, Predictions::Raw)?;
            let kept = SegmentSet::new(id.clone(), filter_segments(&raw.segments, t));
            let mut buf = Vec::new();
            kept.write_json(&mut buf)?;
            write_atomic(&ws.filtered_segments_path(id), &buf)?;
            Ok(kept)
        })
        .collect()
}

/// Weighted mean TIoU of the chosen predictions against ground truth. A
/// video without a predictions file counts as predicting nothing.
pub fn eval_tiou(ws: &Workspace, ids: &[String], which: Predictions) -> Result<TiouReport> {
    let (preds, gts) = load_pairs(ws, ids, which)?;
    let report = evaluate_tiou(&preds, &gts)?;
    write_json_file(&ws.report_path("tiou.json"), &report)?;
    Ok(report)
}

fn load_pairs(ws: &Workspace, ids: &[String], which: Predictions) -> Result<(Vec<SegmentSet>, Vec<SegmentSet>)> {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for id in ids {
        gts.push(ws.read_gt_segments(id)?);
        match ws.read_segments(id, which) {
            Ok(p) => preds.push(p),
            Err(Error::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((preds, gts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub format_version: String,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_TSV_HEADER: &str = "T\tweighted_mean_tiou";

/// Filters raw predictions at each threshold, scores them and writes
/// `reports/sweep.json` plus the plot table `reports/sweep.tsv`.
pub fn sweep(ws: &Workspace, ids: &[String], t_values: &[u64]) -> Result<SweepReport> {
    let (preds, gts) = load_pairs(ws, ids, Predictions::Raw)?;
    let report = SweepReport {
        format_version: FORMAT_VERSION.into(),
        rows: sweep_filter(&preds, &gts, t_values)?,
    };
    write_json_file(&ws.report_path("sweep.json"), &report)?;
    write_plot_data(ws)?;
    Ok(report)
}

/// Renders a sweep report as a two-column tab-separated table.
pub fn plot_table(report: &SweepReport) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::NotFound("sweep report has no rows".into()));
    }
    let mut out = String::from(SWEEP_TSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!("{}\t{}\n", row.t, row.weighted_mean_tiou));
    }
    Ok(out)
}

/// Parses a table written by [`plot_table`].
pub fn parse_plot_table(text: &str) -> Result<Vec<(u64, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_TSV_HEADER) {
        return Err(Error::Parse("missing sweep table header".into()));
    }
    lines
        .map(|line| {
            let (t, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("bad sweep row {line:?}")))?;
            let t = t.parse().map_err(|_| Error::Parse(format!("bad threshold {t:?}")))?;
            let v = v.parse().map_err(|_| Error::Parse(format!("bad value {v:?}")))?;
            Ok((t, v))
        })
        .collect()
}

/// Regenerates `reports/sweep.tsv` from `reports/sweep.json`.
pub fn write_plot_data(ws: &Workspace) -> Result<PathBuf> {
    let report: SweepReport = read_json_file(&ws.report_path("sweep.json"))?;
    check_version(&report.format_version)?;
    let out = ws.report_path("sweep.tsv");
    write_atomic(&out, plot_table(&report)?.as_bytes())?;
    Ok(out)
}

/// Settings for a full train-and-evaluate run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kind: DiffKind,
    pub n_bins: usize,
    pub hog: HogParams,
    pub forest: ForestConfig,
    pub svm: SvmConfig,
    pub localize: LocalizeOptions,
    pub batch: BatchOptions,
    pub tolerance: i64,
    pub filter_t: u64,
    pub t_values: Vec<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kind: DiffKind::GrayHist,
            n_bins: crate::features::DEFAULT_BINS,
            hog: HogParams::default(),
            forest: ForestConfig::default(),
            svm: SvmConfig::default(),
            localize: LocalizeOptions::default(),
            batch: BatchOptions::default(),
            tolerance: 0,
            filter_t: 60,
            t_values: (0..=100).step_by(10).collect(),
        }
    }
}

impl PipelineConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.forest.seed = seed;
        self.svm.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub sbd: CutEvalReport,
    pub cam1: CamReport,
    pub cam2: CamReport,
    pub tiou: TiouReport,
    pub sweep: Vec<SweepRow>,
}

/// Every stage in order: extract, train and apply the CUT model on the
/// train/test split, train and score both camera models, localize, filter
/// and evaluate on the test split.
pub fn run_pipeline(ws: &Workspace, cfg: &PipelineConfig) -> Result<PipelineSummary> {
    let all = ws.select(Subset::All)?;
    let train = ws.select(Subset::Train)?;
    let test = ws.select(Subset::Test)?;
    check_manifest(extract_diffs(ws, &all, cfg.kind, cfg.n_bins, &cfg.batch)?)?;
    train_sbd(ws, &train, cfg.kind, &cfg.forest)?;
    detect_all(ws, &all, cfg.kind)?;
    let sbd = eval_sbd(ws, &test, cfg.tolerance)?.overall;
    check_manifest(extract_hog_firsts(ws, &all, &cfg.hog, &cfg.batch)?)?;
    train_cam(ws, Camera::Cam1, &train, &cfg.hog, &cfg.svm)?;
    train_cam(ws, Camera::Cam2, &train, &cfg.hog, &cfg.svm)?;
    let cam1 = eval_cam(ws, Camera::Cam1, &test, &cfg.hog)?;
    let cam2 = eval_cam(ws, Camera::Cam2, &test, &cfg.hog)?;
    check_manifest(localize_all(ws, &all, &cfg.hog, &cfg.localize, &cfg.batch)?)?;
    filter_all(ws, &all, cfg.filter_t)?;
    let tiou = eval_tiou(ws, &test, Predictions::Filtered)?;
    let sweep = sweep(ws, &test, &cfg.t_values)?.rows;
    Ok(PipelineSummary {
        sbd,
        cam1,
        cam2,
        tiou,
        sweep,
    })
}

fn check_manifest(m: RunManifest) -> Result<RunManifest> {
    if let Some(f) = m.failures().next() {
        return Err(Error::Consistency(format!(
            "{} failed: {}",
            f.video_id,
            f.error.as_deref().unwrap_or("unknown error")
        )));
    }
    Ok(m)
}

/// Writes a serializable value as one JSON line, atomically.
pub fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json_file(path, value)
}
