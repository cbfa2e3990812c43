//! Batched, data-parallel execution of per-video work.
//!
//! Items are optionally sorted largest first, chunked into batches, and each
//! batch is drained by a pool of workers pulling from a shared queue. Every
//! item writes its own output file, so results do not depend on which
//! worker ran what.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsio::write_atomic;

pub const DEFAULT_BATCH_SIZE: usize = 50;
pub const DEFAULT_JOBS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    HistDiffsGray,
    HistDiffsRgb,
    WeightedChi2,
    HogFirsts,
    Localize,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::HistDiffsGray => "hist_diffs_gray",
            Task::HistDiffsRgb => "hist_diffs_rgb",
            Task::WeightedChi2 => "weighted_chi2",
            Task::HogFirsts => "hog_firsts",
            Task::Localize => "localize",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkItem {
    pub video_id: String,
    /// Input size in bytes.
    pub size: u64,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batches: Vec<Vec<WorkItem>>,
    pub n_jobs: usize,
    pub sorted: bool,
}

impl BatchPlan {
    pub fn items(&self) -> impl Iterator<Item = &WorkItem> {
        self.batches.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// SHA-256 over the ordered items and the plan flags. Worker count is
    /// left out because it does not affect outputs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("sorted={}\n", self.sorted));
        for batch in &self.batches {
            h.update(b"batch\n");
            for item in batch {
                h.update(format!("{}\t{}\t{}\n", item.video_id, item.task, item.size));
            }
        }
        hex::encode(h.finalize())
    }
}

/// Sorts by non-increasing size (ties by video id) when `sorted`, then
/// chunks in order.
pub fn plan_batches(mut items: Vec<WorkItem>, batch_size: usize, n_jobs: usize, sorted: bool) -> Result<BatchPlan> {
    if batch_size == 0 || n_jobs == 0 {
        return Err(Error::Config(format!(
            "batch_size and n_jobs must be at least 1 (got {batch_size} and {n_jobs})"
        )));
    }
    if sorted {
        items.sort_by(|a, b| b.size.cmp(&a.size).then_with(|| a.video_id.cmp(&b.video_id)));
    }
    Ok(BatchPlan {
        batches: items.chunks(batch_size).map(<[WorkItem]>::to_vec).collect(),
        n_jobs,
        sorted,
    })
}

/// Makespan of greedy idle-first dispatch with `cost(size) = size`.
pub fn simulate_schedule(sizes: &[u64], n_jobs: usize) -> Result<u64> {
    simulate_schedule_with(sizes, n_jobs, |s| s)
}

/// Each item in order goes to the worker that frees up first, the lowest
/// index on ties. Returns the latest completion time.
pub fn simulate_schedule_with(sizes: &[u64], n_jobs: usize, cost: impl Fn(u64) -> u64) -> Result<u64> {
    if n_jobs == 0 {
        return Err(Error::Config("n_jobs must be at least 1".into()));
    }
    let mut free_at: BinaryHeap<Reverse<(u64, usize)>> = (0..n_jobs).map(|w| Reverse((0, w))).collect();
    let mut makespan = 0;
    for &s in sizes {
        let Reverse((t, w)) = free_at.pop().expect("pool is never empty");
        let done = t + cost(s);
        makespan = makespan.max(done);
        free_at.push(Reverse((done, w)));
    }
    Ok(makespan)
}

/// One unit of per-video work with a deterministic output file.
pub trait VideoTask: Sync {
    /// Output path relative to the run root.
    fn output_path(&self, item: &WorkItem) -> PathBuf;

    fn run(&self, item: &WorkItem) -> Result<Vec<u8>>;

    /// Used by resume: whether an existing output can be kept.
    fn is_complete(&self, _existing: &[u8]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub video_id: String,
    pub status: ItemStatus,
    pub duration_ms: u64,
    pub output_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub plan_digest: String,
    pub items: Vec<ManifestItem>,
}

impl RunManifest {
    pub fn failures(&self) -> impl Iterator<Item = &ManifestItem> {
        self.items.iter().filter(|i| i.status == ItemStatus::Failed)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        crate::pipeline::write_json_line(w, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep existing outputs that pass [`VideoTask::is_complete`].
    pub resume: bool,
}

fn portable(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn run_item<T: VideoTask + ?Sized>(task: &T, root: &Path, item: &WorkItem, opts: RunOptions) -> ManifestItem {
    let rel = task.output_path(item);
    let out = root.join(&rel);
    let started = Instant::now();
    let mut status = ItemStatus::Ok;
    let mut error = None;

    let existing = if opts.resume { std::fs::read(&out).ok() } else { None };
    if existing.is_some_and(|bytes| task.is_complete(&bytes)) {
        status = ItemStatus::Skipped;
    } else if let Err(e) = task.run(item).and_then(|bytes| write_atomic(&out, &bytes)) {
        status = ItemStatus::Failed;
        error = Some(e.to_string());
    }
    ManifestItem {
        video_id: item.video_id.clone(),
        status,
        duration_ms: started.elapsed().as_millis() as u64,
        output_path: portable(&rel),
        error,
    }
}

/// Runs every item of `plan`, batch by batch, writing each output under
/// `root`. Item failures are recorded in the manifest; only an unusable
/// root is an error.
pub fn run_plan<T: VideoTask + ?Sized>(plan: &BatchPlan, root: &Path, task: &T, opts: RunOptions) -> Result<RunManifest> {
    std::fs::create_dir_all(root).map_err(Error::io_at(root))?;
    let probe = root.join(format!(".batchrun-probe-{}", std::process::id()));
    std::fs::write(&probe, b"").map_err(Error::io_at(root))?;
    let _ = std::fs::remove_file(&probe);

    let mut items = Vec::with_capacity(plan.len());
    for batch in &plan.batches {
        let slots: Mutex<Vec<Option<ManifestItem>>> = Mutex::new(vec![None; batch.len()]);
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..plan.n_jobs.min(batch.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(item) = batch.get(i) else { break };
                    let done = run_item(task, root, item, opts);
                    slots.lock().expect("no worker panics while holding the lock")[i] = Some(done);
                });
            }
        });
        items.extend(slots.into_inner().expect("workers joined").into_iter().map(|s| s.expect("every slot filled")));
    }
    Ok(RunManifest {
        plan_digest: plan.digest(),
        items,
    })
}
