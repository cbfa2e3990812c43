//! `strokeloc`: command-line driver over a workspace directory.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use strokeloc::batchrun::{DEFAULT_BATCH_SIZE, DEFAULT_JOBS};
use strokeloc::features::{DiffKind, HogParams, DEFAULT_BINS};
use strokeloc::ingest::{plan_decode, run_decode, video_id_from_path, DecodeTarget, DEFAULT_FPS, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use strokeloc::learners::{ForestConfig, SvmConfig};
use strokeloc::pipeline::LocalizeOptions;
use strokeloc::synthcorpus::{generate_corpus, CorpusSpec};
use strokeloc::workspace::{self as ws_ops, BatchOptions, Camera, PipelineConfig, Predictions, Subset, Workspace, ENV_ROOT};

#[derive(Parser)]
#[command(name = "strokeloc", version, about = "Shot boundary detection and stroke localization for telecast video")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Workspace root directory.
    #[arg(long, global = true, env = ENV_ROOT, default_value = ".")]
    workspace: PathBuf,

    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode source videos into gray streams under videos/.
    Preprocess {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: u32,
        #[arg(long, default_value_t = DEFAULT_HEIGHT)]
        height: u32,
        #[arg(long, default_value_t = DEFAULT_FPS)]
        fps: u32,
        /// Print the decoder command lines without running them.
        #[arg(long)]
        plan_only: bool,
    },
    /// Compute difference series or first-frame HOG descriptors.
    Extract {
        #[arg(long, value_enum, default_value_t = Feature::GrayHist)]
        feature: Feature,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
    },
    /// Train the CUT classifier on difference series.
    TrainSbd {
        #[arg(long, value_enum, default_value_t = DiffFeature::GrayHist)]
        feature: DiffFeature,
        #[arg(long, default_value_t = ForestConfig::default().n_trees)]
        trees: usize,
        #[arg(long, value_enum, default_value_t = SubsetArg::Train)]
        subset: SubsetArg,
    },
    /// Predict CUTs for every video.
    DetectCuts {
        #[arg(long, value_enum, default_value_t = DiffFeature::GrayHist)]
        feature: DiffFeature,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
    },
    /// Train one camera-shot classifier.
    TrainCam {
        #[arg(long, value_enum)]
        which: CameraArg,
        #[arg(long, default_value_t = SvmConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = SvmConfig::default().lambda)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = SubsetArg::Train)]
        subset: SubsetArg,
    },
    /// Error rate of a camera-shot classifier on ground-truth shots.
    EvalCam {
        #[arg(long, value_enum)]
        which: CameraArg,
        #[arg(long, value_enum, default_value_t = SubsetArg::Test)]
        subset: SubsetArg,
    },
    /// Emit stroke segments from predicted CUTs and camera models.
    Localize {
        #[arg(long, default_value_t = 1)]
        first_k: usize,
        #[arg(long, default_value_t = 1)]
        min_votes: usize,
        /// Close a segment left open after the last CUT at the final frame.
        #[arg(long)]
        close_trailing: bool,
        /// Treat frame 0 as the start of a shot.
        #[arg(long)]
        include_first_frame: bool,
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
    },
    /// Drop predicted segments with end - start below T.
    Filter {
        #[arg(long = "T", default_value_t = 60)]
        t: u64,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
    },
    /// Score predicted CUTs against ground truth.
    EvalSbd {
        #[arg(long, default_value_t = 0)]
        tolerance: i64,
        #[arg(long, value_enum, default_value_t = SubsetArg::Test)]
        subset: SubsetArg,
    },
    /// Weighted mean temporal IoU of predicted segments.
    EvalTiou {
        /// Score unfiltered predictions.
        #[arg(long)]
        raw: bool,
        #[arg(long, value_enum, default_value_t = SubsetArg::Test)]
        subset: SubsetArg,
    },
    /// Filter at several thresholds and score each.
    Sweep {
        /// Comma-separated thresholds; `a,b,...,z` expands with step b - a.
        #[arg(long = "T-list", default_value = "0,10,...,100", value_parser = parse_t_list)]
        t_list: TList,
        #[arg(long, value_enum, default_value_t = SubsetArg::Test)]
        subset: SubsetArg,
    },
    /// Write the sweep curve as a two-column table.
    Plot,
    /// Generate a synthetic corpus with ground truth.
    Synth {
        #[arg(long, default_value_t = CorpusSpec::default().n_videos)]
        videos: usize,
        #[arg(long, default_value_t = CorpusSpec::default().frames_per_video)]
        frames: u64,
        #[arg(long, default_value_t = CorpusSpec::default().noise_level)]
        noise: f64,
        #[arg(long, default_value_t = CorpusSpec::default().test_fraction)]
        test_fraction: f64,
    },
    /// Run every stage from extraction to the sweep.
    Pipeline {
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Serve frames, predictions and annotations over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

#[derive(Args, Clone, Copy)]
struct BatchArgs {
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_JOBS)]
    jobs: usize,
    /// Schedule the largest inputs first.
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    sorted: bool,
    /// Keep outputs left by an earlier run.
    #[arg(long)]
    resume: bool,
}

impl From<BatchArgs> for BatchOptions {
    fn from(b: BatchArgs) -> Self {
        BatchOptions {
            batch_size: b.batch_size,
            n_jobs: b.jobs,
            sorted: b.sorted,
            resume: b.resume,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Feature {
    GrayHist,
    RgbHist,
    WeightedChi2,
    Hog,
}

#[derive(ValueEnum, Clone, Copy)]
enum DiffFeature {
    GrayHist,
    RgbHist,
    WeightedChi2,
}

impl From<DiffFeature> for DiffKind {
    fn from(f: DiffFeature) -> Self {
        match f {
            DiffFeature::GrayHist => DiffKind::GrayHist,
            DiffFeature::RgbHist => DiffKind::RgbHist,
            DiffFeature::WeightedChi2 => DiffKind::WeightedChi2,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum CameraArg {
    Cam1,
    Cam2,
}

impl From<CameraArg> for Camera {
    fn from(c: CameraArg) -> Self {
        match c {
            CameraArg::Cam1 => Camera::Cam1,
            CameraArg::Cam2 => Camera::Cam2,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum SubsetArg {
    All,
    Train,
    Test,
}

impl From<SubsetArg> for Subset {
    fn from(s: SubsetArg) -> Self {
        match s {
            SubsetArg::All => Subset::All,
            SubsetArg::Train => Subset::Train,
            SubsetArg::Test => Subset::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TList(Vec<u64>);

/// Parses `0,10,20` or the elided form `0,10,...,100`.
fn parse_t_list(s: &str) -> Result<TList, String> {
    let tokens: Vec<&str> = s.split(',').map(str::trim).collect();
    let mut out: Vec<u64> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "..." {
            let [.., a, b] = out[..] else {
                return Err("`...` needs two values before it".into());
            };
            let end: u64 = tokens
                .get(i + 1)
                .ok_or("`...` needs a final value after it")?
                .parse()
                .map_err(|e| format!("bad threshold: {e}"))?;
            if b <= a || end < b {
                return Err("`...` needs an increasing sequence".into());
            }
            let mut t = b + (b - a);
            while t < end {
                out.push(t);
                t += b - a;
            }
            i += 1;
            continue;
        }
        let t: u64 = tokens[i].parse().map_err(|e| format!("bad threshold {:?}: {e}", tokens[i]))?;
        out.push(t);
        i += 1;
    }
    if out.is_empty() {
        return Err("empty threshold list".into());
    }
    Ok(TList(out))
}

fn print_json<T: serde::Serialize>(value: &T) -> strokeloc::Result<()> {
    println!("{}", serde_json::to_string(value).map_err(|e| strokeloc::Error::Parse(e.to_string()))?);
    Ok(())
}

fn report_run(name: &str, m: &strokeloc::batchrun::RunManifest) -> strokeloc::Result<()> {
    let failed: Vec<_> = m.failures().map(|f| json!({ "video_id": f.video_id, "error": f.error })).collect();
    print_json(&json!({ "stage": name, "items": m.items.len(), "failed": failed }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(strokeloc::Error::Consistency(format!("{} of {} items failed", failed.len(), m.items.len())))
    }
}

fn run(cli: Cli) -> strokeloc::Result<()> {
    let ws = Workspace::new(&cli.workspace);
    let forest = ForestConfig { seed: cli.seed, ..ForestConfig::default() };
    let svm = SvmConfig { seed: cli.seed, ..SvmConfig::default() };
    let hog = HogParams::default();
    match cli.command {
        Command::Preprocess { inputs, width, height, fps, plan_only } => {
            let target = DecodeTarget { width, height, fps };
            if !plan_only {
                ws.init()?;
            }
            for input in &inputs {
                let cmd = plan_decode(&input.to_string_lossy(), &target)?;
                if plan_only {
                    println!("{cmd}");
                } else {
                    let out = ws.video_path(&video_id_from_path(input)?);
                    print_json(&run_decode(&cmd, &target, &out)?)?;
                }
            }
        }
        Command::Extract { feature, bins, batch, subset } => {
            let ids = ws.select(subset.into())?;
            let batch = batch.into();
            let m = match feature {
                Feature::Hog => ws_ops::extract_hog_firsts(&ws, &ids, &hog, &batch)?,
                Feature::GrayHist => ws_ops::extract_diffs(&ws, &ids, DiffKind::GrayHist, bins, &batch)?,
                Feature::RgbHist => ws_ops::extract_diffs(&ws, &ids, DiffKind::RgbHist, bins, &batch)?,
                Feature::WeightedChi2 => ws_ops::extract_diffs(&ws, &ids, DiffKind::WeightedChi2, bins, &batch)?,
            };
            report_run("extract", &m)?;
        }
        Command::TrainSbd { feature, trees, subset } => {
            let cfg = ForestConfig { n_trees: trees, ..forest };
            let model = ws_ops::train_sbd(&ws, &ws.select(subset.into())?, feature.into(), &cfg)?;
            print_json(&json!({ "model": "sbd", "n_trees": model.trees.len() }))?;
        }
        Command::DetectCuts { feature, subset } => {
            let cuts = ws_ops::detect_all(&ws, &ws.select(subset.into())?, feature.into())?;
            let total: usize = cuts.iter().map(|c| c.len()).sum();
            print_json(&json!({ "videos": cuts.len(), "cuts": total }))?;
        }
        Command::TrainCam { which, epochs, lambda, subset } => {
            let cfg = SvmConfig { epochs, lambda, ..svm };
            let camera: Camera = which.into();
            ws_ops::train_cam(&ws, camera, &ws.select(subset.into())?, &hog, &cfg)?;
            print_json(&json!({ "model": camera.name() }))?;
        }
        Command::EvalCam { which, subset } => {
            print_json(&ws_ops::eval_cam(&ws, which.into(), &ws.select(subset.into())?, &hog)?)?;
        }
        Command::Localize {
            first_k,
            min_votes,
            close_trailing,
            include_first_frame,
            batch,
            subset,
        } => {
            let opts = LocalizeOptions {
                first_k,
                min_votes,
                close_trailing,
                include_first_frame,
            };
            let m = ws_ops::localize_all(&ws, &ws.select(subset.into())?, &hog, &opts, &batch.into())?;
            report_run("localize", &m)?;
        }
        Command::Filter { t, subset } => {
            let kept = ws_ops::filter_all(&ws, &ws.select(subset.into())?, t)?;
            let total: usize = kept.iter().map(|s| s.segments.len()).sum();
            print_json(&json!({ "T": t, "videos": kept.len(), "segments": total }))?;
        }
        Command::EvalSbd { tolerance, subset } => {
            print_json(&ws_ops::eval_sbd(&ws, &ws.select(subset.into())?, tolerance)?.overall)?;
        }
        Command::EvalTiou { raw, subset } => {
            let which = if raw { Predictions::Raw } else { Predictions::Filtered };
            let report = ws_ops::eval_tiou(&ws, &ws.select(subset.into())?, which)?;
            print_json(&json!({ "weighted_mean_tiou": report.weighted_mean, "videos": report.n_videos }))?;
        }
        Command::Sweep { t_list, subset } => {
            let report = ws_ops::sweep(&ws, &ws.select(subset.into())?, &t_list.0)?;
            print!("{}", ws_ops::plot_table(&report)?);
        }
        Command::Plot => {
            println!("{}", ws_ops::write_plot_data(&ws)?.display());
        }
        Command::Synth {
            videos,
            frames,
            noise,
            test_fraction,
        } => {
            let spec = CorpusSpec {
                n_videos: videos,
                frames_per_video: frames,
                noise_level: noise,
                test_fraction,
                seed: cli.seed,
                ..CorpusSpec::default()
            };
            let m = generate_corpus(&spec, &ws)?;
            print_json(&json!({ "videos": m.entries.len(), "digest": m.digest() }))?;
        }
        Command::Pipeline { batch } => {
            let cfg = PipelineConfig {
                batch: batch.into(),
                ..PipelineConfig::default()
            }
            .with_seed(cli.seed);
            print_json(&ws_ops::run_pipeline(&ws, &cfg)?)?;
        }
        Command::Serve { bind } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on http://{bind}", cli.workspace.display());
            rt.block_on(annotsvc::serve(ws, bind))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_list_forms() {
        assert_eq!(parse_t_list("0,10,...,100").unwrap().0, (0..=100).step_by(10).collect::<Vec<_>>());
        assert_eq!(parse_t_list("0, 25, ..., 60").unwrap().0, vec![0, 25, 50, 60]);
        assert_eq!(parse_t_list("60").unwrap().0, vec![60]);
        assert_eq!(parse_t_list("5,1").unwrap().0, vec![5, 1]);
        for bad in ["", "...,10", "0,...,10", "0,10,...", "10,0,...,20", "a"] {
            assert!(parse_t_list(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
