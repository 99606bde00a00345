//! Command-line front end: dataset generation, preprocessing, training,
//! evaluation, graph-type ablation, and construction/inference benchmarks.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 usage error,
//! 2 unreadable or malformed data, 3 runtime failure. Every artifact embeds
//! the fully resolved configuration (a `config` field in JSON files, a
//! leading `# config: {...}` line in CSVs), and everything is deterministic
//! given `--seed`.

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;
use stargraph::bench::{self, BenchError};
use stargraph::data::{self, DataError, Dataset};
use stargraph::graph::{build_sequence, CenterMode, GraphConfig, GraphSequence, GraphType};
use stargraph::model::{Checkpoint, DdgnnConfig, DdgnnModel, ModelError};
use stargraph::pointcloud::{preprocess_sequence, Point3, RangeBounds};
use std::path::{Path, PathBuf};
use std::str::FromStr;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_EPS: f64 = 0.35;
const DEFAULT_MIN_PTS: usize = 2;
const DEFAULT_SIZES: [usize; 7] = [64, 128, 256, 512, 1024, 2048, 4096];

fn main() {
    let code = match Cli::try_parse() {
        Ok(cli) => match run(cli) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {}", e.message());
                e.code()
            }
        },
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                0
            } else {
                eprint!("{e}");
                1
            }
        }
    };
    std::process::exit(code);
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidSpec(_) | DataError::InvalidSplit(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            ModelError::Checkpoint(_) => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            BenchError::Model(m) => m.into(),
            BenchError::NotEnoughSizes { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("json: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "stargraph", version, about = "Activity recognition on radar point clouds")]
struct Cli {
    /// JSON config file; explicit flags take precedence over its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// RNG seed; defaults to $STARGRAPH_SEED, then 42.
    #[arg(long, global = true, env = "STARGRAPH_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a motion spec.
    Generate(GenerateArgs),
    /// Clean a dataset: range filter, DBSCAN, keep the largest cluster.
    Preprocess(PreprocessArgs),
    /// Train a model; writes checkpoint.json, train_log.csv, eval.json.
    Train(TrainArgs),
    /// Evaluate a checkpoint; writes eval.json (and optionally confusion.csv).
    Eval(EvalArgs),
    /// Train and evaluate every graph variant with a shared seed.
    Ablate(AblateArgs),
    /// Measure construction scaling and optional inference latency.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Builtin "synth4" or a path to a JSON motion spec.
    #[arg(long, default_value = "synth4")]
    spec: String,
    /// Output file (.jsonl or .jsonl.gz).
    #[arg(long)]
    out: PathBuf,
    /// Sequences generated per class (default 75).
    #[arg(long)]
    n_per_class: Option<usize>,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input dataset (.jsonl or .jsonl.gz).
    #[arg(long)]
    input: PathBuf,
    /// Output file (.jsonl or .jsonl.gz).
    #[arg(long)]
    out: PathBuf,
    /// DBSCAN neighborhood radius in meters.
    #[arg(long)]
    eps: Option<f64>,
    /// DBSCAN core-point threshold (neighborhood includes the point itself).
    #[arg(long)]
    min_pts: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct GraphFlags {
    /// Graph type: dstar | ustar | knn | radius | fc | empty.
    #[arg(long)]
    graph: Option<String>,
    /// Neighbor count for knn graphs.
    #[arg(long)]
    k: Option<usize>,
    /// Connection radius in meters for radius graphs.
    #[arg(long)]
    r: Option<f64>,
    /// Star center: "mean", "zero", or fixed coordinates "x,y,z".
    #[arg(long)]
    center: Option<String>,
}

impl GraphFlags {
    fn any_explicit(&self) -> bool {
        self.graph.is_some() || self.k.is_some() || self.r.is_some() || self.center.is_some()
    }
}

#[derive(Args, Clone)]
struct ModelFlags {
    /// Width of the per-point projection layer.
    #[arg(long)]
    fc_dim: Option<usize>,
    /// Two comma-separated GraphConv widths, e.g. 32,16.
    #[arg(long, value_delimiter = ',')]
    gcn_dims: Option<Vec<usize>>,
    /// LSTM hidden size per direction.
    #[arg(long)]
    lstm_hidden: Option<usize>,
    /// Dropout rate before pooling (training only).
    #[arg(long)]
    dropout: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Maximum training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Validate every this many epochs.
    #[arg(long)]
    validate_every: Option<usize>,
    /// Consecutive non-improving validation rounds before stopping.
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args, Clone)]
struct SplitFlags {
    /// Comma-separated training subject ids (default 1,2,3).
    #[arg(long, value_delimiter = ',')]
    train_subjects: Option<Vec<u32>>,
    /// Comma-separated validation subject ids (default 4).
    #[arg(long, value_delimiter = ',')]
    val_subjects: Option<Vec<u32>>,
    /// Comma-separated test subject ids (default 5).
    #[arg(long, value_delimiter = ',')]
    test_subjects: Option<Vec<u32>>,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset (.jsonl or .jsonl.gz).
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Run the cleaning pipeline before graph construction.
    #[arg(long)]
    preprocess: bool,
    /// DBSCAN eps when --preprocess is set.
    #[arg(long)]
    eps: Option<f64>,
    /// DBSCAN min_pts when --preprocess is set.
    #[arg(long)]
    min_pts: Option<usize>,
    #[command(flatten)]
    graph: GraphFlags,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    split: SplitFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Input dataset (.jsonl or .jsonl.gz).
    #[arg(long)]
    input: PathBuf,
    /// Checkpoint produced by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Evaluate only these subjects (comma-separated; default: all).
    #[arg(long, value_delimiter = ',')]
    subjects: Option<Vec<u32>>,
    /// Also write the confusion matrix as confusion.csv.
    #[arg(long)]
    confusion_csv: bool,
    /// Run the cleaning pipeline before graph construction.
    #[arg(long)]
    preprocess: bool,
    /// DBSCAN eps when --preprocess is set.
    #[arg(long)]
    eps: Option<f64>,
    /// DBSCAN min_pts when --preprocess is set.
    #[arg(long)]
    min_pts: Option<usize>,
    #[command(flatten)]
    graph: GraphFlags,
}

#[derive(Args)]
struct AblateArgs {
    /// Input dataset (.jsonl or .jsonl.gz).
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Neighbor count for the knn row.
    #[arg(long)]
    k: Option<usize>,
    /// Connection radius for the radius row.
    #[arg(long)]
    r: Option<f64>,
    /// Run the cleaning pipeline before graph construction.
    #[arg(long)]
    preprocess: bool,
    /// DBSCAN eps when --preprocess is set.
    #[arg(long)]
    eps: Option<f64>,
    /// DBSCAN min_pts when --preprocess is set.
    #[arg(long)]
    min_pts: Option<usize>,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    split: SplitFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated frame sizes for the scaling fit.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Timing repetitions per size (median is used).
    #[arg(long)]
    reps: Option<usize>,
    /// Bench a single graph type instead of all six.
    #[arg(long)]
    graph: Option<String>,
    /// Neighbor count for knn construction.
    #[arg(long)]
    k: Option<usize>,
    /// Connection radius for radius construction.
    #[arg(long)]
    r: Option<f64>,
    /// Checkpoint for inference latency timing (requires --input).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset providing inference inputs (requires --checkpoint).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Untimed warmup inference runs.
    #[arg(long)]
    warmup: Option<usize>,
    /// Timed inference runs.
    #[arg(long)]
    inference_reps: Option<usize>,
}

/// Optional entries mirroring the flags; anything unknown is a usage error.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    graph: Option<String>,
    k: Option<usize>,
    r: Option<f64>,
    center: Option<String>,
    fc_dim: Option<usize>,
    gcn_dims: Option<Vec<usize>>,
    lstm_hidden: Option<usize>,
    dropout: Option<f64>,
    lr: Option<f64>,
    epochs: Option<usize>,
    validate_every: Option<usize>,
    patience: Option<usize>,
    preprocess: Option<bool>,
    eps: Option<f64>,
    min_pts: Option<usize>,
    n_per_class: Option<usize>,
    train_subjects: Option<Vec<u32>>,
    val_subjects: Option<Vec<u32>>,
    test_subjects: Option<Vec<u32>>,
    sizes: Option<Vec<usize>>,
    reps: Option<usize>,
    warmup: Option<usize>,
    inference_reps: Option<usize>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = load_file_config(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Generate(args) => cmd_generate(args, &file, seed),
        Command::Preprocess(args) => cmd_preprocess(args, &file, seed),
        Command::Train(args) => cmd_train(args, &file, seed),
        Command::Eval(args) => cmd_eval(args, &file, seed),
        Command::Ablate(args) => cmd_ablate(args, &file, seed),
        Command::Bench(args) => cmd_bench(args, &file, seed),
    }
}

fn parse_center(s: &str) -> Result<CenterMode, CliError> {
    match s {
        "mean" => Ok(CenterMode::Mean),
        "zero" => Ok(CenterMode::Zero),
        other => {
            let parts: Vec<&str> = other.split(',').collect();
            let coords: Option<Vec<f64>> =
                parts.iter().map(|p| p.trim().parse::<f64>().ok()).collect();
            match coords {
                Some(c) if c.len() == 3 => {
                    Ok(CenterMode::Static(Point3::new(c[0], c[1], c[2])))
                }
                _ => Err(CliError::Usage(format!(
                    "bad --center '{other}': expected \"mean\", \"zero\", or \"x,y,z\""
                ))),
            }
        }
    }
}

/// flags > config file > `base` (e.g. the checkpoint's recorded graph) >
/// built-in defaults.
fn resolve_graph(
    flags: &GraphFlags,
    file: &FileConfig,
    base: Option<GraphConfig>,
) -> Result<GraphConfig, CliError> {
    let base = base.unwrap_or_default();
    let graph_type = match flags.graph.as_deref().or(file.graph.as_deref()) {
        Some(s) => GraphType::from_str(s).map_err(CliError::Usage)?,
        None => base.graph_type,
    };
    let center = match flags.center.as_deref().or(file.center.as_deref()) {
        Some(s) => parse_center(s)?,
        None => base.center,
    };
    let config = GraphConfig {
        graph_type,
        k: flags.k.or(file.k).unwrap_or(base.k),
        radius: flags.r.or(file.r).unwrap_or(base.radius),
        center,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn resolve_model(
    flags: &ModelFlags,
    file: &FileConfig,
    classes: usize,
    seq_len: usize,
    seed: u64,
) -> Result<DdgnnConfig, CliError> {
    let d = DdgnnConfig::default();
    let gcn: Vec<usize> =
        flags.gcn_dims.clone().or_else(|| file.gcn_dims.clone()).unwrap_or(d.gcn_dims.to_vec());
    if gcn.len() != 2 {
        return Err(CliError::Usage(format!(
            "--gcn-dims needs exactly two widths, got {}",
            gcn.len()
        )));
    }
    let config = DdgnnConfig {
        classes,
        seq_len,
        fc_dim: flags.fc_dim.or(file.fc_dim).unwrap_or(d.fc_dim),
        gcn_dims: [gcn[0], gcn[1]],
        lstm_hidden: flags.lstm_hidden.or(file.lstm_hidden).unwrap_or(d.lstm_hidden),
        dropout_rate: flags.dropout.or(file.dropout).unwrap_or(d.dropout_rate),
        lr: flags.lr.or(file.lr).unwrap_or(d.lr),
        seed,
        validate_every: flags.validate_every.or(file.validate_every).unwrap_or(d.validate_every),
        patience: flags.patience.or(file.patience).unwrap_or(d.patience),
        max_epochs: flags.epochs.or(file.epochs).unwrap_or(d.max_epochs),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

struct ResolvedSplit {
    train: Vec<u32>,
    val: Vec<u32>,
    test: Vec<u32>,
}

fn resolve_split(flags: &SplitFlags, file: &FileConfig) -> ResolvedSplit {
    ResolvedSplit {
        train: flags
            .train_subjects
            .clone()
            .or_else(|| file.train_subjects.clone())
            .unwrap_or_else(|| vec![1, 2, 3]),
        val: flags
            .val_subjects
            .clone()
            .or_else(|| file.val_subjects.clone())
            .unwrap_or_else(|| vec![4]),
        test: flags
            .test_subjects
            .clone()
            .or_else(|| file.test_subjects.clone())
            .unwrap_or_else(|| vec![5]),
    }
}

/// Serializes in memory first and renames into place, so a failed run never
/// leaves a partial file at the destination.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn dataset_bytes(dataset: &Dataset, gz: bool) -> Result<Vec<u8>, CliError> {
    let mut plain = Vec::new();
    data::write_jsonl(&mut plain, dataset)?;
    if !gz {
        return Ok(plain);
    }
    use std::io::Write as _;
    let mut enc =
        flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(&plain).map_err(CliError::from)?;
    enc.finish().map_err(CliError::from)
}

fn csv_with_config(config: &serde_json::Value, body: &str) -> String {
    format!("# config: {config}\n{body}")
}

fn cmd_generate(args: GenerateArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let spec = if args.spec == "synth4" {
        data::synth4_spec()
    } else {
        let text = std::fs::read_to_string(&args.spec)
            .map_err(|e| CliError::Usage(format!("cannot read spec {}: {e}", args.spec)))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad spec {}: {e}", args.spec)))?
    };
    let n_per_class = args.n_per_class.or(file.n_per_class).unwrap_or(75);
    let dataset = data::synth_generate(&spec, n_per_class, seed)?;
    let bytes = dataset_bytes(&dataset, is_gz(&args.out))?;
    write_atomic(&args.out, &bytes)?;

    let resolved = json!({
        "command": "generate",
        "spec": args.spec,
        "n_per_class": n_per_class,
        "seed": seed,
        "out": args.out,
    });
    println!("config: {resolved}");
    println!(
        "wrote {}: {} classes, {} sequences, {} frames",
        args.out.display(),
        dataset.classes,
        dataset.len(),
        dataset.total_frames()
    );
    Ok(())
}

fn preprocess_dataset(dataset: &Dataset, eps: f64, min_pts: usize) -> Dataset {
    let bounds = RangeBounds::indoor_default();
    Dataset {
        seq_len: dataset.seq_len,
        classes: dataset.classes,
        sequences: dataset
            .sequences
            .iter()
            .map(|s| preprocess_sequence(s, &bounds, eps, min_pts))
            .collect(),
    }
}

fn cmd_preprocess(args: PreprocessArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let eps = args.eps.or(file.eps).unwrap_or(DEFAULT_EPS);
    let min_pts = args.min_pts.or(file.min_pts).unwrap_or(DEFAULT_MIN_PTS);
    if !(eps > 0.0) || min_pts == 0 {
        return Err(CliError::Usage("eps must be > 0 and min_pts >= 1".into()));
    }
    let dataset = data::load(&args.input)?;
    let before = dataset.total_frames();
    let points_before: usize =
        dataset.sequences.iter().flat_map(|s| &s.frames).map(|f| f.len()).sum();
    let cleaned = preprocess_dataset(&dataset, eps, min_pts);
    let points_after: usize =
        cleaned.sequences.iter().flat_map(|s| &s.frames).map(|f| f.len()).sum();
    let emptied: usize = cleaned
        .sequences
        .iter()
        .flat_map(|s| &s.frames)
        .filter(|f| f.is_empty())
        .count();
    let bytes = dataset_bytes(&cleaned, is_gz(&args.out))?;
    write_atomic(&args.out, &bytes)?;

    let resolved = json!({
        "command": "preprocess",
        "input": args.input,
        "out": args.out,
        "eps": eps,
        "min_pts": min_pts,
        "seed": seed,
    });
    println!("config: {resolved}");
    println!(
        "wrote {}: {} frames, points {} -> {}, {} empty frames",
        args.out.display(),
        before,
        points_before,
        points_after,
        emptied
    );
    Ok(())
}

fn build_graph_set(dataset: &Dataset, config: &GraphConfig) -> Result<Vec<GraphSequence>, CliError> {
    dataset
        .sequences
        .iter()
        .map(|s| build_sequence(s, config).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn warn_skipped(skipped: &[(u32, usize)]) {
    for (subject, count) in skipped {
        eprintln!("warning: subject {subject} ({count} sequences) not in any split, ignored");
    }
}

fn cmd_train(args: TrainArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let graph = resolve_graph(&args.graph, file, None)?;
    let split_subjects = resolve_split(&args.split, file);
    let preprocess = args.preprocess || file.preprocess.unwrap_or(false);
    let eps = args.eps.or(file.eps).unwrap_or(DEFAULT_EPS);
    let min_pts = args.min_pts.or(file.min_pts).unwrap_or(DEFAULT_MIN_PTS);

    let mut dataset = data::load(&args.input)?;
    if preprocess {
        dataset = preprocess_dataset(&dataset, eps, min_pts);
    }
    let model_config =
        resolve_model(&args.model, file, dataset.classes, dataset.seq_len, seed)?;
    let split = data::split_by_subject(
        &dataset,
        &split_subjects.train,
        &split_subjects.val,
        &split_subjects.test,
    )?;
    warn_skipped(&split.skipped);
    let gs_train = build_graph_set(&split.train, &graph)?;
    let gs_val = build_graph_set(&split.val, &graph)?;
    if gs_train.is_empty() || gs_val.is_empty() {
        return Err(CliError::Data("train or validation split is empty".into()));
    }

    let resolved = json!({
        "command": "train",
        "input": args.input,
        "out": args.out,
        "seed": seed,
        "preprocess": preprocess,
        "eps": eps,
        "min_pts": min_pts,
        "graph": graph,
        "model": model_config,
        "train_subjects": split_subjects.train,
        "val_subjects": split_subjects.val,
        "test_subjects": split_subjects.test,
    });
    println!("config: {resolved}");
    println!(
        "training on {} sequences, validating on {}",
        gs_train.len(),
        gs_val.len()
    );

    let mut model = DdgnnModel::init(model_config)?;
    let outcome = model.train(&gs_train, &gs_val)?;
    let report = model.evaluate(&gs_val)?;

    let ckpt = Checkpoint::new(model, Some(graph));
    let mut ckpt_json = serde_json::to_value(&ckpt)?;
    ckpt_json["config"] = resolved.clone();
    write_atomic(&args.out.join("checkpoint.json"), ckpt_json.to_string().as_bytes())?;
    write_atomic(
        &args.out.join("train_log.csv"),
        csv_with_config(&resolved, &outcome.log_csv()).as_bytes(),
    )?;
    let eval_json = json!({ "config": resolved, "split": "val", "report": report, "outcome": {
        "best_epoch": outcome.best_epoch,
        "best_val_acc": outcome.best_val_acc,
        "epochs_run": outcome.epochs_run,
        "stopped_early": outcome.stopped_early,
    }});
    write_atomic(&args.out.join("eval.json"), eval_json.to_string().as_bytes())?;

    println!(
        "done: best val acc {:.4} at epoch {} ({} epochs run{})",
        outcome.best_val_acc,
        outcome.best_epoch,
        outcome.epochs_run,
        if outcome.stopped_early { ", stopped early" } else { "" }
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let recorded = ckpt.graph;
    let graph = if args.graph.any_explicit() || file.graph.is_some() {
        let merged = resolve_graph(&args.graph, file, recorded)?;
        if let Some(rec) = recorded {
            if merged != rec {
                eprintln!(
                    "warning: checkpoint was trained with graph config {}, evaluating with {}",
                    serde_json::to_string(&rec)?,
                    serde_json::to_string(&merged)?
                );
            }
        }
        merged
    } else {
        recorded.map(Ok).unwrap_or_else(|| resolve_graph(&args.graph, file, None))?
    };

    let preprocess = args.preprocess || file.preprocess.unwrap_or(false);
    let eps = args.eps.or(file.eps).unwrap_or(DEFAULT_EPS);
    let min_pts = args.min_pts.or(file.min_pts).unwrap_or(DEFAULT_MIN_PTS);
    let mut dataset = data::load(&args.input)?;
    if preprocess {
        dataset = preprocess_dataset(&dataset, eps, min_pts);
    }
    if let Some(subjects) = &args.subjects {
        dataset.sequences.retain(|s| subjects.contains(&s.subject_id));
    }
    if dataset.is_empty() {
        return Err(CliError::Data("no sequences left to evaluate".into()));
    }
    let set = build_graph_set(&dataset, &graph)?;
    let report = ckpt.model.evaluate(&set)?;

    let resolved = json!({
        "command": "eval",
        "input": args.input,
        "checkpoint": args.checkpoint,
        "out": args.out,
        "seed": seed,
        "preprocess": preprocess,
        "subjects": args.subjects,
        "graph": graph,
    });
    println!("config: {resolved}");
    let eval_json = json!({ "config": resolved, "report": report });
    write_atomic(&args.out.join("eval.json"), eval_json.to_string().as_bytes())?;
    if args.confusion_csv {
        write_atomic(
            &args.out.join("confusion.csv"),
            csv_with_config(&resolved, &report.confusion_csv()).as_bytes(),
        )?;
    }
    println!(
        "accuracy {:.4} on {} sequences (avg inference {:.3} ms)",
        report.overall_accuracy,
        set.len(),
        report.avg_inference_ms
    );
    Ok(())
}

fn cmd_ablate(args: AblateArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let preprocess = args.preprocess || file.preprocess.unwrap_or(false);
    let eps = args.eps.or(file.eps).unwrap_or(DEFAULT_EPS);
    let min_pts = args.min_pts.or(file.min_pts).unwrap_or(DEFAULT_MIN_PTS);
    let k = args.k.or(file.k).unwrap_or(5);
    let radius = args.r.or(file.r).unwrap_or(0.5);
    if k == 0 || !(radius > 0.0) {
        return Err(CliError::Usage("k must be >= 1 and r must be > 0".into()));
    }
    let split_subjects = resolve_split(&args.split, file);

    let mut dataset = data::load(&args.input)?;
    if preprocess {
        dataset = preprocess_dataset(&dataset, eps, min_pts);
    }
    let model_config =
        resolve_model(&args.model, file, dataset.classes, dataset.seq_len, seed)?;
    let split = data::split_by_subject(
        &dataset,
        &split_subjects.train,
        &split_subjects.val,
        &split_subjects.test,
    )?;
    warn_skipped(&split.skipped);

    let resolved = json!({
        "command": "ablate",
        "input": args.input,
        "out": args.out,
        "seed": seed,
        "preprocess": preprocess,
        "eps": eps,
        "min_pts": min_pts,
        "k": k,
        "r": radius,
        "model": model_config,
        "train_subjects": split_subjects.train,
        "val_subjects": split_subjects.val,
        "test_subjects": split_subjects.test,
    });
    println!("config: {resolved}");

    let star_centers: [(&str, CenterMode); 3] = [
        ("static", CenterMode::default()),
        ("mean", CenterMode::Mean),
        ("zero", CenterMode::Zero),
    ];
    let mut rows: Vec<(GraphType, &'static str, GraphConfig)> = Vec::new();
    for gt in [GraphType::DStar, GraphType::UStar] {
        for (label, center) in star_centers {
            rows.push((gt, label, GraphConfig { graph_type: gt, k, radius, center }));
        }
    }
    for gt in [GraphType::Knn, GraphType::Radius, GraphType::Fc, GraphType::Empty] {
        rows.push((gt, "-", GraphConfig { graph_type: gt, k, radius, center: CenterMode::default() }));
    }

    let mut csv = String::from("graph,center,k,r,seed,epochs_run,best_val_acc,test_acc\n");
    let mut accuracy: Vec<(String, f64)> = Vec::new();
    for (gt, center_label, graph) in rows {
        let gs_train = build_graph_set(&split.train, &graph)?;
        let gs_val = build_graph_set(&split.val, &graph)?;
        let gs_test = build_graph_set(&split.test, &graph)?;
        if gs_train.is_empty() || gs_val.is_empty() || gs_test.is_empty() {
            return Err(CliError::Data("a split is empty".into()));
        }
        let mut model = DdgnnModel::init(model_config)?;
        let outcome = model.train(&gs_train, &gs_val)?;
        let test_acc = model.evaluate(&gs_test)?.overall_accuracy;
        let name = if center_label == "-" {
            gt.name().to_string()
        } else {
            format!("{}/{}", gt.name(), center_label)
        };
        println!(
            "{name}: val {:.4} (epoch {}), test {:.4}",
            outcome.best_val_acc, outcome.best_epoch, test_acc
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            gt.name(),
            center_label,
            k,
            radius,
            seed,
            outcome.epochs_run,
            outcome.best_val_acc,
            test_acc
        ));
        accuracy.push((name, test_acc));
    }
    write_atomic(&args.out.join("ablate.csv"), csv_with_config(&resolved, &csv).as_bytes())?;

    let get = |key: &str| accuracy.iter().find(|(n, _)| n == key).map(|(_, a)| *a);
    if let (Some(dstar), Some(fc)) = (get("dstar/static"), get("fc")) {
        println!(
            "note: dstar/static test acc {dstar:.4} vs fc {fc:.4}{}",
            if dstar >= fc { "" } else { " (fc ahead on this run)" }
        );
    }
    println!("wrote {}", args.out.join("ablate.csv").display());
    Ok(())
}

fn cmd_bench(args: BenchArgs, file: &FileConfig, seed: u64) -> Result<(), CliError> {
    let sizes = args.sizes.clone().or_else(|| file.sizes.clone()).unwrap_or(DEFAULT_SIZES.to_vec());
    let reps = args.reps.or(file.reps).unwrap_or(20);
    let k = args.k.or(file.k).unwrap_or(5);
    let radius = args.r.or(file.r).unwrap_or(0.5);
    let types: Vec<GraphType> = match args.graph.as_deref().or(file.graph.as_deref()) {
        Some(s) => vec![GraphType::from_str(s).map_err(CliError::Usage)?],
        None => GraphType::ALL.to_vec(),
    };
    if args.checkpoint.is_some() != args.input.is_some() {
        return Err(CliError::Usage(
            "--checkpoint and --input must be given together".into(),
        ));
    }

    let resolved = json!({
        "command": "bench",
        "out": args.out,
        "seed": seed,
        "sizes": sizes,
        "reps": reps,
        "k": k,
        "r": radius,
        "graphs": types.iter().map(|t| t.name()).collect::<Vec<_>>(),
        "checkpoint": args.checkpoint,
        "input": args.input,
    });
    println!("config: {resolved}");

    let mut reports = Vec::new();
    for gt in &types {
        let config = GraphConfig { graph_type: *gt, k, radius, center: CenterMode::default() };
        let report = bench::time_construction(&config, &sizes, reps, seed)?;
        println!(
            "{}: slope {:.3} +/- {:.3}{}",
            gt.name(),
            report.slope,
            report.ci_half_width,
            if report.dropped.is_empty() {
                String::new()
            } else {
                format!(" (dropped {:?}: under timer floor)", report.dropped)
            }
        );
        reports.push(report);
    }

    let mut inference = None;
    if let (Some(ckpt_path), Some(input)) = (&args.checkpoint, &args.input) {
        let ckpt = Checkpoint::load(ckpt_path)?;
        let graph = ckpt.graph.unwrap_or_default();
        let dataset = data::load(input)?;
        let set = build_graph_set(&dataset, &graph)?;
        let warmup = args.warmup.or(file.warmup).unwrap_or(10);
        let inf_reps = args.inference_reps.or(file.inference_reps).unwrap_or(100);
        let report = bench::time_inference(&ckpt.model, &set, warmup, inf_reps)?;
        println!(
            "inference: mean {:.3} ms, p95 {:.3} ms over {} runs",
            report.mean_ms, report.p95_ms, report.reps
        );
        inference = Some(report);
    }

    let scaling = json!({
        "config": resolved,
        "construction": reports,
        "inference": inference,
    });
    write_atomic(&args.out.join("scaling.json"), scaling.to_string().as_bytes())?;
    println!("wrote {}", args.out.join("scaling.json").display());
    Ok(())
}
