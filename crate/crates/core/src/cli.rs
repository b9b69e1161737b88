//! The `vcn` command line: `train`, `eval`, `gen` and `gradcheck`.
//!
//! Results go to stdout as JSON, logs to stderr. Exit codes: 0 success,
//! 1 configuration or usage error, 2 data or checkpoint error, 3 numeric
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::column::Activation;
use crate::data::{self, generate, Dataset, SyntheticSpec, Task};
use crate::error::{Error, Result};
use crate::gradcheck;
use crate::metrics::MetricsReport;
use crate::model::{load_checkpoint, save_checkpoint, ModelConfig, Readout};
use crate::training::{self, history_csv, init_model, OptimizerKind, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Unknown { .. } => EXIT_CONFIG,
        Error::NonFinite(_) | Error::EmptyMean => EXIT_NUMERIC,
        Error::Shape { .. }
        | Error::InvalidGraph(_)
        | Error::Parse { .. }
        | Error::Dataset(_)
        | Error::Checkpoint(_)
        | Error::Metric(_)
        | Error::Io(_) => EXIT_DATA,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "vcn",
    version,
    about = "Virtual Column Network graph classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write checkpoint, history, metrics and manifest.
    Train(Box<TrainArgs>),
    /// Score a dataset with a checkpoint.
    Eval(EvalArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

/// Training options. Every key may also come from `--config` (TOML, same
/// names with underscores); flags win.
#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// TOML file with defaults for the other options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Training set (JSON lines).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Validation set; the training set is reused when absent.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Held-out test set, scored once with the best weights.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Free-form task label recorded in the manifest.
    #[arg(long)]
    pub task: Option<String>,
    /// `virtual` or `mean`.
    #[arg(long)]
    pub readout: Option<String>,
    /// Keep the virtual column with a mean readout (defaults to on only for
    /// the virtual readout).
    #[arg(long = "virtual-node")]
    pub virtual_node: Option<bool>,
    /// Column height T.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dh: Option<usize>,
    #[arg(long)]
    pub dv: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// `adam` or `rmsprop`.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long = "max-epochs")]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long = "max-halvings")]
    pub max_halvings: Option<usize>,
    #[arg(long = "reset-gate")]
    pub reset_gate: Option<bool>,
    #[arg(long = "virtual-gate")]
    pub virtual_gate: Option<bool>,
    #[arg(long = "head-hidden")]
    pub head_hidden: Option<usize>,
    /// `relu`, `tanh` or `identity`.
    #[arg(long)]
    pub activation: Option<String>,
}

impl TrainArgs {
    fn merged_with(self, file: TrainArgs) -> TrainArgs {
        macro_rules! pick {
            ($($f:ident),*) => { TrainArgs { config: self.config, $($f: self.$f.or(file.$f)),* } };
        }
        pick!(
            data,
            val,
            test,
            task,
            readout,
            virtual_node,
            steps,
            dh,
            dv,
            dropout,
            lr,
            optimizer,
            batch,
            seed,
            out,
            threads,
            max_epochs,
            patience,
            max_halvings,
            reset_gate,
            virtual_gate,
            head_hidden,
            activation
        )
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write `id,score` lines, one per graph.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "min-nodes")]
    min_nodes: Option<usize>,
    #[arg(long = "max-nodes")]
    max_nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    graphs: usize,
    /// Corrupt the analytic gradient of this parameter.
    #[arg(long = "inject-fault", hide = true)]
    inject_fault: Option<String>,
}

/// Everything needed to rerun a training command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub task: Option<String>,
    pub data: PathBuf,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

/// Written to `metrics.json` and stdout after training.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub epochs: usize,
    pub halvings: usize,
    pub val: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<MetricsReport>,
}

fn parse_flag<T: std::str::FromStr<Err = Error>>(v: Option<&String>) -> Result<Option<T>> {
    v.map(|s| s.parse()).transpose()
}

fn load_data(path: &Path) -> Result<Dataset> {
    let d = data::load(path)?;
    if d.is_empty() {
        return Err(Error::Dataset(format!(
            "{} contains no graphs",
            path.display()
        )));
    }
    Ok(d)
}

/// Resolves flags and the optional TOML file into a training config.
pub fn resolve_train(args: TrainArgs, train: &Dataset) -> Result<(TrainConfig, TrainArgs)> {
    let args = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let file: TrainArgs = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            args.merged_with(file)
        }
        None => args,
    };
    let d_x = train.attr_dim().unwrap_or(1);
    let d_g = train.graph_attr_dim().unwrap_or(d_x);
    let p = train.n_edge_types().unwrap_or(1);
    let mut model = ModelConfig::for_data(d_x, d_g, p);
    if let Some(r) = parse_flag::<Readout>(args.readout.as_ref())? {
        model.readout = r;
    }
    model.use_virtual = args
        .virtual_node
        .unwrap_or(model.readout == Readout::Virtual);
    if let Some(t) = args.steps {
        model.steps = t;
    }
    if let Some(d) = args.dh {
        model.d_h = d;
    }
    if let Some(d) = args.dv {
        model.d_v = d;
    }
    if let Some(b) = args.reset_gate {
        model.reset_gate = b;
    }
    if let Some(b) = args.virtual_gate {
        model.virtual_gate = b;
    }
    if args.head_hidden.is_some() {
        model.head_hidden = args.head_hidden;
    }
    if let Some(a) = args.activation.as_ref() {
        model.activation = match a.as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            other => {
                return Err(Error::Unknown {
                    kind: "activation",
                    name: other.into(),
                })
            }
        };
    }
    let mut cfg = TrainConfig::new(model, args.lr.unwrap_or(0.002));
    if let Some(o) = parse_flag::<OptimizerKind>(args.optimizer.as_ref())? {
        cfg.optimizer = o;
    }
    cfg.batch_size = args.batch.unwrap_or(cfg.batch_size);
    cfg.max_epochs = args.max_epochs.unwrap_or(cfg.max_epochs);
    cfg.patience = args.patience.unwrap_or(cfg.patience);
    cfg.max_halvings = args.max_halvings.unwrap_or(cfg.max_halvings);
    cfg.dropout = args.dropout.unwrap_or(cfg.dropout);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.threads = args.threads.unwrap_or(cfg.threads);
    cfg.validate()?;
    Ok((cfg, args))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))
}

fn cmd_train(args: TrainArgs) -> Result<String> {
    let file_data = match (&args.data, &args.config) {
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let file: TrainArgs = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            file.data
        }
        (d, _) => d.clone(),
    };
    let data_path = file_data.ok_or_else(|| Error::Config("--data is required".into()))?;
    let train_set = load_data(&data_path)?;
    let (cfg, args) = resolve_train(args, &train_set)?;
    let out = args
        .out
        .clone()
        .ok_or_else(|| Error::Config("--out is required".into()))?;
    let val_set = match &args.val {
        Some(p) => load_data(p)?,
        None => {
            log::warn!("no --val given; validating on the training set");
            train_set.clone()
        }
    };
    let test_set = args.test.as_deref().map(load_data).transpose()?;

    let model = init_model(&cfg)?;
    let outcome = training::train(model, &train_set, &val_set, &cfg)?;
    let (_, val) = training::evaluate(&outcome.model, &val_set, cfg.threads)?;
    let test = match &test_set {
        Some(t) => Some(training::evaluate(&outcome.model, t, cfg.threads)?.1),
        None => None,
    };
    let summary = TrainSummary {
        best_epoch: outcome.best_epoch,
        epochs: outcome.history.len(),
        halvings: outcome.halvings,
        val,
        test,
    };
    let manifest = RunManifest {
        config: cfg.clone(),
        task: args.task.clone(),
        data: data_path,
        val: args.val.clone(),
        test: args.test.clone(),
        seed: cfg.seed,
        out: out.clone(),
    };
    fs::create_dir_all(&out)?;
    save_checkpoint(&outcome.model, &out.join(CHECKPOINT_FILE))?;
    fs::write(out.join(HISTORY_FILE), history_csv(&outcome.history))?;
    let metrics = to_json(&summary)?;
    fs::write(out.join(METRICS_FILE), format!("{metrics}\n"))?;
    fs::write(
        out.join(MANIFEST_FILE),
        format!("{}\n", to_json(&manifest)?),
    )?;
    Ok(metrics)
}

fn cmd_eval(args: EvalArgs) -> Result<String> {
    let model = load_checkpoint(&args.checkpoint)?;
    let data = load_data(&args.data)?;
    let (scores, report) = training::evaluate(&model, &data, args.threads)?;
    if let Some(path) = &args.scores {
        let mut text = String::new();
        for (s, score) in data.samples().iter().zip(&scores) {
            let _ = writeln!(text, "{},{score}", s.id);
        }
        fs::write(path, text)?;
    }
    to_json(&report)
}

fn cmd_gen(args: GenArgs) -> Result<String> {
    let task: Task = args.task.parse()?;
    let mut spec = SyntheticSpec::new(task, args.n, args.seed);
    spec.min_nodes = args.min_nodes.unwrap_or(spec.min_nodes);
    spec.max_nodes = args.max_nodes.unwrap_or(spec.max_nodes);
    let d = generate(&spec)?;
    data::save(&d, &args.out)?;
    let pos = d.labels()?.iter().filter(|&&l| l).count();
    to_json(&serde_json::json!({
        "task": task.name(),
        "graphs": d.len(),
        "positives": pos,
        "out": args.out,
    }))
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(String, bool)> {
    let report = gradcheck::run(args.seed, args.graphs, args.inject_fault.as_deref())?;
    if !report.passed() {
        eprintln!(
            "gradient check failed: relative error {:e} in `{}`",
            report.max_rel_error, report.worst_param
        );
    }
    Ok((to_json(&report)?, report.passed()))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(*a).map(|s| (s, true)),
        Command::Eval(a) => cmd_eval(a).map(|s| (s, true)),
        Command::Gen(a) => cmd_gen(a).map(|s| (s, true)),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok((stdout, ok)) => {
            println!("{stdout}");
            if ok {
                EXIT_OK
            } else {
                EXIT_NUMERIC
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
