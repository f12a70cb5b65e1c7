//! The `rho` command line: `train`, `eval`, `analyze` and `synth`.
//!
//! Settings resolve as flags, then the `--config` JSON file, then defaults.
//! Every command computes all of its outputs in memory before writing any
//! file, so a failing command leaves the output directory untouched.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::data::{self, Dataset, Split, SynthSpec};
use crate::error::{Result, RhoError};
use crate::eval::{self, Metrics};
use crate::graph::node_homophily;
use crate::model::{CwrFormula, ModelConfig, ModelParams};
use crate::train::{self, EpochLog, TrainConfig};

/// Labeled-set sampling used when the dataset ships without `split.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Percent of normal nodes that are labeled.
    pub labeled_percent: f64,
    /// Anomalies moved into the labeled set, as a fraction of its size.
    pub contamination: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            labeled_percent: 15.0,
            contamination: 0.0,
        }
    }
}

/// Everything `train` needs besides the data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
    /// Root seed; overrides `model.seed`.
    pub seed: u64,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| RhoError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| RhoError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Fills `input_dim` from the data and syncs the root seed, then validates.
    pub fn resolve(&mut self, feature_dim: usize) -> Result<()> {
        if self.model.input_dim == 0 {
            self.model.input_dim = feature_dim;
        }
        self.model.seed = self.seed;
        self.model.validate()?;
        self.train.validate()?;
        if !(self.split.labeled_percent > 0.0 && self.split.labeled_percent < 100.0) {
            return Err(RhoError::InvalidConfig(format!(
                "labeled_percent must lie in (0, 100), got {}",
                self.split.labeled_percent
            )));
        }
        if !(0.0..=1.0).contains(&self.split.contamination) {
            return Err(RhoError::InvalidConfig(format!(
                "contamination must lie in [0, 1], got {}",
                self.split.contamination
            )));
        }
        if self.model.input_dim != feature_dim {
            return Err(RhoError::DimensionMismatch {
                context: "config input_dim vs feature width",
                expected: feature_dim,
                actual: self.model.input_dim,
            });
        }
        Ok(())
    }
}

/// Result of an end-to-end training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: RunConfig,
    pub split: Split,
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    pub scores: Array1<f64>,
    pub metrics: Metrics,
}

/// Uses the dataset's split if it has one, otherwise samples one from the
/// root seed, then applies contamination.
pub fn prepare_split(dataset: &Dataset, cfg: &RunConfig) -> Result<Dataset> {
    let with_split = match &dataset.split {
        Some(_) => dataset.clone(),
        None => {
            let split = data::sample_split(&dataset.labels, cfg.split.labeled_percent, cfg.seed)?;
            dataset.clone().with_split(split)?
        }
    };
    if cfg.split.contamination > 0.0 {
        data::inject_contamination(&with_split, cfg.split.contamination, cfg.seed)
    } else {
        Ok(with_split)
    }
}

/// Split, train, score and evaluate on the test nodes.
pub fn train_pipeline(dataset: &Dataset, cfg: &RunConfig) -> Result<TrainOutcome> {
    let mut cfg = cfg.clone();
    cfg.resolve(dataset.features.ncols())?;
    let dataset = prepare_split(dataset, &cfg)?;
    let split = dataset.split()?.clone();
    let fit = train::fit(&dataset.graph, dataset.features.view(), &split.labeled, &cfg.model, &cfg.train)?;
    let scores = eval::score(&dataset.graph, &fit.params, dataset.features.view(), &cfg.model)?;
    let metrics = eval::metrics_on(&scores, &dataset.labels, &split.test)?;
    Ok(TrainOutcome {
        config: cfg,
        split,
        params: fit.params,
        log: fit.log,
        scores,
        metrics,
    })
}

#[derive(Debug, Parser)]
#[command(name = "rho", version, about = "Graph anomaly detection with learnable spectral filters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a dataset directory and score its test nodes.
    Train(TrainArgs),
    /// Score a dataset with an existing checkpoint.
    Eval(EvalArgs),
    /// Homophily histograms or learned filter curves.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic mixed-homophily dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Run config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Weight of the alignment loss.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Alignment mini-batch size; 0 uses the whole graph.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Starting value of every filter coefficient.
    #[arg(long)]
    pub filter_init: Option<f64>,
    #[arg(long, value_enum)]
    pub cwr_formula: Option<FormulaArg>,
    /// Keep filter coefficients at their initial value.
    #[arg(long)]
    pub freeze_filters: bool,
    /// Percent of normal nodes labeled when the data has no split.json.
    #[arg(long)]
    pub labeled_percent: Option<f64>,
    /// Anomalies added to the labeled set, as a fraction of its size.
    #[arg(long)]
    pub contamination: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormulaArg {
    PerChannel,
    Hadamard,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Split file; defaults to the dataset's own split.json. Without any
    /// split, metrics cover every node.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted for symmetry with the other commands; scoring is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AnalyzeMode {
    Homophily,
    FilterResponse,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub mode: AnalyzeMode,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// SynthSpec JSON; `--preset` alone is enough.
    #[arg(long, alias = "config")]
    pub spec: Option<PathBuf>,
    /// Regime preset: 80-20, 50-50 or 20-80.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    execute(Cli::try_parse_from(args).map_err(|e| RhoError::InvalidInput(e.to_string()))?)
}

/// Runs an already parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

struct Outputs(Vec<(&'static str, String)>);

impl Outputs {
    fn write(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| RhoError::io(dir, e))?;
        for (name, body) in self.0 {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| RhoError::io(&path, e))?;
        }
        Ok(())
    }
}

fn train_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.train.learning_rate = v;
    }
    if a.freeze_filters {
        cfg.train.freeze_filters = true;
    }
    if let Some(v) = a.alpha {
        cfg.model.alpha = v;
    }
    if let Some(v) = a.temperature {
        cfg.model.temperature = v;
    }
    if let Some(v) = a.hidden_dim {
        cfg.model.hidden_dim = v;
    }
    if let Some(v) = a.layers {
        cfg.model.layers = v;
    }
    if let Some(v) = a.batch_size {
        cfg.model.batch_size = v;
    }
    if let Some(v) = a.filter_init {
        cfg.model.filter_init = v;
    }
    if let Some(f) = a.cwr_formula {
        cfg.model.cwr_formula = match f {
            FormulaArg::PerChannel => CwrFormula::PerChannel,
            FormulaArg::Hadamard => CwrFormula::Hadamard,
        };
    }
    if let Some(v) = a.labeled_percent {
        cfg.split.labeled_percent = v;
    }
    if let Some(v) = a.contamination {
        cfg.split.contamination = v;
    }
    Ok(cfg)
}

fn scores_csv(scores: &Array1<f64>, labels: &[u8], split: Option<&Split>) -> String {
    let mut role = vec!["test"; scores.len()];
    if let Some(split) = split {
        for &v in &split.labeled {
            role[v] = "labeled";
        }
    }
    let mut out = String::from("node_id,score,label,split\n");
    for (v, s) in scores.iter().enumerate() {
        out.push_str(&format!("{v},{s:?},{},{}\n", labels[v], role[v]));
    }
    out
}

fn loss_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,l_ccr,l_cwr,l_gna,total\n");
    for e in log {
        out.push_str(&format!("{},{:?},{:?},{:?},{:?}\n", e.epoch, e.l_ccr, e.l_cwr, e.l_gna, e.total));
    }
    out
}

fn split_json(split: &Split) -> Result<String> {
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "labeled": split.labeled,
        "contaminated": split.contaminated,
    }))?)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a)?;
    let dataset = data::load_dataset(&a.data)?;
    let outcome = train_pipeline(&dataset, &cfg)?;
    let metrics = serde_json::json!({
        "auroc": outcome.metrics.auroc,
        "auprc": outcome.metrics.auprc,
        "num_test": outcome.split.test.len(),
        "seed": outcome.config.seed,
        "config": outcome.config,
    });
    Outputs(vec![
        ("checkpoint.json", checkpoint::to_json(&outcome.config.model, &outcome.params)?),
        ("loss_log.csv", loss_log_csv(&outcome.log)),
        ("scores.csv", scores_csv(&outcome.scores, &dataset.labels, Some(&outcome.split))),
        ("split.json", split_json(&outcome.split)?),
        ("metrics.json", serde_json::to_string_pretty(&metrics)?),
    ])
    .write(&a.out)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (cfg, params) = checkpoint::load(&a.checkpoint)?;
    let mut dataset = data::load_dataset(&a.data)?;
    if let Some(path) = &a.split {
        let split = read_split(path, dataset.num_nodes())?;
        dataset.split = None;
        dataset = dataset.with_split(split)?;
    }
    let scores = eval::score(&dataset.graph, &params, dataset.features.view(), &cfg)?;
    let nodes: Vec<usize> = match &dataset.split {
        Some(s) => s.test.clone(),
        None => (0..dataset.num_nodes()).collect(),
    };
    let m = eval::metrics_on(&scores, &dataset.labels, &nodes)?;
    let metrics = serde_json::json!({
        "auroc": m.auroc,
        "auprc": m.auprc,
        "num_test": nodes.len(),
        "config": cfg,
    });
    Outputs(vec![
        ("scores.csv", scores_csv(&scores, &dataset.labels, dataset.split.as_ref())),
        ("metrics.json", serde_json::to_string_pretty(&metrics)?),
    ])
    .write(&a.out)
}

fn read_split(path: &Path, n: usize) -> Result<Split> {
    #[derive(Deserialize)]
    struct File {
        labeled: Vec<usize>,
        #[serde(default)]
        contaminated: Vec<usize>,
    }
    let text = fs::read_to_string(path).map_err(|e| RhoError::io(path, e))?;
    let file: File = serde_json::from_str(&text)?;
    let mut is_labeled = vec![false; n];
    for &v in &file.labeled {
        if v >= n {
            return Err(RhoError::InvalidInput(format!("split node {v} outside graph of {n} nodes")));
        }
        is_labeled[v] = true;
    }
    Ok(Split {
        labeled: file.labeled,
        test: (0..n).filter(|&v| !is_labeled[v]).collect(),
        contaminated: file.contaminated,
    })
}

/// Long-format filter curves: one `ccr` curve plus one `cwr_<j>` curve per
/// channel, sampled at `grid` points `2i / grid`.
pub fn filter_response_csv(params: &ModelParams, grid: usize) -> String {
    let lambdas: Vec<f64> = (0..grid).map(|i| 2.0 * i as f64 / grid as f64).collect();
    let mut out = String::from("filter,lambda,response\n");
    let ccr: Vec<f64> = params.ccr_k.to_vec();
    for &l in &lambdas {
        out.push_str(&format!("ccr,{l:?},{:?}\n", crate::spectral::stacked_response(&ccr, l)));
    }
    for j in 0..params.cwr_k.ncols() {
        let ks: Vec<f64> = params.cwr_k.column(j).to_vec();
        for &l in &lambdas {
            out.push_str(&format!("cwr_{j},{l:?},{:?}\n", crate::spectral::stacked_response(&ks, l)));
        }
    }
    out
}

pub fn homophily_hist_csv(dataset: &Dataset, bins: usize) -> Result<String> {
    let report = node_homophily(&dataset.graph, &dataset.labels)?;
    let mut out = String::from("bin_low,bin_high,count,class\n");
    for (class, label) in [("normal", 0u8), ("anomaly", 1u8)] {
        for bin in report.histogram(bins, |v| dataset.labels[v] == label) {
            out.push_str(&format!("{:?},{:?},{},{class}\n", bin.low, bin.high, bin.count));
        }
    }
    Ok(out)
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let outputs = match a.mode {
        AnalyzeMode::Homophily => {
            let dir = a
                .data
                .as_ref()
                .ok_or_else(|| RhoError::InvalidInput("homophily mode needs --data".into()))?;
            if a.bins == 0 {
                return Err(RhoError::InvalidInput("--bins must be at least 1".into()));
            }
            let dataset = data::load_dataset(dir)?;
            Outputs(vec![("homophily_hist.csv", homophily_hist_csv(&dataset, a.bins)?)])
        }
        AnalyzeMode::FilterResponse => {
            let path = a
                .checkpoint
                .as_ref()
                .ok_or_else(|| RhoError::InvalidInput("filter-response mode needs --checkpoint".into()))?;
            if a.grid == 0 {
                return Err(RhoError::InvalidInput("--grid must be at least 1".into()));
            }
            let (_, params) = checkpoint::load(path)?;
            Outputs(vec![("filter_response.csv", filter_response_csv(&params, a.grid))])
        }
    };
    outputs.write(&a.out)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match (&a.spec, &a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| RhoError::io(path, e))?;
            let mut spec: SynthSpec =
                serde_json::from_str(&text).map_err(|e| RhoError::InvalidConfig(format!("{}: {e}", path.display())))?;
            if let Some(name) = &a.preset {
                spec.low_homophily_fraction = SynthSpec::preset(name)?.low_homophily_fraction;
            }
            spec
        }
        (None, Some(name)) => SynthSpec::preset(name)?,
        (None, None) => SynthSpec::default(),
    };
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let out = data::synth_dataset(&spec)?;
    let report = serde_json::to_string_pretty(&serde_json::json!({
        "spec": spec,
        "report": out.report,
    }))?;
    let staging = tempdir_in(&a.out)?;
    let staged = out.dataset.save(&staging).and_then(|()| {
        let path = staging.join("synth_report.json");
        fs::write(&path, report).map_err(|e| RhoError::io(&path, e))
    });
    if let Err(e) = staged {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    fs::create_dir_all(&a.out).map_err(|e| RhoError::io(&a.out, e))?;
    for entry in fs::read_dir(&staging).map_err(|e| RhoError::io(&staging, e))? {
        let entry = entry.map_err(|e| RhoError::io(&staging, e))?;
        let target = a.out.join(entry.file_name());
        fs::rename(entry.path(), &target).map_err(|e| RhoError::io(&target, e))?;
    }
    fs::remove_dir(&staging).map_err(|e| RhoError::io(&staging, e))
}

fn tempdir_in(out: &Path) -> Result<PathBuf> {
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| RhoError::io(parent, e))?;
    let name = format!(
        ".{}.partial-{}",
        out.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    );
    let dir = parent.join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| RhoError::io(&dir, e))?;
    }
    fs::create_dir(&dir).map_err(|e| RhoError::io(&dir, e))?;
    Ok(dir)
}
