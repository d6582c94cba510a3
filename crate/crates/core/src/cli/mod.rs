//! The `flowbench` command line.
//!
//! Exit status is 0 on success, 1 when the library reports a domain error
//! and 2 for usage errors. Every file written carries a provenance block
//! (JSON outputs embed it, CSV outputs get a `.provenance.json` sidecar).

mod commands;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::counterintuitive::Pool;
use crate::data::ScalerKind;
use crate::error::Error;
use crate::flow::{FlowKind, TrainConfig};
use crate::intrinsic_dim::IdMethod;
use crate::numeric::mlp::Activation;
use crate::scoring::LikelihoodTest;
use crate::synth::AnomalyType;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "flowbench", version, about = "Likelihood-based tabular anomaly detection with normalizing flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fit a flow on the normal rows of a CSV and save the model bundle.
    Train(TrainCmd),
    /// Score rows with a saved model; higher means more anomalous.
    Score(ScoreCmd),
    /// AUROC and AUPRC of a `row_index,score,label` CSV.
    Eval(EvalCmd),
    /// Repeated split/train/score/evaluate trials over one or more datasets.
    Benchmark(BenchmarkCmd),
    /// Intrinsic-dimension estimates over subsamples and scalers.
    Id(IdCmd),
    /// Generate synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Numerical checks of the Gaussian theory and dimension sweeps.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Relative-failure verdicts over an AUROC matrix.
    Counterintuitive(CounterCmd),
}

/// Flow architecture and optimizer overrides. Flags win over `--config`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct FlowArgs {
    #[arg(long, default_value = "nice")]
    pub kind: FlowKind,
    /// JSON training config; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    /// Number of coupling layers.
    #[arg(long)]
    pub coupling: Option<usize>,
    /// Hidden units per layer of the coupling networks.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Hidden layers per coupling network.
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub activation: Option<Activation>,
}

impl FlowArgs {
    pub fn train_config(&self, base: TrainConfig, seed: u64) -> Result<TrainConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                serde_json::from_str::<TrainConfig>(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => base,
        };
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.wd {
            cfg.weight_decay = v;
        }
        if let Some(v) = self.coupling {
            cfg.n_coupling = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden_dim = v;
        }
        if let Some(v) = self.layers {
            cfg.n_hidden_layers = v;
        }
        if let Some(v) = self.activation {
            cfg.activation = v;
        }
        cfg.seed = seed;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value = "robust")]
    pub scaler: ScalerKind,
    #[command(flatten)]
    pub flow: FlowArgs,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreCmd {
    /// Model bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value = "slt")]
    pub test: LikelihoodTest,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalCmd {
    /// Scores CSV with `score` and `label` columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchmarkCmd {
    /// Dataset CSVs; the file stem names the dataset.
    #[arg(long, required = true, value_delimiter = ',')]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value = "robust")]
    pub scaler: ScalerKind,
    #[command(flatten)]
    pub flow: FlowArgs,
    #[arg(long, default_value = "slt")]
    pub test: LikelihoodTest,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Fraction of the training set replaced by anomalies.
    #[arg(long, default_value_t = 0.0)]
    pub contamination: f64,
    /// Master seed; trial `t` uses `seed + t`.
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// External AUROC matrix to rank against.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// `name,pool` CSV tagging the matrix models.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Column name under which the measured AUROCs enter the matrix.
    #[arg(long, default_value = "NF-SLT")]
    pub target: String,
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub pool: Vec<Pool>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IdCmd {
    /// Dataset CSV; without it AR(ρ) Gaussians are generated for each `--rho`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value = "twonn")]
    pub method: IdMethod,
    /// Neighbours for the MLE estimator.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Fraction of the largest TwoNN ratios discarded.
    #[arg(long, default_value_t = 0.1)]
    pub discard: f64,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub subsample: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "none")]
    pub scaler: Vec<ScalerKind>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,0.9,0.99")]
    pub rho: Vec<f64>,
    /// Ambient dimension of generated AR data.
    #[arg(long, default_value_t = 10)]
    pub dims: usize,
    /// Rows of generated AR data.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthCmd {
    /// Zero-mean Gaussian with `Σ[i][j] = ρ^|i-j|`.
    Ar(SynthArCmd),
    /// Training rows from `N(μ_P, σ_P²I)`, labelled test rows from P and Q.
    Pair(SynthPairCmd),
    /// GMM-planted anomaly suite built from a seed dataset.
    Anomaly(SynthAnomalyCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArCmd {
    #[arg(long)]
    pub dims: usize,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PairArgs {
    #[arg(long, default_value_t = 5.0)]
    pub mu_p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_p: f64,
    #[arg(long, default_value_t = 3.25)]
    pub mu_q: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_q: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthPairCmd {
    #[arg(long)]
    pub dims: usize,
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value_t = 1000)]
    pub n_train: usize,
    /// Test rows drawn from each of P and Q.
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `train.csv` and `test.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthAnomalyCmd {
    /// Seed dataset; its label column, if any, is dropped.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long = "type")]
    pub anomaly_type: AnomalyType,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n_normal: usize,
    #[arg(long, default_value_t = 100)]
    pub n_anomaly: usize,
    #[arg(long, default_value_t = 5)]
    pub components: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyCmd {
    /// Closed-form entropies and KL against Monte-Carlo likelihood gaps.
    Gap(VerifyGapCmd),
    /// Tail of `‖Z‖²` around `d` against `2 exp(−t²/8d)`.
    Concentration(VerifyConcentrationCmd),
    /// `Var(‖Z‖)/d` across dimensions.
    Norms(VerifyNormsCmd),
    /// Train a flow per dimension and report AUROC and latent histograms.
    Sweep(VerifySweepCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyGapCmd {
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub pair: PairArgs,
    /// Evaluate a trained model instead of the true density of P.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyConcentrationCmd {
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,500,1000")]
    pub dims: Vec<usize>,
    /// Deviations as fractions of `d`.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75")]
    pub t_frac: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyNormsCmd {
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifySweepCmd {
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,500,2000")]
    pub dims: Vec<usize>,
    /// Use the long grid up to 15000 dimensions instead of `--dims`.
    #[arg(long)]
    pub full_grid: bool,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub flow: FlowArgs,
    #[arg(long, default_value_t = 1000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, env = "FLOWBENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CounterCmd {
    /// AUROC matrix CSV: `dataset,<model>,...`.
    #[arg(long)]
    pub matrix: PathBuf,
    /// `name,pool` CSV; needed for the shallow and deep pools.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, default_value = "NF-SLT")]
    pub target: String,
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub pool: Vec<Pool>,
    /// Defaults to β = 0.5, or the pool-sized grid with `--sweep`.
    #[arg(long, value_delimiter = ',')]
    pub beta_grid: Option<Vec<f64>>,
    /// Defaults to γ = 0.3, or {0.3, 0.4, 0.5, 0.6} with `--sweep`.
    #[arg(long, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    /// Sweep the full (β, γ) grids.
    #[arg(long)]
    pub sweep: bool,
    /// Rank at or beyond which a dataset counts as a failure.
    #[arg(long, default_value_t = crate::scoring::DEFAULT_FAIL_THRESHOLD)]
    pub fail_threshold: f64,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e @ CliError::Domain(_)) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let prov = output::provenance(&cli.command);
    match &cli.command {
        Command::Train(c) => commands::train(c, &prov),
        Command::Score(c) => commands::score(c, &prov),
        Command::Eval(c) => commands::eval(c, &prov),
        Command::Benchmark(c) => commands::benchmark(c, &prov),
        Command::Id(c) => commands::id(c, &prov),
        Command::Synth(c) => commands::synth(c, &prov),
        Command::Verify(c) => commands::verify(c, &prov),
        Command::Counterintuitive(c) => commands::counterintuitive(c, &prov),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
