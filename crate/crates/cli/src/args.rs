use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tmest::backend::DEFAULT_SHOTS;
use tmest::correct::DEFAULT_KKT_TOL;
use tmest::estimate::AUTO_K_THRESHOLD;
use tmest::model::DEFAULT_ORACLE_LIMIT;
use tmest::MatrixNorm;

#[derive(Debug, Clone, Parser)]
#[command(name = "tmest", version, about = "Readout transition-matrix calibration, estimation and correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Write a validated noise model from a preset or a spec file.
    GenModel(GenModelArgs),
    /// Measure all 2^n columns of T.
    CalibrateFull(CalibrateArgs),
    /// Scalable estimate T_est = T_mean + T_pair from filtered preparations.
    Estimate(EstimateArgs),
    /// Measure the A, B and C correlators.
    Correlators(CorrelatorArgs),
    /// Product approximation from single-qubit matrices.
    Tprod(TprodArgs),
    /// Norm table of candidate matrices against a reference.
    Compare(CompareArgs),
    /// Correct a measured distribution with a calibration matrix.
    Correct(CorrectArgs),
    /// Upper bounds on circuits for steps 1 and 2.
    Budget(BudgetArgs),
    /// Record backend answers as a replayable counts dataset.
    ExportDataset(ExportArgs),
    /// Re-execute the run recorded in a manifest and verify its outputs.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    Exact,
    Sampled,
    Replay,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Noise model JSON written by gen-model.
    #[arg(long, conflicts_with = "preset")]
    pub model: Option<PathBuf>,
    /// identity, symmetric, melbourne-c4, melbourne-c4-product or melbourne-c8.
    #[arg(long)]
    pub preset: Option<String>,
    /// Register size for the identity and symmetric presets.
    #[arg(long)]
    pub n: Option<usize>,
    /// Readout error of the symmetric preset.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BackendArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long = "backend", value_enum, default_value_t = BackendChoice::Exact)]
    pub kind: BackendChoice,
    /// Counts dataset for the replay backend.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Shots per prepared state (sampled backend and dataset export).
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
    pub oracle_limit: usize,
    /// Register layout when no model is given: "chain" or "grid:RxC".
    #[arg(long)]
    pub geometry: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutArgs {
    /// Primary output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path; defaults to <out>.manifest.json.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenModelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// NoiseModelSpec JSON to validate instead of a preset.
    #[arg(long, conflicts_with_all = ["model", "preset"])]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Moore neighborhood size, or "auto".
    #[arg(long)]
    pub k: String,
    /// |A|, |B| cutoff used by --k auto.
    #[arg(long, default_value_t = AUTO_K_THRESHOLD)]
    pub auto_threshold: f64,
    /// Clip entries of T_est into [0, 1].
    #[arg(long)]
    pub clip: bool,
    /// Calibration tables JSON.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long)]
    pub t_mean: Option<PathBuf>,
    #[arg(long)]
    pub t_pair: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorrelatorArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Prepared states at which C is evaluated; defaults to all zeros.
    #[arg(long = "c-state")]
    pub c_states: Vec<String>,
    /// A matrix as CSV.
    #[arg(long)]
    pub a_csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TprodArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    /// uniform0, uniform1 or ave:<k>.
    #[arg(long, default_value = "uniform0")]
    pub family: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormChoice {
    ScaledFrobenius,
    Max,
    Both,
}

impl NormChoice {
    pub fn norms(self) -> Vec<MatrixNorm> {
        match self {
            NormChoice::ScaledFrobenius => vec![MatrixNorm::ScaledFrobenius],
            NormChoice::Max => vec![MatrixNorm::Max],
            NormChoice::Both => MatrixNorm::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Reference matrix JSON, or "identity" for total SPAM error.
    #[arg(long)]
    pub reference: String,
    /// Label for the reference in the table header.
    #[arg(long, default_value = "T_meas")]
    pub reference_name: String,
    /// Candidate as NAME=PATH; repeatable.
    #[arg(long = "candidate", required = true)]
    pub candidates: Vec<String>,
    #[arg(long, value_enum, default_value_t = NormChoice::Both)]
    pub norm: NormChoice,
    /// Aligned-text copy of the table.
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Constrained,
    DirectInverse,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorrectArgs {
    /// Calibration matrix JSON.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Distribution JSON or a single counts record.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodChoice::Constrained)]
    pub method: MethodChoice,
    #[arg(long, default_value_t = DEFAULT_KKT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BudgetArgs {
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateSet {
    /// Every prepared state.
    Full,
    /// Preparations needed by estimate at the given --k.
    Estimate,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, value_enum, default_value_t = StateSet::Full)]
    pub states: StateSet,
    #[arg(long, required_if_eq("states", "estimate"))]
    pub k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}
