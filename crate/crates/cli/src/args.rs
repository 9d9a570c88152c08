//! Command options. Every field is optional so a config file can supply it;
//! defaults are applied after merging.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

/// Where the data comes from and how to read it.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct DataArgs {
    /// Input CSV file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column name [default: y].
    #[arg(long)]
    pub target: Option<String>,
    /// Columns to one-hot encode, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Option<Vec<String>>,
    /// regression or classification [default: regression].
    #[arg(long)]
    pub task: Option<String>,
}

/// Options shared by every fitting command.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitArgs {
    /// Penalty on θ: l1 or l2_squared [default: l2_squared].
    #[arg(long)]
    pub main_norm: Option<String>,
    /// Patterns with fewer training rows get no specialization [default: 0].
    #[arg(long)]
    pub min_pattern_n: Option<usize>,
    /// PSM complete-case threshold [default: twice the feature count].
    #[arg(long)]
    pub cc_threshold: Option<usize>,
    /// Unseen masks without a covering pattern: main_model or error
    /// [default: main_model].
    #[arg(long)]
    pub fallback: Option<String>,
    /// Relative objective change at which the solver stops [default: 1e-8].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Solver iteration limit [default: 10000].
    #[arg(long)]
    pub max_iter: Option<usize>,
}

/// Hyperparameter grids; unset axes use the standard grids.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct GridArgs {
    /// γ values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// λ values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Ridge weights for psm and the imputation baselines, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ridges: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataArgs,
    /// spsm, psm, full_sharing, imputed_zero or imputed_mean [default: spsm].
    #[arg(long)]
    pub method: Option<String>,
    /// Weight of the θ penalty [default: 0].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Weight of the Δ penalty [default: 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ridge weight for psm and the imputation baselines [default: 0.01].
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Choose hyperparameters on an internal validation split, then refit on
    /// all rows.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub search: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
    /// Seed of the validation split [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Feature CSV; a target column, if present, is ignored.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Override the model's policy for masks without a covering pattern.
    #[arg(long)]
    pub fallback: Option<String>,
    /// Predictions CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Model files; repeat for several models.
    #[arg(long = "model")]
    pub models: Option<Vec<PathBuf>>,
    /// Labelled test CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Bootstrap seed for regression intervals [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report CSV [default: table on stdout only].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Missingness setting: A, B or C [default: A].
    #[arg(long)]
    pub setting: Option<String>,
    /// Number of features [default: 20].
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of clusters [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Within-cluster correlation [default: 0.95].
    #[arg(long)]
    pub c: Option<f64>,
    /// Cell missingness probability in setting C [default: 0.2].
    #[arg(long)]
    pub mcar_p: Option<f64>,
    /// Masking threshold in settings A and B [default: -0.5].
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Number of rows [default: 2000].
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    /// Random seed [default: 0].
    pub seed: Option<u64>,
    /// Output CSV; ground truth goes to `<stem>.meta.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct InspectArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct CurveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataArgs,
    /// Methods, comma separated [default: spsm,psm,imputed_zero,imputed_mean].
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Training fractions [default: 0.2,0.4,0.6,0.8,1.0].
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Number of split seeds; seeds are first_seed, first_seed+1, ... [default: 5].
    #[arg(long)]
    pub seeds: Option<u64>,
    /// First split seed [default: 0].
    #[arg(long)]
    pub first_seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
    /// Learning-curve CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
