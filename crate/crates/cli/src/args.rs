use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shear_core::data::Target;

#[derive(Debug, Parser)]
#[command(name = "shear", version, about = "Train, evaluate and explain MSW shear-strength regressors")]
pub struct Cli {
    /// TOML file with defaults for any subcommand; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset from a planted generator.
    GenData(GenDataArgs),
    /// Train one target's network on a holdout split.
    Train(TrainArgs),
    /// Score a saved model on a labelled dataset.
    Evaluate(EvaluateArgs),
    /// k-fold cross-validation.
    Cv(CvArgs),
    /// Cross-validated search over a hyperparameter grid.
    GridSearch(GridArgs),
    /// Compare network variants (and external predictions) by held-out MAPE.
    Ablate(AblateArgs),
    /// Shapley attribution of individual predictions.
    Explain(ExplainArgs),
    /// Shapley attribution aggregated over a dataset.
    Summary(SummaryArgs),
    /// Run the JSON inference API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Friction,
    Cohesion,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Friction => Target::Friction,
            TargetArg::Cohesion => Target::Cohesion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Exact,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Holdout,
    Kfold,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Feature schema TOML; the seventeen-feature MSW schema when omitted.
    #[arg(long, value_name = "PATH")]
    pub schema: Option<PathBuf>,
    /// Skip CSV columns that are neither features nor targets.
    #[arg(long)]
    pub ignore_extra_columns: bool,
}

#[derive(Debug, Args, Default)]
pub struct HyperArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub step_size: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Minibatch size; full batch when omitted.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Hidden layer widths, e.g. `64,1000,200,8`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub layers: Option<Vec<usize>>,
    /// Training rows stored in the model file as the explanation background.
    #[arg(long)]
    pub background: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Generator TOML; built-in marginals and planted functions when omitted.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub schema: Option<PathBuf>,
    /// Also write the noise-free planted values.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Write the generator definition in effect.
    #[arg(long, value_name = "PATH")]
    pub write_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    /// Model file to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Loss-curve CSV; defaults to the model path with `.loss.csv` appended.
    #[arg(long, value_name = "PATH")]
    pub loss_curve: Option<PathBuf>,
    /// Held-out share of the data.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Metrics JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// `sample_id,prediction` CSV.
    #[arg(long, value_name = "PATH")]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Report JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    /// Grid TOML with `[[axis]]` tables.
    #[arg(long, value_name = "PATH")]
    pub grid: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Restrict to one target; both when omitted.
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    #[arg(long, value_enum, default_value = "holdout")]
    pub protocol: ProtocolArg,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Variant to run instead of the standard three, e.g. `--variant 64,1000,200,8`.
    /// Repeatable.
    #[arg(long = "variant", value_name = "CSV")]
    pub variants: Vec<String>,
    /// External predictions as `NAME:TARGET:PATH`, the file holding
    /// `sample_id,prediction` rows. Repeatable.
    #[arg(long = "external", value_name = "SPEC")]
    pub external: Vec<String>,
    /// Table JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args, Default)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Kernel coalition budget.
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Kernel sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use a seeded subsample of this many embedded background rows.
    #[arg(long)]
    pub background: Option<usize>,
    /// Feature limit for exact enumeration.
    #[arg(long)]
    pub exact_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// CSV of instances in native units; target columns are ignored.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long)]
    pub ignore_extra_columns: bool,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Explanation report JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Waterfall steps CSV for plotting.
    #[arg(long, value_name = "PATH")]
    pub waterfall: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long)]
    pub ignore_extra_columns: bool,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Summary JSON, loadable by `serve`.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// `feature,value,phi` CSV for beeswarm plots.
    #[arg(long, value_name = "PATH")]
    pub scatter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "PATH")]
    pub friction_model: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub cohesion_model: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub friction_summary: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub cohesion_summary: Option<PathBuf>,
    /// Listen address.
    #[arg(long)]
    pub addr: Option<String>,
    #[arg(long)]
    pub max_batch: Option<usize>,
    #[arg(long)]
    pub exact_limit: Option<usize>,
    /// Static files (the what-if UI bundle) served beside the API.
    #[arg(long, value_name = "PATH")]
    pub ui_dir: Option<PathBuf>,
}
