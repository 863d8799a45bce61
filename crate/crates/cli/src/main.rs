//! `batchkit` command-line interface.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;


#[derive(Debug, Parser)]
#[command(name = "batchkit", version, about = "Batch trajectory alignment, features, screening, FPCA and monitoring")]
struct Cli {
    /// Seed for every random component.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving the outputs and run.json.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Treat per-batch failures and validation issues as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Keep unknown CSV columns as metadata instead of rejecting them.
    #[arg(long, global = true)]
    lax_columns: bool,
    /// Skip SVG emission.
    #[arg(long, global = true)]
    no_plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the inputs and report data-quality issues.
    Validate(DatasetArgs),
    /// Align batches onto a common grid.
    Align(AlignArgs),
    /// Landmark features and phase durations per batch.
    Features(FeaturesArgs),
    /// Rank features against a quality target with a noise-thresholded random forest.
    Screen(ScreenArgs),
    /// Functional PCA of aligned trajectories.
    Fpca(FpcaArgs),
    /// Univariate, Hotelling-T² or functional control charts.
    Monitor(MonitorArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Long-format trajectories: batch_id,timestamp,tag,value.
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Phase events: batch_id,phase,order,start,end.
    #[arg(long)]
    pub events: PathBuf,
    /// Initial conditions: batch_id,name,value.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Quality results: batch_id,name,value.
    #[arg(long)]
    pub quality: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMethod {
    Triggers,
    Indicator,
    Dtw,
    StagewiseDtw,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLength {
    Equal,
    MedianDuration,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Classical,
    Exponential,
    SavitzkyGolay,
    PiecewiseLinear,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandKind {
    None,
    SakoeChiba,
    Itakura,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AlignArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, value_enum, default_value_t = AlignMethod::Triggers)]
    pub method: AlignMethod,
    /// Grid points per phase (trigger alignment).
    #[arg(long, default_value_t = 100)]
    pub points_per_phase: usize,
    #[arg(long, value_enum, default_value_t = PhaseLength::Equal)]
    pub phase_length: PhaseLength,
    /// Monotone progress tag (indicator alignment).
    #[arg(long)]
    pub indicator_tag: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub indicator_points: usize,
    /// Largest tolerated reversal, as a fraction of the indicator's range.
    #[arg(long, default_value_t = 0.05)]
    pub indicator_tolerance: f64,
    #[arg(long, value_enum, default_value_t = Variant::Classical)]
    pub variant: Variant,
    /// Exponential smoothing factor of the exponential derivative variant.
    #[arg(long, default_value_t = 0.3)]
    pub smoothing_alpha: f64,
    #[arg(long, default_value_t = 7)]
    pub sg_window: usize,
    #[arg(long, default_value_t = 2)]
    pub sg_order: usize,
    #[arg(long, default_value_t = 10)]
    pub segments: usize,
    /// Sakoe-Chiba local slope constraint P.
    #[arg(long, default_value_t = 1)]
    pub local_p: usize,
    /// Candidate values of P to choose from (overrides --local-p), e.g. 0,1,2.
    #[arg(long, value_delimiter = ',')]
    pub choose_p: Vec<usize>,
    /// Weight of time distortion when choosing P.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = BandKind::None)]
    pub band: BandKind,
    #[arg(long, default_value_t = 10)]
    pub band_width: usize,
    /// Let the query end anywhere (online alignment of a running batch).
    #[arg(long)]
    pub open_end: bool,
    /// Tag weights as tag=weight pairs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<String>,
    /// Skip per-tag standardization in the DTW distance.
    #[arg(long)]
    pub no_normalize: bool,
    /// Reference batch; defaults to the median-duration batch.
    #[arg(long)]
    pub reference: Option<String>,
    /// Also run all methods and plot them side by side.
    #[arg(long)]
    pub compare: bool,
    /// Tag shown in plots; defaults to the first tag.
    #[arg(long)]
    pub plot_tag: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Statistics (mean,max,min,range,std,first,last,median,mad,slope,cv).
    #[arg(long, value_delimiter = ',', default_value = "mean,max,min,range,std,first,last,median,mad,slope")]
    pub statistics: Vec<String>,
    /// Transforms (raw,derivative,integral).
    #[arg(long, value_delimiter = ',', default_value = "raw")]
    pub transforms: Vec<String>,
    #[arg(long)]
    pub no_per_phase: bool,
    #[arg(long)]
    pub no_whole_batch: bool,
    /// Restrict to these tags.
    #[arg(long, value_delimiter = ',')]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScreenArgs {
    /// Feature matrix CSV (batch_id first).
    #[arg(long)]
    pub features: PathBuf,
    /// Quality CSV holding the target: batch_id,name,value.
    #[arg(long)]
    pub quality: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub min_leaf: usize,
    /// Fraction of features tried at each split.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub feature_fraction: f64,
    /// Grow trees on all rows; contributions are then in-bag.
    #[arg(long)]
    pub no_bootstrap: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    None,
    Bspline,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    Trapezoid,
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AlignedInput {
    /// Aligned CSV written by `align`.
    #[arg(long)]
    pub aligned: PathBuf,
    /// Sidecar JSON written by `align`; supplies the grid.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SmoothingArgs {
    #[arg(long, value_enum, default_value_t = BasisKind::None)]
    pub basis: BasisKind,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value_t = 20)]
    pub knots: usize,
    #[arg(long, default_value_t = 0.0)]
    pub penalty: f64,
    #[arg(long, value_enum, default_value_t = QuadratureKind::Trapezoid)]
    pub quadrature: QuadratureKind,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FpcaArgs {
    #[command(flatten)]
    pub input: AlignedInput,
    /// Tags to decompose; defaults to every tag.
    #[arg(long, value_delimiter = ',')]
    pub tags: Vec<String>,
    /// Cumulative explained-variance cutoff.
    #[arg(long, default_value_t = 0.95)]
    pub cutoff: f64,
    /// Fixed number of components (overrides --cutoff).
    #[arg(long)]
    pub components: Option<usize>,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorMode {
    Univariate,
    T2,
    Functional,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MonitorArgs {
    #[arg(long, value_enum, default_value_t = MonitorMode::T2)]
    pub mode: MonitorMode,
    /// Feature matrix CSV (univariate and t2 modes).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Restrict to these feature columns.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Aligned CSV (functional mode).
    #[arg(long)]
    pub aligned: Option<PathBuf>,
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Tags for functional mode; defaults to every tag.
    #[arg(long, value_delimiter = ',')]
    pub tags: Vec<String>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Fixed number of T² components.
    #[arg(long)]
    pub components: Option<usize>,
    /// Cumulative variance cutoff for T² components; default keeps all.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// FPCA variance cutoff per tag (functional mode).
    #[arg(long, default_value_t = 0.95)]
    pub fpca_cutoff: f64,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Serialize)]
pub struct Globals {
    pub seed: u64,
    pub strict: bool,
    pub lax_columns: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals { seed: cli.seed, strict: cli.strict, lax_columns: cli.lax_columns };
    let result = output::OutDir::create(&cli.out_dir, !cli.no_plots).and_then(|mut out| {
        commands::run(&cli.command, &globals, &mut out)
    });
    match result {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Align(_) => "align",
            Command::Features(_) => "features",
            Command::Screen(_) => "screen",
            Command::Fpca(_) => "fpca",
            Command::Monitor(_) => "monitor",
        }
    }
}

