use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "snmix", version, about = "Penalized fitting of skew-normal mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture to one column of a CSV file.
    Fit(FitArgs),
    /// Draw a sample from a model document or a preset.
    Sample(SampleArgs),
    /// Run a simulation study and write CSV and JSON reports.
    Study(StudyArgs),
    /// Fit the MLE and shrink divergent shapes by a profile likelihood-ratio test.
    Me(MeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Mle,
    Pmle,
    Mple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Ecm,
    Ecme,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column name or zero-based index (default: first numeric column).
    #[arg(long)]
    pub column: Option<String>,
    /// Number of mixture components.
    #[arg(long, short = 'p')]
    pub components: usize,
}

#[derive(Debug, Args)]
pub struct FitOptions {
    #[arg(long, value_enum, default_value = "ecm")]
    pub algorithm: AlgorithmArg,
    /// Number of K-means starts; the best objective is kept.
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative change in the objective that stops the iterations.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long = "c-a", default_value_t = snmix::penalty::DEFAULT_C_A)]
    pub c_a: f64,
    #[arg(long = "c-b", default_value_t = snmix::penalty::DEFAULT_C_B)]
    pub c_b: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "pmle")]
    pub estimator: EstimatorArg,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Write the model document here instead of standard output.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelPreset {
    Model1,
    Model2,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Model document (JSON) to sample from.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<ModelPreset>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyPreset {
    Model1,
    Model2,
    OrderStudy,
    PenaltyComparison,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum, conflicts_with = "spec", required_unless_present = "spec")]
    pub preset: Option<StudyPreset>,
    /// Study specification (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Replications per cell (overrides the preset or spec).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Sample sizes, comma separated (overrides the preset or spec).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Never changes the results.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Nominal level of the likelihood-ratio test.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[command(flatten)]
    pub fit: FitOptions,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}
