//! Command-line front end: argument definitions, population ingestion,
//! command implementations and SVG rendering.

pub mod commands;
pub mod ingest;
pub mod svg;

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use geosampling::estimator::Criterion;
use geosampling::DEFAULT_GRID;

#[derive(Debug, Parser)]
#[command(name = "geosampling", version, about = "Geometric finite-population sampling designs")]
pub struct Cli {
    /// Report format written to standard output.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a bar layout from inclusion probabilities.
    Construct(ConstructArgs),
    /// Apply random entropy-increasing moves to a layout.
    Chaotic(ChaoticArgs),
    /// Select a sample with a horizontal line.
    Draw(DrawArgs),
    /// Report the design, joint inclusion probabilities and estimator properties of a layout.
    Evaluate(EvaluateArgs),
    /// Search for a fixed-size layout minimizing a design criterion.
    Optimize(OptimizeArgs),
    /// Enumerate a reference design (Poisson, maximum entropy or SRS).
    Oracle(OracleArgs),
    /// Render a layout as an SVG bar chart.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct PopArgs {
    /// Population CSV with a header row.
    #[arg(long)]
    pub pop: Option<PathBuf>,
    /// Column holding unit ids (defaults to the row number).
    #[arg(long)]
    pub id_col: Option<String>,
    /// Size measure for PPS inclusion probabilities.
    #[arg(long)]
    pub x_col: Option<String>,
    /// Study variable.
    #[arg(long)]
    pub y_col: Option<String>,
    /// Evaluation variable for design criteria.
    #[arg(long)]
    pub z_col: Option<String>,
    /// Ids of rows to drop, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exclude_ids: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FipArgs {
    /// Inclusion probabilities, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub pi: Option<Vec<f64>>,
    #[command(flatten)]
    pub pop: PopArgs,
    /// Expected sample size for probabilities built from a population:
    /// PPS on the x column, or equal probabilities without one.
    #[arg(short = 'n', long)]
    pub size: Option<usize>,
    /// Grid cells per unit of probability.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstructMode {
    Madow,
    Random,
    Offsets,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub fip: FipArgs,
    #[arg(long, value_enum, default_value_t = ConstructMode::Madow)]
    pub mode: ConstructMode,
    /// Bar offsets in cells for `--mode offsets`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub offsets: Option<Vec<u64>>,
    /// Seed for `--mode random`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Layout document to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MoveMode {
    Free,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChoiceArg {
    /// Elementary strips equally likely.
    Uniform,
    /// Strips proportional to height.
    Mass,
    /// Unit first, then strips through its bar and its complement.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnchorArg {
    Bottom,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Poisson,
    Maxent,
}

#[derive(Debug, Args)]
pub struct ChaoticArgs {
    /// Layout document to start from.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MoveMode::Fixed)]
    pub mode: MoveMode,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ChoiceArg::Uniform)]
    pub strip_choice: ChoiceArg,
    #[arg(long, value_enum, default_value_t = AnchorArg::Bottom)]
    pub anchor: AnchorArg,
    /// Trace rows after the initial one.
    #[arg(long, default_value_t = 10)]
    pub checkpoints: usize,
    /// Report total-variation distance to this reference design.
    #[arg(long, value_enum)]
    pub reference: Option<ReferenceArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("line").required(true).args(["seed", "cell"])))]
pub struct DrawArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Draw the line position from this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Put the line at this grid cell.
    #[arg(long)]
    pub cell: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub pop: PopArgs,
    /// Study variable values, comma separated, instead of a population file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    /// Sample (1-based labels) for the sample-based variance estimate.
    #[arg(long, value_delimiter = ',')]
    pub sample: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub fip: FipArgs,
    #[arg(long, default_value = "c1", value_parser = parse_criterion)]
    pub criterion: Criterion,
    /// Iterations.
    #[arg(long, default_value_t = 500)]
    pub lambda: usize,
    /// Candidates generated per iteration.
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    /// Maximum open set size.
    #[arg(long, default_value_t = 100)]
    pub open_max: usize,
    #[arg(long, default_value_t = 1)]
    pub moves_per_candidate: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ChoiceArg::Uniform)]
    pub strip_choice: ChoiceArg,
    /// Best layout document to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: geosampling::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Poisson,
    Maxent,
    Srs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub kind: OracleKind,
    #[command(flatten)]
    pub fip: FipArgs,
    /// Take the probabilities from a layout document and report its distance
    /// to the reference.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Population size for `--kind srs`.
    #[arg(long)]
    pub units: Option<usize>,
    /// List at most this many samples, most probable first.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// SVG file to write; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command and returns what goes to standard output.
pub fn run(cli: &Cli) -> anyhow::Result<String> {
    commands::dispatch(cli)
}
