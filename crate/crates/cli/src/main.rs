//! `tomo`: record in, analysis out. Subcommands cover the full pipeline
//! (analyze), density grids for plotting (bloch), coverage experiments
//! (coverage), and harmonic moment expansions (moments).
//!
//! Exit codes are a stable contract: 0 success, 1 input error, 2 estimation
//! failure, 3 unsupported record shape. Every stochastic command takes an
//! explicit --seed; reruns with the same inputs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tomo_core::likelihood::{bloch_density_grid, normalization_constant};
use tomo_core::mle::mle_estimate;
use tomo_core::moments::{expand_record, MomentSource};
use tomo_core::region::build_region;
use tomo_core::simulator::coverage_experiment;
use tomo_core::wire::{
    coverage_config_from_json, moment_source_from_json, record_from_json, CoverageReportDto,
    LikelihoodSummaryDto, MleDto, MomentVectorDto, RecordDto, RegionReportDto,
};
use tomo_core::TomoError;

const MLE_TOL: f64 = 1e-10;
const MLE_MAX_ITER: usize = 20_000;

#[derive(Parser)]
#[command(name = "tomo", version, about = "Quantum state tomography with confidence regions")]
struct Cli {
    /// Cap the Monte Carlo worker pool (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the state, normalize the density, and build a confidence
    /// region; optionally append a moment expansion.
    Analyze {
        /// Measurement record (JSON).
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Report destination (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Confidence parameter for the region.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Monte Carlo samples for normalization and region building.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        /// RNG seed (no wall-clock default).
        #[arg(long)]
        seed: u64,
        /// Include a moment expansion up to this band in the report.
        #[arg(long, value_name = "L")]
        lmax: Option<usize>,
    },
    /// Evaluate the normalized density on a Bloch grid and write CSV.
    Bloch {
        /// Measurement record (JSON), qubit only.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// CSV destination (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Theta rows; phi gets twice as many columns.
        #[arg(long, default_value_t = 64, value_name = "ROWS")]
        grid: usize,
        /// Evaluate pure states only instead of a ball lattice.
        #[arg(long)]
        surface: bool,
        /// Monte Carlo samples for the normalization constant.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        /// RNG seed (no wall-clock default).
        #[arg(long)]
        seed: u64,
    },
    /// Run a coverage experiment from a JSON config (seed lives in the
    /// config).
    Coverage {
        /// Experiment config (JSON).
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Report destination (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Expand a record or covariant outcome into chart harmonics.
    Moments {
        /// Record or covariant-outcome spec (JSON).
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Moment vector destination (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Highest harmonic band to compute.
        #[arg(long, default_value_t = 4, value_name = "L")]
        lmax: usize,
    },
}

/// Everything the analyze subcommand learned, in one file.
#[derive(Serialize, Deserialize)]
struct AnalysisReport {
    tool_version: String,
    seed: u64,
    record: RecordDto,
    mle: MleDto,
    normalization: LikelihoodSummaryDto,
    region: RegionReportDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    moments: Option<MomentVectorDto>,
}

enum CliError {
    Input(String),
    Estimation(String),
    Unsupported(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Estimation(_) => 2,
            CliError::Unsupported(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Estimation(m) | CliError::Unsupported(m) => m,
        }
    }
}

impl From<TomoError> for CliError {
    fn from(err: TomoError) -> Self {
        match &err {
            TomoError::Estimation(_) | TomoError::SummaryMismatch(_) => {
                CliError::Estimation(err.to_string())
            }
            TomoError::Unsupported(_) => CliError::Unsupported(err.to_string()),
            _ => CliError::Input(err.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TOMO_LOG", "error"))
        .format_timestamp(None)
        .init();

    if let Some(threads) = cli.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot size the thread pool: {err}");
            return ExitCode::from(1);
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze { input, output, epsilon, samples, seed, lmax } => {
            cmd_analyze(&input, output.as_deref(), epsilon, samples, seed, lmax)
        }
        Command::Bloch { input, output, grid, surface, samples, seed } => {
            cmd_bloch(&input, output.as_deref(), grid, surface, samples, seed)
        }
        Command::Coverage { input, output } => cmd_coverage(&input, output.as_deref()),
        Command::Moments { input, output, lmax } => cmd_moments(&input, output.as_deref(), lmax),
    }
}

fn cmd_analyze(
    input: &Path,
    output: Option<&Path>,
    epsilon: f64,
    samples: usize,
    seed: u64,
    lmax: Option<usize>,
) -> Result<(), CliError> {
    // Fail on a bad confidence level before any Monte Carlo work.
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TomoError::parameter(
            "epsilon",
            format!("must lie strictly between 0 and 1, got {epsilon}"),
        )
        .into());
    }
    let record = record_from_json(&read_input(input)?)?;
    let mle = mle_estimate(&record, MLE_TOL, MLE_MAX_ITER)?;
    let region = build_region(&record, epsilon, samples, seed)?;
    let moments = match lmax {
        Some(l) => {
            let source = MomentSource::Record(record.clone());
            Some(MomentVectorDto::from_vector(&expand_record(&source, l)?))
        }
        None => None,
    };
    log::info!(
        "analyzed n={} record: ll={:.6}, ln c={:.6}, {} witnesses",
        record.n(),
        mle.log_likelihood_value,
        region.summary().log_c(),
        region.witnesses().len()
    );
    let report = AnalysisReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        record: RecordDto::from_record(&record),
        mle: MleDto::from_result(&mle),
        normalization: LikelihoodSummaryDto::from_summary(region.summary()),
        region: RegionReportDto::from_region(&region, false),
        moments,
    };
    emit(output, &to_json(&report)?)
}

fn cmd_bloch(
    input: &Path,
    output: Option<&Path>,
    grid: usize,
    surface: bool,
    samples: usize,
    seed: u64,
) -> Result<(), CliError> {
    let record = record_from_json(&read_input(input)?)?;
    let summary = normalization_constant(&record, samples, seed)?;
    let grid = bloch_density_grid(&record, grid, surface, &summary)?;
    log::info!(
        "evaluated {} grid points, max density {:.6}",
        grid.rows().len(),
        grid.argmax().density
    );
    emit(output, &grid.to_csv())
}

fn cmd_coverage(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let config = coverage_config_from_json(&read_input(input)?)?;
    let report = coverage_experiment(&config)?;
    log::info!(
        "coverage {}/{} hits, Wilson low {:.4}",
        report.hits,
        report.trials,
        report.wilson_low
    );
    emit(output, &to_json(&CoverageReportDto::from_report(&report))?)
}

fn cmd_moments(input: &Path, output: Option<&Path>, lmax: usize) -> Result<(), CliError> {
    let source = moment_source_from_json(&read_input(input)?)?;
    let moments = expand_record(&source, lmax)?;
    emit(output, &to_json(&MomentVectorDto::from_vector(&moments))?)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|err| CliError::Input(format!("cannot read {}: {err}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| CliError::Estimation(format!("cannot serialize report: {err}")))?;
    text.push('\n');
    Ok(text)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|err| CliError::Input(format!("cannot write {}: {err}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
