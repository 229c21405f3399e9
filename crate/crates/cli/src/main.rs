//! `kinex`: kinetic exchange simulations and income-distribution analysis.
//!
//! Exit status: 0 on success, 1 when a run or analysis fails, 2 for usage
//! and configuration errors. Diagnostics go to stderr; tables go to files
//! or stdout.

mod analyze;
mod config;
mod error;
mod run;

use std::fmt::Arguments;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kinex_core::analysis::{FitConfig, FitMethod, XminMethod, DEFAULT_TOP_FRACTION};

use analyze::{InputOptions, PdfOptions};
use error::CliError;
use run::RunOptions;

#[derive(Parser)]
#[command(
    name = "kinex",
    version,
    about = "Kinetic wealth-exchange simulator and income-distribution toolkit"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors on stderr.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed run: no scheduled events allowed.
    Simulate(RunArgs),
    /// Open-system run driven by the config's [[events]].
    Scenario(RunArgs),
    /// Income-table checks.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Statistics on income tables.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or a manifest from an earlier run.
    config: PathBuf,
    /// Output directory, overriding [output] dir.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Record finish time and elapsed seconds in the manifest.
    #[arg(long)]
    record_time: bool,
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Row counts and ranges, without analysis.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        input: InputArgs,
    },
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Drop bad rows instead of aborting.
    #[arg(long)]
    lenient: bool,
    /// Column that groups rows, instead of `period`.
    #[arg(long, value_name = "COLUMN")]
    by: Option<String>,
}

impl InputArgs {
    fn options(&self) -> InputOptions {
        InputOptions {
            lenient: self.lenient,
            by: self.by.clone(),
        }
    }
}

#[derive(Args)]
struct SingleInput {
    file: PathBuf,
    /// Use only the rows of this group.
    #[arg(long)]
    period: Option<String>,
    #[command(flatten)]
    input: InputArgs,
    /// Write the table here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MultiInput {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fitter {
    Hill,
    LoglogLs,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "hill")]
    fitter: Fitter,
    /// Tail threshold chosen so this weight fraction lies at or above it.
    #[arg(long, value_name = "Q", group = "threshold")]
    top_fraction: Option<f64>,
    /// Tail threshold minimising the KS distance to the fit.
    #[arg(long, group = "threshold")]
    ks_min: bool,
    /// Fixed tail threshold.
    #[arg(long, value_name = "X", group = "threshold")]
    xmin: Option<f64>,
}

impl FitArgs {
    fn config(&self) -> Result<FitConfig, CliError> {
        let xmin = if self.ks_min {
            XminMethod::ks_min()
        } else if let Some(value) = self.xmin {
            XminMethod::Fixed { value }
        } else {
            XminMethod::TopFraction {
                q: self.top_fraction.unwrap_or(DEFAULT_TOP_FRACTION),
            }
        };
        xmin.validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let fitter = match self.fitter {
            Fitter::Hill => FitMethod::Hill,
            Fitter::LoglogLs => FitMethod::LogLogLs,
        };
        Ok(FitConfig { xmin, fitter })
    }
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Empirical CCDF, Q(x) = P(X >= x).
    Ccdf {
        #[command(flatten)]
        src: SingleInput,
        /// Head counts instead of fractions.
        #[arg(long)]
        counts: bool,
    },
    /// Binned density.
    Pdf {
        #[command(flatten)]
        src: SingleInput,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Logarithmic bins.
        #[arg(long)]
        log: bool,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        range: Option<Vec<f64>>,
        /// Count zero incomes in the normalisation.
        #[arg(long)]
        include_zeros: bool,
    },
    /// Pareto tail fit.
    Fit {
        #[command(flatten)]
        src: SingleInput,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Ratio of the sample's CCDF to a reference CCDF.
    Relative {
        #[command(flatten)]
        src: SingleInput,
        /// Reference income table.
        #[arg(long)]
        reference: PathBuf,
        /// Group of the reference table to use.
        #[arg(long)]
        reference_period: Option<String>,
    },
    /// Gini coefficient per group.
    Gini {
        #[command(flatten)]
        src: MultiInput,
    },
    /// Tail exponent per group; failed fits become gap rows.
    Alpha {
        #[command(flatten)]
        src: MultiInput,
        #[command(flatten)]
        fit: FitArgs,
    },
}

/// Stderr diagnostics filtered by verbosity.
#[derive(Debug, Clone, Copy)]
pub struct Log {
    level: i8,
}

impl Log {
    pub fn warn(&self, args: Arguments) {
        if self.level >= 0 {
            eprintln!("kinex: warning: {args}");
        }
    }

    pub fn info(&self, args: Arguments) {
        if self.level >= 1 {
            eprintln!("kinex: {args}");
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let log = Log {
        level: if cli.quiet { -1 } else { cli.verbose as i8 },
    };
    match cli.command {
        Command::Simulate(a) => run::simulate(&a.config, &run_options(&a, log)),
        Command::Scenario(a) => run::scenario(&a.config, &run_options(&a, log)),
        Command::Ingest(IngestCommand::Validate { file, input }) => {
            analyze::run_validate(&file, &input.options(), &log)
        }
        Command::Analyze(cmd) => analyze_command(cmd, &log),
    }
}

fn run_options(a: &RunArgs, log: Log) -> RunOptions {
    RunOptions {
        out: a.out.clone(),
        record_time: a.record_time,
        log,
    }
}

fn analyze_command(cmd: AnalyzeCommand, log: &Log) -> Result<(), CliError> {
    let one = |src: &SingleInput| {
        analyze::load_one(&src.file, src.period.as_deref(), &src.input.options(), log)
    };
    match cmd {
        AnalyzeCommand::Ccdf { src, counts } => {
            analyze::run_ccdf(&one(&src)?, !counts, src.out.as_deref())
        }
        AnalyzeCommand::Pdf {
            src,
            bins,
            log: log_bins,
            range,
            include_zeros,
        } => {
            let opts = PdfOptions {
                bins,
                log_bins,
                range: range.map(|r| (r[0], r[1])),
                include_zeros,
            };
            analyze::run_pdf(&one(&src)?, &opts, src.out.as_deref(), log)
        }
        AnalyzeCommand::Fit { src, fit } => {
            let config = fit.config()?;
            analyze::run_fit(&one(&src)?, &config, src.out.as_deref())
        }
        AnalyzeCommand::Relative {
            src,
            reference,
            reference_period,
        } => {
            let sample = one(&src)?;
            let reference = analyze::load_one(
                &reference,
                reference_period.as_deref(),
                &src.input.options(),
                log,
            )?;
            analyze::run_relative(&sample, &reference, src.out.as_deref(), log)
        }
        AnalyzeCommand::Gini { src } => {
            let groups = analyze::load_groups(&src.files, &src.input.options(), log)?;
            analyze::run_gini(&groups, src.out.as_deref())
        }
        AnalyzeCommand::Alpha { src, fit } => {
            let config = fit.config()?;
            let groups = analyze::load_groups(&src.files, &src.input.options(), log)?;
            analyze::run_alpha(groups, &config, src.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too and exit 0
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kinex: error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `kinex --help` for usage");
            }
            e.exit_code()
        }
    }
}
