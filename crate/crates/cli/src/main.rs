//! `lqsense`: threshold curves, matrix certification, recovery experiments,
//! stable-recovery checks and the lemma verification suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lqsense_cli::commands::{self, Context};
use lqsense_cli::config::{self, ExperimentArgs, ExperimentConfig};
use lqsense_cli::failure::{self, Outcome};

#[derive(Debug, Parser)]
#[command(name = "lqsense", version, about = "Certification and recovery toolkit for lq minimization")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Seed for every random draw; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Resolution: delta points (curves), r grid (certify, stable),
    /// evenly spaced q values when no q list is given (recover), brute-force grid (verify).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Cap on exhaustive subset enumerations.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config value, then $LQSENSE_OUT_DIR, then `.`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Success and failure threshold curves as CSV, optionally SVG.
    Curves(commands::curves::CurvesArgs),
    /// Restricted isometry, null space and recovery-constant report for a matrix.
    Certify(ExperimentArgs),
    /// Exact recovery experiment on planted sparse signals.
    Recover(ExperimentArgs),
    /// Stable recovery of compressible signals from noisy measurements.
    Stable(ExperimentArgs),
    /// Randomized lemma checks and asymptotic constants.
    Verify(commands::verify::VerifyArgs),
}

fn context(global: &GlobalArgs, overrides: Option<&ExperimentArgs>) -> Outcome<Context> {
    let mut config = ExperimentConfig::load(global.config.as_deref())?;
    if let Some(args) = overrides {
        config.apply(args);
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    let out_dir = config::output_dir(global.output_dir.as_deref(), &config);
    Ok(Context {
        config,
        grid: global.grid,
        budget: global.budget.map_or(lqsense::rip::DEFAULT_BUDGET, u128::from),
        out_dir,
    })
}

fn run(cli: Cli) -> Outcome<()> {
    match &cli.command {
        Command::Curves(args) => commands::curves::run(&context(&cli.global, None)?, args),
        Command::Certify(args) => commands::certify::run(context(&cli.global, Some(args))?),
        Command::Recover(args) => commands::recover::run(context(&cli.global, Some(args))?),
        Command::Stable(args) => commands::stable::run(context(&cli.global, Some(args))?),
        Command::Verify(args) => commands::verify::run(&context(&cli.global, None)?, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { failure::Kind::Config.code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
