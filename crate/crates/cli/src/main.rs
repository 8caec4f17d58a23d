//! `antibunch` command-line front end.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "antibunch", version, about = "Double-slit spatial antibunching: simulated scans, fits and Schwarz-bound reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a detector scan and write its counts and a plot.
    Scan(ScanArgs),
    /// Fit a scan file to the fringe model plus background.
    Fit(FitArgs),
    /// Sample a classical field ensemble and test the Schwarz bound.
    Classical(ClassicalArgs),
    /// Consolidated Schwarz-bound report over scan and map files.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// Geometry config (TOML); published values when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
pub struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// fig4, fig5, fig6, fig7 or custom.
    #[arg(long, value_name = "NAME")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Dwell time per position, seconds.
    #[arg(long, value_name = "SECONDS", default_value_t = 1000.0)]
    dwell: f64,
    /// Custom mode: scan1_fix2, scan2_fix1, joint_equal or scan1_fix2_offset.
    #[arg(long, value_name = "NAME")]
    protocol: Option<String>,
    /// Custom mode: position of the fixed detector, mm.
    #[arg(long, value_name = "MM", allow_hyphen_values = true)]
    fixed_mm: Option<f64>,
    /// Custom mode: first scan position, mm.
    #[arg(long, value_name = "MM", allow_hyphen_values = true)]
    start_mm: Option<f64>,
    /// Custom mode: last scan position, mm.
    #[arg(long, value_name = "MM", allow_hyphen_values = true)]
    stop_mm: Option<f64>,
    /// Custom mode: scan step, mm.
    #[arg(long, value_name = "MM")]
    step_mm: Option<f64>,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Scan file written by `scan`.
    input: PathBuf,
}

#[derive(Args)]
pub struct ClassicalArgs {
    #[command(flatten)]
    common: Common,
    /// coherent, thermal or phase_diffused.
    #[arg(long, value_name = "NAME")]
    kind: String,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Thermal transverse coherence length, metres.
    #[arg(long, value_name = "METRES")]
    coherence_length: Option<f64>,
    /// Significance threshold, standard errors.
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Geometry config (TOML); sets the period used to locate fringe maxima.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Significance threshold, standard errors.
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    /// Scan or correlation-map files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Scan(a) => commands::scan(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Classical(a) => commands::classical(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
