use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conelab::config::RunConfig;
use conelab::error::Result;
use conelab::exec::{set_mode, ExecMode};
use conelab::ledger::CertificateLedger;
use conelab::pipeline::{run_pipeline, Stage};
use conelab::plots::emit_plots;

/// Build and certify a minimal hypersurface asymptotic to a cone.
///
/// Exit codes: 0 all certificates pass, 1 a certificate failed,
/// 2 a solver or I/O error, 3 a configuration error.
#[derive(Parser)]
#[command(name = "conelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults are used for absent fields or without a file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides `out_dir` from the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Multiply the node counts of every grid by N.
    #[arg(long, global = true, value_name = "N", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    grid_scale: u32,

    /// Run the data-parallel loops sequentially.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve and certify the radial profiles.
    Profile,
    /// Profiles, gap function and barrier certificates.
    Barriers,
    /// Everything up to the continuation run.
    Solve,
    /// Everything up to the glued solution.
    Assemble,
    /// Everything up to the metric factor.
    Metric,
    /// The full pipeline.
    VerifyAll,
    /// Print the ledger of a finished run and write its plots.
    Report,
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = cfg.scaled(cli.grid_scale as usize);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    Ok((cfg, out))
}

fn report(out: &Path) -> Result<bool> {
    let ledger = CertificateLedger::load(&out.join("ledger.json"))?;
    print!("{}", ledger.summary_table());
    for p in emit_plots(out)? {
        println!("wrote {}", p.display());
    }
    Ok(ledger.pass)
}

fn run(cli: &Cli) -> Result<bool> {
    if cli.sequential {
        set_mode(ExecMode::Sequential);
    }
    let (cfg, out) = load(cli)?;
    let stage = match cli.command {
        Command::Profile => Stage::Profile,
        Command::Barriers => Stage::Barriers,
        Command::Solve => Stage::Solve,
        Command::Assemble => Stage::Assemble,
        Command::Metric | Command::VerifyAll => Stage::Metric,
        Command::Report => return report(&out),
    };
    let outcome = run_pipeline(&cfg, stage, &out)?;
    print!("{}", outcome.ledger.summary_table());
    println!("{} ({} certificates) -> {}", if outcome.ledger.pass { "all certificates pass" } else { "certificate failure" }, outcome.ledger.entries.len(), out.display());
    Ok(outcome.ledger.pass)
}

fn main() -> ExitCode {
    // argument errors count as configuration errors; --help and --version are not errors
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
