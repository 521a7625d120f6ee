use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use sktk::app::{run, summary, write_summary, RunError};
use sktk::config::{parse_config, Study};

#[derive(Parser)]
#[command(name = "sktk", version, about = "Cross-diffusion discretisation and particle-limit studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model parameters (detailed balance, signs).
    Validate(Args),
    /// Integrate the discrete system and write snapshots.
    Solve(Args),
    /// Run the stochastic particle simulation.
    Simulate(Args),
    /// Compare the marginal hierarchy with the exact generator.
    BbgkyCheck(Args),
    /// Empirical marginals against the mean-field equation.
    MeanfieldStudy(Args),
    /// Grid refinement with weak residuals and monitors.
    GridStudy(Args),
    /// Entropy, dissipation and masses along a solve.
    EntropyReport(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(raw) = std::env::var("SKTK_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| RunError::Validation(format!("SKTK_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| RunError::Validation(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (study, args) = match cli.command {
        Command::Validate(a) => (Study::Validate, a),
        Command::Solve(a) => (Study::Solve, a),
        Command::Simulate(a) => (Study::Simulate, a),
        Command::BbgkyCheck(a) => (Study::BbgkyCheck, a),
        Command::MeanfieldStudy(a) => (Study::MeanfieldStudy, a),
        Command::GridStudy(a) => (Study::GridStudy, a),
        Command::EntropyReport(a) => (Study::EntropyReport, a),
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let cfg = match std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Validation(format!("cannot read {}: {e}", args.config.display())))
        .and_then(|text| parse_config(&text).map_err(RunError::from))
    {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(study, &cfg, &args.out) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let doc = summary(study, &cfg, "failed", json!({ "error": e.to_string() }));
            // best effort; the exit code already reports the failure
            let _ = write_summary(&args.out, &doc);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
