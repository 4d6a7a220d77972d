use std::path::PathBuf;
use std::process::ExitCode;

use beliefsim_harness::{load_config, run_experiment, ExperimentKind, HarnessError};
use clap::Parser;

/// Run a belief-market experiment and write its CSV table and SVG figure.
#[derive(Debug, Parser)]
#[command(name = "beliefsim", version)]
struct Args {
    /// market_convergence, bias_shrink, or aggregate
    kind: String,
    /// TOML configuration; an empty file runs the reference parameters.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn run(args: &Args) -> Result<(), HarnessError> {
    let kind: ExperimentKind = args.kind.parse()?;
    let mut config = load_config(&args.config, Some(kind))?;
    config.seed = args.seed;
    let out = run_experiment(&config, &args.out)?;
    println!("wrote {} and {}", out.csv.display(), out.figure.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; --help and --version are not
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("beliefsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
