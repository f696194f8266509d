use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fieldlab::io::load_config;
use fieldlab::runner::{run, RunOptions, Subcommand};

const SUBCOMMANDS: [&str; 8] = [
    "sweep",
    "pure-state",
    "higher-order",
    "nongaussian",
    "finite-qm",
    "moments-check",
    "chebyshev",
    "sub-alpha",
];

/// Run a classical-field experiment and write its tables, result document and manifest.
#[derive(Debug, Parser)]
#[command(name = "fieldlab", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_parser = SUBCOMMANDS)]
    subcommand: String,

    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,

    /// Output directory.
    #[arg(long, env = "FIELDLAB_OUT", default_value = "fieldlab-out")]
    out: PathBuf,

    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Sampling threads. Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let sub: Subcommand = args.subcommand.parse().expect("validated by clap");
    let loaded = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions {
        out_dir: args.out,
        threads: args.threads,
        seed: args.seed,
    };
    match run(sub, &loaded, &opts) {
        Ok(outcome) => {
            let status = if outcome.passed { "passed" } else { "FAILED" };
            println!("{sub}: {status} ({})", outcome.manifest_path.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
