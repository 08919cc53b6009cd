use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hkt::experiment::{run, ExperimentConfig, Mode};

/// Quaternionic Monge-Ampere experiments on flat hypercomplex tori.
#[derive(Parser, Debug)]
#[command(name = "hkt", version)]
struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// identities, diagonalize, solve, estimates or full; overrides the file.
    #[arg(long)]
    mode: Option<Mode>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HKT_THREADS") else {
        return Ok(());
    };
    let k: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("HKT_THREADS must be a positive integer, got `{v}`"))?;
    if k == 0 {
        return Err("HKT_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::defaults(2)),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    match run(&cfg) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string(&summary).expect("summary serializes")
            );
            if summary.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
