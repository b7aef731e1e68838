use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use coopcav::cli::{self, load_config, ConfigFile, Overrides};

/// Steady-state sweeps of pumped emitters in a lossy cavity.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Built-in preset: fig2, fig3, fig4, fig5, fig6 or fig7.
    #[arg(long)]
    preset: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let file = match &args.config {
        Some(path) => load_config(path),
        None if args.preset.is_some() => Ok(ConfigFile::default()),
        None => {
            eprintln!("error: give --config <file> or --preset <name>");
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        out: args.out,
        workers: args.workers,
        preset: args.preset,
    };
    let config = match file.and_then(|f| f.resolve(&overrides)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match cli::run(&config, &mut |line| eprintln!("{line}")) {
        Ok(summary) => {
            if summary.failed + summary.flagged > 0 {
                eprintln!(
                    "warning: {} of {} points failed, {} flagged for truncation",
                    summary.failed, summary.points, summary.flagged
                );
            }
            eprintln!("wrote results to {}", config.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
