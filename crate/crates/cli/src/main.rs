use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geflab_cli::config::documented_keys;
use geflab_cli::{load_config, run, Invocation};

#[derive(Parser)]
#[command(name = "geflab", version, about = "Landmark statistics of Gaussian entire functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Config file (`key = value` lines, `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores); falls back to GEFLAB_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Store GEF realizations.
    Sample(Common),
    /// Find zeros and critical points of stored realizations.
    Landmarks(Common),
    /// First and second moments of landmark counts.
    Moments(Common),
    /// Two-point Kac–Rice profiles and integrals.
    Kacrice(Common),
    /// White-noise spectrogram landmarks against the GEF.
    Spectrogram(Common),
    /// Exponent fits of a profile CSV.
    Fit(Common),
    /// Every acceptance criterion with a pass/fail table.
    Acceptance(Common),
    /// Print every config key with its default.
    Keys,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (name, common) = match cli.command {
        Command::Sample(c) => ("sample", c),
        Command::Landmarks(c) => ("landmarks", c),
        Command::Moments(c) => ("moments", c),
        Command::Kacrice(c) => ("kacrice", c),
        Command::Spectrogram(c) => ("spectrogram", c),
        Command::Fit(c) => ("fit", c),
        Command::Acceptance(c) => ("acceptance", c),
        Command::Keys => {
            for (key, default, doc) in documented_keys() {
                println!("{key:<32} {default:<40} {doc}");
            }
            return ExitCode::SUCCESS;
        }
    };
    let inv = Invocation {
        subcommand: name.into(),
        config: common.config,
        seed: common.seed,
        out: common.out,
        threads: common.threads,
    };
    let cfg = match load_config(&inv) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("geflab {name}: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(name, &cfg) {
        Ok(report) => {
            for note in &report.outcome.notes {
                println!("{note}");
            }
            // The acceptance suite reports its checks while running.
            if name != "acceptance" {
                for c in &report.outcome.checks {
                    println!("{}", c.line());
                }
            }
            println!(
                "{} artifacts in {} ({:.1} s)",
                report.manifest.artifacts.len(),
                cfg.out.display(),
                report.manifest.wall_clock_s.unwrap_or(0.0)
            );
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("geflab {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
