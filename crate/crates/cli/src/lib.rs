//! Experiment runner: configuration, seeding, thread pool, artifact writing
//! and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod manifest;

use std::fs;
use std::path::PathBuf;

use config::{ConfigError, RunConfig};
use experiments::{Outcome, RunError};
use manifest::{ArtifactWriter, RunManifest, Status};

pub const SUBCOMMANDS: [&str; 7] = ["sample", "landmarks", "moments", "kacrice", "spectrogram", "fit", "acceptance"];

/// Command-line overrides of a config file.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub subcommand: String,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub const THREADS_ENV: &str = "GEFLAB_THREADS";

/// Reads the config file and applies overrides. Thread count precedence:
/// `--threads`, then `GEFLAB_THREADS`, then the config value.
pub fn load_config(inv: &Invocation) -> Result<RunConfig, RunError> {
    let mut cfg = match &inv.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| RunError::Input(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = inv.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &inv.out {
        cfg.out = o.clone();
    }
    if let Some(t) = inv.threads {
        cfg.threads = t;
    } else if let Ok(v) = std::env::var(THREADS_ENV) {
        cfg.threads = v.trim().parse().map_err(|_| {
            RunError::Config(ConfigError::Invalid { key: THREADS_ENV.into(), msg: format!("not a thread count: `{v}`") })
        })?;
    }
    cfg.validate()?;
    cfg.master_seed()?;
    Ok(cfg)
}

pub struct RunReport {
    pub outcome: Outcome,
    pub manifest: RunManifest,
}

impl RunReport {
    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.outcome.all_pass() {
            0
        } else {
            1
        }
    }
}

fn dispatch(subcommand: &str, cfg: &RunConfig, seed: u64) -> Result<Outcome, RunError> {
    match subcommand {
        "sample" => experiments::sample(cfg, seed),
        "landmarks" => experiments::landmarks(cfg, seed),
        "moments" => experiments::moments(cfg, seed),
        "kacrice" => experiments::kacrice(cfg, seed),
        "spectrogram" => experiments::spectrogram(cfg, seed),
        "fit" => experiments::fit(cfg),
        "acceptance" => acceptance::acceptance(cfg, seed),
        other => Err(RunError::Input(format!("unknown subcommand `{other}`"))),
    }
}

/// Runs one subcommand on its own thread pool. The manifest is written
/// before any work starts and finalized afterwards, also on failure.
pub fn run(subcommand: &str, cfg: &RunConfig) -> Result<RunReport, RunError> {
    if !SUBCOMMANDS.contains(&subcommand) {
        return Err(RunError::Input(format!("unknown subcommand `{subcommand}`")));
    }
    let seed = cfg.master_seed()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::Numeric(e.to_string()))?;
    let threads = pool.current_num_threads();
    let mut cfg = cfg.clone();
    cfg.experiment = subcommand.to_string();
    let mut writer = ArtifactWriter::start(&cfg.out, subcommand, &cfg.render(), seed, threads)?;
    let result = pool.install(|| dispatch(subcommand, &cfg, seed));
    match result {
        Ok(outcome) => {
            for (name, bytes) in &outcome.files {
                writer.write(name, bytes)?;
            }
            if subcommand != "acceptance" && !outcome.checks.is_empty() {
                writer.write("checks.csv", &experiments::checks_csv(&outcome.checks))?;
            }
            let failed: Vec<&str> = outcome.checks.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
            let (status, detail) = if failed.is_empty() {
                (Status::Pass, format!("{} checks passed", outcome.checks.len()))
            } else {
                (Status::Fail, format!("failed: {}", failed.join("; ")))
            };
            writer.set_status(subcommand, status, &detail);
            let manifest = writer.finish()?;
            Ok(RunReport { outcome, manifest })
        }
        Err(e) => {
            writer.set_status(subcommand, Status::Error, &e.to_string());
            writer.finish()?;
            Err(e)
        }
    }
}
