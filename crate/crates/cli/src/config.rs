//! Run configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # comments start with '#', also after a value
//! seed = 42
//! [moments]              # section header: following keys get "moments."
//! samples = 10000
//! radii = 0.1, 0.2, 0.3  # lists are comma-separated
//! ```
//!
//! Keys may also be written fully qualified (`moments.samples = 10000`)
//! outside any section. Every key has a default except `seed`, which must
//! come from the file or from `--seed`. [`RunConfig::render`] writes every
//! key, and parsing the rendered text gives back an equal config.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("no master seed: set `seed` in the config or pass --seed")]
    MissingSeed,
}

/// A value that can be parsed from and rendered to config text.
trait ConfigValue {
    fn set(&mut self, text: &str) -> Result<(), String>;
    fn render(&self) -> String;
}

fn parse_f64(t: &str) -> Result<f64, String> {
    let v: f64 = t.trim().parse().map_err(|_| format!("invalid number `{}`", t.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number `{}`", t.trim()))
    }
}

impl ConfigValue for f64 {
    fn set(&mut self, t: &str) -> Result<(), String> {
        *self = parse_f64(t)?;
        Ok(())
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl ConfigValue for usize {
    fn set(&mut self, t: &str) -> Result<(), String> {
        // Accept 1e6-style integers for budgets.
        let t = t.trim();
        *self = match t.parse::<usize>() {
            Ok(v) => v,
            Err(_) => {
                let v = parse_f64(t).map_err(|_| format!("invalid integer `{t}`"))?;
                if v < 0.0 || v.fract() != 0.0 || v > 1e15 {
                    return Err(format!("invalid integer `{t}`"));
                }
                v as usize
            }
        };
        Ok(())
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for Option<u64> {
    fn set(&mut self, t: &str) -> Result<(), String> {
        *self = Some(t.trim().parse().map_err(|_| format!("invalid seed `{}`", t.trim()))?);
        Ok(())
    }
    fn render(&self) -> String {
        self.map(|v| v.to_string()).unwrap_or_default()
    }
}

impl ConfigValue for String {
    fn set(&mut self, t: &str) -> Result<(), String> {
        *self = t.trim().to_string();
        Ok(())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for PathBuf {
    fn set(&mut self, t: &str) -> Result<(), String> {
        if t.trim().is_empty() {
            return Err("empty path".into());
        }
        *self = PathBuf::from(t.trim());
        Ok(())
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

impl ConfigValue for Option<PathBuf> {
    fn set(&mut self, t: &str) -> Result<(), String> {
        *self = if t.trim().is_empty() { None } else { Some(PathBuf::from(t.trim())) };
        Ok(())
    }
    fn render(&self) -> String {
        self.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }
}

impl ConfigValue for Vec<f64> {
    fn set(&mut self, t: &str) -> Result<(), String> {
        *self = split_list(t).map(parse_f64).collect::<Result<_, _>>()?;
        Ok(())
    }
    fn render(&self) -> String {
        self.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
    }
}

impl ConfigValue for Vec<String> {
    fn set(&mut self, t: &str) -> Result<(), String> {
        *self = split_list(t).map(str::to_string).collect();
        Ok(())
    }
    fn render(&self) -> String {
        self.join(", ")
    }
}

impl ConfigValue for (f64, f64) {
    fn set(&mut self, t: &str) -> Result<(), String> {
        let v: Vec<f64> = split_list(t).map(parse_f64).collect::<Result<_, _>>()?;
        match v[..] {
            [a, b] if a < b => {
                *self = (a, b);
                Ok(())
            }
            _ => Err(format!("expected `lo, hi` with lo < hi, got `{}`", t.trim())),
        }
    }
    fn render(&self) -> String {
        format!("{:?}, {:?}", self.0, self.1)
    }
}

fn split_list(t: &str) -> impl Iterator<Item = &str> {
    t.split(',').map(str::trim).filter(|s| !s.is_empty())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub radius: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkConfig {
    pub radius: f64,
    pub samples: usize,
    pub h_seed_zero: f64,
    pub h_seed_crit: f64,
    pub seed_gate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentsConfig {
    pub radii: Vec<f64>,
    pub samples: usize,
    pub working_radius: f64,
    pub pitch_gap: f64,
    pub first_moment_radius: f64,
    pub repulsion_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacRiceConfig {
    pub sigma_radii: Vec<f64>,
    pub sigma_draws: usize,
    pub zcm_radii: Vec<f64>,
    pub zcm_draws: usize,
    pub mr_radii: Vec<f64>,
    pub integral_rho: f64,
    pub integral_draws: usize,
    pub intervals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub realizations: usize,
    pub side: f64,
    pub delta: f64,
    pub dt: f64,
    pub gef_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub input: Option<PathBuf>,
    /// Profile labels to fit; empty means all.
    pub labels: Vec<String>,
    pub range: (f64, f64),
}

/// Budgets of the acceptance suite that are not shared with a subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceConfig {
    pub smallr_draws: usize,
    pub zc_draws: usize,
    pub closed_draws: usize,
    pub phi_draws: usize,
    pub proxy_draws: usize,
    pub structural_samples: usize,
    pub invariance_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub sample: SampleConfig,
    pub landmarks: LandmarkConfig,
    pub moments: MomentsConfig,
    pub kacrice: KacRiceConfig,
    pub spectrogram: SpectrogramConfig,
    pub fit: FitConfig,
    pub acceptance: AcceptanceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: "geflab".into(),
            seed: None,
            out: PathBuf::from("out"),
            threads: 0,
            sample: SampleConfig { radius: 6.5, count: 4 },
            landmarks: LandmarkConfig { radius: 6.0, samples: 4, h_seed_zero: 0.25, h_seed_crit: 0.2, seed_gate: 2.0 },
            moments: MomentsConfig {
                radii: vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8, 1.0],
                samples: 10_000,
                working_radius: 6.0,
                pitch_gap: 0.1,
                first_moment_radius: 1.0,
                repulsion_radius: 0.15,
            },
            kacrice: KacRiceConfig {
                sigma_radii: vec![0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.14, 0.2],
                sigma_draws: 1_000_000,
                zcm_radii: vec![0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8],
                zcm_draws: 2_000_000,
                mr_radii: vec![0.001, 0.01, 0.1, 0.5, 1.0],
                integral_rho: 0.05,
                integral_draws: 100_000,
                intervals: 64,
            },
            spectrogram: SpectrogramConfig { realizations: 32, side: 20.0, delta: 0.1, dt: 0.02, gef_samples: 64 },
            fit: FitConfig { input: None, labels: Vec::new(), range: (0.1, 0.5) },
            acceptance: AcceptanceConfig {
                smallr_draws: 1_000_000,
                zc_draws: 1_000_000,
                closed_draws: 1_000_000,
                phi_draws: 1_000_000,
                proxy_draws: 400_000,
                structural_samples: 100,
                invariance_draws: 400_000,
            },
        }
    }
}

/// Documentation of every key with its default, in render order.
pub fn documented_keys() -> Vec<(&'static str, String, &'static str)> {
    let mut d = RunConfig::default();
    d.fields().into_iter().map(|(k, v, doc)| (k, v.render(), doc)).collect()
}

impl RunConfig {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue, &'static str)> {
        vec![
            ("experiment", &mut self.experiment, "name recorded in the manifest"),
            ("seed", &mut self.seed, "master seed (mandatory)"),
            ("out", &mut self.out, "output directory"),
            ("threads", &mut self.threads, "worker threads, 0 = all cores"),
            ("sample.radius", &mut self.sample.radius, "working radius of stored samples"),
            ("sample.count", &mut self.sample.count, "number of stored samples"),
            ("landmarks.radius", &mut self.landmarks.radius, "search disk radius"),
            ("landmarks.samples", &mut self.landmarks.samples, "number of samples searched"),
            ("landmarks.h_seed_zero", &mut self.landmarks.h_seed_zero, "seed grid spacing for zeros"),
            ("landmarks.h_seed_crit", &mut self.landmarks.h_seed_crit, "seed grid spacing for critical points"),
            ("landmarks.seed_gate", &mut self.landmarks.seed_gate, "skip seeds whose first step exceeds this many spacings"),
            ("moments.radii", &mut self.moments.radii, "test-disk radii"),
            ("moments.samples", &mut self.moments.samples, "GEF samples in the counting campaign"),
            ("moments.working_radius", &mut self.moments.working_radius, "radius of each sample's search disk"),
            ("moments.pitch_gap", &mut self.moments.pitch_gap, "gap between tiled test disks"),
            ("moments.first_moment_radius", &mut self.moments.first_moment_radius, "radius for first moments"),
            ("moments.repulsion_radius", &mut self.moments.repulsion_radius, "radius for repulsion factors"),
            ("kacrice.sigma_radii", &mut self.kacrice.sigma_radii, "half-distances r of the sigma profile"),
            ("kacrice.sigma_draws", &mut self.kacrice.sigma_draws, "conditioned draws per sigma radius"),
            ("kacrice.zcm_radii", &mut self.kacrice.zcm_radii, "distances of the zero/maximum integrand profile"),
            ("kacrice.zcm_draws", &mut self.kacrice.zcm_draws, "conditioned draws per integrand distance"),
            ("kacrice.mr_radii", &mut self.kacrice.mr_radii, "radii of the conditioned covariance table"),
            ("kacrice.integral_rho", &mut self.kacrice.integral_rho, "disk radius of the pair integral"),
            ("kacrice.integral_draws", &mut self.kacrice.integral_draws, "draws per quadrature node"),
            ("kacrice.intervals", &mut self.kacrice.intervals, "Simpson panels (multiple of 4)"),
            ("spectrogram.realizations", &mut self.spectrogram.realizations, "independent noise realizations"),
            ("spectrogram.side", &mut self.spectrogram.side, "side of the square time-frequency window"),
            ("spectrogram.delta", &mut self.spectrogram.delta, "grid spacing"),
            ("spectrogram.dt", &mut self.spectrogram.dt, "noise sampling step"),
            ("spectrogram.gef_samples", &mut self.spectrogram.gef_samples, "GEF samples for the comparison"),
            ("fit.input", &mut self.fit.input, "profile or kacrice CSV to fit"),
            ("fit.labels", &mut self.fit.labels, "labels to fit, empty = all"),
            ("fit.range", &mut self.fit.range, "radius range lo, hi"),
            ("acceptance.smallr_draws", &mut self.acceptance.smallr_draws, "draws for sigma at r = 0.01"),
            ("acceptance.zc_draws", &mut self.acceptance.zc_draws, "draws for the zero/saddle constants"),
            ("acceptance.closed_draws", &mut self.acceptance.closed_draws, "draws per closed-form oracle"),
            ("acceptance.phi_draws", &mut self.acceptance.phi_draws, "draws per phi radius"),
            ("acceptance.proxy_draws", &mut self.acceptance.proxy_draws, "draws per proxy radius"),
            ("acceptance.structural_samples", &mut self.acceptance.structural_samples, "samples for winding checks"),
            ("acceptance.invariance_draws", &mut self.acceptance.invariance_draws, "draws per invariance point"),
        ]
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, msg: format!("unterminated section header `{body}`") })?
                    .trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(ConfigError::Syntax { line, msg: format!("bad section name `{name}`") });
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, msg: format!("expected `key = value`, got `{body}`") })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax { line, msg: "empty key".into() });
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if !seen.insert(key.clone()) {
                return Err(ConfigError::Duplicate { line, key });
            }
            let mut fields = cfg.fields();
            let field = fields
                .iter_mut()
                .find(|(name, _, _)| *name == key)
                .ok_or_else(|| ConfigError::UnknownKey { line, key: key.clone() })?;
            field.1.set(v).map_err(|msg| ConfigError::BadValue { line, key: key.clone(), msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key, grouped by section, with its documentation as a comment.
    pub fn render(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        let mut current = "";
        for (key, value, doc) in copy.fields() {
            let (section, name) = key.split_once('.').unwrap_or(("", key));
            if section != current {
                let _ = writeln!(out, "\n[{section}]");
                current = section;
            }
            if key == "seed" && self.seed.is_none() {
                let _ = writeln!(out, "# {name} =   # {doc}");
                continue;
            }
            let _ = writeln!(out, "{name} = {}   # {doc}", value.render());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| Err(ConfigError::Invalid { key: key.into(), msg: msg.into() });
        if self.moments.radii.is_empty() || self.moments.radii.iter().any(|&r| !(r > 0.0 && r < self.moments.working_radius)) {
            return bad("moments.radii", "radii must be positive and below the working radius");
        }
        if !(self.moments.working_radius > 1.0 && self.moments.working_radius <= 11.0) {
            return bad("moments.working_radius", "must lie in (1, 11]");
        }
        if self.kacrice.intervals < 4 || self.kacrice.intervals % 4 != 0 {
            return bad("kacrice.intervals", "must be a positive multiple of 4");
        }
        if !(self.kacrice.integral_rho > 0.0 && self.kacrice.integral_rho < 1.0) {
            return bad("kacrice.integral_rho", "must lie in (0, 1)");
        }
        if !(self.spectrogram.dt > 0.0 && self.spectrogram.dt <= 0.05) {
            return bad("spectrogram.dt", "must lie in (0, 0.05]");
        }
        if !(self.spectrogram.delta > 0.0 && self.spectrogram.side >= 4.0 * self.spectrogram.delta) {
            return bad("spectrogram.delta", "grid needs at least four cells per side");
        }
        if !(self.sample.radius > 0.0 && self.sample.radius <= 12.0) {
            return bad("sample.radius", "must lie in (0, 12]");
        }
        if !(self.landmarks.radius > 0.0 && self.landmarks.radius <= 11.5) {
            return bad("landmarks.radius", "must lie in (0, 11.5]");
        }
        Ok(())
    }

    pub fn master_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or(ConfigError::MissingSeed)
    }
}
