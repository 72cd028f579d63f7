//! Flat `key = value` run configuration.
//!
//! Resolution order: built-in defaults, then the config file, then
//! `PDOB_<KEY>` environment variables (key upper-cased).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pdob_core::sim::SimParams;

use crate::error::{CliError, Result};

pub const KEYS: [&str; 21] = [
    "omega0",
    "gamma",
    "g",
    "Tk",
    "r",
    "kappa",
    "lambda",
    "delta",
    "g_a",
    "g_b",
    "omega_min",
    "omega_max",
    "J",
    "Kt",
    "harmonics",
    "duration_s",
    "dob_cutoff",
    "rc_cutoff",
    "experiment",
    "outdir",
    "seed",
];

pub const ENV_PREFIX: &str = "PDOB_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Sim1,
    Sim2,
    StepStudy,
}

impl Experiment {
    pub const NAMES: [&'static str; 3] = ["sim1", "sim2", "step-study"];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sim1" => Ok(Experiment::Sim1),
            "sim2" => Ok(Experiment::Sim2),
            "step-study" => Ok(Experiment::StepStudy),
            _ => Err(CliError::UnknownExperiment {
                name: name.to_string(),
                valid: Self::NAMES.join(", "),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Sim1 => "sim1",
            Experiment::Sim2 => "sim2",
            Experiment::StepStudy => "step-study",
        }
    }
}

/// Fully resolved configuration of one CLI run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega0: f64,
    pub gamma: f64,
    pub g: f64,
    pub tk: f64,
    pub r: f64,
    pub kappa: usize,
    pub lambda: f64,
    pub delta: f64,
    pub g_a: f64,
    pub g_b: f64,
    /// Defaults to `0.5·omega0` when unset.
    pub omega_min: Option<f64>,
    /// Defaults to `2·omega0` when unset.
    pub omega_max: Option<f64>,
    pub j: f64,
    pub kt: f64,
    pub harmonics: usize,
    pub duration_s: f64,
    pub dob_cutoff: f64,
    pub rc_cutoff: f64,
    pub experiment: String,
    pub outdir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SimParams::default();
        Self {
            omega0: p.omega0,
            gamma: p.gamma,
            g: p.cutoff,
            tk: p.sample_time,
            r: p.radius,
            kappa: p.kappa,
            lambda: p.lambda,
            delta: p.delta,
            g_a: p.smoothing_cutoff,
            g_b: p.bandpass_width,
            omega_min: None,
            omega_max: None,
            j: p.inertia,
            kt: p.torque_constant,
            harmonics: p.harmonics,
            duration_s: p.duration,
            dob_cutoff: p.dob_cutoff,
            rc_cutoff: p.rc_cutoff,
            experiment: "sim1".to_string(),
            outdir: PathBuf::from("out"),
            seed: p.seed,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| CliError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn finite(key: &str, value: &str) -> Result<f64> {
    let v: f64 = number(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "must be finite".to_string(),
        })
    }
}

impl RunConfig {
    /// Defaults overlaid with an optional file and then the environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut config = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            config.apply_text(&text, &path.display().to_string())?;
        }
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(name, value)| name.strip_prefix(ENV_PREFIX).map(|k| (k.to_string(), value)))
            .collect();
        overrides.sort();
        for (suffix, value) in overrides {
            let key = KEYS
                .iter()
                .find(|k| k.to_uppercase() == suffix)
                .ok_or_else(|| CliError::UnknownKey {
                    key: suffix.clone(),
                    origin: format!("environment variable {ENV_PREFIX}{suffix}"),
                    valid: KEYS.join(", "),
                })?;
            config.set(key, value.trim())?;
        }
        Ok(config)
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, source_name: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::ConfigSyntax {
                source_name: source_name.to_string(),
                line: index + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::UnknownKey {
                    key: key.to_string(),
                    origin: format!("{source_name}:{}", index + 1),
                    valid: KEYS.join(", "),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(CliError::DuplicateKey {
                    key: key.to_string(),
                    source_name: source_name.to_string(),
                });
            }
            self.set(key, value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "omega0" => self.omega0 = finite(key, value)?,
            "gamma" => self.gamma = finite(key, value)?,
            "g" => self.g = finite(key, value)?,
            "Tk" => self.tk = finite(key, value)?,
            "r" => self.r = finite(key, value)?,
            "kappa" => self.kappa = number(key, value)?,
            "lambda" => self.lambda = finite(key, value)?,
            "delta" => self.delta = finite(key, value)?,
            "g_a" => self.g_a = finite(key, value)?,
            "g_b" => self.g_b = finite(key, value)?,
            "omega_min" => self.omega_min = Some(finite(key, value)?),
            "omega_max" => self.omega_max = Some(finite(key, value)?),
            "J" => self.j = finite(key, value)?,
            "Kt" => self.kt = finite(key, value)?,
            "harmonics" => self.harmonics = number(key, value)?,
            "duration_s" => self.duration_s = finite(key, value)?,
            "dob_cutoff" => self.dob_cutoff = finite(key, value)?,
            "rc_cutoff" => self.rc_cutoff = finite(key, value)?,
            "experiment" => self.experiment = value.to_string(),
            "outdir" => self.outdir = PathBuf::from(value),
            "seed" => self.seed = number(key, value)?,
            _ => {
                return Err(CliError::UnknownKey {
                    key: key.to_string(),
                    origin: "set".to_string(),
                    valid: KEYS.join(", "),
                })
            }
        }
        Ok(())
    }

    pub fn omega_bounds(&self) -> (f64, f64) {
        (
            self.omega_min.unwrap_or(0.5 * self.omega0),
            self.omega_max.unwrap_or(2.0 * self.omega0),
        )
    }

    pub fn experiment(&self) -> Result<Experiment> {
        Experiment::parse(&self.experiment)
    }

    pub fn sim_params(&self) -> SimParams {
        let (omega_min, omega_max) = self.omega_bounds();
        SimParams {
            sample_time: self.tk,
            inertia: self.j,
            torque_constant: self.kt,
            omega0: self.omega0,
            gamma: self.gamma,
            cutoff: self.g,
            radius: self.r,
            kappa: self.kappa,
            lambda: self.lambda,
            delta: self.delta,
            smoothing_cutoff: self.g_a,
            bandpass_width: self.g_b,
            omega_min,
            omega_max,
            harmonics: self.harmonics,
            duration: self.duration_s,
            dob_cutoff: self.dob_cutoff,
            rc_cutoff: self.rc_cutoff,
            seed: self.seed,
            ..SimParams::default()
        }
    }

    /// Every key with its resolved value, in the canonical key order.
    pub fn to_text(&self) -> String {
        let (omega_min, omega_max) = self.omega_bounds();
        let values = [
            self.omega0.to_string(),
            self.gamma.to_string(),
            self.g.to_string(),
            self.tk.to_string(),
            self.r.to_string(),
            self.kappa.to_string(),
            self.lambda.to_string(),
            self.delta.to_string(),
            self.g_a.to_string(),
            self.g_b.to_string(),
            omega_min.to_string(),
            omega_max.to_string(),
            self.j.to_string(),
            self.kt.to_string(),
            self.harmonics.to_string(),
            self.duration_s.to_string(),
            self.dob_cutoff.to_string(),
            self.rc_cutoff.to_string(),
            self.experiment.clone(),
            self.outdir.display().to_string(),
            self.seed.to_string(),
        ];
        let mut out = String::new();
        for (key, value) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Writes the resolved configuration to `outdir/config.txt`.
    pub fn echo(&self) -> Result<PathBuf> {
        let path = self.outdir.join("config.txt");
        std::fs::write(&path, self.to_text()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
