//! Plain-text `key = value` configuration files.
//!
//! Blank lines and text after `#` are ignored. Model keys are `A`, `B`, `C`,
//! `D`, `Q`, `H`, `x0`, `T`. `B` and each `D_j` accept comma-separated vectors
//! for `l > 1`; `C` lists one value per noise source and `D` separates its
//! vectors with `;`. Learner keys are listed in [`LEARNER_KEYS`].

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, ScheduleKind};
use crate::learner::DtMode;

pub const MODEL_KEYS: [&str; 8] = ["A", "B", "C", "D", "Q", "H", "x0", "T"];
pub const LEARNER_KEYS: [&str; 20] = [
    "phi0",
    "Gamma0",
    "gamma0",
    "alpha",
    "beta",
    "c_gamma",
    "dt_mode",
    "dt",
    "n_iters",
    "phi_box_lo",
    "phi_box_hi",
    "Gamma_lo",
    "Gamma_hi",
    "b_scale",
    "a_phi_scale",
    "a_Gamma_scale",
    "prior_estimate",
    "schedule",
    "n_runs",
    "radius",
];

/// Parsed entries; a repeated key keeps its last value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !MODEL_KEYS.contains(&key) && !LEARNER_KEYS.contains(&key) && key != "seed" {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", i + 1)));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {}: empty value for {key}", i + 1)));
            }
            entries.insert(key.to_string(), value.to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Overrides the fields of `cfg` named in the file and validates the
    /// resulting model.
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        for (key, value) in &self.entries {
            apply_key(cfg, key, value)?;
        }
        let m = &cfg.model;
        if m.c.len() != m.d.len() {
            return Err(Error::Config(format!("C has {} entries but D has {}", m.c.len(), m.d.len())));
        }
        if m.d.iter().any(|d| d.len() != m.b.len()) {
            return Err(Error::Config("every D_j must have the length of B".into()));
        }
        crate::model::validate_model(m).map_err(|e| Error::Config(e.to_string()))?;
        let s = &cfg.learner;
        if s.phi_box.0 > s.phi_box.1 {
            return Err(Error::Config("phi_box_lo exceeds phi_box_hi".into()));
        }
        if s.cov_interval.0 < 0.0 || s.cov_interval.0 > s.cov_interval.1 {
            return Err(Error::Config("Gamma interval must satisfy 0 <= Gamma_lo <= Gamma_hi".into()));
        }
        if !(s.cov0 > 0.0) {
            return Err(Error::Config("Gamma0 must be positive".into()));
        }
        if cfg.n_iters == 0 || cfg.n_runs == 0 {
            return Err(Error::Config("n_iters and n_runs must be at least 1".into()));
        }
        Ok(())
    }
}

fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let s = &mut cfg.learner;
    let m = &mut cfg.model;
    match key {
        "A" => m.a = scalar(key, value)?,
        "B" => m.b = DVector::from_vec(vector(key, value)?),
        "C" => m.c = vector(key, value)?,
        "D" => {
            m.d = value
                .split(';')
                .map(|v| vector(key, v).map(DVector::from_vec))
                .collect::<Result<_>>()?
        }
        "Q" => m.q = scalar(key, value)?,
        "H" => m.h = scalar(key, value)?,
        "x0" => m.x0 = scalar(key, value)?,
        "T" => m.horizon = scalar(key, value)?,
        "phi0" => s.phi0 = scalar(key, value)?,
        "Gamma0" => s.cov0 = scalar(key, value)?,
        "gamma0" => s.gamma0 = scalar(key, value)?,
        "alpha" => s.alpha = positive(key, value)?,
        "beta" => s.beta = positive(key, value)?,
        "c_gamma" => {
            s.c_gamma = if value == "auto" { None } else { Some(positive(key, value)?) };
        }
        "dt_mode" => {
            s.dt_mode = match value {
                "theorem" => DtMode::Theorem,
                "fixed" => match s.dt_mode {
                    DtMode::Fixed(dt) => DtMode::Fixed(dt),
                    DtMode::Theorem => DtMode::Fixed(0.01),
                },
                _ => return Err(Error::Config(format!("dt_mode must be fixed or theorem, got {value:?}"))),
            }
        }
        "dt" => {
            if s.dt_mode != DtMode::Theorem {
                s.dt_mode = DtMode::Fixed(positive(key, value)?);
            } else {
                positive(key, value)?;
            }
        }
        "n_iters" => cfg.n_iters = count(key, value)?,
        "n_runs" => cfg.n_runs = count(key, value)?,
        "seed" => cfg.base_seed = value.parse().map_err(|_| bad(key, value))?,
        "phi_box_lo" => s.phi_box.0 = scalar(key, value)?,
        "phi_box_hi" => s.phi_box.1 = scalar(key, value)?,
        "Gamma_lo" => s.cov_interval.0 = scalar(key, value)?,
        "Gamma_hi" => s.cov_interval.1 = scalar(key, value)?,
        "radius" => s.radius = if value == "none" { None } else { Some(positive(key, value)?) },
        "b_scale" => s.b_scale = positive(key, value)?,
        "a_phi_scale" => s.a_phi_scale = positive(key, value)?,
        "a_Gamma_scale" => s.a_cov_scale = positive(key, value)?,
        "prior_estimate" => s.prior_estimate = scalar(key, value)?,
        "schedule" => {
            s.schedule = match value {
                "experiment" => ScheduleKind::Experiment,
                "theorem" => ScheduleKind::Theorem,
                _ => return Err(Error::Config(format!("schedule must be experiment or theorem, got {value:?}"))),
            }
        }
        _ => return Err(Error::Config(format!("unknown key {key:?}"))),
    }
    Ok(())
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value {value:?} for {key}"))
}

fn scalar(key: &str, value: &str) -> Result<f64> {
    match value.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(bad(key, value)),
    }
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v = scalar(key, value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be positive, got {v}")))
    }
}

fn count(key: &str, value: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(bad(key, value)),
    }
}

fn vector(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| scalar(key, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Experiment, Scale};

    fn base() -> ExperimentConfig {
        ExperimentConfig::preset(Experiment::Exp1Validate, Scale::Small)
    }

    #[test]
    fn overrides_model_and_learner() {
        let text = "# comment\nA = 0.5\nD = 2  # trailing\nphi0=-1.5\nc_gamma = auto\ndt = 0.005\nn_iters = 10\n";
        let mut cfg = base();
        ConfigFile::parse(text).unwrap().apply(&mut cfg).unwrap();
        assert_eq!(cfg.model.a, 0.5);
        assert_eq!(cfg.model.d[0][0], 2.0);
        assert_eq!(cfg.learner.phi0, -1.5);
        assert_eq!(cfg.learner.c_gamma, None);
        assert_eq!(cfg.learner.dt_mode, DtMode::Fixed(0.005));
        assert_eq!(cfg.n_iters, 10);
    }

    #[test]
    fn vector_forms() {
        let text = "B = 1, 2\nC = 0.5, 0\nD = 1, 0; 0, 1\n";
        let mut cfg = base();
        ConfigFile::parse(text).unwrap().apply(&mut cfg).unwrap();
        assert_eq!(cfg.model.b.len(), 2);
        assert_eq!(cfg.model.d.len(), 2);
        assert_eq!(cfg.model.d[1][1], 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "A 1",
            "bogus = 1",
            "A = x",
            "A = inf",
            "Q = -1",
            "D = 0",
            "B = 1, 2",
            "T = 0",
            "dt_mode = sometimes",
            "n_iters = 0",
            "phi_box_lo = 1\nphi_box_hi = 0",
            "alpha = -1",
        ] {
            let mut cfg = base();
            let r = ConfigFile::parse(text).and_then(|f| f.apply(&mut cfg));
            assert!(matches!(r, Err(Error::Config(_))), "{text:?} gave {r:?}");
        }
    }
}
