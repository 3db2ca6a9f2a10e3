//! Solver configuration in a flat `section.key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; missing keys take the reference values of the bridge problem.
//! Unknown keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::barrier::ScheduleKind;
use crate::fem::MaterialModel;
use crate::homotopy::{NewtonConfig, PredictorOrder};
use crate::lagrangian::ProblemParams;
use crate::mesh::DiagonalPattern;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Default `t` values at which densities are written.
pub const DEFAULT_SNAPSHOTS: [f64; 9] = [
    0.0, 0.5, 0.9375, 0.999931, 0.999946, 0.999956, 0.999974, 0.999988, 1.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub nx: usize,
    pub ny: usize,
    pub diagonal: DiagonalPattern,
    pub material: MaterialModel,
    pub params: ProblemParams,
    /// Constant initial density.
    pub rho0: f64,
    pub mu0: f64,
    pub mu_inf: f64,
    pub schedule: ScheduleKind,
    pub dt_init: f64,
    pub dt_max: f64,
    pub growth: f64,
    pub shrink: f64,
    pub dt_min: f64,
    /// Base Newton tolerance; the solver scales it by `sqrt(dim)`.
    pub newton: NewtonConfig,
    pub predictor: PredictorOrder,
    pub out_dir: PathBuf,
    pub snapshots: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nx: 60,
            ny: 20,
            diagonal: DiagonalPattern::Alternating,
            material: MaterialModel::default(),
            params: ProblemParams::default(),
            rho0: 0.5,
            mu0: 50.0,
            mu_inf: 0.001,
            schedule: ScheduleKind::Linear,
            dt_init: 0.25,
            dt_max: 0.25,
            growth: 1.5,
            shrink: 0.5,
            dt_min: 1e-8,
            newton: NewtonConfig::default(),
            predictor: PredictorOrder::Zero,
            out_dir: PathBuf::from("output"),
            snapshots: DEFAULT_SNAPSHOTS.to_vec(),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nx == 0 {
            return Err(invalid("mesh.nx", "must be at least 1"));
        }
        if self.ny == 0 {
            return Err(invalid("mesh.ny", "must be at least 1"));
        }
        let m = &self.material;
        for (field, v) in [
            ("material.lambda0", m.lambda0),
            ("material.lambda1", m.lambda1),
            ("material.mu0", m.mu0),
            ("material.mu1", m.mu1),
        ] {
            positive(field, v)?;
        }
        if !(m.lambda1 > m.lambda0) {
            return Err(invalid("material.lambda1", "must exceed material.lambda0"));
        }
        if !(m.mu1 > m.mu0) {
            return Err(invalid("material.mu1", "must exceed material.mu0"));
        }
        if !(m.exponent >= 1.0) {
            return Err(invalid("material.exponent", format!("must be >= 1, got {}", m.exponent)));
        }
        positive("problem.gamma", self.params.gamma)?;
        positive("problem.beta", self.params.beta)?;
        positive("problem.epsilon", self.params.epsilon)?;
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            return Err(invalid("problem.rho0", format!("must lie in (0, 1), got {}", self.rho0)));
        }
        positive("barrier.mu0", self.mu0)?;
        positive("barrier.mu_inf", self.mu_inf)?;
        if !(self.mu_inf < self.mu0) {
            return Err(invalid(
                "barrier.mu_inf",
                format!("must be below barrier.mu0 ({} >= {})", self.mu_inf, self.mu0),
            ));
        }
        positive("step.dt_init", self.dt_init)?;
        positive("step.dt_max", self.dt_max)?;
        if self.dt_init > self.dt_max {
            return Err(invalid("step.dt_init", "must not exceed step.dt_max"));
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(invalid("step.growth", "must be >= 1"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("step.shrink", "must lie in (0, 1)"));
        }
        positive("step.dt_min", self.dt_min)?;
        positive("newton.tol", self.newton.tol)?;
        if self.newton.max_iter == 0 {
            return Err(invalid("newton.max_iter", "must be at least 1"));
        }
        if !(self.newton.divergence_growth > 1.0) {
            return Err(invalid("newton.divergence_growth", "must exceed 1"));
        }
        if let Some(t) = self.snapshots.iter().find(|t| !(**t >= 0.0 && **t <= 1.0)) {
            return Err(invalid("output.snapshots", format!("{t} is outside [0, 1]")));
        }
        Ok(())
    }

    /// Serializes every key; `parse_config_str` of the output reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mesh.nx", self.nx.to_string());
        kv("mesh.ny", self.ny.to_string());
        kv(
            "mesh.diagonal",
            match self.diagonal {
                DiagonalPattern::Forward => "forward",
                DiagonalPattern::Mirrored => "mirrored",
                DiagonalPattern::Alternating => "alternating",
            }
            .into(),
        );
        kv("material.lambda0", fmt_f64(self.material.lambda0));
        kv("material.lambda1", fmt_f64(self.material.lambda1));
        kv("material.mu0", fmt_f64(self.material.mu0));
        kv("material.mu1", fmt_f64(self.material.mu1));
        kv("material.exponent", fmt_f64(self.material.exponent));
        kv("problem.gamma", fmt_f64(self.params.gamma));
        kv("problem.beta", fmt_f64(self.params.beta));
        kv("problem.epsilon", fmt_f64(self.params.epsilon));
        kv("problem.rho0", fmt_f64(self.rho0));
        kv("barrier.mu0", fmt_f64(self.mu0));
        kv("barrier.mu_inf", fmt_f64(self.mu_inf));
        kv(
            "barrier.schedule",
            match self.schedule {
                ScheduleKind::Linear => "linear",
                ScheduleKind::Geometric => "geometric",
            }
            .into(),
        );
        kv("step.dt_init", fmt_f64(self.dt_init));
        kv("step.dt_max", fmt_f64(self.dt_max));
        kv("step.growth", fmt_f64(self.growth));
        kv("step.shrink", fmt_f64(self.shrink));
        kv("step.dt_min", fmt_f64(self.dt_min));
        kv("newton.tol", fmt_f64(self.newton.tol));
        kv("newton.max_iter", self.newton.max_iter.to_string());
        kv("newton.divergence_growth", fmt_f64(self.newton.divergence_growth));
        kv(
            "solver.predictor",
            match self.predictor {
                PredictorOrder::Zero => "0",
                PredictorOrder::First => "1",
            }
            .into(),
        );
        kv("output.dir", self.out_dir.display().to_string());
        kv(
            "output.snapshots",
            self.snapshots.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(", "),
        );
        s
    }
}

/// Shortest decimal representation that reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("`{key}` expects a number, got `{v}`"),
    })
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("`{key}` expects a non-negative integer, got `{v}`"),
    })
}

pub fn parse_config_str(text: &str) -> Result<SolverConfig, ConfigError> {
    let mut cfg = SolverConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{trimmed}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        let num = |v: &str| parse_f64(line, key, v);
        match key {
            "mesh.nx" => cfg.nx = parse_usize(line, key, value)?,
            "mesh.ny" => cfg.ny = parse_usize(line, key, value)?,
            "mesh.diagonal" => {
                cfg.diagonal = match value {
                    "forward" => DiagonalPattern::Forward,
                    "mirrored" => DiagonalPattern::Mirrored,
                    "alternating" => DiagonalPattern::Alternating,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("`mesh.diagonal` must be forward, mirrored or alternating, got `{other}`"),
                        })
                    }
                }
            }
            "material.lambda0" => cfg.material.lambda0 = num(value)?,
            "material.lambda1" => cfg.material.lambda1 = num(value)?,
            "material.mu0" => cfg.material.mu0 = num(value)?,
            "material.mu1" => cfg.material.mu1 = num(value)?,
            "material.exponent" => cfg.material.exponent = num(value)?,
            "problem.gamma" => cfg.params.gamma = num(value)?,
            "problem.beta" => cfg.params.beta = num(value)?,
            "problem.epsilon" => cfg.params.epsilon = num(value)?,
            "problem.rho0" => cfg.rho0 = num(value)?,
            "barrier.mu0" => cfg.mu0 = num(value)?,
            "barrier.mu_inf" => cfg.mu_inf = num(value)?,
            "barrier.schedule" => {
                cfg.schedule = match value {
                    "linear" => ScheduleKind::Linear,
                    "geometric" => ScheduleKind::Geometric,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("`barrier.schedule` must be linear or geometric, got `{other}`"),
                        })
                    }
                }
            }
            "step.dt_init" => cfg.dt_init = num(value)?,
            "step.dt_max" => cfg.dt_max = num(value)?,
            "step.growth" => cfg.growth = num(value)?,
            "step.shrink" => cfg.shrink = num(value)?,
            "step.dt_min" => cfg.dt_min = num(value)?,
            "newton.tol" => cfg.newton.tol = num(value)?,
            "newton.max_iter" => cfg.newton.max_iter = parse_usize(line, key, value)?,
            "newton.divergence_growth" => cfg.newton.divergence_growth = num(value)?,
            "solver.predictor" => {
                cfg.predictor = match value {
                    "0" => PredictorOrder::Zero,
                    "1" => PredictorOrder::First,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("`solver.predictor` must be 0 or 1, got `{other}`"),
                        })
                    }
                }
            }
            "output.dir" => cfg.out_dir = PathBuf::from(value),
            "output.snapshots" => cfg.snapshots = parse_list(line, key, value)?,
            _ => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Comma-separated list of numbers; empty means no entries.
pub fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_f64(line, key, v.trim())).collect()
}

pub fn parse_config(path: &Path) -> Result<SolverConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}
