//! Flat `key=value` run configuration files.
//!
//! ```text
//! # comment
//! n = 20
//! epsilon = 1e-3   # trailing comments are allowed
//! ```

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::MAX_CUT_DEPTH;
use crate::timeloop::RunConfig;

pub const KEYS: [&str; 9] = ["n", "dt", "T", "epsilon", "beta", "mu", "delta_reg", "cut_depth", "solver_tol"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?} (expected one of {})", KEYS.join(", "))]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: cannot parse {value:?} as a value for {key}")]
    Value { line: usize, key: String, value: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl ConfigError {
    pub fn line(&self) -> usize {
        match self {
            ConfigError::Syntax { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::Duplicate { line, .. }
            | ConfigError::Value { line, .. }
            | ConfigError::Invalid { line, .. } => *line,
        }
    }
}

fn parse_real(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::Value { line, key: key.into(), value: value.into() })
}

fn parse_count(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|_| ConfigError::Value { line, key: key.into(), value: value.into() })
}

/// Parses a configuration; absent keys keep the defaults of `base`.
pub fn parse_config_onto(text: &str, base: RunConfig) -> Result<RunConfig, ConfigError> {
    let mut cfg = base;
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: raw.to_string() });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { line, key: key.into() });
        }
        if seen.insert(key.to_string(), line).is_some() {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
        let invalid = |message: String| Err(ConfigError::Invalid { line, message });
        match key {
            "n" => {
                cfg.n = parse_count(line, key, value)?;
                if cfg.n == 0 {
                    return invalid("n must be at least 1".into());
                }
            }
            "cut_depth" => {
                cfg.cut_depth = parse_count(line, key, value)?;
                if cfg.cut_depth > MAX_CUT_DEPTH {
                    return invalid(format!("cut_depth must be at most {MAX_CUT_DEPTH}"));
                }
            }
            _ => {
                let v = parse_real(line, key, value)?;
                match key {
                    "dt" if v <= 0.0 => return invalid("dt must be positive".into()),
                    "T" if v <= 0.0 => return invalid("T must be positive".into()),
                    "epsilon" if v <= 0.0 => return invalid("epsilon must be positive".into()),
                    "beta" if !(0.0..1.0).contains(&v) => return invalid("beta must satisfy 0 <= beta < 1".into()),
                    "mu" if v <= 0.0 => return invalid("mu must be positive".into()),
                    "delta_reg" if v < 0.0 => return invalid("delta_reg must be nonnegative".into()),
                    "solver_tol" if v <= 0.0 => return invalid("solver_tol must be positive".into()),
                    _ => {}
                }
                match key {
                    "dt" => cfg.dt = v,
                    "T" => cfg.final_time = v,
                    "epsilon" => cfg.epsilon = v,
                    "beta" => cfg.beta = v,
                    "mu" => cfg.mu = v,
                    "delta_reg" => cfg.delta_reg = v,
                    _ => cfg.solver_tol = v,
                }
            }
        }
    }
    // Remaining cross-key constraint: T must be a whole number of steps.
    cfg.validate().map_err(|e| {
        let line = ["T", "dt"].iter().filter_map(|k| seen.get(*k).copied()).max().unwrap_or(0);
        ConfigError::Invalid { line, message: e.to_string() }
    })?;
    Ok(cfg)
}

/// Parses a configuration on top of the default run settings.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_onto(text, RunConfig::default())
}
