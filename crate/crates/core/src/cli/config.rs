//! Run configuration: defaults, the flat `key = value` format, and JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::housing::HousingSpec;
use crate::mc::{Scheme, SimConfig};
use crate::rates::{derive_transform, CirParams, DiscountMode, DiscountSpec};

use super::CliError;

/// (min, max, points) of a sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn linear(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.min + step * i as f64)
            .collect()
    }
}

/// Everything one run of the tool needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub cir: CirParams,
    pub discount: DiscountSpec,
    pub housing: HousingSpec,
    pub r0: f64,
    pub n_terms: usize,
    /// Decimals the thresholds are rounded to before the hitting-time
    /// stage; `None` uses the unrounded roots.
    pub hitting_threshold_decimals: Option<u32>,
    /// Rate grid for value and h curves.
    pub grid: Grid,
    /// Time grid for densities.
    pub t_grid: Grid,
    pub mc: Option<SimConfig>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cir: CirParams {
                kappa: 0.9,
                theta: 0.08 / 0.9,
                sigma: 0.033f64.sqrt(),
            },
            discount: DiscountSpec::stochastic(0.6, 0.4),
            housing: HousingSpec {
                cash_scale: 1e5,
                spread: 0.01,
                term: 30.0,
                prop_buy: 0.06,
                prop_sell: 0.06,
                fixed_buy: 5000.0,
                fixed_sell: 5000.0,
            },
            r0: 0.08,
            n_terms: crate::hitting::DEFAULT_TERMS,
            hitting_threshold_decimals: Some(3),
            grid: Grid {
                min: 0.001,
                max: 0.5,
                points: 500,
            },
            t_grid: Grid {
                min: 0.05,
                max: 60.0,
                points: 1200,
            },
            mc: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Keys accepted in configuration files, in documentation order.
pub const KEYS: &[&str] = &[
    "kappa",
    "theta",
    "sigma",
    "sigma_sq",
    "chi",
    "gamma",
    "discount_mode",
    "C",
    "rho",
    "T_years",
    "delta_b",
    "delta_s",
    "K_b",
    "K_s",
    "r0",
    "n_terms",
    "hitting_threshold_decimals",
    "r_min",
    "r_max",
    "r_points",
    "t_min",
    "t_max",
    "t_points",
    "output_dir",
    "mc_paths",
    "mc_dt",
    "mc_horizon",
    "mc_seed",
    "mc_scheme",
    "mc_bridge",
];

/// Parses a number, allowing a single `a/b` fraction.
pub fn parse_number(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim()
                    .parse()
                    .map_err(|_| format!("bad numerator in '{text}'"))?,
                b.trim()
                    .parse()
                    .map_err(|_| format!("bad denominator in '{text}'"))?,
            );
            if b == 0.0 {
                return Err(format!("zero denominator in '{text}'"));
            }
            a / b
        }
        None => text
            .parse()
            .map_err(|_| format!("'{text}' is not a number"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{text}' is not finite"))
    }
}

fn parse_count(text: &str) -> Result<usize, String> {
    text.trim()
        .parse()
        .map_err(|_| format!("'{}' is not a non-negative integer", text.trim()))
}

fn parse_bool(text: &str) -> Result<bool, String> {
    match text.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(format!("'{other}' is not a boolean")),
    }
}

impl RunConfig {
    fn mc_mut(&mut self) -> &mut SimConfig {
        self.mc.get_or_insert_with(SimConfig::default)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |msg: String| CliError::Config(format!("{key}: {msg}"));
        let num = || parse_number(value).map_err(bad);
        let count = || parse_count(value).map_err(bad);
        match key {
            "kappa" => self.cir.kappa = num()?,
            "theta" => self.cir.theta = num()?,
            "sigma" => self.cir.sigma = num()?,
            "sigma_sq" => {
                let s2 = num()?;
                if s2 < 0.0 {
                    return Err(bad("must be non-negative".into()));
                }
                self.cir.sigma = s2.sqrt();
            }
            "chi" => self.discount.chi = num()?,
            "gamma" => self.discount.gamma_wage = num()?,
            "discount_mode" => {
                self.discount.mode = match value.trim() {
                    "stochastic" => DiscountMode::Stochastic,
                    "constant" => DiscountMode::Constant,
                    other => {
                        return Err(bad(format!(
                            "expected stochastic or constant, got '{other}'"
                        )))
                    }
                }
            }
            "C" => self.housing.cash_scale = num()?,
            "rho" => self.housing.spread = num()?,
            "T_years" => self.housing.term = num()?,
            "delta_b" => self.housing.prop_buy = num()?,
            "delta_s" => self.housing.prop_sell = num()?,
            "K_b" => self.housing.fixed_buy = num()?,
            "K_s" => self.housing.fixed_sell = num()?,
            "r0" => self.r0 = num()?,
            "n_terms" => self.n_terms = count()?,
            "hitting_threshold_decimals" => {
                self.hitting_threshold_decimals = match value.trim() {
                    "none" | "" => None,
                    v => Some(
                        v.parse()
                            .map_err(|_| bad(format!("'{v}' is not a digit count")))?,
                    ),
                }
            }
            "r_min" => self.grid.min = num()?,
            "r_max" => self.grid.max = num()?,
            "r_points" => self.grid.points = count()?,
            "t_min" => self.t_grid.min = num()?,
            "t_max" => self.t_grid.max = num()?,
            "t_points" => self.t_grid.points = count()?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "mc_paths" => self.mc_mut().n_paths = count()?,
            "mc_dt" => self.mc_mut().dt = num()?,
            "mc_horizon" => self.mc_mut().horizon = num()?,
            "mc_seed" => {
                self.mc_mut().seed = value
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("'{value}' is not a u64")))?
            }
            "mc_scheme" => {
                self.mc_mut().scheme = match value.trim() {
                    "exact" => Scheme::ExactTransition,
                    "euler" => Scheme::FullTruncationEuler,
                    other => return Err(bad(format!("expected exact or euler, got '{other}'"))),
                }
            }
            "mc_bridge" => self.mc_mut().bridge_correction = parse_bool(value).map_err(bad)?,
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn from_flat(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key '{key}'",
                    n + 1
                )));
            }
            seen.push(key);
            cfg.set(key, value)?;
        }
        if seen.contains(&"sigma") && seen.contains(&"sigma_sq") {
            return Err(CliError::Config("give sigma or sigma_sq, not both".into()));
        }
        Ok(cfg)
    }

    /// Parses a flat JSON object with the same keys as the text format.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Config("JSON config must be an object".into()))?;
        let mut flat = String::new();
        for (k, v) in obj {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                Value::Null => "none".into(),
                _ => {
                    return Err(CliError::Config(format!(
                        "{k}: nested values are not supported"
                    )))
                }
            };
            let _ = writeln!(flat, "{k} = {text}");
        }
        Self::from_flat(&flat)
    }

    /// Reads a config file, choosing JSON when the content is an object.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_flat(&text)
        }
    }

    /// Checks every sub-specification; failures name the offending part.
    pub fn validate(&self) -> Result<(), CliError> {
        let stage = |what: &str, e: crate::Error| CliError::Config(format!("{what}: {e}"));
        self.cir.validate().map_err(|e| stage("rate model", e))?;
        derive_transform(&self.cir, &self.discount).map_err(|e| stage("discounting", e))?;
        self.housing.validate().map_err(|e| stage("housing", e))?;
        if !(self.r0 > 0.0) {
            return Err(CliError::Config(format!(
                "r0 must be positive (r0 = {})",
                self.r0
            )));
        }
        if self.n_terms == 0 {
            return Err(CliError::Config("n_terms must be >= 1".into()));
        }
        if !(self.grid.min > 0.0 && self.grid.max > self.grid.min && self.grid.points >= 2) {
            return Err(CliError::Config(
                "rate grid needs 0 < r_min < r_max and r_points >= 2".into(),
            ));
        }
        if !(self.t_grid.min > 0.0 && self.t_grid.max > self.t_grid.min && self.t_grid.points >= 2)
        {
            return Err(CliError::Config(
                "time grid needs 0 < t_min < t_max and t_points >= 2".into(),
            ));
        }
        if let Some(mc) = &self.mc {
            mc.validate().map_err(|e| stage("monte carlo", e))?;
        }
        Ok(())
    }
}
