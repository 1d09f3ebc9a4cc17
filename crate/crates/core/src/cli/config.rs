//! `key = value` run configuration files.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fields::Truncation;
use crate::solver::{Integrator, SolverConfig, System};

/// Keys accepted in a run configuration.
pub const KEYS: [&str; 16] = [
    "beta", "nu", "eps", "n_max", "k_max", "ball", "dt", "t_final", "integrator", "seed", "nonlinear", "system", "eps_list", "output", "amplitude", "corrector",
];

/// A parsed run configuration: solver settings plus command-specific keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub system: System,
    pub eps_list: Vec<f64>,
    pub output: Option<PathBuf>,
    /// Target L² norm of the random initial state; `None` keeps the raw draw.
    pub amplitude: Option<f64>,
    pub corrector: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverConfig::new(std::f64::consts::E, Truncation::rect(3, 3)),
            system: System::Limit,
            eps_list: vec![0.2, 0.1, 0.05],
            output: None,
            amplitude: None,
            corrector: true,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: expected true or false, got {v:?}"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value, got {raw:?}", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.solver;
        match key {
            "beta" => s.beta = num(key, v)?,
            "nu" => s.nu = num(key, v)?,
            "eps" => s.eps = Some(num(key, v)?),
            "n_max" => s.trunc.n_max = num(key, v)?,
            "k_max" => s.trunc.k_max = num(key, v)?,
            "ball" => {
                let r: f64 = num(key, v)?;
                s.trunc = Truncation::ball(r);
            }
            "dt" => s.dt = num(key, v)?,
            "t_final" => s.t_final = num(key, v)?,
            "integrator" => s.integrator = Integrator::parse(v)?,
            "seed" => s.seed = num(key, v)?,
            "nonlinear" => s.nonlinear = flag(key, v)?,
            "system" => {
                self.system = match v {
                    "limit" => System::Limit,
                    "filtered" => System::Filtered,
                    _ => return Err(Error::Parse(format!("system: expected limit or filtered, got {v:?}"))),
                }
            }
            "eps_list" => {
                self.eps_list = v.split(',').map(|x| num(key, x.trim())).collect::<Result<_>>()?;
            }
            "output" => self.output = Some(PathBuf::from(v)),
            "amplitude" => self.amplitude = Some(num(key, v)?),
            "corrector" => self.corrector = flag(key, v)?,
            _ => return Err(Error::Parse(format!("unknown key {key:?} (known: {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override must be key=value, got {kv:?}")))?;
        self.set(k.trim(), v.trim())
    }
}
