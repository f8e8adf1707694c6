//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys are lower_snake_case.
//! Relative paths resolve against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::admm::{InitKind, SolverConfig};
use crate::error::{Result, RpcaError};
use crate::linalg::RngSeed;
use crate::norms::{Regularizer, RegularizerKind, DEFAULT_EPS_LOG};
use crate::reweight::{EpsFloor, ReweightConfig};

/// Parses `key = value` lines; duplicate keys are rejected.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| RpcaError::Parse(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.') {
            return Err(RpcaError::Parse(format!("line {}: invalid key '{key}'", lineno + 1)));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(RpcaError::Parse(format!("key '{key}' given twice")));
        }
    }
    Ok(out)
}

/// Everything `solve` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub observed: PathBuf,
    pub mask: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub x_true: Option<PathBuf>,
    pub s_true: Option<PathBuf>,
    pub regularizer: Regularizer,
    /// `None` selects `1/√max(m, n)`.
    pub lambda: Option<f64>,
    pub rank: usize,
    pub reweight: ReweightConfig,
}

pub const KNOWN_KEYS: [&str; 20] = [
    "observed",
    "mask",
    "output_dir",
    "x_true",
    "s_true",
    "regularizer",
    "eps_log",
    "lambda",
    "rank",
    "rho0",
    "mu",
    "rho_max",
    "max_iter",
    "tol_primal",
    "init",
    "seed",
    "outer_rounds",
    "eps_floor",
    "eps_floor_mode",
    "format_version",
];

fn key_error(key: &str, msg: impl std::fmt::Display) -> RpcaError {
    RpcaError::InvalidArgument(format!("config key '{key}': {msg}"))
}

struct Fields<'a> {
    map: &'a BTreeMap<String, String>,
    base: &'a Path,
}

impl Fields<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| key_error(key, format!("cannot parse '{v}': {e}"))))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|v| self.base.join(v))
    }
}

impl RunConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self> {
        let map = parse_pairs(text)?;
        if let Some(bad) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(key_error(bad, "unknown key"));
        }
        let f = Fields { map: &map, base: base_dir };
        if let Some(v) = f.parse::<u32>("format_version")? {
            if v != crate::FORMAT_VERSION {
                return Err(key_error("format_version", format!("unsupported version {v}")));
            }
        }

        let observed = f.path("observed").ok_or_else(|| key_error("observed", "required"))?;
        let rank = f.parse::<usize>("rank")?.ok_or_else(|| key_error("rank", "required"))?;
        if rank == 0 {
            return Err(key_error("rank", "must be positive"));
        }

        let kind = match f.raw("regularizer") {
            Some(v) => RegularizerKind::parse(v).map_err(|e| key_error("regularizer", e))?,
            None => RegularizerKind::WeightedNuclear,
        };
        let eps_log = f.parse::<f64>("eps_log")?.unwrap_or(DEFAULT_EPS_LOG);
        let regularizer = Regularizer::new(kind, eps_log).map_err(|e| key_error("eps_log", e))?;

        let lambda = f.parse::<f64>("lambda")?;
        if let Some(l) = lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(key_error("lambda", "must be positive"));
            }
        }

        let d = SolverConfig::default();
        let init = match f.raw("init") {
            Some(v) => InitKind::parse(v).map_err(|e| key_error("init", e))?,
            None => d.init,
        };
        let inner = SolverConfig {
            rho0: f.parse("rho0")?.unwrap_or(d.rho0),
            mu: f.parse("mu")?.unwrap_or(d.mu),
            rho_max: f.parse("rho_max")?.unwrap_or(d.rho_max),
            max_iter: f.parse("max_iter")?.unwrap_or(d.max_iter),
            tol_primal: f.parse("tol_primal")?.unwrap_or(d.tol_primal),
            init,
            seed: RngSeed(f.parse("seed")?.unwrap_or(0)),
        };
        inner.validate().map_err(|e| {
            let key = ["rho0", "mu", "rho_max", "max_iter", "tol_primal"]
                .into_iter()
                .find(|k| e.to_string().contains(&format!("{k} ")))
                .unwrap_or("solver");
            key_error(key, e)
        })?;

        let floor_value = f.parse::<f64>("eps_floor")?.unwrap_or(1e-3);
        if !(floor_value.is_finite() && floor_value > 0.0) {
            return Err(key_error("eps_floor", "must be positive"));
        }
        let eps_floor = match f.raw("eps_floor_mode").unwrap_or("relative") {
            "relative" => EpsFloor::Relative(floor_value),
            "absolute" => EpsFloor::Absolute(floor_value),
            other => return Err(key_error("eps_floor_mode", format!("expected relative or absolute, got '{other}'"))),
        };
        let outer_rounds = f.parse::<usize>("outer_rounds")?.unwrap_or(1);
        if outer_rounds == 0 {
            return Err(key_error("outer_rounds", "must be positive"));
        }

        Ok(Self {
            observed,
            mask: f.path("mask"),
            output_dir: f.path("output_dir").unwrap_or_else(|| base_dir.to_path_buf()),
            x_true: f.path("x_true"),
            s_true: f.path("s_true"),
            regularizer,
            lambda,
            rank,
            reweight: ReweightConfig {
                outer_rounds,
                eps_floor,
                inner,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RpcaError::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base)
    }

    /// Solver parameters as `key = value` lines, `lambda` resolved.
    pub fn parameter_lines(&self, lambda: f64) -> Vec<(String, String)> {
        let s = &self.reweight.inner;
        let (floor_mode, floor) = match self.reweight.eps_floor {
            EpsFloor::Relative(v) => ("relative", v),
            EpsFloor::Absolute(v) => ("absolute", v),
        };
        [
            ("regularizer", self.regularizer.kind().name().to_string()),
            ("eps_log", format!("{:e}", self.regularizer.eps_log())),
            ("lambda", format!("{lambda:e}")),
            ("rank", self.rank.to_string()),
            ("rho0", format!("{:e}", s.rho0)),
            ("mu", format!("{:e}", s.mu)),
            ("rho_max", format!("{:e}", s.rho_max)),
            ("max_iter", s.max_iter.to_string()),
            ("tol_primal", format!("{:e}", s.tol_primal)),
            ("init", s.init.name().to_string()),
            ("seed", s.seed.0.to_string()),
            ("outer_rounds", self.reweight.outer_rounds.to_string()),
            ("eps_floor", format!("{floor:e}")),
            ("eps_floor_mode", floor_mode.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}
