use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::success_budget;
use crate::cnf::Model;
use crate::error::{Error, Result};

pub const DEFAULT_THEOREM_CAP: u64 = 1_000_000_000;

/// How the step budget ω is chosen for a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaPolicy {
    Fixed { steps: u64 },
    /// `⌈c·n⌉`.
    LinearN { c: f64 },
    /// `⌈c·n²⌉`.
    QuadraticN { c: f64 },
    /// `⌈exp(n/k²)⌉`, capped.
    Theorem { cap: u64 },
}

impl OmegaPolicy {
    /// Returns `(ω, capped)`.
    pub fn resolve(&self, n: usize, k: usize) -> (u64, bool) {
        match *self {
            OmegaPolicy::Fixed { steps } => (steps, false),
            OmegaPolicy::LinearN { c } => ((c * n as f64).ceil() as u64, false),
            OmegaPolicy::QuadraticN { c } => ((c * (n * n) as f64).ceil() as u64, false),
            OmegaPolicy::Theorem { cap } => {
                let budget = success_budget(n as u64, k.max(1) as u64).ok();
                let omega = budget
                    .and_then(|b| b.omega)
                    .and_then(|w| u64::try_from(w).ok());
                match omega {
                    Some(w) if w <= cap => (w, false),
                    _ => (cap, true),
                }
            }
        }
    }
}

/// Accepts `5000`, `10000n`, `100n2` (or `100n^2`), `theorem`, `theorem:CAP`.
impl FromStr for OmegaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::params(format!("cannot parse step budget {s:?}"));
        if let Some(rest) = s.strip_prefix("theorem") {
            let cap = match rest.strip_prefix(':') {
                Some(c) => c.parse().map_err(|_| bad())?,
                None if rest.is_empty() => DEFAULT_THEOREM_CAP,
                None => return Err(bad()),
            };
            return Ok(OmegaPolicy::Theorem { cap });
        }
        for suffix in ["n^2", "n2"] {
            if let Some(c) = s.strip_suffix(suffix) {
                return Ok(OmegaPolicy::QuadraticN {
                    c: c.parse().map_err(|_| bad())?,
                });
            }
        }
        if let Some(c) = s.strip_suffix('n') {
            return Ok(OmegaPolicy::LinearN {
                c: c.parse().map_err(|_| bad())?,
            });
        }
        Ok(OmegaPolicy::Fixed {
            steps: s.parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for OmegaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OmegaPolicy::Fixed { steps } => write!(f, "{steps}"),
            OmegaPolicy::LinearN { c } => write!(f, "{c}n"),
            OmegaPolicy::QuadraticN { c } => write!(f, "{c}n2"),
            OmegaPolicy::Theorem { cap } => write!(f, "theorem:{cap}"),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_workers() -> usize {
    1
}

/// Declarative description of a density sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub ns: Vec<usize>,
    /// Densities `α = m/n`; `m = round(α·n)`.
    pub alphas: Vec<f64>,
    pub omega: OmegaPolicy,
    pub trials: u64,
    pub master_seed: u64,
    pub model: Model,
    /// Draw a new formula for every trial instead of one per cell.
    #[serde(default = "default_true")]
    pub fresh_formula_per_trial: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::params("k must be positive"));
        }
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::params("ns must be a nonempty list of positive counts"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::params("alphas must be a nonempty list of nonnegative densities"));
        }
        if self.trials == 0 {
            return Err(Error::params("trials must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::params("workers must be at least 1"));
        }
        Ok(())
    }

    /// Cells in canonical order: `n` outer, `α` inner, both as listed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::with_capacity(self.ns.len() * self.alphas.len());
        for &n in &self.ns {
            for &alpha in &self.alphas {
                let (omega, omega_capped) = self.omega.resolve(n, self.k);
                cells.push(Cell {
                    index: cells.len() as u64,
                    n,
                    k: self.k,
                    alpha,
                    m: (alpha * n as f64).round() as usize,
                    omega,
                    omega_capped,
                });
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: u64,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub m: usize,
    pub omega: u64,
    pub omega_capped: bool,
}
