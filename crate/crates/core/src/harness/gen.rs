use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cnf::{sample, sample_planted, write_dimacs, Model};
use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::sweep::trial_seeds;

/// Sidecar written next to every generated `.cnf` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaMeta {
    pub file: String,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub model: Model,
    pub seed: u64,
    pub master_seed: u64,
    pub cell: u64,
    pub replicate: u64,
    /// Planted formulas are not drawn from the uniform distribution.
    pub out_of_model: bool,
    /// Hex of the hidden satisfying assignment for planted formulas.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub planted: Option<String>,
}

/// Writes `replicates` formulas per cell into `dir`. Replicate `r` of a cell is
/// the formula that trial `r` of the same sweep would use.
pub fn generate(cfg: &ExperimentConfig, replicates: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for cell in cfg.cells() {
        for r in 0..replicates {
            let (seed, _) = trial_seeds(cfg, cell.index, r);
            let (formula, planted) = match cfg.model {
                Model::Planted => {
                    let (f, h) = sample_planted(cell.n, cell.k, cell.m, seed)?;
                    (f, Some(h.to_hex()))
                }
                model => (sample(model, cell.n, cell.k, cell.m, seed)?, None),
            };
            let stem = format!("k{}_n{}_a{}_r{}", cell.k, cell.n, cell.alpha, r);
            let cnf = dir.join(format!("{stem}.cnf"));
            std::fs::write(&cnf, write_dimacs(&formula))?;
            let meta = FormulaMeta {
                file: format!("{stem}.cnf"),
                n: cell.n,
                k: cell.k,
                m: formula.m(),
                alpha: cell.alpha,
                model: cfg.model,
                seed,
                master_seed: cfg.master_seed,
                cell: cell.index,
                replicate: r,
                out_of_model: cfg.model == Model::Planted,
                planted,
            };
            std::fs::write(
                dir.join(format!("{stem}.json")),
                serde_json::to_string_pretty(&meta)? + "\n",
            )?;
            written.push(cnf);
        }
    }
    Ok(written)
}
