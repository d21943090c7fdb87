use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::wilson_interval;
use crate::cnf::{sample, sample_planted, Formula, Model};
use crate::error::{Error, Result};
use crate::harness::config::{Cell, ExperimentConfig};
use crate::rng::{derive_seed, FORMULA_STREAM};
use crate::walksat::{run, Recording};

pub const HEADER: &str = "n,k,m,alpha,omega,trials,successes,success_rate,wilson_low,wilson_high,\
mean_steps_success,mean_final_unsat_failure,wall_time_s,master_seed";

/// Index of the `wall_time_s` column, the only nondeterministic field.
pub const TIMING_COLUMN: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub omega: u64,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub mean_steps_success: Option<f64>,
    pub mean_final_unsat_failure: Option<f64>,
    pub wall_time_s: f64,
    pub master_seed: u64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl ExperimentRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{:.3},{}\n",
            self.n,
            self.k,
            self.m,
            self.alpha,
            self.omega,
            self.trials,
            self.successes,
            self.success_rate,
            self.wilson_low,
            self.wilson_high,
            opt(self.mean_steps_success),
            opt(self.mean_final_unsat_failure),
            self.wall_time_s,
            self.master_seed
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
        if fields.len() != 14 {
            return Err(Error::Csv(format!("expected 14 fields, got {}", fields.len())));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
            s.trim()
                .parse()
                .map_err(|_| Error::Csv(format!("bad {name} value {s:?}")))
        }
        let maybe = |s: &str, name: &str| -> Result<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(s, name).map(Some)
            }
        };
        let row = ExperimentRow {
            n: num(fields[0], "n")?,
            k: num(fields[1], "k")?,
            m: num(fields[2], "m")?,
            alpha: num(fields[3], "alpha")?,
            omega: num(fields[4], "omega")?,
            trials: num(fields[5], "trials")?,
            successes: num(fields[6], "successes")?,
            success_rate: num(fields[7], "success_rate")?,
            wilson_low: num(fields[8], "wilson_low")?,
            wilson_high: num(fields[9], "wilson_high")?,
            mean_steps_success: maybe(fields[10], "mean_steps_success")?,
            mean_final_unsat_failure: maybe(fields[11], "mean_final_unsat_failure")?,
            wall_time_s: num(fields[12], "wall_time_s")?,
            master_seed: num(fields[13], "master_seed")?,
        };
        if row.successes > row.trials {
            return Err(Error::Csv(format!(
                "successes {} exceed trials {}",
                row.successes, row.trials
            )));
        }
        Ok(row)
    }

    fn matches(&self, cell: &Cell, cfg: &ExperimentConfig) -> bool {
        self.n == cell.n
            && self.k == cell.k
            && self.m == cell.m
            && self.alpha == cell.alpha
            && self.omega == cell.omega
            && self.trials == cfg.trials
            && self.master_seed == cfg.master_seed
    }
}

/// Parses a sweep CSV, header included. Empty input yields no rows.
pub fn read_rows(text: &str) -> Result<Vec<ExperimentRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        None => return Ok(Vec::new()),
        Some(h) if h.trim() == HEADER => {}
        Some(h) => return Err(Error::Csv(format!("unexpected header {h:?}"))),
    }
    lines.map(ExperimentRow::from_csv_line).collect()
}

/// Blanks the timing column so two sweeps can be compared byte for byte.
pub fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f.len() > TIMING_COLUMN && l != HEADER {
                f[TIMING_COLUMN] = "";
            }
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Seeds for trial `t` of cell `c`: the formula comes from
/// `derive_seed(master, c, 2t)` (or `derive_seed(master, c, FORMULA_STREAM)`
/// when one formula is shared by the cell) and the walk from
/// `derive_seed(master, c, 2t + 1)`.
pub fn trial_seeds(cfg: &ExperimentConfig, cell: u64, trial: u64) -> (u64, u64) {
    let formula = if cfg.fresh_formula_per_trial {
        derive_seed(cfg.master_seed, cell, 2 * trial)
    } else {
        derive_seed(cfg.master_seed, cell, FORMULA_STREAM)
    };
    (formula, derive_seed(cfg.master_seed, cell, 2 * trial + 1))
}

pub(crate) fn draw_formula(model: Model, n: usize, k: usize, m: usize, seed: u64) -> Result<Formula> {
    match model {
        Model::Planted => sample_planted(n, k, m, seed).map(|(f, _)| f),
        _ => sample(model, n, k, m, seed),
    }
}

struct TrialResult {
    success: bool,
    steps: u64,
    final_unsat: usize,
}

/// Runs one cell with trials spread over the current rayon pool.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<ExperimentRow> {
    let start = Instant::now();
    let shared = if cfg.fresh_formula_per_trial {
        None
    } else {
        let (seed, _) = trial_seeds(cfg, cell.index, 0);
        Some(draw_formula(cfg.model, cell.n, cell.k, cell.m, seed)?)
    };
    let results = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (fseed, wseed) = trial_seeds(cfg, cell.index, t);
            let owned;
            let formula = match &shared {
                Some(f) => f,
                None => {
                    owned = draw_formula(cfg.model, cell.n, cell.k, cell.m, fseed)?;
                    &owned
                }
            };
            let (out, _) = run(formula, cell.omega, wseed, &[], Recording::Off)?;
            Ok(TrialResult {
                success: out.is_success(),
                steps: out.steps_used,
                final_unsat: out.final_unsat,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let successes = results.iter().filter(|r| r.success).count() as u64;
    let failures = cfg.trials - successes;
    let (lo, hi) = wilson_interval(successes, cfg.trials);
    let success_steps: u64 = results.iter().filter(|r| r.success).map(|r| r.steps).sum();
    let failure_unsat: usize = results.iter().filter(|r| !r.success).map(|r| r.final_unsat).sum();
    Ok(ExperimentRow {
        n: cell.n,
        k: cell.k,
        m: cell.m,
        alpha: cell.alpha,
        omega: cell.omega,
        trials: cfg.trials,
        successes,
        success_rate: successes as f64 / cfg.trials as f64,
        wilson_low: lo,
        wilson_high: hi,
        mean_steps_success: (successes > 0).then(|| success_steps as f64 / successes as f64),
        mean_final_unsat_failure: (failures > 0).then(|| failure_unsat as f64 / failures as f64),
        wall_time_s: start.elapsed().as_secs_f64(),
        master_seed: cfg.master_seed,
    })
}

#[derive(Debug, Serialize)]
struct SweepMeta<'a> {
    config: &'a ExperimentConfig,
    cells: &'a [Cell],
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Reads the complete rows already in `out`, truncating a trailing partial
/// line left by an interrupted write. Returns how many leading cells are done.
fn resume_point(file: &mut File, cfg: &ExperimentConfig, cells: &[Cell]) -> Result<usize> {
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    if text.is_empty() {
        file.write_all(format!("{HEADER}\n").as_bytes())?;
        return Ok(0);
    }
    let complete = match text.rfind('\n') {
        Some(i) => i + 1,
        None => 0,
    };
    if complete < text.len() {
        file.set_len(complete as u64)?;
        file.seek(SeekFrom::End(0))?;
        text.truncate(complete);
    }
    if text.is_empty() {
        file.write_all(format!("{HEADER}\n").as_bytes())?;
        return Ok(0);
    }
    let rows = read_rows(&text).map_err(|e| Error::ResumeConflict(e.to_string()))?;
    if rows.len() > cells.len() {
        return Err(Error::ResumeConflict(format!(
            "output has {} rows but the config defines {} cells",
            rows.len(),
            cells.len()
        )));
    }
    for (i, (row, cell)) in rows.iter().zip(cells).enumerate() {
        if !row.matches(cell, cfg) {
            return Err(Error::ResumeConflict(format!(
                "row {} (n={}, alpha={}) does not match cell {} of the config",
                i + 1,
                row.n,
                row.alpha,
                cell.index
            )));
        }
    }
    Ok(rows.len())
}

/// Runs every cell in canonical order using `cfg.workers` threads.
///
/// With `cfg.out` set, rows are appended one complete line at a time and an
/// existing file is resumed after its last complete row; a `.meta.json`
/// sidecar records the resolved cells, including whether ω was capped.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::params(e.to_string()))?;

    let mut sink = None;
    let mut done = 0;
    if let Some(out) = &cfg.out {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(out)?;
        done = resume_point(&mut file, cfg, &cells)?;
        let meta = SweepMeta { config: cfg, cells: &cells };
        std::fs::write(meta_path(out), serde_json::to_string_pretty(&meta)? + "\n")?;
        sink = Some(file);
    }

    let mut rows = Vec::new();
    for cell in &cells[done..] {
        let row = pool.install(|| run_cell(cfg, cell))?;
        if cell.omega_capped {
            log::warn!("cell {}: step budget capped at {}", cell.index, cell.omega);
        }
        log::info!(
            "cell {} n={} alpha={} success {}/{}",
            cell.index,
            cell.n,
            cell.alpha,
            row.successes,
            row.trials
        );
        if let Some(file) = sink.as_mut() {
            file.write_all(row.to_csv_line().as_bytes())?;
            file.sync_data()?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn render_csv(rows: &[ExperimentRow]) -> String {
    let mut s = format!("{HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv_line());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::OmegaPolicy;

    fn config(out: Option<PathBuf>) -> ExperimentConfig {
        ExperimentConfig {
            k: 3,
            ns: vec![20],
            alphas: vec![1.0, 3.0, 6.0],
            omega: OmegaPolicy::LinearN { c: 50.0 },
            trials: 6,
            master_seed: 11,
            model: Model::Uniform,
            fresh_formula_per_trial: true,
            workers: 2,
            out,
        }
    }

    #[test]
    fn row_round_trip() {
        let row = ExperimentRow {
            n: 10,
            k: 3,
            m: 25,
            alpha: 2.5,
            omega: 100,
            trials: 4,
            successes: 3,
            success_rate: 0.75,
            wilson_low: 0.300636,
            wilson_high: 0.954413,
            mean_steps_success: Some(12.5),
            mean_final_unsat_failure: None,
            wall_time_s: 0.25,
            master_seed: 7,
        };
        let line = row.to_csv_line();
        assert_eq!(line, "10,3,25,2.5,100,4,3,0.750000,0.300636,0.954413,12.500000,,0.250,7\n");
        assert_eq!(ExperimentRow::from_csv_line(&line).unwrap(), row);
        assert!(ExperimentRow::from_csv_line("1,2,3").is_err());
        assert_eq!(HEADER.split(',').count(), 14);
        assert_eq!(HEADER.split(',').nth(TIMING_COLUMN), Some("wall_time_s"));
    }

    #[test]
    fn resume_skips_done_cells_and_drops_partial_line() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sweep.csv");
        let full = run_sweep(&config(Some(out.clone()))).unwrap();
        let reference = std::fs::read_to_string(&out).unwrap();
        assert_eq!(strip_timing(&reference), strip_timing(&render_csv(&full)));

        let mut lines: Vec<&str> = reference.lines().collect();
        lines.truncate(2);
        std::fs::write(&out, format!("{}\n10,3,", lines.join("\n"))).unwrap();
        let resumed = run_sweep(&config(Some(out.clone()))).unwrap();
        assert_eq!(resumed.len(), 2);
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(strip_timing(&text), strip_timing(&reference));
        assert!(meta_path(&out).exists());

        let again = run_sweep(&config(Some(out.clone()))).unwrap();
        assert!(again.is_empty());
    }

    #[test]
    fn resume_conflict_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sweep.csv");
        run_sweep(&config(Some(out.clone()))).unwrap();
        let mut other = config(Some(out));
        other.master_seed = 12;
        assert!(matches!(run_sweep(&other), Err(Error::ResumeConflict(_))));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = config(None);
        a.workers = 1;
        let mut b = config(None);
        b.workers = 3;
        let ra = render_csv(&run_sweep(&a).unwrap());
        let rb = render_csv(&run_sweep(&b).unwrap());
        assert_eq!(strip_timing(&ra), strip_timing(&rb));
    }

    #[test]
    fn shared_formula_mode() {
        let mut cfg = config(None);
        cfg.fresh_formula_per_trial = false;
        cfg.model = Model::Binomial;
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!(r.successes <= r.trials);
            assert!(r.wilson_low <= r.success_rate && r.success_rate <= r.wilson_high);
        }
    }
}
