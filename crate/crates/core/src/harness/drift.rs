use serde::{Deserialize, Serialize};

use crate::cnf::{sample_planted, Assignment, Formula};
use crate::error::{Error, Result};
use crate::landscape::TThreshold;
use crate::rng::{derive_seed, rng_from_seed};
use crate::walksat::{detect_h_events, drift_series, RunStatus, Trajectory, TrajectoryPoint, WalksatState};

/// Ring used for the drift variable, in units of `κn`.
pub const DRIFT_RING: (f64, f64) = (5.0, 10.0);

/// Where the reference assignment `μ` comes from.
#[derive(Debug, Clone)]
pub enum Reference {
    /// A fresh planted formula per trial, with its hidden assignment as `μ`.
    /// Planted formulas are not uniform random formulas.
    Planted { n: usize, k: usize, m: usize },
    /// One fixed formula and reference for every trial.
    Given { formula: Formula, mu: Assignment },
}

#[derive(Debug, Clone)]
pub struct DriftConfig {
    pub reference: Reference,
    pub omega: u64,
    pub trials: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub trial: u64,
    pub formula_seed: Option<u64>,
    pub walk_seed: u64,
    pub status: RunStatus,
    pub steps_used: u64,
    pub initial_dist: usize,
    pub final_dist: usize,
    pub min_dist: usize,
    pub h_events: usize,
    /// Flips that moved the walk closer to `μ`.
    pub toward_steps: u64,
    pub toward_fraction: Option<f64>,
    /// Mean over visited unsatisfied states of the exact toward probability `X/(k𝒰)`.
    pub exact_toward_mean: Option<f64>,
    pub min_exact_toward: Option<f64>,
    pub y_count: usize,
    pub y_mean: Option<f64>,
}

pub const DRIFT_HEADER: &str = "trial,formula_seed,walk_seed,status,steps_used,initial_dist,final_dist,\
min_dist,h_events,toward_steps,toward_fraction,exact_toward_mean,min_exact_toward,y_count,y_mean";

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cell6(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl DriftRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.trial,
            cell(self.formula_seed),
            self.walk_seed,
            match self.status {
                RunStatus::Satisfied => "satisfied",
                RunStatus::Failure => "failure",
            },
            self.steps_used,
            self.initial_dist,
            self.final_dist,
            self.min_dist,
            self.h_events,
            self.toward_steps,
            cell6(self.toward_fraction),
            cell6(self.exact_toward_mean),
            cell6(self.min_exact_toward),
            self.y_count,
            cell6(self.y_mean),
        )
    }
}

pub fn render_drift_csv(rows: &[DriftRow]) -> String {
    let mut s = format!("{DRIFT_HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv_line());
    }
    s
}

fn point(state: &WalksatState<'_>, var: Option<usize>) -> TrajectoryPoint {
    TrajectoryPoint {
        step: state.steps(),
        flipped_var: var,
        unsat: state.unsat_count(),
        ref_distances: state.ref_distances().to_vec(),
    }
}

/// One walk against `mu`. Consumes randomness exactly like [`crate::walksat::run`]
/// with the same seed, so the two produce the same trajectory.
pub fn drift_trial(
    formula: &Formula,
    mu: &Assignment,
    omega: u64,
    walk_seed: u64,
) -> Result<(DriftRow, Trajectory)> {
    let (n, k) = (formula.n(), formula.k());
    if mu.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: mu.len() });
    }
    let mut rng = rng_from_seed(walk_seed);
    let start = Assignment::random(n, &mut rng);
    let mut state = WalksatState::new(formula, start)?.with_refs(vec![mu.clone()])?;
    let mut traj = Trajectory::new(1, 1);
    traj.points.push(point(&state, None));

    let (mut toward, mut exact_sum, mut exact_min, mut visited) = (0u64, 0.0, f64::INFINITY, 0u64);
    while state.steps() < omega && !state.is_satisfied() {
        let p = state.toward_moves(mu) as f64 / (k * state.unsat_count()) as f64;
        exact_sum += p;
        exact_min = exact_min.min(p);
        visited += 1;
        let before = state.ref_distances()[0];
        let var = state.step(&mut rng)?;
        if state.ref_distances()[0] < before {
            toward += 1;
        }
        traj.points.push(point(&state, Some(var)));
    }

    let threshold = TThreshold::for_formula(formula);
    let in_t = |p: &TrajectoryPoint| threshold.contains_count(p.unsat);
    let events = detect_h_events(&traj, 0, n, k, in_t)?;
    let y = drift_series(&traj, 0, n, k, DRIFT_RING, in_t)?;
    let dists = traj.points.iter().map(|p| p.ref_distances[0]);
    let steps = state.steps();
    let row = DriftRow {
        trial: 0,
        formula_seed: None,
        walk_seed,
        status: if state.is_satisfied() {
            RunStatus::Satisfied
        } else {
            RunStatus::Failure
        },
        steps_used: steps,
        initial_dist: traj.points[0].ref_distances[0],
        final_dist: state.ref_distances()[0],
        min_dist: dists.min().unwrap_or(0),
        h_events: events.len(),
        toward_steps: toward,
        toward_fraction: (steps > 0).then(|| toward as f64 / steps as f64),
        exact_toward_mean: (visited > 0).then(|| exact_sum / visited as f64),
        min_exact_toward: (visited > 0).then_some(exact_min),
        y_count: y.len(),
        y_mean: (!y.is_empty()).then(|| y.iter().sum::<i64>() as f64 / y.len() as f64),
    };
    Ok((row, traj))
}

/// Trial `t` draws its planted formula from `derive_seed(master, 0, 2t)` and its
/// walk from `derive_seed(master, 0, 2t + 1)`.
pub fn run_drift(cfg: &DriftConfig) -> Result<Vec<DriftRow>> {
    use rayon::prelude::*;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let walk_seed = derive_seed(cfg.master_seed, 0, 2 * t + 1);
            let (mut row, _) = match &cfg.reference {
                Reference::Planted { n, k, m } => {
                    let fseed = derive_seed(cfg.master_seed, 0, 2 * t);
                    let (formula, mu) = sample_planted(*n, *k, *m, fseed)?;
                    let mut out = drift_trial(&formula, &mu, cfg.omega, walk_seed)?;
                    out.0.formula_seed = Some(fseed);
                    out
                }
                Reference::Given { formula, mu } => drift_trial(formula, mu, cfg.omega, walk_seed)?,
            };
            row.trial = t;
            Ok(row)
        })
        .collect()
}
