//! The plain Walksat walk: start from a uniformly random assignment, and while
//! some clause is unsatisfied pick one uniformly, pick one of its `k` positions
//! uniformly, and flip that position's variable.
//!
//! [`WalksatState`] keeps per-clause satisfied-position counts and an
//! array-plus-index unsatisfied set, so a flip costs time proportional to the
//! number of occurrences of the flipped variable and a uniform choice among
//! unsatisfied clauses costs O(1).

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::wilson_interval;
use crate::cnf::{Assignment, Formula, Literal};
use crate::error::{Error, Result};
use crate::landscape::radius;
use crate::rng::{derive_seed, rng_from_seed, Rng};

const ABSENT: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct WalksatState<'a> {
    formula: &'a Formula,
    assignment: Assignment,
    true_count: Vec<u32>,
    unsat: Vec<u32>,
    unsat_pos: Vec<u32>,
    // CSR layout: occurrences of literal code `c` are occ[occ_start[c]..occ_start[c + 1]],
    // one entry per clause position holding that literal.
    occ_start: Vec<u32>,
    occ: Vec<u32>,
    refs: Vec<Assignment>,
    ref_dist: Vec<usize>,
    steps: u64,
}

impl<'a> WalksatState<'a> {
    pub fn new(formula: &'a Formula, assignment: Assignment) -> Result<Self> {
        if assignment.len() != formula.n() {
            return Err(Error::LengthMismatch {
                expected: formula.n(),
                got: assignment.len(),
            });
        }
        let m = formula.m();
        if m >= ABSENT as usize {
            return Err(Error::params("too many clauses"));
        }
        let codes = 2 * formula.n();
        let mut occ_start = vec![0u32; codes + 1];
        for l in formula.literals() {
            occ_start[l.code() + 1] += 1;
        }
        for c in 0..codes {
            occ_start[c + 1] += occ_start[c];
        }
        let mut fill = occ_start.clone();
        let mut occ = vec![0u32; formula.literals().len()];
        for (i, clause) in formula.clauses().enumerate() {
            for l in clause {
                let slot = &mut fill[l.code()];
                occ[*slot as usize] = i as u32;
                *slot += 1;
            }
        }

        let mut state = WalksatState {
            formula,
            assignment,
            true_count: vec![0; m],
            unsat: Vec::new(),
            unsat_pos: vec![ABSENT; m],
            occ_start,
            occ,
            refs: Vec::new(),
            ref_dist: Vec::new(),
            steps: 0,
        };
        for i in 0..m {
            let count = formula
                .clause(i)
                .iter()
                .filter(|l| l.is_satisfied_by(&state.assignment))
                .count() as u32;
            state.true_count[i] = count;
            if count == 0 {
                state.insert_unsat(i as u32);
            }
        }
        Ok(state)
    }

    /// Registers reference assignments whose Hamming distance to the current
    /// assignment is tracked incrementally.
    pub fn with_refs(mut self, refs: Vec<Assignment>) -> Result<Self> {
        for r in &refs {
            if r.len() != self.formula.n() {
                return Err(Error::LengthMismatch {
                    expected: self.formula.n(),
                    got: r.len(),
                });
            }
        }
        self.ref_dist = refs
            .iter()
            .map(|r| hamming(r, &self.assignment))
            .collect();
        self.refs = refs;
        Ok(self)
    }

    pub fn formula(&self) -> &Formula {
        self.formula
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn unsat_count(&self) -> usize {
        self.unsat.len()
    }

    /// Current `U_Φ(σ)` in internal (unsorted) order.
    pub fn unsat_clauses(&self) -> &[u32] {
        &self.unsat
    }

    pub fn true_counts(&self) -> &[u32] {
        &self.true_count
    }

    pub fn is_satisfied(&self) -> bool {
        self.unsat.is_empty()
    }

    pub fn ref_distances(&self) -> &[usize] {
        &self.ref_dist
    }

    fn insert_unsat(&mut self, clause: u32) {
        self.unsat_pos[clause as usize] = self.unsat.len() as u32;
        self.unsat.push(clause);
    }

    fn remove_unsat(&mut self, clause: u32) {
        let pos = self.unsat_pos[clause as usize] as usize;
        let last = self.unsat.pop().expect("clause marked unsatisfied");
        if last != clause {
            self.unsat[pos] = last;
            self.unsat_pos[last as usize] = pos as u32;
        }
        self.unsat_pos[clause as usize] = ABSENT;
    }

    /// Draws (clause index, position) uniformly from `U_Φ(σ) × [k]`.
    pub fn choose(&self, rng: &mut Rng) -> Option<(usize, usize)> {
        if self.unsat.is_empty() {
            return None;
        }
        let clause = self.unsat[rng.gen_range(0..self.unsat.len())] as usize;
        let position = rng.gen_range(0..self.formula.k());
        Some((clause, position))
    }

    /// Flips one variable and updates counts, the unsatisfied set and reference distances.
    pub fn flip(&mut self, var: usize) {
        let now_true = Literal::new(var, !self.assignment.get(var));
        let now_false = Literal::new(var, self.assignment.get(var));
        self.assignment.flip(var);

        // Increments first, so a clause holding both x and ¬x never reads zero.
        let (lo, hi) = self.occ_range(now_true.code());
        for idx in lo..hi {
            let c = self.occ[idx];
            let count = &mut self.true_count[c as usize];
            *count += 1;
            if *count == 1 {
                self.remove_unsat(c);
            }
        }
        let (lo, hi) = self.occ_range(now_false.code());
        for idx in lo..hi {
            let c = self.occ[idx];
            let count = &mut self.true_count[c as usize];
            *count -= 1;
            if *count == 0 {
                self.insert_unsat(c);
            }
        }

        let value = self.assignment.get(var);
        for (r, d) in self.refs.iter().zip(self.ref_dist.iter_mut()) {
            if r.get(var) == value {
                *d -= 1;
            } else {
                *d += 1;
            }
        }
    }

    #[inline]
    fn occ_range(&self, code: usize) -> (usize, usize) {
        (
            self.occ_start[code] as usize,
            self.occ_start[code + 1] as usize,
        )
    }

    /// One Walksat iteration; returns the flipped variable.
    pub fn step(&mut self, rng: &mut Rng) -> Result<usize> {
        let (clause, position) = self.choose(rng).ok_or(Error::AlreadySatisfied)?;
        let var = self.formula.clause(clause)[position].var();
        self.flip(var);
        self.steps += 1;
        Ok(var)
    }

    /// Occurrences (with multiplicity) of variables on which the current
    /// assignment differs from `target`, inside unsatisfied clauses: the number
    /// of the `k·𝒰` equally likely moves that decrease the distance to `target`.
    pub fn toward_moves(&self, target: &Assignment) -> usize {
        self.unsat
            .iter()
            .map(|&c| {
                self.formula
                    .clause(c as usize)
                    .iter()
                    .filter(|l| self.assignment.get(l.var()) != target.get(l.var()))
                    .count()
            })
            .sum()
    }
}

fn hamming(a: &Assignment, b: &Assignment) -> usize {
    a.bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x != y)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Satisfied,
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub witness: Option<Assignment>,
    /// Number of flips performed, at most ω.
    pub steps_used: u64,
    pub seed: u64,
    pub final_unsat: usize,
    pub final_assignment: Assignment,
    pub final_ref_distances: Vec<usize>,
}

impl RunOutcome {
    pub fn is_success(&self) -> bool {
        self.status == RunStatus::Satisfied
    }

    /// The `{status, steps_used, seed}` export record.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "status": self.status,
            "steps_used": self.steps_used,
            "seed": self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    Off,
    /// Record the initial state, every `stride`-th step and the final step.
    Every(usize),
}

impl Recording {
    pub fn full() -> Self {
        Recording::Every(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryPoint {
    pub step: u64,
    /// `None` for the initial assignment.
    pub flipped_var: Option<usize>,
    pub unsat: usize,
    pub ref_distances: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trajectory {
    pub stride: usize,
    pub ref_count: usize,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(stride: usize, ref_count: usize) -> Self {
        Trajectory {
            stride,
            ref_count,
            points: Vec::new(),
        }
    }

    pub fn is_full_resolution(&self) -> bool {
        self.stride == 1
            && self
                .points
                .windows(2)
                .all(|w| w[1].step == w[0].step + 1)
    }

    /// CSV with columns `step,flipped_var,unsat_count,dist_ref_0..`; variables 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("step,flipped_var,unsat_count");
        for r in 0..self.ref_count {
            header.push_str(&format!(",dist_ref_{r}"));
        }
        writeln!(out, "{header}")?;
        for p in &self.points {
            let var = p.flipped_var.map(|v| (v + 1).to_string()).unwrap_or_default();
            write!(out, "{},{},{}", p.step, var, p.unsat)?;
            for d in &p.ref_distances {
                write!(out, ",{d}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn record(traj: &mut Trajectory, state: &WalksatState<'_>, flipped: Option<usize>) {
    traj.points.push(TrajectoryPoint {
        step: state.steps(),
        flipped_var: flipped,
        unsat: state.unsat_count(),
        ref_distances: state.ref_distances().to_vec(),
    });
}

/// Runs `Walksat(Φ, ω)` with all randomness drawn from `seed`.
///
/// `σ^{[i]}` is tested for `i = 0..ω` before each flip and `σ^{[ω]}` once more
/// at the end, so at most `ω` flips happen and an initially satisfying
/// assignment is returned with `steps_used = 0`.
pub fn run(
    formula: &Formula,
    omega: u64,
    seed: u64,
    refs: &[Assignment],
    recording: Recording,
) -> Result<(RunOutcome, Trajectory)> {
    let mut rng = rng_from_seed(seed);
    let start = Assignment::random(formula.n(), &mut rng);
    let mut state = WalksatState::new(formula, start)?.with_refs(refs.to_vec())?;

    let stride = match recording {
        Recording::Off => 0,
        Recording::Every(0) => return Err(Error::params("recording stride must be positive")),
        Recording::Every(s) => s,
    };
    let mut traj = Trajectory::new(stride, refs.len());
    if stride > 0 {
        record(&mut traj, &state, None);
    }

    let mut last_flip = None;
    while state.steps() < omega && !state.is_satisfied() {
        let var = state.step(&mut rng)?;
        last_flip = Some(var);
        if stride > 0 && state.steps() % stride as u64 == 0 {
            record(&mut traj, &state, Some(var));
        }
    }
    if stride > 1 && state.steps() % stride as u64 != 0 {
        record(&mut traj, &state, last_flip);
    }

    let satisfied = state.is_satisfied();
    let outcome = RunOutcome {
        status: if satisfied {
            RunStatus::Satisfied
        } else {
            RunStatus::Failure
        },
        witness: satisfied.then(|| state.assignment().clone()),
        steps_used: state.steps(),
        seed,
        final_unsat: state.unsat_count(),
        final_ref_distances: state.ref_distances().to_vec(),
        final_assignment: state.assignment,
    };
    Ok((outcome, traj))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub trials: u64,
    pub successes: u64,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub mean_steps_success: Option<f64>,
}

/// Monte Carlo estimate of `suc(Φ, ω)`; trial `t` uses seed `derive_seed(master_seed, 0, t)`.
pub fn estimate_success(
    formula: &Formula,
    omega: u64,
    trials: u64,
    master_seed: u64,
) -> Result<SuccessEstimate> {
    if trials == 0 {
        return Err(Error::params("trials must be at least 1"));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            run(formula, omega, derive_seed(master_seed, 0, t), &[], Recording::Off)
                .map(|(o, _)| o)
        })
        .collect::<Result<Vec<_>>>()?;
    let success_steps: Vec<u64> = outcomes
        .iter()
        .filter(|o| o.is_success())
        .map(|o| o.steps_used)
        .collect();
    let successes = success_steps.len() as u64;
    let (lo, hi) = wilson_interval(successes, trials);
    Ok(SuccessEstimate {
        trials,
        successes,
        fraction: successes as f64 / trials as f64,
        wilson_low: lo,
        wilson_high: hi,
        mean_steps_success: (successes > 0)
            .then(|| success_steps.iter().sum::<u64>() as f64 / successes as f64),
    })
}

fn require_full(traj: &Trajectory, ref_index: usize) -> Result<()> {
    if !traj.is_full_resolution() {
        return Err(Error::DownSampled(traj.stride));
    }
    if ref_index >= traj.ref_count {
        return Err(Error::params(format!(
            "reference {ref_index} not recorded ({} references)",
            traj.ref_count
        )));
    }
    Ok(())
}

/// Ring-crossing events against reference `ref_index`: all step pairs
/// `(t1, t2)`, `t1 < t2`, where the walk stands at distance `⌊10κn⌋` at `t1`,
/// at `⌊5κn⌋` at `t2`, and every state in between (inclusive) lies in the ring
/// `⌊5κn⌋ ≤ dist ≤ ⌊10κn⌋` and outside the low-violation set.
///
/// `in_t` decides membership in that set from a trajectory point, normally by
/// its unsatisfied count.
pub fn detect_h_events<F>(
    traj: &Trajectory,
    ref_index: usize,
    n: usize,
    k: usize,
    in_t: F,
) -> Result<Vec<(u64, u64)>>
where
    F: Fn(&TrajectoryPoint) -> bool,
{
    require_full(traj, ref_index)?;
    let outer = radius(10.0, n, k);
    let inner = radius(5.0, n, k);
    let admissible = |p: &TrajectoryPoint| {
        let d = p.ref_distances[ref_index];
        inner <= d && d <= outer && !in_t(p)
    };

    let mut events = Vec::new();
    let mut entries: Vec<u64> = Vec::new();
    for p in &traj.points {
        if !admissible(p) {
            entries.clear();
            continue;
        }
        let d = p.ref_distances[ref_index];
        if d == inner {
            events.extend(entries.iter().map(|&t1| (t1, p.step)));
        }
        if d == outer {
            entries.push(p.step);
        }
    }
    Ok(events)
}

/// The drift increments `Y_{t+1} = dist(σ^{[t+1]}, μ) − dist(σ^{[t]}, μ) + 2·1{σ^{[t]} ∉ ring ∖ T}`
/// for ring radii `(r1, r2)` in units of `κn`.
pub fn drift_series<F>(
    traj: &Trajectory,
    ref_index: usize,
    n: usize,
    k: usize,
    ring: (f64, f64),
    in_t: F,
) -> Result<Vec<i64>>
where
    F: Fn(&TrajectoryPoint) -> bool,
{
    require_full(traj, ref_index)?;
    let inner = radius(ring.0, n, k);
    let outer = radius(ring.1, n, k);
    Ok(traj
        .points
        .windows(2)
        .map(|w| {
            let (now, next) = (&w[0], &w[1]);
            let d = now.ref_distances[ref_index];
            let inside = inner <= d && d <= outer && !in_t(now);
            next.ref_distances[ref_index] as i64 - d as i64 + if inside { 0 } else { 2 }
        })
        .collect())
}
