//! Closed-form quantities: Kullback–Leibler rates, binomial and random-walk
//! tails, density thresholds and the exponents of the first-moment bounds.
//!
//! All leading-order: `o(n)` and `o_k(1)` corrections are dropped, and the
//! records returned say so in their field docs. Small probabilities are kept as
//! logarithms.

use std::f64::consts::LN_2;

use num_bigint::BigUint;
use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Constant of the quasirandomness regime `m/n ≥ c·2^k·ln²k/k`.
pub const DEFAULT_REGIME_CONSTANT: f64 = 195.0;

fn open_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::params(format!("{name} = {x} must lie in (0, 1)")));
    }
    Ok(())
}

/// `KL(q ‖ p) = q·ln(q/p) + (1−q)·ln((1−q)/(1−p))`.
pub fn kl(q: f64, p: f64) -> Result<f64> {
    open_unit("q", q)?;
    open_unit("p", p)?;
    // ln_1p keeps the second term accurate when p and q are tiny.
    Ok(q * (q / p).ln() + (1.0 - q) * ((-q).ln_1p() - (-p).ln_1p()))
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn log_binomial_pmf(n: u64, i: u64, p: f64) -> f64 {
    ln_binomial(n, i) + i as f64 * p.ln() + (n - i) as f64 * (-p).ln_1p()
}

// `q·n` computed in floating point can land a hair off an integer.
const ROUND_SLACK: f64 = 1e-9;

/// `ln P[Bin(n, p) ≤ x]`.
pub fn log_binomial_cdf(n: u64, p: f64, x: u64) -> f64 {
    log_sum_exp((0..=x.min(n)).map(|i| log_binomial_pmf(n, i, p)))
}

/// `ln P[Bin(n, p) ≥ x]`.
pub fn log_binomial_sf(n: u64, p: f64, x: u64) -> f64 {
    if x > n {
        return f64::NEG_INFINITY;
    }
    log_sum_exp((x..=n).map(|i| log_binomial_pmf(n, i, p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// `P[X ≤ qn]`, requires `q < p`.
    Lower,
    /// `P[X ≥ qn]`, requires `q > p`.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRate {
    /// Exact `ln P` of the tail.
    pub log_tail: f64,
    /// `(1/n)·ln P`.
    pub per_n: f64,
    /// Asymptotic value of `(1/n)·ln P`: `−KL(q ‖ p)`.
    pub asymptotic: f64,
}

impl TailRate {
    pub fn gap(&self) -> f64 {
        (self.per_n - self.asymptotic).abs()
    }
}

/// Exact binomial tail beyond `qn` next to its Chernoff rate.
pub fn binomial_tail_rate(n: u64, p: f64, q: f64, side: Tail) -> Result<TailRate> {
    if n == 0 {
        return Err(Error::params("n must be positive"));
    }
    let rate = kl(q, p)?;
    let x = q * n as f64;
    let log_tail = match side {
        Tail::Lower if q < p => log_binomial_cdf(n, p, (x + ROUND_SLACK).floor() as u64),
        Tail::Upper if q > p => log_binomial_sf(n, p, (x - ROUND_SLACK).ceil() as u64),
        _ => {
            return Err(Error::params(format!(
                "{side:?} tail needs q on the other side of p (q = {q}, p = {p})"
            )))
        }
    };
    Ok(TailRate {
        log_tail,
        per_n: log_tail / n as f64,
        asymptotic: -rate,
    })
}

fn check_walk(q: f64, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::params(format!("step probability p = {p} must lie in (0, 1/2)")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::params(format!("q = {q} must lie in (0, 1)")));
    }
    Ok(())
}

/// Exponential rate of `P[Σ_{t≤n} W_t ≥ qn]` for i.i.d. ±1 steps with
/// `P[W = 1] = p < 1/2`: `KL((1+q)/2 ‖ p)`.
pub fn walk_rate(q: f64, p: f64) -> Result<f64> {
    check_walk(q, p)?;
    kl((1.0 + q) / 2.0, p)
}

/// Exact `P[Σ W_t ≥ qn]` through `X_t = (1 + W_t)/2`, i.e. `P[Bin(n, p) ≥ n(1+q)/2]`.
pub fn walk_tail_rate(n: u64, p: f64, q: f64) -> Result<TailRate> {
    check_walk(q, p)?;
    binomial_tail_rate(n, p, (1.0 + q) / 2.0, Tail::Upper)
}

/// Density landmarks for clause width `k`, all as `m/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub k: u32,
    /// `2^k ln 2 − (1 + ln 2)/2`, the satisfiability threshold without its `o_k(1)` term.
    pub sat_threshold: f64,
    /// `2^k ln 2`, above which the formula is unsatisfiable w.h.p.
    pub unsat_bound: f64,
    /// `2^k/(25k)`, below which Walksat provably succeeds in linear time.
    pub walksat_positive: f64,
    /// `2^k ln k / k`, the algorithmic barrier (leading order).
    pub algorithmic_barrier: f64,
    /// `c·2^k ln²k / k`, where the failure theorem applies.
    pub theorem_regime: f64,
    pub regime_constant: f64,
    /// The theorem regime lies above the unsatisfiability bound.
    pub vacuous: bool,
}

pub fn thresholds(k: u32) -> Result<Thresholds> {
    thresholds_with(k, DEFAULT_REGIME_CONSTANT)
}

pub fn thresholds_with(k: u32, c: f64) -> Result<Thresholds> {
    if k < 3 {
        return Err(Error::params(format!("k = {k}: thresholds need k ≥ 3")));
    }
    let two_k = 2f64.powi(k as i32);
    let kf = k as f64;
    let lnk = kf.ln();
    let unsat_bound = two_k * LN_2;
    let theorem_regime = c * two_k * lnk * lnk / kf;
    Ok(Thresholds {
        k,
        sat_threshold: unsat_bound - (1.0 + LN_2) / 2.0,
        unsat_bound,
        walksat_positive: two_k / (25.0 * kf),
        algorithmic_barrier: two_k * lnk / kf,
        theorem_regime,
        regime_constant: c,
        vacuous: theorem_regime > unsat_bound,
    })
}

/// `(n, m, k)` with `n`, `m` real so per-variable quantities can be taken at `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub n: f64,
    pub m: f64,
    pub k: u32,
}

impl DensityParams {
    pub fn new(n: f64, m: f64, k: u32) -> Result<Self> {
        if !(n > 0.0) || !(m >= 0.0) || k == 0 {
            return Err(Error::params(format!("invalid density parameters n = {n}, m = {m}, k = {k}")));
        }
        Ok(DensityParams { n, m, k })
    }

    pub fn from_counts(n: usize, m: usize, k: usize) -> Result<Self> {
        Self::new(n as f64, m as f64, k as u32)
    }

    /// Parameters with `n` variables at `ρ = 2^{-k}·m/n`.
    pub fn from_rho(n: f64, rho: f64, k: u32) -> Result<Self> {
        Self::new(n, rho * 2f64.powi(k as i32) * n, k)
    }

    pub fn alpha(&self) -> f64 {
        self.m / self.n
    }

    pub fn rho(&self) -> f64 {
        self.alpha() / 2f64.powi(self.k as i32)
    }

    pub fn kappa(&self) -> f64 {
        let k = self.k as f64;
        k.ln() / k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstMoment {
    /// `n ln 2 − m·KL(0.1·2^{-k} ‖ 2^{-k})`, the `o(n)` term dropped.
    pub exact: f64,
    /// `n ln 2 − ρn/2`.
    pub bound: f64,
    pub within_bound: bool,
    /// `m/n ≥ 195·2^k ln²k/k`.
    pub in_regime: bool,
}

/// Exponent of `E|T(Φ)|`.
pub fn first_moment_log_t(params: DensityParams) -> Result<FirstMoment> {
    let p = 2f64.powi(-(params.k as i32));
    let base = params.n * LN_2;
    let exact = if params.m == 0.0 {
        base
    } else {
        base - params.m * kl(0.1 * p, p)?
    };
    let bound = base - params.rho() * params.n / 2.0;
    let kf = params.k as f64;
    let regime = DEFAULT_REGIME_CONSTANT * kf.ln().powi(2) / kf * 2f64.powi(params.k as i32);
    Ok(FirstMoment {
        exact,
        bound,
        within_bound: exact <= bound + 1e-12 * bound.abs().max(1.0),
        in_regime: params.k >= 2 && params.alpha() >= regime,
    })
}

/// Total exponent of the expected number of mist-overlap violations, summed
/// over all `2^n` centres: `n(10 ln²k − kρ/15) + n ln 2`.
pub fn q2_exponent(n: f64, k: u32, rho: f64) -> f64 {
    let kf = k as f64;
    n * (10.0 * kf.ln().powi(2) - kf * rho / 15.0) + n * LN_2
}

/// The per-`n` exponent `(2 + 10)ln²k − 13 ln²k` obtained by bounding `ln 2`
/// by `2 ln²k` and substituting `kρ/15 = 13 ln²k`.
pub fn q2_exponent_coarse_per_n(k: u32) -> f64 {
    let l2 = (k as f64).ln().powi(2);
    (2.0 + 10.0) * l2 - 13.0 * l2
}

/// Exponent of the expected number of Q3-violating pairs: `n(2 ln 2 − kρ/10)`.
pub fn q3_exponent(n: f64, k: u32, rho: f64) -> f64 {
    n * (2.0 * LN_2 - k as f64 * rho / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessBudget {
    /// `n/k²`.
    pub exponent: f64,
    /// `⌈exp(n/k²)⌉`; `None` when it overflows `f64`.
    pub omega: Option<BigUint>,
    /// `omega` is exact (below 2^53); otherwise rounded from `f64`.
    pub omega_exact: bool,
    /// `exp(−n/k²)`.
    pub failure_bound: f64,
}

/// Step budget and success bound of the failure theorem for `(n, k)`.
pub fn success_budget(n: u64, k: u64) -> Result<SuccessBudget> {
    if k == 0 {
        return Err(Error::params("k must be positive"));
    }
    let x = n as f64 / (k * k) as f64;
    let e = x.exp();
    let omega = e.is_finite().then(|| e.ceil()).and_then(BigUint::from_f64);
    Ok(SuccessBudget {
        exponent: x,
        omega_exact: e < 2f64.powi(53),
        omega,
        failure_bound: (-x).exp(),
    })
}

/// Annealed `ln E|S(Φ)| = n ln 2 + m ln(1 − 2^{-k})`.
pub fn log_sat_count_estimate(n: f64, m: f64, k: u32) -> f64 {
    n * LN_2 + m * (-(2f64.powi(-(k as i32)))).ln_1p()
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bounds at 0 and 1 are exact; keep rounding from moving them.
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes >= trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub count: u64,
    pub mean: f64,
    /// Fraction of `−1` increments (steps toward the reference).
    pub toward_fraction: f64,
    pub toward_wilson_low: f64,
    pub toward_wilson_high: f64,
    pub toward_at_most_tenth: bool,
    pub mean_at_least_four_fifths: bool,
}

pub fn drift_summary(y: &[i64]) -> Result<DriftSummary> {
    if y.is_empty() {
        return Err(Error::params("empty drift series"));
    }
    let count = y.len() as u64;
    let mean = y.iter().sum::<i64>() as f64 / count as f64;
    let toward = y.iter().filter(|&&v| v == -1).count() as u64;
    let (lo, hi) = wilson_interval(toward, count);
    let fraction = toward as f64 / count as f64;
    Ok(DriftSummary {
        count,
        mean,
        toward_fraction: fraction,
        toward_wilson_low: lo,
        toward_wilson_high: hi,
        toward_at_most_tenth: fraction <= 0.1,
        mean_at_least_four_fifths: mean >= 0.8,
    })
}
