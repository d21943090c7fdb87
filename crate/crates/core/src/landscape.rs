//! Exact structure of small formulas: the low-violation set `T(Φ)`, distance
//! rings, mists and the quasirandomness checks Q1–Q3.
//!
//! Radii are given in units of `κn` with `κ = ln k / k` and always floored:
//! `D_σ(r1, r2) = {τ : ⌊r1·κn⌋ ≤ dist(σ, τ) ≤ ⌊r2·κn⌋}`.
//!
//! Everything that scans `{0,1}^n` works on assignments packed into a `u64`
//! (see [`Assignment::pack`]), so `n ≤ 64` is a hard ceiling on top of the
//! configurable enumeration limits.

use num_bigint::BigUint;
use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Formula};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const DEFAULT_T_LIMIT: usize = 24;
pub const DEFAULT_Q2_LIMIT: usize = 14;

pub fn kappa(k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        (k as f64).ln() / k as f64
    }
}

/// `⌊r·κn⌋`.
pub fn radius(r: f64, n: usize, k: usize) -> usize {
    (r * kappa(k) * n as f64).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub center: Assignment,
    pub r1: f64,
    pub r2: f64,
    pub inner: usize,
    pub outer: usize,
}

impl Ring {
    pub fn new(center: Assignment, r1: f64, r2: f64, k: usize) -> Self {
        let n = center.len();
        Ring {
            inner: radius(r1, n, k),
            outer: radius(r2, n, k),
            center,
            r1,
            r2,
        }
    }

    pub fn contains(&self, tau: &Assignment) -> Result<bool> {
        let d = dist(&self.center, tau)?;
        Ok(self.inner <= d && d <= self.outer)
    }
}

fn same_len(a: &Assignment, b: &Assignment) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// `Δ(σ, τ)`: variables on which the two assignments differ, increasing.
pub fn delta(sigma: &Assignment, tau: &Assignment) -> Result<Vec<usize>> {
    same_len(sigma, tau)?;
    Ok((0..sigma.len())
        .filter(|&v| sigma.get(v) != tau.get(v))
        .collect())
}

pub fn dist(sigma: &Assignment, tau: &Assignment) -> Result<usize> {
    same_len(sigma, tau)?;
    Ok(sigma
        .bits()
        .iter()
        .zip(tau.bits())
        .filter(|(a, b)| a != b)
        .count())
}

/// Membership threshold of `T(Φ)`: `𝒰 ≤ nρ/10 = m·2^{-k}/10`, compared exactly
/// as `10·2^k·𝒰 ≤ m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TThreshold {
    pub m: u64,
    pub k: u32,
}

impl TThreshold {
    pub fn new(m: usize, k: usize) -> Self {
        TThreshold {
            m: m as u64,
            k: k as u32,
        }
    }

    pub fn for_formula(formula: &Formula) -> Self {
        Self::new(formula.m(), formula.k())
    }

    pub fn rho(&self, n: usize) -> f64 {
        self.m as f64 / (2f64.powi(self.k as i32) * n as f64)
    }

    /// `m·2^{-k}/10` as a float, for display only.
    pub fn cutoff(&self) -> f64 {
        self.m as f64 / (10.0 * 2f64.powi(self.k as i32))
    }

    pub fn contains_count(&self, unsat: usize) -> bool {
        if unsat == 0 {
            return true;
        }
        let scale = 1u128
            .checked_shl(self.k)
            .and_then(|p| p.checked_mul(10))
            .and_then(|p| p.checked_mul(unsat as u128));
        match scale {
            Some(lhs) => lhs <= self.m as u128,
            None => false,
        }
    }

    /// Largest unsatisfied count still inside `T(Φ)`.
    pub fn max_count(&self) -> u64 {
        let denom = 1u128.checked_shl(self.k).and_then(|p| p.checked_mul(10));
        match denom {
            Some(d) => (self.m as u128 / d) as u64,
            None => 0,
        }
    }
}

pub fn in_t(formula: &Formula, tau: &Assignment) -> Result<bool> {
    Ok(TThreshold::for_formula(formula).contains_count(formula.unsat_count(tau)?))
}

/// `X_Φ(W, σ)`: occurrences, with multiplicity, of variables from `W` in
/// the clauses left unsatisfied by `σ`.
pub fn x_count(formula: &Formula, w: &[usize], sigma: &Assignment) -> Result<usize> {
    let mut in_w = vec![false; formula.n()];
    for &v in w {
        if v >= formula.n() {
            return Err(Error::params(format!("variable {v} outside 0..{}", formula.n())));
        }
        in_w[v] = true;
    }
    Ok(formula
        .unsat_set(sigma)?
        .into_iter()
        .map(|i| formula.clause(i).iter().filter(|l| in_w[l.var()]).count())
        .sum())
}

/// `|C(σ1) ∩ C(σ2)| = (n − d)^k` ordered clauses falsified by both of two
/// assignments at distance `d`.
pub fn clause_space_intersection(n: usize, k: usize, d: usize) -> Result<BigUint> {
    if d > n {
        return Err(Error::params(format!("distance {d} exceeds n = {n}")));
    }
    Ok(BigUint::from(n - d).pow(k as u32))
}

/// Formula compiled for scanning packed assignments: clause `i` is falsified
/// by `σ` iff `σ & care[i] == value[i]`.
#[derive(Debug, Clone)]
pub(crate) struct Packed {
    n: usize,
    k: usize,
    care: Vec<u64>,
    value: Vec<u64>,
    // For each literal position, the packed bit of its variable.
    pos_bits: Vec<u64>,
    // Clauses containing complementary literals are never falsified.
    live: Vec<usize>,
    threshold: TThreshold,
}

impl Packed {
    pub(crate) fn new(formula: &Formula) -> Result<Self> {
        let n = formula.n();
        if n > 64 {
            return Err(Error::EnumerationLimit { n, limit: 64 });
        }
        let bit = |v: usize| 1u64 << (n - 1 - v);
        let mut care = Vec::with_capacity(formula.m());
        let mut value = Vec::with_capacity(formula.m());
        let mut live = Vec::new();
        for (i, clause) in formula.clauses().enumerate() {
            let (mut c, mut v, mut ok) = (0u64, 0u64, true);
            for l in clause {
                let b = bit(l.var());
                // Falsified needs σ(var) = 0 for a positive literal, 1 for a negative one.
                let want = if l.is_positive() { 0 } else { b };
                if c & b != 0 && v & b != want {
                    ok = false;
                }
                c |= b;
                v |= want;
            }
            care.push(c);
            value.push(v);
            if ok {
                live.push(i);
            }
        }
        Ok(Packed {
            n,
            k: formula.k(),
            care,
            value,
            pos_bits: formula.literals().iter().map(|l| bit(l.var())).collect(),
            live,
            threshold: TThreshold::for_formula(formula),
        })
    }

    #[inline]
    fn falsified(&self, i: usize, sigma: u64) -> bool {
        sigma & self.care[i] == self.value[i]
    }

    pub(crate) fn unsat_count(&self, sigma: u64) -> usize {
        self.live.iter().filter(|&&i| self.falsified(i, sigma)).count()
    }

    /// Whether the count stays within `T(Φ)`, stopping early once it cannot.
    pub(crate) fn in_t(&self, sigma: u64) -> bool {
        let max = self.threshold.max_count();
        let mut count = 0u64;
        for &i in &self.live {
            if self.falsified(i, sigma) {
                count += 1;
                if count > max {
                    return false;
                }
            }
        }
        true
    }

    /// `(X_Φ(W, σ), 𝒰_Φ(σ))` with `W` given as a packed variable mask.
    pub(crate) fn x_and_unsat(&self, w: u64, sigma: u64) -> (usize, usize) {
        let mut x = 0;
        let mut u = 0;
        for &i in &self.live {
            if self.falsified(i, sigma) {
                u += 1;
                x += self.pos_bits[i * self.k..(i + 1) * self.k]
                    .iter()
                    .filter(|&&b| b & w != 0)
                    .count();
            }
        }
        (x, u)
    }
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit || n > 64 {
        return Err(Error::EnumerationLimit {
            n,
            limit: limit.min(64),
        });
    }
    Ok(())
}

fn cube(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// All of `T(Φ)` in lexicographic order, by scanning `{0,1}^n`.
pub fn enumerate_t(formula: &Formula, n_limit: usize) -> Result<Vec<Assignment>> {
    let n = formula.n();
    check_limit(n, n_limit)?;
    let packed = Packed::new(formula)?;
    Ok(enumerate_t_packed(&packed)
        .into_iter()
        .map(|p| Assignment::unpack(n, p))
        .collect())
}

pub(crate) fn enumerate_t_packed(packed: &Packed) -> Vec<u64> {
    const CHUNK: u64 = 1 << 12;
    let last = cube(packed.n);
    let chunks = last / CHUNK + 1;
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let lo = c * CHUNK;
            let hi = lo.saturating_add(CHUNK - 1).min(last);
            (lo..=hi).filter(|&s| packed.in_t(s)).collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mist {
    /// Points in construction order.
    pub points: Vec<Assignment>,
}

impl Mist {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Greedy mist: repeatedly add the lexicographically smallest member of `T`
/// not within `⌊2κn⌋` of a point already chosen.
pub fn build_mist(t_list: &[Assignment], n: usize, k: usize) -> Mist {
    let cover = radius(2.0, n, k);
    let mut sorted: Vec<&Assignment> = t_list.iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut points: Vec<Assignment> = Vec::new();
    for tau in sorted {
        let covered = points
            .iter()
            .any(|mu| dist(mu, tau).map(|d| d <= cover).unwrap_or(false));
        if !covered {
            points.push(tau.clone());
        }
    }
    Mist { points }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistVerdict {
    /// `⌊2κn⌋`.
    pub cover_radius: usize,
    /// `2κn`.
    pub separation: f64,
    /// Smallest pairwise distance, `None` for fewer than two points.
    pub min_pairwise: Option<usize>,
    /// Largest distance from a member of `T` to its nearest point.
    pub max_cover_distance: Option<usize>,
    /// No point lies within `⌊2κn⌋` of another.
    pub mi1: bool,
    /// Pairwise distances are at least the real value `2κn`.
    pub mi1_strict: bool,
    /// Every member of `T` is within `⌊2κn⌋` of some point.
    pub mi2: bool,
    /// The points are members of `T`.
    pub subset: bool,
}

impl MistVerdict {
    pub fn holds(&self) -> bool {
        self.mi1 && self.mi2 && self.subset
    }
}

pub fn verify_mist(mist: &Mist, t_list: &[Assignment], n: usize, k: usize) -> Result<MistVerdict> {
    let cover = radius(2.0, n, k);
    let separation = 2.0 * kappa(k) * n as f64;
    let pts = &mist.points;
    let mut min_pairwise = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = dist(&pts[i], &pts[j])?;
            min_pairwise = Some(min_pairwise.map_or(d, |m: usize| m.min(d)));
        }
    }
    let mut max_cover = None;
    let mut mi2 = true;
    for tau in t_list {
        let mut best = None;
        for mu in pts {
            let d = dist(mu, tau)?;
            best = Some(best.map_or(d, |b: usize| b.min(d)));
        }
        match best {
            Some(d) => {
                max_cover = Some(max_cover.map_or(d, |m: usize| m.max(d)));
                mi2 &= d <= cover;
            }
            None => mi2 = false,
        }
    }
    let subset = pts.iter().all(|p| t_list.contains(p));
    Ok(MistVerdict {
        cover_radius: cover,
        separation,
        min_pairwise,
        max_cover_distance: max_cover,
        mi1: min_pairwise.is_none_or(|d| d > cover),
        mi1_strict: min_pairwise.is_none_or(|d| d as f64 >= separation),
        mi2,
        subset,
    })
}

fn pack_all(points: &[Assignment], n: usize) -> Result<Vec<u64>> {
    points
        .iter()
        .map(|p| {
            if p.len() != n {
                Err(Error::LengthMismatch {
                    expected: n,
                    got: p.len(),
                })
            } else {
                Ok(p.pack())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q1Result {
    /// `⌊10κn⌋`.
    pub radius: usize,
    /// `|D(Φ, M)|`, the union of the radius balls around mist points.
    pub count: u64,
    /// `2^n·exp(−2n/k²)`.
    pub threshold: f64,
    pub verdict: bool,
}

/// Q1: the `⌊10κn⌋`-neighbourhood of the mist is at most `2^n·exp(−2n/k²)`.
pub fn check_q1(formula: &Formula, mist: &Mist, n_limit: usize) -> Result<Q1Result> {
    let (n, k) = (formula.n(), formula.k());
    check_limit(n, n_limit)?;
    let r = radius(10.0, n, k) as u32;
    let centers = pack_all(&mist.points, n)?;
    let count = if centers.is_empty() {
        0
    } else {
        (0..=cube(n))
            .into_par_iter()
            .filter(|&s| centers.iter().any(|&c| (s ^ c).count_ones() <= r))
            .count() as u64
    };
    let threshold = (n as f64 * std::f64::consts::LN_2 - 2.0 * n as f64 / (k * k) as f64).exp();
    Ok(Q1Result {
        radius: r as usize,
        count,
        threshold,
        verdict: count as f64 <= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q2Result {
    pub radius: usize,
    /// Largest `|M ∩ D_τ(0, 10)|` over the assignments examined.
    pub max_overlap: usize,
    /// Hex of an assignment attaining the maximum.
    pub witness: Option<String>,
    pub threshold: usize,
    pub verdict: bool,
    pub exhaustive: bool,
    pub examined: u64,
}

/// Q2 over an explicit collection of centres `τ`.
pub fn check_q2_over<I>(mist: &Mist, n: usize, k: usize, taus: I) -> Result<Q2Result>
where
    I: IntoIterator<Item = Assignment>,
{
    let r = radius(10.0, n, k);
    let mut best = 0;
    let mut witness = None;
    let mut examined = 0;
    for tau in taus {
        examined += 1;
        let mut overlap = 0;
        for mu in &mist.points {
            if dist(mu, &tau)? <= r {
                overlap += 1;
            }
        }
        if witness.is_none() || overlap > best {
            best = overlap;
            witness = Some(tau.to_hex());
        }
    }
    Ok(Q2Result {
        radius: r,
        max_overlap: best,
        witness,
        threshold: k,
        verdict: best <= k,
        exhaustive: false,
        examined,
    })
}

/// Q2 exactly: maximise over every `τ ∈ {0,1}^n`.
pub fn check_q2(formula: &Formula, mist: &Mist, n_limit: usize) -> Result<Q2Result> {
    let (n, k) = (formula.n(), formula.k());
    check_limit(n, n_limit)?;
    let r = radius(10.0, n, k) as u32;
    let centers = pack_all(&mist.points, n)?;
    // Ties resolve to the smallest τ.
    let (best, tau) = (0..=cube(n))
        .into_par_iter()
        .map(|s| {
            let overlap = centers.iter().filter(|&&c| (s ^ c).count_ones() <= r).count();
            (overlap, std::cmp::Reverse(s))
        })
        .max()
        .expect("cube is nonempty");
    Ok(Q2Result {
        radius: r as usize,
        max_overlap: best,
        witness: Some(Assignment::unpack(n, tau.0).to_hex()),
        threshold: k,
        verdict: best <= k,
        exhaustive: true,
        examined: cube(n).wrapping_add(1),
    })
}

/// Q2 on `samples` uniformly random centres.
pub fn check_q2_sampled(formula: &Formula, mist: &Mist, samples: u64, seed: u64) -> Result<Q2Result> {
    let mut rng = rng_from_seed(seed);
    let n = formula.n();
    let taus: Vec<Assignment> = (0..samples).map(|_| Assignment::random(n, &mut rng)).collect();
    check_q2_over(mist, n, formula.k(), taus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q3Witness {
    pub mu: String,
    pub sigma: String,
    pub x: usize,
    pub unsat: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q3Result {
    pub radius: usize,
    /// Largest `X_Φ(Δ(μ,σ), σ) / (k·𝒰_Φ(σ))` among pairs in scope, 0 if none.
    pub worst_ratio: f64,
    pub threshold: f64,
    pub verdict: bool,
    pub witness: Option<Q3Witness>,
    pub pairs_checked: u64,
    pub exhaustive: bool,
}

struct Q3Acc {
    worst: Option<(usize, usize, u64, u64)>,
    verdict: bool,
    pairs: u64,
}

impl Q3Acc {
    fn new() -> Self {
        Q3Acc {
            worst: None,
            verdict: true,
            pairs: 0,
        }
    }

    fn offer(&mut self, k: usize, x: usize, u: usize, mu: u64, sigma: u64) {
        self.pairs += 1;
        // Q3 requires 10·X ≤ k·𝒰.
        if 10 * x > k * u {
            self.verdict = false;
        }
        let better = match self.worst {
            None => true,
            Some((wx, wu, _, _)) => (x as u128) * (wu as u128) > (wx as u128) * (u as u128),
        };
        if better {
            self.worst = Some((x, u, mu, sigma));
        }
    }

    fn finish(self, n: usize, k: usize, r: usize, exhaustive: bool) -> Q3Result {
        let worst_ratio = self
            .worst
            .map_or(0.0, |(x, u, _, _)| x as f64 / (k * u) as f64);
        Q3Result {
            radius: r,
            worst_ratio,
            threshold: 0.1,
            verdict: self.verdict,
            witness: self.worst.map(|(x, u, mu, sigma)| Q3Witness {
                mu: Assignment::unpack(n, mu).to_hex(),
                sigma: Assignment::unpack(n, sigma).to_hex(),
                x,
                unsat: u,
            }),
            pairs_checked: self.pairs,
            exhaustive,
        }
    }
}

/// Next integer with the same popcount (Gosper's hack); `None` past `limit`.
fn next_same_popcount(x: u64, limit: u64) -> Option<u64> {
    let c = x & x.wrapping_neg();
    let r = x.checked_add(c)?;
    let next = (((r ^ x) >> 2) / c) | r;
    (next <= limit).then_some(next)
}

/// Q3 exactly: every `μ ∈ M` and every `σ ∈ D_μ(0, 100) ∖ T(Φ)`, enumerated
/// by distance shells around `μ`.
pub fn check_q3(formula: &Formula, mist: &Mist, n_limit: usize) -> Result<Q3Result> {
    let (n, k) = (formula.n(), formula.k());
    check_limit(n, n_limit)?;
    let packed = Packed::new(formula)?;
    let r = radius(100.0, n, k).min(n);
    let centers = pack_all(&mist.points, n)?;
    let all = cube(n);
    let mut acc = Q3Acc::new();
    for &mu in &centers {
        for d in 0..=r {
            let mut mask = if d == 0 { 0 } else { cube(d) };
            loop {
                let sigma = mu ^ mask;
                if !packed.in_t(sigma) {
                    let (x, u) = packed.x_and_unsat(mask, sigma);
                    acc.offer(k, x, u, mu, sigma);
                }
                if d == 0 {
                    break;
                }
                match next_same_popcount(mask, all) {
                    Some(next) => mask = next,
                    None => break,
                }
            }
        }
    }
    Ok(acc.finish(n, k, r, true))
}

/// Q3 on `samples_per_point` random `σ` per mist point: a uniform shell
/// `d ≤ ⌊100κn⌋`, then a uniform `d`-subset of variables to flip.
pub fn check_q3_sampled(
    formula: &Formula,
    mist: &Mist,
    samples_per_point: u64,
    seed: u64,
) -> Result<Q3Result> {
    let (n, k) = (formula.n(), formula.k());
    let packed = Packed::new(formula)?;
    let r = radius(100.0, n, k).min(n);
    let centers = pack_all(&mist.points, n)?;
    let mut rng = rng_from_seed(seed);
    let mut acc = Q3Acc::new();
    for &mu in &centers {
        for _ in 0..samples_per_point {
            let d = rng.gen_range(0..=r);
            let mask = sample_indices(&mut rng, n, d)
                .into_iter()
                .fold(0u64, |m, v| m | 1u64 << (n - 1 - v));
            let sigma = mu ^ mask;
            if !packed.in_t(sigma) {
                let (x, u) = packed.x_and_unsat(mask, sigma);
                acc.offer(k, x, u, mu, sigma);
            }
        }
    }
    Ok(acc.finish(n, k, r, false))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasirandomReport {
    pub q1: Q1Result,
    pub q2: Q2Result,
    pub q3: Q3Result,
}

impl QuasirandomReport {
    pub fn quasirandom(&self) -> bool {
        self.q1.verdict && self.q2.verdict && self.q3.verdict
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistReport {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub t_cutoff: f64,
    pub t_size: usize,
    pub satisfying: usize,
    /// Mist points as hex bit strings, in construction order.
    pub points: Vec<String>,
    pub verdict: MistVerdict,
}
