//! Fixed-width CNF formulas, truth assignments and the random formula models.
//!
//! Variables are 0-based inside the crate and 1-based in DIMACS text; the
//! conversion happens only in [`Literal::from_dimacs`] / [`Literal::to_dimacs`].

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    pub fn new(var: usize, positive: bool) -> Self {
        Literal {
            var: var as u32,
            positive,
        }
    }

    pub fn pos(var: usize) -> Self {
        Self::new(var, true)
    }

    pub fn neg(var: usize) -> Self {
        Self::new(var, false)
    }

    /// 0-based variable index, `|l|`.
    #[inline]
    pub fn var(self) -> usize {
        self.var as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.positive
    }

    #[inline]
    pub fn is_satisfied_by(self, assignment: &Assignment) -> bool {
        assignment.get(self.var()) == self.positive
    }

    /// Index in `0..2n`: `2 * var` for the positive literal, `2 * var + 1` for the negated one.
    #[inline]
    pub fn code(self) -> usize {
        2 * self.var() + usize::from(!self.positive)
    }

    #[inline]
    pub fn from_code(code: usize) -> Self {
        Self::new(code / 2, code % 2 == 0)
    }

    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        Some(Self::new(value.unsigned_abs() as usize - 1, value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var + 1)
        } else {
            write!(f, "¬x{}", self.var + 1)
        }
    }
}

/// An ordered clause. Repeated variables, and even complementary literals, are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause(pub Vec<Literal>);

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause(literals)
    }

    pub fn from_dimacs(values: &[i64]) -> Self {
        Clause(values.iter().filter_map(|&v| Literal::from_dimacs(v)).collect())
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Uniform,
    Binomial,
    /// Uniform formula with clause signs resampled to satisfy a hidden assignment.
    /// Not the uniform model; only for drift experiments against a known solution.
    Planted,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Uniform => "uniform",
            Model::Binomial => "binomial",
            Model::Planted => "planted",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Model::Uniform),
            "binomial" => Ok(Model::Binomial),
            "planted" => Ok(Model::Planted),
            other => Err(Error::params(format!("unknown model {other:?}"))),
        }
    }
}

/// A k-CNF over `n` variables with clauses stored contiguously, `k` literals each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    n: usize,
    k: usize,
    literals: Vec<Literal>,
}

impl Formula {
    pub fn new(n: usize, k: usize, clauses: Vec<Clause>) -> Result<Self> {
        let mut literals = Vec::with_capacity(clauses.len() * k);
        for (i, c) in clauses.into_iter().enumerate() {
            if c.0.len() != k {
                return Err(Error::params(format!(
                    "clause {i} has {} literals, expected {k}",
                    c.0.len()
                )));
            }
            literals.extend(c.0);
        }
        Self::from_flat(n, k, literals)
    }

    pub(crate) fn from_flat(n: usize, k: usize, literals: Vec<Literal>) -> Result<Self> {
        if k == 0 && !literals.is_empty() {
            return Err(Error::params("clause width k must be positive"));
        }
        if let Some(l) = literals.iter().find(|l| l.var() >= n) {
            return Err(Error::params(format!(
                "literal {l} out of range for n = {n}"
            )));
        }
        Ok(Formula { n, k, literals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.literals.len() / self.k
        }
    }

    #[inline]
    pub fn clause(&self, i: usize) -> &[Literal] {
        &self.literals[i * self.k..(i + 1) * self.k]
    }

    pub fn clauses(&self) -> impl ExactSizeIterator<Item = &[Literal]> + '_ {
        self.literals.chunks_exact(self.k.max(1))
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    fn check_len(&self, assignment: &Assignment) -> Result<()> {
        if assignment.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: assignment.len(),
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn clause_satisfied(&self, i: usize, assignment: &Assignment) -> bool {
        self.clause(i).iter().any(|l| l.is_satisfied_by(assignment))
    }

    /// `U_Φ(σ)`: indices of the clauses left unsatisfied, in increasing order.
    pub fn unsat_set(&self, assignment: &Assignment) -> Result<Vec<usize>> {
        self.check_len(assignment)?;
        Ok((0..self.m())
            .filter(|&i| !self.clause_satisfied(i, assignment))
            .collect())
    }

    pub fn unsat_count(&self, assignment: &Assignment) -> Result<usize> {
        self.check_len(assignment)?;
        Ok((0..self.m())
            .filter(|&i| !self.clause_satisfied(i, assignment))
            .count())
    }

    pub fn is_satisfied_by(&self, assignment: &Assignment) -> Result<bool> {
        self.check_len(assignment)?;
        Ok((0..self.m()).all(|i| self.clause_satisfied(i, assignment)))
    }

    pub fn to_signed(&self) -> Vec<Vec<i64>> {
        self.clauses()
            .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
            .collect()
    }
}

/// A truth assignment `σ ∈ {0,1}^n`; bit `i` is the value of `x_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Assignment(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Assignment(vec![true; n])
    }

    pub fn random(n: usize, rng: &mut Rng) -> Self {
        Assignment((0..n).map(|_| rng.gen::<bool>()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, var: usize) -> bool {
        self.0[var]
    }

    #[inline]
    pub fn set(&mut self, var: usize, value: bool) {
        self.0[var] = value;
    }

    #[inline]
    pub fn flip(&mut self, var: usize) {
        self.0[var] = !self.0[var];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Packs into an integer with `x_1` as the most significant of `n` bits, so
    /// integer order is lexicographic order on `(x_1, ..., x_n)`. Requires `n <= 64`.
    pub fn pack(&self) -> u64 {
        assert!(self.len() <= 64, "pack requires n <= 64");
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn unpack(n: usize, packed: u64) -> Self {
        assert!(n <= 64, "unpack requires n <= 64");
        Assignment((0..n).map(|i| packed >> (n - 1 - i) & 1 == 1).collect())
    }

    /// Hex of the bit string, `x_1` first, packed MSB-first into bytes and zero padded.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.len().div_ceil(4));
        for chunk in self.0.chunks(8) {
            let mut byte = 0u8;
            for (j, &b) in chunk.iter().enumerate() {
                if b {
                    byte |= 0x80 >> j;
                }
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        if hex.len() != 2 * n.div_ceil(8) {
            return Err(Error::params(format!(
                "hex string of length {} does not encode {n} bits",
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(n);
        for i in 0..n.div_ceil(8) {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::params(format!("bad hex: {e}")))?;
            for j in 0..8 {
                if bits.len() < n {
                    bits.push(byte & (0x80 >> j) != 0);
                }
            }
        }
        Ok(Assignment(bits))
    }
}

// Serialized as the bit string `x_1..x_n`, e.g. "0110".
impl Serialize for Assignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!("bad bit {other:?}"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Assignment)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn check_sizes(n: usize, k: usize, m: usize) -> Result<()> {
    if m > 0 && (n == 0 || k == 0) {
        return Err(Error::params(format!(
            "cannot draw {m} clauses with n = {n}, k = {k}"
        )));
    }
    Ok(())
}

/// Uniform model: each of the `k·m` literal slots is an independent uniform
/// choice among the `2n` literals.
pub fn sample_uniform(n: usize, k: usize, m: usize, seed: u64) -> Result<Formula> {
    check_sizes(n, k, m)?;
    let mut rng = rng_from_seed(seed);
    let literals = (0..k * m)
        .map(|_| Literal::from_code(rng.gen_range(0..2 * n)))
        .collect();
    Formula::from_flat(n, k, literals)
}

/// Size of the ordered clause space `(2n)^k`, if it fits in a `u64`.
pub fn clause_space_size(n: usize, k: usize) -> Option<u64> {
    (2 * n as u64).checked_pow(k as u32)
}

/// Binomial model: each of the `(2n)^k` ordered literal tuples is present
/// independently with probability `m_target / (2n)^k`, in random order.
///
/// Draws `m' ~ Bin((2n)^k, q)` and then `m'` distinct tuple codes with Floyd's
/// algorithm; the clause space is never enumerated.
pub fn sample_binomial(n: usize, k: usize, m_target: usize, seed: u64) -> Result<Formula> {
    check_sizes(n, k, m_target)?;
    if m_target == 0 {
        return Formula::from_flat(n, k, Vec::new());
    }
    let space = clause_space_size(n, k)
        .ok_or_else(|| Error::params(format!("(2n)^k overflows u64 for n = {n}, k = {k}")))?;
    if m_target as u64 > space {
        return Err(Error::params(format!(
            "m_target = {m_target} exceeds the {space} available ordered clauses"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let q = m_target as f64 / space as f64;
    let m_prime = Binomial::new(space, q)
        .map_err(|e| Error::params(e.to_string()))?
        .sample(&mut rng) as usize;

    let mut chosen: HashSet<u64> = HashSet::with_capacity(m_prime);
    let mut codes = Vec::with_capacity(m_prime);
    for j in space - m_prime as u64..space {
        let t = rng.gen_range(0..=j);
        let pick = if chosen.contains(&t) { j } else { t };
        chosen.insert(pick);
        codes.push(pick);
    }
    codes.shuffle(&mut rng);

    let base = 2 * n as u64;
    let mut literals = Vec::with_capacity(m_prime * k);
    for mut code in codes {
        let start = literals.len();
        for _ in 0..k {
            literals.push(Literal::from_code((code % base) as usize));
            code /= base;
        }
        literals[start..].reverse();
    }
    Formula::from_flat(n, k, literals)
}

/// A uniform formula whose unsatisfied clauses under a uniformly random hidden
/// assignment get their sign patterns redrawn until satisfied. Outside the
/// uniform model; returns the hidden assignment alongside.
pub fn sample_planted(n: usize, k: usize, m: usize, seed: u64) -> Result<(Formula, Assignment)> {
    check_sizes(n, k, m)?;
    let mut rng = rng_from_seed(seed);
    let hidden = Assignment::random(n, &mut rng);
    let mut literals: Vec<Literal> = (0..k * m)
        .map(|_| Literal::from_code(rng.gen_range(0..2 * n)))
        .collect();
    for clause in literals.chunks_exact_mut(k.max(1)) {
        while !clause.iter().any(|l| l.is_satisfied_by(&hidden)) {
            for l in clause.iter_mut() {
                *l = Literal::new(l.var(), rng.gen::<bool>());
            }
        }
    }
    Ok((Formula::from_flat(n, k, literals)?, hidden))
}

pub fn sample(model: Model, n: usize, k: usize, m: usize, seed: u64) -> Result<Formula> {
    match model {
        Model::Uniform => sample_uniform(n, k, m, seed),
        Model::Binomial => sample_binomial(n, k, m, seed),
        Model::Planted => sample_planted(n, k, m, seed).map(|(f, _)| f),
    }
}

/// Parses DIMACS CNF. Every clause must have exactly `k` literals; when `k` is
/// `None` it is taken from the first clause.
pub fn parse_dimacs(text: &str, k: Option<usize>) -> Result<Formula> {
    let err = |line: usize, msg: String| Error::Dimacs { line, msg };
    let mut header: Option<(usize, usize)> = None;
    let mut width = k;
    let mut literals = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut clauses = 0usize;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, "duplicate header".into()));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(err(line_no, format!("malformed header {line:?}")));
            }
            let n = parts[2]
                .parse()
                .map_err(|_| err(line_no, format!("bad variable count {:?}", parts[2])))?;
            let m = parts[3]
                .parse()
                .map_err(|_| err(line_no, format!("bad clause count {:?}", parts[3])))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| err(line_no, "clause before header".into()))?;
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| err(line_no, format!("bad literal {tok:?}")))?;
            match Literal::from_dimacs(v) {
                Some(l) => {
                    if l.var() >= n {
                        return Err(err(
                            line_no,
                            format!("variable {} out of range 1..={n}", l.var() + 1),
                        ));
                    }
                    current.push(l);
                }
                None => {
                    let w = *width.get_or_insert(current.len());
                    if current.len() != w {
                        return Err(err(
                            line_no,
                            format!("clause has {} literals, expected width {w}", current.len()),
                        ));
                    }
                    literals.append(&mut current);
                    clauses += 1;
                }
            }
        }
    }
    let (n, m) = header.ok_or_else(|| err(last_line, "missing header".into()))?;
    if !current.is_empty() {
        return Err(err(last_line, "last clause not terminated by 0".into()));
    }
    if clauses != m {
        return Err(err(
            last_line,
            format!("header declares {m} clauses, found {clauses}"),
        ));
    }
    let k = match width {
        Some(0) => return Err(err(last_line, "empty clause".into())),
        Some(k) => k,
        None => return Err(err(last_line, "clause width unknown for an empty formula".into())),
    };
    Formula::from_flat(n, k, literals)
}

/// Canonical DIMACS: header line, then one clause per line terminated by `0`.
pub fn write_dimacs(formula: &Formula) -> String {
    let mut out = format!("p cnf {} {}\n", formula.n(), formula.m());
    for c in formula.clauses() {
        for l in c {
            out.push_str(&l.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

/// JSON envelope for formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaEnvelope {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub seed: Option<u64>,
    pub model: Option<Model>,
    pub clauses: Vec<Vec<i64>>,
}

impl FormulaEnvelope {
    pub fn new(formula: &Formula, seed: Option<u64>, model: Option<Model>) -> Self {
        FormulaEnvelope {
            n: formula.n(),
            k: formula.k(),
            m: formula.m(),
            seed,
            model,
            clauses: formula.to_signed(),
        }
    }

    pub fn to_formula(&self) -> Result<Formula> {
        if self.clauses.len() != self.m {
            return Err(Error::params(format!(
                "envelope declares m = {} but carries {} clauses",
                self.m,
                self.clauses.len()
            )));
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| {
                if c.contains(&0) {
                    Err(Error::params("literal 0 inside a clause"))
                } else {
                    Ok(Clause::from_dimacs(c))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Formula::new(self.n, self.k, clauses)
    }
}
