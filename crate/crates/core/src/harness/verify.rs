use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Formula};
use crate::error::{Error, Result};
use crate::landscape::{
    build_mist, check_q1, check_q2, check_q2_sampled, check_q3, enumerate_t_packed, verify_mist,
    MistReport, Packed, QuasirandomReport, TThreshold, DEFAULT_Q2_LIMIT, DEFAULT_T_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub n_limit: usize,
    /// Above this many variables Q2 is checked on random samples instead of all of `{0,1}^n`.
    pub q2_exact_limit: usize,
    pub q2_samples: u64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_limit: DEFAULT_T_LIMIT,
            q2_exact_limit: DEFAULT_Q2_LIMIT,
            q2_samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub quasirandom: bool,
    pub mist: MistReport,
    pub checks: QuasirandomReport,
}

/// Enumerates `T(Φ)`, builds and checks a mist, then runs Q1 to Q3 against it.
pub fn verify_formula(formula: &Formula, opts: &VerifyOptions) -> Result<VerifyReport> {
    let (n, k) = (formula.n(), formula.k());
    if n > opts.n_limit.min(64) {
        return Err(Error::EnumerationLimit {
            n,
            limit: opts.n_limit.min(64),
        });
    }
    let packed = Packed::new(formula)?;
    let t_packed = enumerate_t_packed(&packed);
    let satisfying = t_packed.iter().filter(|&&s| packed.unsat_count(s) == 0).count();
    let t_list: Vec<Assignment> = t_packed.iter().map(|&p| Assignment::unpack(n, p)).collect();
    let mist = build_mist(&t_list, n, k);
    let verdict = verify_mist(&mist, &t_list, n, k)?;

    let q1 = check_q1(formula, &mist, opts.n_limit)?;
    let q2 = if n <= opts.q2_exact_limit {
        check_q2(formula, &mist, opts.n_limit)?
    } else {
        check_q2_sampled(formula, &mist, opts.q2_samples, opts.seed)?
    };
    let q3 = check_q3(formula, &mist, opts.n_limit)?;
    let checks = QuasirandomReport { q1, q2, q3 };
    Ok(VerifyReport {
        quasirandom: checks.quasirandom(),
        mist: MistReport {
            n,
            k,
            m: formula.m(),
            t_cutoff: TThreshold::for_formula(formula).cutoff(),
            t_size: t_list.len(),
            satisfying,
            points: mist.points.iter().map(Assignment::to_hex).collect(),
            verdict,
        },
        checks,
    })
}
