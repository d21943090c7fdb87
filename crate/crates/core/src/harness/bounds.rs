use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::{
    first_moment_log_t, q2_exponent, q2_exponent_coarse_per_n, q3_exponent, thresholds_with,
    DensityParams,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::params(format!("unknown format {s:?}"))),
        }
    }
}

/// Landmark densities and per-variable exponents at `ρ = c·ln²k/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub k: u32,
    pub sat_threshold: f64,
    pub unsat_bound: f64,
    pub walksat_positive: f64,
    pub algorithmic_barrier: f64,
    pub theorem_regime: f64,
    pub vacuous: bool,
    pub rho: f64,
    pub q2_per_n: f64,
    pub q2_coarse_per_n: f64,
    pub q3_per_n: f64,
    pub first_moment_per_n: f64,
    pub first_moment_bound_per_n: f64,
}

const COLUMNS: [&str; 13] = [
    "k",
    "sat_threshold",
    "unsat_bound",
    "walksat_positive",
    "algorithmic_barrier",
    "theorem_regime",
    "vacuous",
    "rho",
    "q2_per_n",
    "q2_coarse_per_n",
    "q3_per_n",
    "first_moment_per_n",
    "first_moment_bound_per_n",
];

impl BoundsRow {
    fn fields(&self) -> Vec<String> {
        let f = |x: f64| x.to_string();
        vec![
            self.k.to_string(),
            f(self.sat_threshold),
            f(self.unsat_bound),
            f(self.walksat_positive),
            f(self.algorithmic_barrier),
            f(self.theorem_regime),
            self.vacuous.to_string(),
            f(self.rho),
            f(self.q2_per_n),
            f(self.q2_coarse_per_n),
            f(self.q3_per_n),
            f(self.first_moment_per_n),
            f(self.first_moment_bound_per_n),
        ]
    }
}

pub fn bounds_table(k_min: u32, k_max: u32, c: f64) -> Result<Vec<BoundsRow>> {
    if k_min > k_max {
        return Err(Error::params(format!("empty k range {k_min}..={k_max}")));
    }
    if k_max > 1000 {
        return Err(Error::params("k above 1000 overflows the density scale"));
    }
    (k_min..=k_max)
        .map(|k| {
            let t = thresholds_with(k, c)?;
            let kf = k as f64;
            let rho = c * kf.ln().powi(2) / kf;
            let fm = first_moment_log_t(DensityParams::from_rho(1.0, rho, k)?)?;
            Ok(BoundsRow {
                k,
                sat_threshold: t.sat_threshold,
                unsat_bound: t.unsat_bound,
                walksat_positive: t.walksat_positive,
                algorithmic_barrier: t.algorithmic_barrier,
                theorem_regime: t.theorem_regime,
                vacuous: t.vacuous,
                rho,
                q2_per_n: q2_exponent(1.0, k, rho),
                q2_coarse_per_n: q2_exponent_coarse_per_n(k),
                q3_per_n: q3_exponent(1.0, k, rho),
                first_moment_per_n: fm.exact,
                first_moment_bound_per_n: fm.bound,
            })
        })
        .collect()
}

pub fn render(rows: &[BoundsRow], format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(rows)? + "\n",
        Format::Csv => {
            let mut s = COLUMNS.join(",") + "\n";
            for r in rows {
                s.push_str(&r.fields().join(","));
                s.push('\n');
            }
            s
        }
        Format::Text => {
            let cells: Vec<Vec<String>> = rows.iter().map(BoundsRow::fields).collect();
            let widths: Vec<usize> = (0..COLUMNS.len())
                .map(|i| {
                    cells
                        .iter()
                        .map(|r| r[i].len())
                        .chain([COLUMNS[i].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let mut s = String::new();
            let line = |s: &mut String, items: &[&str]| {
                let padded: Vec<String> = items
                    .iter()
                    .zip(&widths)
                    .map(|(x, w)| format!("{x:>w$}"))
                    .collect();
                let _ = writeln!(s, "{}", padded.join("  ").trim_end());
            };
            line(&mut s, &COLUMNS);
            for r in &cells {
                let refs: Vec<&str> = r.iter().map(String::as_str).collect();
                line(&mut s, &refs);
            }
            s
        }
    })
}
