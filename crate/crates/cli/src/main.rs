use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wslab_core::cnf::{parse_dimacs, sample_planted, Assignment, Formula, FormulaEnvelope, Model};
use wslab_core::harness::bounds::{bounds_table, render, Format};
use wslab_core::harness::drift::{render_drift_csv, run_drift, DriftConfig, Reference};
use wslab_core::harness::gen::generate;
use wslab_core::harness::plot::render_svg;
use wslab_core::harness::sweep::render_csv;
use wslab_core::harness::verify::{verify_formula, VerifyOptions};
use wslab_core::harness::{run_sweep, ExperimentConfig, OmegaPolicy};
use wslab_core::rng::{derive_seed, FORMULA_STREAM};
use wslab_core::walksat::{run, Recording};

#[derive(Parser)]
#[command(name = "wslab", version, about = "Walksat experiments on random k-SAT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random formulas as DIMACS files with JSON metadata.
    Gen(GenArgs),
    /// Run Walksat once and print the outcome as JSON.
    Run(RunArgs),
    /// Estimate success rates over a grid of sizes and densities.
    Sweep(SweepArgs),
    /// Check the quasirandomness conditions of a small formula by enumeration.
    Verify(VerifyArgs),
    /// Record distance statistics against a reference assignment.
    Drift(DriftArgs),
    /// Tabulate density thresholds and exponents over a range of k.
    Bounds(BoundsArgs),
    /// Draw a sweep CSV as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GridArgs {
    /// JSON experiment config; flags given on the command line take precedence.
    #[arg(long, env = "WSLAB_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "WSLAB_N", value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, env = "WSLAB_K")]
    k: Option<usize>,
    #[arg(long, env = "WSLAB_ALPHA", value_delimiter = ',')]
    alpha: Vec<f64>,
    /// `STEPS`, `Cn`, `Cn2` or `theorem[:CAP]`.
    #[arg(long, env = "WSLAB_OMEGA")]
    omega: Option<OmegaPolicy>,
    #[arg(long, env = "WSLAB_TRIALS")]
    trials: Option<u64>,
    #[arg(long, env = "WSLAB_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "WSLAB_MODEL")]
    model: Option<Model>,
    #[arg(long, env = "WSLAB_WORKERS")]
    workers: Option<usize>,
    /// Use one formula per cell instead of one per trial.
    #[arg(long, env = "WSLAB_SHARED_FORMULA")]
    shared_formula: bool,
}

impl GridArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig {
                k: self.k.context("--k is required without --config")?,
                ns: Vec::new(),
                alphas: Vec::new(),
                omega: OmegaPolicy::LinearN { c: 10_000.0 },
                trials: 100,
                master_seed: 0,
                model: Model::Uniform,
                fresh_formula_per_trial: true,
                workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
                out: None,
            },
        };
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if !self.n.is_empty() {
            cfg.ns = self.n.clone();
        }
        if !self.alpha.is_empty() {
            cfg.alphas = self.alpha.clone();
        }
        if let Some(o) = self.omega {
            cfg.omega = o;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if self.shared_formula {
            cfg.fresh_formula_per_trial = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Formulas per cell.
    #[arg(long, env = "WSLAB_REPLICATES", default_value_t = 1)]
    replicates: u64,
    /// Output directory.
    #[arg(long, env = "WSLAB_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// CSV output; an existing file is resumed. Prints to stdout when absent.
    #[arg(long, env = "WSLAB_OUT")]
    out: Option<PathBuf>,
}

/// A formula read from a file or drawn from the given parameters.
#[derive(Args)]
struct FormulaArgs {
    /// DIMACS file, or a `.json` formula envelope.
    #[arg(long, env = "WSLAB_INPUT")]
    input: Option<PathBuf>,
    #[arg(long, env = "WSLAB_N")]
    n: Option<usize>,
    #[arg(long, env = "WSLAB_K")]
    k: Option<usize>,
    #[arg(long, env = "WSLAB_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "WSLAB_MODEL", default_value = "uniform")]
    model: Model,
    /// Seed for drawing the formula; derived from `--seed` when absent.
    #[arg(long, env = "WSLAB_FORMULA_SEED")]
    formula_seed: Option<u64>,
}

impl FormulaArgs {
    fn load(&self, seed: u64) -> Result<(Formula, Option<Assignment>)> {
        if let Some(path) = &self.input {
            return Ok((read_formula(path, self.k)?, None));
        }
        let (Some(n), Some(k), Some(alpha)) = (self.n, self.k, self.alpha) else {
            bail!("give --input or all of --n, --k and --alpha");
        };
        let m = (alpha * n as f64).round() as usize;
        let fseed = self
            .formula_seed
            .unwrap_or_else(|| derive_seed(seed, 0, FORMULA_STREAM));
        Ok(match self.model {
            Model::Planted => {
                let (f, h) = sample_planted(n, k, m, fseed)?;
                (f, Some(h))
            }
            model => (wslab_core::cnf::sample(model, n, k, m, fseed)?, None),
        })
    }
}

fn read_formula(path: &Path, k: Option<usize>) -> Result<Formula> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let env: FormulaEnvelope = serde_json::from_str(&text)?;
        Ok(env.to_formula()?)
    } else {
        Ok(parse_dimacs(&text, k).with_context(|| format!("parsing {}", path.display()))?)
    }
}

fn read_assignment(spec: &str, n: usize) -> Result<Assignment> {
    let text = match std::fs::read_to_string(spec) {
        Ok(t) => t,
        Err(_) => spec.to_string(),
    };
    let t = text.trim();
    if t.len() == n && t.chars().all(|c| c == '0' || c == '1') {
        return Ok(Assignment::new(t.chars().map(|c| c == '1').collect()));
    }
    Ok(Assignment::from_hex(n, t)?)
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    formula: FormulaArgs,
    #[arg(long, env = "WSLAB_OMEGA", default_value = "10000n")]
    omega: OmegaPolicy,
    /// Seed of the walk.
    #[arg(long, env = "WSLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Reference assignments (hex, bit string, or a file holding either) for distance columns.
    #[arg(long = "ref")]
    refs: Vec<String>,
    /// Write the trajectory CSV here.
    #[arg(long, env = "WSLAB_TRAJECTORY")]
    trajectory: Option<PathBuf>,
    /// Record every this many steps.
    #[arg(long, env = "WSLAB_STRIDE", default_value_t = 1)]
    stride: usize,
    #[arg(long, env = "WSLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    formula: FormulaArgs,
    #[arg(long, env = "WSLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "WSLAB_N_LIMIT", default_value_t = wslab_core::landscape::DEFAULT_T_LIMIT)]
    n_limit: usize,
    #[arg(long, env = "WSLAB_Q2_SAMPLES", default_value_t = 100_000)]
    q2_samples: u64,
    #[arg(long, env = "WSLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DriftArgs {
    /// Fixed formula; needs `--reference`. Without it planted formulas are drawn per trial.
    #[arg(long, env = "WSLAB_INPUT")]
    input: Option<PathBuf>,
    /// Reference assignment for `--input` (hex, bit string, or a file holding either).
    #[arg(long, env = "WSLAB_REFERENCE")]
    reference: Option<String>,
    #[arg(long, env = "WSLAB_N")]
    n: Option<usize>,
    #[arg(long, env = "WSLAB_K")]
    k: Option<usize>,
    #[arg(long, env = "WSLAB_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "WSLAB_OMEGA", default_value = "100n")]
    omega: OmegaPolicy,
    #[arg(long, env = "WSLAB_TRIALS", default_value_t = 10)]
    trials: u64,
    #[arg(long, env = "WSLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// `csv` or `json`.
    #[arg(long, env = "WSLAB_FORMAT", default_value = "csv")]
    format: Format,
    #[arg(long, env = "WSLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, env = "WSLAB_K_MIN", default_value_t = 3)]
    k_min: u32,
    #[arg(long, env = "WSLAB_K_MAX", default_value_t = 20)]
    k_max: u32,
    /// Constant of the theorem regime.
    #[arg(long, env = "WSLAB_C", default_value_t = wslab_core::analytics::DEFAULT_REGIME_CONSTANT)]
    c: f64,
    /// `text`, `csv` or `json`.
    #[arg(long, env = "WSLAB_FORMAT", default_value = "text")]
    format: Format,
    #[arg(long, env = "WSLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Sweep CSV.
    #[arg(long, env = "WSLAB_INPUT")]
    input: PathBuf,
    #[arg(long, env = "WSLAB_OUT")]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WSLAB_LOG", "warn")).init();
    match Cli::parse().command {
        Command::Gen(a) => {
            let cfg = a.grid.config()?;
            for p in generate(&cfg, a.replicates, &a.out)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep(a) => {
            let mut cfg = a.grid.config()?;
            if a.out.is_some() {
                cfg.out = a.out.clone();
            }
            let rows = run_sweep(&cfg)?;
            if cfg.out.is_none() {
                emit(None, &render_csv(&rows))?;
            }
        }
        Command::Run(a) => {
            let (formula, _) = a.formula.load(a.seed)?;
            let (omega, capped) = a.omega.resolve(formula.n(), formula.k());
            let refs = a
                .refs
                .iter()
                .map(|r| read_assignment(r, formula.n()))
                .collect::<Result<Vec<_>>>()?;
            let recording = if a.trajectory.is_some() {
                Recording::Every(a.stride)
            } else {
                Recording::Off
            };
            let (outcome, traj) = run(&formula, omega, a.seed, &refs, recording)?;
            if let Some(path) = &a.trajectory {
                let file = std::fs::File::create(path)
                    .with_context(|| format!("writing {}", path.display()))?;
                traj.write_csv(std::io::BufWriter::new(file))?;
            }
            let mut json = outcome.to_json();
            json["omega"] = omega.into();
            json["omega_capped"] = capped.into();
            emit(a.out.as_deref(), &(serde_json::to_string_pretty(&json)? + "\n"))?;
        }
        Command::Verify(a) => {
            let (formula, _) = a.formula.load(a.seed)?;
            let opts = VerifyOptions {
                n_limit: a.n_limit,
                seed: a.seed,
                q2_samples: a.q2_samples,
                ..VerifyOptions::default()
            };
            let report = verify_formula(&formula, &opts)?;
            emit(a.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Command::Drift(a) => {
            let reference = match (&a.input, &a.reference) {
                (Some(path), Some(r)) => {
                    let formula = read_formula(path, a.k)?;
                    let mu = read_assignment(r, formula.n())?;
                    Reference::Given { formula, mu }
                }
                (Some(_), None) => bail!("--input needs --reference"),
                (None, _) => {
                    let (Some(n), Some(k), Some(alpha)) = (a.n, a.k, a.alpha) else {
                        bail!("give --input with --reference, or --n, --k and --alpha for planted formulas");
                    };
                    let m = (alpha * n as f64).round() as usize;
                    Reference::Planted { n, k, m }
                }
            };
            let (n, k) = match &reference {
                Reference::Planted { n, k, .. } => (*n, *k),
                Reference::Given { formula, .. } => (formula.n(), formula.k()),
            };
            let (omega, _) = a.omega.resolve(n, k);
            let rows = run_drift(&DriftConfig {
                reference,
                omega,
                trials: a.trials,
                master_seed: a.seed,
            })?;
            let text = match a.format {
                Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
                Format::Csv => render_drift_csv(&rows),
                Format::Text => bail!("drift output is csv or json"),
            };
            emit(a.out.as_deref(), &text)?;
        }
        Command::Bounds(a) => {
            let rows = bounds_table(a.k_min, a.k_max, a.c)?;
            emit(a.out.as_deref(), &render(&rows, a.format)?)?;
        }
        Command::Plot(a) => {
            let csv = std::fs::read_to_string(&a.input)
                .with_context(|| format!("reading {}", a.input.display()))?;
            emit(a.out.as_deref(), &render_svg(&csv)?)?;
        }
    }
    Ok(())
}
