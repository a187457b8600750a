//! Command-line front end: argument parsing, run records and subcommands.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::TestFunctionSpec;
use crate::ensemble::{EnsembleSpec, EntryDistribution, Family, Symmetry};
use crate::error::{Error, Result};
use crate::formal::{exponents, parse_monomial};
use crate::mc::{compare, predict_observable, run_experiment, ExperimentConfig, ExperimentResult, Observable, Report, Verdict};
use crate::selftest::run_selftest;
use crate::spectral::sine_kernel;
use crate::theory::{upsilon, TermBreakdown};
use crate::window::{GreenWindow, SpectralWindow};

pub const SCHEMA_VERSION: u32 = 1;

/// `git describe` of the source tree at build time, or the crate version.
pub const BUILD_ID: &str = match option_env!("MESOCOV_BUILD_ID") {
    Some(id) => id,
    None => env!("CARGO_PKG_VERSION"),
};

/// One self-contained output line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub timestamp: String,
    pub subcommand: String,
    /// `progress` or `final` for simulate, otherwise `final`.
    pub record: String,
    pub config: Value,
    pub results: Value,
    pub build_id: String,
}

impl RunRecord {
    pub fn new(subcommand: &str, record: &str, config: Value, results: Value) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            subcommand: subcommand.into(),
            record: record.into(),
            config,
            results,
            build_id: BUILD_ID.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("run records serialize")
    }
}

#[derive(Debug, Parser)]
#[command(name = "mesocov", version, about = "Mesoscopic eigenvalue covariance of Wigner matrices: predictions and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form predictions as JSON.
    Predict(PredictArgs),
    /// Monte Carlo run from a JSON config; JSONL progress and final estimates.
    Simulate(SimulateArgs),
    /// Join a simulate output with predictions and report PASS/FAIL.
    Compare(CompareArgs),
    /// Sine-kernel columns as CSV.
    Kernel(KernelArgs),
    /// Exponent report for each formal monomial, one per input line.
    Formal(FormalArgs),
    /// Deterministic invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntryFamily {
    Gaussian,
    Rademacher,
    Uniform,
    PhaseFour,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Symmetry class: 1 real symmetric, 2 complex Hermitian [default: 1].
    #[arg(long)]
    pub beta: Option<u8>,
    /// Matrix dimension.
    #[arg(long = "N", default_value_t = 400)]
    pub n: usize,
    /// Gaussian orthogonal ensemble (beta 1, Gaussian entries).
    #[arg(long, conflicts_with = "gue")]
    pub goe: bool,
    /// Gaussian unitary ensemble (beta 2, Gaussian entries).
    #[arg(long)]
    pub gue: bool,
    /// Off-diagonal entry law; the diagonal stays Gaussian.
    #[arg(long, value_enum, default_value_t = EntryFamily::Gaussian)]
    pub entries: EntryFamily,
}

impl EnsembleArgs {
    pub fn spec(&self) -> Result<EnsembleSpec> {
        let beta = match (self.goe, self.gue, self.beta) {
            (true, _, Some(b)) if b != 1 => return Err(Error::config("--goe requires beta 1")),
            (_, true, Some(b)) if b != 2 => return Err(Error::config("--gue requires beta 2")),
            (true, _, _) => Symmetry::Real,
            (_, true, _) => Symmetry::Complex,
            (_, _, b) => Symmetry::from_beta(b.unwrap_or(1))?,
        };
        if (self.goe || self.gue) && self.entries != EntryFamily::Gaussian {
            return Err(Error::config("--goe/--gue imply Gaussian entries"));
        }
        let mut spec = EnsembleSpec::gaussian(beta, self.n);
        spec.offdiag = EntryDistribution::new(match self.entries {
            EntryFamily::Gaussian => Family::Gaussian,
            EntryFamily::Rademacher => Family::Rademacher,
            EntryFamily::Uniform => Family::Uniform,
            EntryFamily::PhaseFour => Family::PhaseFour,
        });
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Conjugate and non-conjugate resolvent covariances at E ∓ ω/2.
    GreenCov,
    /// The kernel Υ at rescaled coordinates (u, v).
    Upsilon,
    /// Covariance of two bump linear statistics.
    Linstat,
    /// E G(z) and E G(z)² at z = z_re + i z_im.
    MeanStieltjes,
    /// Macroscopic variance of a polynomial statistic.
    LpVariance,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// JSON file with `spec` and `observables`; supersedes the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long = "E", default_value_t = 0.0, allow_hyphen_values = true)]
    pub e: f64,
    #[arg(long, default_value_t = 0.1)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    /// Support radius of the bump test functions.
    #[arg(long = "M", default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, value_enum, default_value_t = Quantity::GreenCov)]
    pub quantity: Quantity,
    #[arg(long, default_value_t = 50.0, allow_hyphen_values = true)]
    pub u: f64,
    #[arg(long, default_value_t = -50.0, allow_hyphen_values = true)]
    pub v: f64,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub z_re: f64,
    #[arg(long, default_value_t = 0.5)]
    pub z_im: f64,
    /// Polynomial coefficients, constant term first.
    #[arg(long, value_delimiter = ',', default_value = "0,0,1", allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// ExperimentConfig JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Append JSONL here instead of writing to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Output of `simulate` (JSONL); the last final record is used.
    #[arg(long)]
    pub simulation: PathBuf,
    /// Output of `predict`; when omitted, predictions are computed from the simulation config.
    #[arg(long)]
    pub prediction: Option<PathBuf>,
    /// Relative deviation accepted regardless of the z-score.
    #[arg(long, default_value_t = 0.15)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Explicit points; overrides the range.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct FormalArgs {
    /// Input file, one monomial per line; stdin when omitted.
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long = "beta-exp", default_value_t = 0.5)]
    pub beta_exp: f64,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Emit a JSON run record instead of text lines.
    #[arg(long)]
    pub json: bool,
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Fail,
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn io_err(e: io::Error) -> Error {
    Error::config(format!("output: {e}"))
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var("MESOCOV_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| Error::config(format!("MESOCOV_SEED is not an unsigned integer: {s:?}"))),
        Err(_) => Ok(None),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub spec: EnsembleSpec,
    pub observables: Vec<Observable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub observable: Observable,
    pub prediction: TermBreakdown,
    pub total: [f64; 2],
}

pub fn predictions(cfg: &PredictConfig) -> Result<Vec<Prediction>> {
    cfg.observables
        .iter()
        .map(|o| {
            let p = predict_observable(&cfg.spec, o)?;
            let t = p.total();
            Ok(Prediction { observable: o.clone(), prediction: p, total: [t.re, t.im] })
        })
        .collect()
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<Outcome> {
    let record = if let Some(path) = &args.config {
        let cfg: PredictConfig = serde_json::from_str(&read(path)?).map_err(|e| Error::config(e.to_string()))?;
        RunRecord::new("predict", "final", serde_json::to_value(&cfg).unwrap(), serde_json::to_value(predictions(&cfg)?).unwrap())
    } else {
        let spec = args.ensemble.spec()?;
        let bump = TestFunctionSpec::Bump { m: args.m };
        let observables = match args.quantity {
            Quantity::GreenCov => {
                let window = GreenWindow::centered(args.e, args.omega, args.eta)?;
                vec![Observable::GreenCovConjugate { window }, Observable::GreenCovNonconjugate { window }]
            }
            Quantity::Linstat => {
                vec![Observable::LinstatCov { window: SpectralWindow::new(args.e, args.omega, args.eta, args.m)?, f: bump.clone(), g: bump }]
            }
            Quantity::MeanStieltjes => vec![
                Observable::MeanStieltjes { z_re: args.z_re, z_im: args.z_im },
                Observable::MeanStieltjesSq { z_re: args.z_re, z_im: args.z_im },
            ],
            Quantity::LpVariance => vec![Observable::PolyLinstatVariance { coeffs: args.coeffs.clone() }],
            Quantity::Upsilon => {
                let sums = spec.cumulant_sums()?;
                let zeta = spec.zeta_values();
                let zeta = if spec.is_canonical() { None } else { Some(zeta.as_slice()) };
                let up = upsilon(args.e, spec.n, args.u, args.v, &sums, spec.beta, zeta)?;
                let config = json!({"spec": spec, "E": args.e, "u": args.u, "v": args.v});
                writeln!(out, "{}", RunRecord::new("predict", "final", config, serde_json::to_value(up).unwrap()).to_line()).map_err(io_err)?;
                return Ok(Outcome::Ok);
            }
        };
        let cfg = PredictConfig { spec, observables };
        RunRecord::new("predict", "final", serde_json::to_value(&cfg).unwrap(), serde_json::to_value(predictions(&cfg)?).unwrap())
    };
    writeln!(out, "{}", record.to_line()).map_err(io_err)?;
    Ok(Outcome::Ok)
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<Outcome> {
    let mut cfg: ExperimentConfig = serde_json::from_str(&read(&args.config)?).map_err(|e| Error::config(e.to_string()))?;
    if let Some(seed) = seed_override()? {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    let mut file = match &args.out {
        Some(p) => Some(fs::OpenOptions::new().create(true).append(true).open(p).map_err(|e| Error::config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let echo = serde_json::to_value(&cfg).unwrap();
    let mut emit = |line: String| -> Result<()> {
        match file.as_mut() {
            Some(f) => writeln!(f, "{line}"),
            None => writeln!(stdout, "{line}"),
        }
        .map_err(io_err)
    };
    let mut write_err = None;
    let result = run_experiment(&cfg, args.threads, |batch| {
        if write_err.is_none() {
            if let Err(e) = emit(RunRecord::new("simulate", "progress", echo.clone(), serde_json::to_value(batch).unwrap()).to_line()) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    emit(RunRecord::new("simulate", "final", echo, serde_json::to_value(&result).unwrap()).to_line())?;
    Ok(Outcome::Ok)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub observable: Observable,
    pub report: Report,
}

fn last_final(text: &str, subcommand: &str) -> Result<RunRecord> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| serde_json::from_str::<RunRecord>(l).ok())
        .filter(|r| r.subcommand == subcommand && r.record == "final")
        .last()
        .ok_or_else(|| Error::config(format!("no final {subcommand} record found")))
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<Outcome> {
    let sim = last_final(&read(&args.simulation)?, "simulate")?;
    let cfg: ExperimentConfig = serde_json::from_value(sim.config.clone()).map_err(|e| Error::config(e.to_string()))?;
    let result: ExperimentResult = serde_json::from_value(sim.results.clone()).map_err(|e| Error::config(e.to_string()))?;
    let preds: Vec<Prediction> = match &args.prediction {
        Some(p) => serde_json::from_value(last_final(&read(p)?, "predict")?.results).map_err(|e| Error::config(e.to_string()))?,
        None => predictions(&PredictConfig { spec: cfg.spec.clone(), observables: cfg.observables.clone() })?,
    };
    let mut entries = Vec::new();
    for est in &result.estimates {
        if let Some(p) = preds.iter().find(|p| p.observable == est.observable) {
            entries.push(CompareEntry { observable: est.observable.clone(), report: compare(&est.estimate, &p.prediction, args.threshold) });
        }
    }
    if entries.is_empty() {
        return Err(Error::config("no observable appears in both the simulation and the predictions"));
    }
    let pass = entries.iter().all(|e| e.report.verdict == Verdict::Pass);
    let results = json!({"verdict": if pass { "PASS" } else { "FAIL" }, "entries": entries});
    writeln!(out, "{}", RunRecord::new("compare", "final", json!({"threshold": args.threshold, "simulation": sim.config}), results).to_line()).map_err(io_err)?;
    Ok(if pass { Outcome::Ok } else { Outcome::Fail })
}

fn csv_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.17e}")
    }
}

pub fn cmd_kernel(args: &KernelArgs, out: &mut dyn Write) -> Result<Outcome> {
    let points: Vec<f64> = if !args.u.is_empty() {
        args.u.clone()
    } else {
        if !(args.step > 0.0) || args.to < args.from {
            return Err(Error::config("kernel range needs step > 0 and to >= from"));
        }
        let count = ((args.to - args.from) / args.step + 1e-9).floor() as usize;
        (0..=count).map(|i| args.from + i as f64 * args.step).collect()
    };
    writeln!(out, "u,s,Y1,Y2,Y1_avg_asym").map_err(io_err)?;
    for u in points {
        let k = sine_kernel(u);
        writeln!(out, "{},{},{},{},{}", csv_num(k.u), csv_num(k.s), csv_num(k.y1), csv_num(k.y2), csv_num(k.y1_avg_asym)).map_err(io_err)?;
    }
    Ok(Outcome::Ok)
}

pub fn cmd_formal(args: &FormalArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<Outcome> {
    let text = match &args.input {
        Some(p) => read(p)?,
        None => {
            let mut s = String::new();
            input.read_to_string(&mut s).map_err(|e| Error::config(format!("stdin: {e}")))?;
            s
        }
    };
    let mut failed = false;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value = match parse_monomial(trimmed) {
            Ok(p) => match exponents(&p, args.alpha, args.beta_exp) {
                Ok(r) => json!({"line": i + 1, "monomial": trimmed, "report": r}),
                Err(e) => return Err(e),
            },
            Err(e) => {
                failed = true;
                json!({"line": i + 1, "monomial": trimmed, "error": e})
            }
        };
        writeln!(out, "{value}").map_err(io_err)?;
    }
    if failed {
        return Err(Error::config("one or more monomials failed to parse"));
    }
    Ok(Outcome::Ok)
}

pub fn cmd_selftest(args: &SelftestArgs, out: &mut dyn Write) -> Result<Outcome> {
    let checks = run_selftest();
    let pass = checks.iter().all(|c| c.passed);
    if args.json {
        let rec = RunRecord::new("selftest", "final", Value::Null, json!({"verdict": if pass { "PASS" } else { "FAIL" }, "checks": checks}));
        writeln!(out, "{}", rec.to_line()).map_err(io_err)?;
    } else {
        for c in &checks {
            writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).map_err(io_err)?;
        }
        writeln!(out, "{}/{} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len()).map_err(io_err)?;
    }
    Ok(if pass { Outcome::Ok } else { Outcome::Fail })
}

/// Runs a parsed command against the given streams.
pub fn run(cli: &Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<Outcome> {
    match &cli.command {
        Command::Predict(a) => cmd_predict(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Kernel(a) => cmd_kernel(a, out),
        Command::Formal(a) => cmd_formal(a, input, out),
        Command::Selftest(a) => cmd_selftest(a, out),
    }
}

/// Exit status for a command result: 0 ok, 1 comparison FAIL, 2 config, 3 numerical.
pub fn exit_code(r: &Result<Outcome>) -> u8 {
    match r {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Fail) => 1,
        Err(e) => e.exit_code() as u8,
    }
}
