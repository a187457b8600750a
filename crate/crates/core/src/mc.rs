//! Monte Carlo experiments over sampled ensembles.
//!
//! Samples are produced in parallel but always reduced in sample-index order,
//! so results are bit-identical for any worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{predicted_linstat_cov, TestFunction, TestFunctionSpec};
use crate::ensemble::{EnsembleSpec, EntryCumulants, Symmetry};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spectral::{eigen_decompose, linear_statistic, quantile, EigenSample, Sign};
use crate::theory::{
    conjugate_terms, cov_green_conjugate, cov_green_nonconjugate, cov_green_zeta_correction, expected_stieltjes_sq, expected_stieltjes_terms, lp_macroscopic_variance, TermBreakdown,
};
use crate::window::{GreenWindow, SpectralWindow};

/// Streaming first and second co-moments of a complex pair.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairAccumulator {
    pub n: u64,
    pub mean_x: Complex64,
    pub mean_y: Complex64,
    /// `Σ (x − x̄)(y − ȳ)`, bilinear.
    pub c_xy: Complex64,
    /// `Σ |x − x̄|²`.
    pub c_xx: f64,
    /// `Σ |y − ȳ|²`.
    pub c_yy: f64,
}

impl PairAccumulator {
    pub fn push(&mut self, x: Complex64, y: Complex64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        let dy_new = y - self.mean_y;
        self.c_xy += dx * dy_new;
        self.c_xx += (dx.conj() * (x - self.mean_x)).re;
        self.c_yy += (dy.conj() * dy_new).re;
    }

    /// Pairwise combination of two disjoint sample sets.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        let w = na * nb / n;
        PairAccumulator {
            n: self.n + other.n,
            mean_x: self.mean_x + dx * (nb / n),
            mean_y: self.mean_y + dy * (nb / n),
            c_xy: self.c_xy + other.c_xy + dx * dy * w,
            c_xx: self.c_xx + other.c_xx + dx.norm_sqr() * w,
            c_yy: self.c_yy + other.c_yy + dy.norm_sqr() * w,
        }
    }

    /// Unbiased `E[(X − EX)(Y − EY)]`.
    pub fn covariance(&self) -> Complex64 {
        if self.n < 2 {
            return Complex64::new(0.0, 0.0);
        }
        self.c_xy / (self.n - 1) as f64
    }

    pub fn correlation(&self) -> f64 {
        let d = (self.c_xx * self.c_yy).sqrt();
        if d == 0.0 {
            0.0
        } else {
            self.c_xy.re / d
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Mean,
    Covariance,
    Correlation,
}

/// Per-sample quantities. Each variant carries its own spectral parameters so
/// one run can serve several windows from the same eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// `Cov(G(z1), G(z2*))`.
    GreenCovConjugate {
        #[serde(flatten)]
        window: GreenWindow,
    },
    /// `Cov(G(z1), G(z2))`.
    GreenCovNonconjugate {
        #[serde(flatten)]
        window: GreenWindow,
    },
    /// `E|G(z) − E G(z)|²` at `z = E + iη`.
    GreenVariance {
        #[serde(rename = "E")]
        e: f64,
        eta: f64,
    },
    MeanStieltjes { z_re: f64, z_im: f64 },
    MeanStieltjesSq { z_re: f64, z_im: f64 },
    /// `N⁻² Cov(tr f^η, tr g^η)` for the `+ω` and `−ω` windows.
    LinstatCov { window: SpectralWindow, f: TestFunctionSpec, g: TestFunctionSpec },
    /// `Var Σ p(λ_i)` for a polynomial with coefficients in increasing degree.
    PolyLinstatVariance { coeffs: Vec<f64> },
    /// `corr(λ_i, λ_j)`, 1-based.
    Gustavsson { i: usize, j: usize },
}

/// Observable with its test functions built once.
enum Prepared {
    Plain(Observable),
    Linstat(SpectralWindow, TestFunction, TestFunction),
}

impl Observable {
    pub fn estimator(&self) -> Estimator {
        match self {
            Observable::MeanStieltjes { .. } | Observable::MeanStieltjesSq { .. } => Estimator::Mean,
            Observable::Gustavsson { .. } => Estimator::Correlation,
            _ => Estimator::Covariance,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Observable::GreenCovConjugate { window } | Observable::GreenCovNonconjugate { window } => window.validate(),
            Observable::GreenVariance { eta, .. } if !(*eta > 0.0) => Err(Error::domain("eta", *eta)),
            Observable::MeanStieltjes { z_im, .. } | Observable::MeanStieltjesSq { z_im, .. } if !(*z_im > 0.0) => Err(Error::domain("Im z", *z_im)),
            Observable::LinstatCov { window, f, g } => {
                window.validate()?;
                f.build()?;
                g.build()?;
                Ok(())
            }
            Observable::PolyLinstatVariance { coeffs } if coeffs.is_empty() => Err(Error::config("polynomial needs at least one coefficient")),
            Observable::Gustavsson { i, j } if !(1 <= *i && i <= j && *j <= n) => Err(Error::config(format!("gustavsson indices need 1 <= i <= j <= N, got ({i}, {j})"))),
            _ => Ok(()),
        }
    }

    fn prepare(&self) -> Result<Prepared> {
        Ok(match self {
            Observable::LinstatCov { window, f, g } => Prepared::Linstat(*window, f.build()?, g.build()?),
            o => Prepared::Plain(o.clone()),
        })
    }
}

impl Prepared {
    fn evaluate(&self, s: &EigenSample) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let real = |x: f64| Complex64::new(x, 0.0);
        match self {
            Prepared::Linstat(w, f, g) => {
                let n = s.len() as f64;
                (real(linear_statistic(&s.eigenvalues, w, f, Sign::Plus) / n), real(linear_statistic(&s.eigenvalues, w, g, Sign::Minus) / n))
            }
            Prepared::Plain(o) => match o {
                Observable::GreenCovConjugate { window } => (s.stieltjes(window.z1()), s.stieltjes(window.z2()).conj()),
                Observable::GreenCovNonconjugate { window } => (s.stieltjes(window.z1()), s.stieltjes(window.z2())),
                Observable::GreenVariance { e, eta } => {
                    let g = s.stieltjes(Complex64::new(*e, *eta));
                    (g, g.conj())
                }
                Observable::MeanStieltjes { z_re, z_im } => (s.stieltjes(Complex64::new(*z_re, *z_im)), zero),
                Observable::MeanStieltjesSq { z_re, z_im } => (s.stieltjes_power(Complex64::new(*z_re, *z_im), 2), zero),
                Observable::PolyLinstatVariance { coeffs } => {
                    let t: f64 = s.eigenvalues.iter().map(|&l| coeffs.iter().rev().fold(0.0, |a, c| a * l + c)).sum();
                    (real(t), real(t))
                }
                Observable::Gustavsson { i, j } => (real(s.eigenvalues[i - 1]), real(s.eigenvalues[j - 1])),
                Observable::LinstatCov { .. } => unreachable!("prepared separately"),
            },
        }
    }
}

fn estimate_of(acc: &PairAccumulator, est: Estimator) -> Complex64 {
    match est {
        Estimator::Mean => acc.mean_x,
        Estimator::Covariance => acc.covariance(),
        Estimator::Correlation => Complex64::new(acc.correlation(), 0.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub re: f64,
    pub im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    /// `sqrt(stderr_re² + stderr_im²)`.
    pub stderr: f64,
    pub n_samples: u64,
    pub batch_count: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Grand estimate from the merged batches, batch-means standard error.
    pub fn from_batches(batches: &[PairAccumulator], est: Estimator, seed: u64) -> Self {
        let merged = batches.iter().fold(PairAccumulator::default(), |a, b| a.merge(b));
        let mean = estimate_of(&merged, est);
        let per: Vec<Complex64> = batches.iter().map(|b| estimate_of(b, est)).collect();
        let bc = per.len() as f64;
        let (stderr_re, stderr_im) = if per.len() < 2 {
            (0.0, 0.0)
        } else {
            let avg: Complex64 = per.iter().sum::<Complex64>() / bc;
            let sre: f64 = per.iter().map(|p| (p.re - avg.re).powi(2)).sum();
            let sim: f64 = per.iter().map(|p| (p.im - avg.im).powi(2)).sum();
            ((sre / (bc * (bc - 1.0))).sqrt(), (sim / (bc * (bc - 1.0))).sqrt())
        };
        McEstimate {
            re: mean.re,
            im: mean.im,
            stderr_re,
            stderr_im,
            stderr: stderr_re.hypot(stderr_im),
            n_samples: merged.n,
            batch_count: batches.len() as u64,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: EnsembleSpec,
    pub n_samples: u64,
    pub batch_count: u64,
    pub master_seed: u64,
    pub observables: Vec<Observable>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.batch_count < 20 {
            return Err(Error::config(format!("batch_count must be at least 20, got {}", self.batch_count)));
        }
        if self.n_samples < 40 * self.batch_count {
            return Err(Error::config(format!("n_samples must be at least 40 * batch_count = {}", 40 * self.batch_count)));
        }
        if self.observables.is_empty() {
            return Err(Error::config("no observables requested"));
        }
        self.observables.iter().try_for_each(|o| o.validate(self.spec.n))
    }

    /// Contiguous sample-index range of batch `b`.
    pub fn batch_range(&self, b: u64) -> std::ops::Range<u64> {
        let start = b * self.n_samples / self.batch_count;
        let end = (b + 1) * self.n_samples / self.batch_count;
        start..end
    }
}

/// Progress record emitted after each completed batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch: u64,
    pub samples_done: u64,
    pub failures: u64,
    pub batch_estimates: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimate {
    pub observable: Observable,
    pub estimate: McEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub estimates: Vec<ObservableEstimate>,
    pub failures: u64,
}

impl ExperimentResult {
    pub fn find(&self, observable: &Observable) -> Option<&McEstimate> {
        self.estimates.iter().find(|e| &e.observable == observable).map(|e| &e.estimate)
    }
}

/// Runs `cfg` on `threads` workers (all available when `None`).
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>, mut progress: impl FnMut(&BatchRecord)) -> Result<ExperimentResult> {
    cfg.validate()?;
    let prepared: Vec<Prepared> = cfg.observables.iter().map(Observable::prepare).collect::<Result<_>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::config(e.to_string()))?;
    let mut batches: Vec<Vec<PairAccumulator>> = vec![Vec::with_capacity(cfg.batch_count as usize); prepared.len()];
    let mut failures = 0u64;
    let mut done = 0u64;
    for b in 0..cfg.batch_count {
        let range = cfg.batch_range(b);
        let rows: Vec<Result<Vec<(Complex64, Complex64)>>> = pool.install(|| {
            range
                .clone()
                .into_par_iter()
                .map(|k| {
                    let h = cfg.spec.sample(RngStream::new(cfg.master_seed, k))?;
                    let s = eigen_decompose(&h, k)?;
                    Ok(prepared.iter().map(|p| p.evaluate(&s)).collect())
                })
                .collect()
        });
        let mut accs = vec![PairAccumulator::default(); prepared.len()];
        for row in rows {
            match row {
                Ok(values) => {
                    for (acc, (x, y)) in accs.iter_mut().zip(values) {
                        acc.push(x, y);
                    }
                }
                Err(Error::EigenFailure { .. }) => failures += 1,
                Err(e) => return Err(e),
            }
        }
        done += range.end - range.start;
        if failures * 1000 > cfg.n_samples {
            return Err(Error::TooManyFailures { failures, samples: done });
        }
        let batch_estimates = accs
            .iter()
            .zip(&cfg.observables)
            .map(|(a, o)| {
                let v = estimate_of(a, o.estimator());
                [v.re, v.im]
            })
            .collect();
        progress(&BatchRecord { batch: b, samples_done: done, failures, batch_estimates });
        for (all, acc) in batches.iter_mut().zip(accs) {
            all.push(acc);
        }
    }
    let estimates = cfg
        .observables
        .iter()
        .zip(&batches)
        .map(|(o, bs)| ObservableEstimate { observable: o.clone(), estimate: McEstimate::from_batches(bs, o.estimator(), cfg.master_seed) })
        .collect();
    Ok(ExperimentResult { estimates, failures })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GustavssonResult {
    pub estimate: McEstimate,
    pub prediction: f64,
}

/// `1 − log_N (j − i)`, and 1 on the diagonal.
pub fn gustavsson_prediction(i: usize, j: usize, n: usize) -> f64 {
    if i == j {
        1.0
    } else {
        1.0 - ((j - i) as f64).ln() / (n as f64).ln()
    }
}

/// Correlation of two bulk eigenvalues; both classical locations must lie in `[−2+τ, 2−τ]`.
pub fn gustavsson_experiment(cfg: &ExperimentConfig, i: usize, j: usize, tau: f64, threads: Option<usize>) -> Result<GustavssonResult> {
    let n = cfg.spec.n;
    if !(i >= 1 && i < j && j <= n) {
        return Err(Error::config(format!("need 1 <= i < j <= N, got ({i}, {j})")));
    }
    for k in [i, j] {
        let g = quantile(k, n)?;
        if g.abs() > 2.0 - tau {
            return Err(Error::config(format!("index {k} has classical location {g}, outside the bulk")));
        }
    }
    let mut c = cfg.clone();
    c.observables = vec![Observable::Gustavsson { i, j }];
    let r = run_experiment(&c, threads, |_| {})?;
    Ok(GustavssonResult { estimate: r.estimates[0].estimate.clone(), prediction: gustavsson_prediction(i, j, n) })
}

/// Closed-form prediction for `obs` under `spec`, as named terms.
pub fn predict_observable(spec: &EnsembleSpec, obs: &Observable) -> Result<TermBreakdown> {
    spec.validate()?;
    obs.validate(spec.n)?;
    let (n, sym) = (spec.n, spec.beta);
    let sums = spec.cumulant_sums()?;
    let zeta = spec.zeta_values();
    let zeta_opt = if spec.is_canonical() { None } else { Some(zeta.as_slice()) };
    match obs {
        Observable::GreenCovConjugate { window } => {
            let mut out = cov_green_conjugate(window, n, &sums, sym)?;
            if let Some(z) = zeta_opt {
                out.push("zeta_correction", cov_green_zeta_correction(window, n, z, sym)?);
            }
            Ok(out)
        }
        Observable::GreenCovNonconjugate { window } => cov_green_nonconjugate(window, n, &sums, sym),
        Observable::GreenVariance { e, eta } => {
            // The conjugate formula at z2 = z1, with |z1 − z2*| = 2η playing the role of ω.
            let z = Complex64::new(*e, *eta);
            let mut out = conjugate_terms(z, z.conj(), *e, n, &sums, sym)?;
            let (nf, om) = (n as f64, 2.0 * eta);
            out.error_bound = 1.0 / (nf.powi(5) * om.powi(5)) + 1.0 / (nf.powi(4) * om.powi(3)) + 1.0 / (nf.powf(3.5) * om * om) + 1.0 / (nf.powi(3) * om);
            Ok(out)
        }
        Observable::MeanStieltjes { z_re, z_im } => expected_stieltjes_terms(n, &sums, sym, Complex64::new(*z_re, *z_im)),
        Observable::MeanStieltjesSq { z_re, z_im } => {
            let mut out = TermBreakdown::default();
            out.push("leading", expected_stieltjes_sq(Complex64::new(*z_re, *z_im))?);
            out.error_bound = 1.0 / (n as f64 * z_im.powi(3));
            Ok(out)
        }
        Observable::LinstatCov { window, f, g } => {
            let p = predicted_linstat_cov(window, &f.build()?, &g.build()?, &sums, sym, n, zeta_opt)?;
            let mut out = TermBreakdown::default();
            out.push("leading", Complex64::new(p.leading, 0.0));
            out.push("corrections", Complex64::new(p.value - p.leading, 0.0));
            out.error_bound = p.error_bound;
            Ok(out)
        }
        Observable::PolyLinstatVariance { coeffs } => {
            if sym != Symmetry::Real {
                return Err(Error::config("the macroscopic variance formula is stated for beta = 1"));
            }
            let c4 = match spec.offdiag.cumulants(Symmetry::Real)? {
                EntryCumulants::Real(c) => c.c4,
                EntryCumulants::Complex(_) => unreachable!(),
            };
            let p = |x: f64| coeffs.iter().rev().fold(0.0, |a, c| a * x + c);
            let gaussian = lp_macroscopic_variance(p, &[-2.0, 2.0], 0.0)?;
            let full = lp_macroscopic_variance(p, &[-2.0, 2.0], c4)?;
            let mut out = TermBreakdown::default();
            out.push("gaussian_term", Complex64::new(gaussian, 0.0));
            out.push("cumulant_term", Complex64::new(full - gaussian, 0.0));
            out.error_bound = 1.0 / n as f64;
            Ok(out)
        }
        Observable::Gustavsson { i, j } => {
            let mut out = TermBreakdown::default();
            out.push("leading", Complex64::new(gustavsson_prediction(*i, *j, n), 0.0));
            out.error_bound = 1.0 / (n as f64).ln();
            Ok(out)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub estimate: McEstimate,
    pub prediction_total: [f64; 2],
    pub prediction: TermBreakdown,
    pub z_score: f64,
    pub relative_deviation: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// PASS when the deviation is within 3 combined standard errors or below
/// `threshold` relative to the prediction.
pub fn compare(est: &McEstimate, prediction: &TermBreakdown, threshold: f64) -> Report {
    let total = prediction.total();
    let dev = (est.mean() - total).norm();
    let scale = (est.stderr * est.stderr + prediction.error_bound * prediction.error_bound).sqrt();
    let z_score = if dev == 0.0 { 0.0 } else { dev / scale };
    let relative_deviation = if total.norm() > 0.0 { dev / total.norm() } else { f64::INFINITY };
    let verdict = if z_score <= 3.0 || relative_deviation <= threshold { Verdict::Pass } else { Verdict::Fail };
    Report {
        estimate: est.clone(),
        prediction_total: [total.re, total.im],
        prediction: prediction.clone(),
        z_score,
        relative_deviation,
        threshold,
        verdict,
    }
}
