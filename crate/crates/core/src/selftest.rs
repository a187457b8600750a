//! Deterministic internal consistency checks, no Monte Carlo.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::analysis::{cauchy_reconstruct, macroscopic_polarization, predicted_linstat_cov, predicted_linstat_cov_resolvent, TestFunction};
use crate::ensemble::{CumulantSums, EnsembleSpec, Symmetry};
use crate::error::Result;
use crate::formal::{exponents, parse_monomial, WORKED_EXAMPLE};
use crate::spectral::{msc_stieltjes, quantile, semicircle_cdf, y1_window_average};
use crate::theory::{f_functions, g_functions, lp_macroscopic_variance};
use crate::window::SpectralWindow;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((passed, detail)) => Check { name: name.into(), passed, detail },
        Err(e) => Check { name: name.into(), passed: false, detail: e.to_string() },
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn m_equation() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        for j in 1..=10 {
            let z = c(-4.0 + 0.2 * i as f64, 0.05 * j as f64 * j as f64);
            let m = msc_stieltjes(z);
            worst = worst.max((m * m + z * m + 1.0).norm());
            if m.im <= 0.0 {
                return Ok((false, format!("Im m <= 0 at {z}")));
            }
        }
    }
    Ok((worst < 1e-12, format!("max residual {worst:.2e}")))
}

fn boundary_identities() -> Result<(bool, String)> {
    let eps = 1e-7;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha20Rng::seed_from_u64(0x5e1f);
    for _ in 0..50 {
        let (a, b): (f64, f64) = (rng.random_range(-1.8..1.8), rng.random_range(-1.8..1.8));
        let pm = f_functions(c(a, eps), c(b, -eps))?;
        let pp = f_functions(c(a, eps), c(b, eps))?;
        let g = g_functions(a, b)?;
        let (m1, m2) = (msc_stieltjes(c(a, eps)), msc_stieltjes(c(b, eps)));
        let kk = ((4.0 - a * a) * (4.0 - b * b)).sqrt();
        for (gi, lhs) in [
            (g.g4, (2.0 * (m1 * m2.conj()).re + 2.0 * (m1 * m2).re) / kk),
            (g.g1, 2.0 * pm.f2.re - 2.0 * pp.f5.re),
            (g.g2, 2.0 * pm.f3.re - 2.0 * pp.f6.re),
            (g.g3, 2.0 * pm.f4.re - 2.0 * pp.f7.re),
        ] {
            worst = worst.max((gi - lhs).abs() / gi.abs().max(1.0));
        }
    }
    Ok((worst < 1e-5, format!("max deviation {worst:.2e}")))
}

fn f1_imaginary() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (a, b) in [(-1.0, 0.5), (0.3, 0.31), (1.7, -1.7)] {
        let f = f_functions(c(a, 1e-9), c(b, -1e-9))?;
        worst = worst.max(f.f1.re.abs() / f.f1.norm());
    }
    Ok((worst < 1e-6, format!("max |Re f1|/|f1| {worst:.2e}")))
}

fn quantiles() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (k, n) in [(1, 4), (37, 100), (500, 1000), (999, 1000)] {
        worst = worst.max((semicircle_cdf(quantile(k, n)?) - k as f64 / n as f64).abs());
    }
    Ok((worst < 1e-10, format!("max cdf error {worst:.2e}")))
}

fn sine_kernel_average() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for u in [20.0f64, 50.0, 100.0] {
        let (avg, asym) = y1_window_average(u, 5.0, 10_000);
        worst = worst.max((avg - asym).abs() * u.powi(6));
    }
    Ok((worst <= 10.0, format!("max |avg − asym|·u⁶ = {worst:.3}")))
}

fn worked_example() -> Result<(bool, String)> {
    let p = parse_monomial(WORKED_EXAMPLE)?;
    let r = exponents(&p, 0.5, 0.5)?;
    let ok = r.nu == [5, 9, 2, 1, 2, 3] && (r.b0, r.b1, r.b, r.bstar) == (6.25, 3.75, -3.5, 2.25);
    Ok((ok, format!("nu {:?}, b0 {}, b1 {}, b {}, b* {}", r.nu, r.b0, r.b1, r.b, r.bstar)))
}

fn reconstruction() -> Result<(bool, String)> {
    let f = TestFunction::bump(1.0)?;
    let mut worst: f64 = 0.0;
    for (lambda, a, k) in [(0.0, 0.5, 4), (0.3, 1.0, 6), (-0.6, 0.25, 8)] {
        let r = cauchy_reconstruct(&f, lambda, a, k)?;
        worst = worst.max((r.value - f.value(lambda)).abs());
    }
    Ok((worst < 1e-6, format!("max reconstruction error {worst:.2e}")))
}

fn lp_variance() -> Result<(bool, String)> {
    let v1 = lp_macroscopic_variance(|x| x, &[-2.0, 2.0], 0.0)?;
    let v2 = lp_macroscopic_variance(|x| x * x, &[-2.0, 2.0], 0.0)?;
    let ok = (v1 - 2.0).abs() < 1e-6 && (v2 - 4.0).abs() < 1e-6;
    Ok((ok, format!("Var tr H = {v1:.8}, Var tr H² = {v2:.8}")))
}

fn cumulant_sums() -> Result<(bool, String)> {
    let s = EnsembleSpec::goe(200).cumulant_sums()?;
    let z = CumulantSums::zero();
    Ok((s == z, format!("{s:?}")))
}

fn linstat_routes() -> Result<(bool, String)> {
    let w = SpectralWindow::new(0.0, 0.1, 0.02, 1.0)?;
    let f = TestFunction::bump(1.0)?;
    let sums = CumulantSums::zero();
    let n = 400;
    let a = predicted_linstat_cov(&w, &f, &f, &sums, Symmetry::Real, n, None)?.value;
    let b = predicted_linstat_cov_resolvent(&w, &f, &f, &sums, Symmetry::Real, n, 1e-7)?;
    let rel = (a - b).abs() / a.abs();
    Ok((rel < 1e-3, format!("upsilon form {a:.6e}, resolvent form {b:.6e}, relative {rel:.2e}")))
}

fn polarization() -> Result<(bool, String)> {
    let w = SpectralWindow::new(0.0, 0.3, 0.2, 1.0)?;
    let f = TestFunction::bump(1.0)?;
    let n = 400;
    let meso = predicted_linstat_cov(&w, &f, &f, &CumulantSums::zero(), Symmetry::Real, n, None)?.value * (n * n) as f64;
    let macro_ = macroscopic_polarization(&w, &f, &f, 0.0)?;
    let rel = (meso - macro_).abs() / macro_.abs();
    Ok((rel < 0.05, format!("N² prediction {meso:.6e}, polarization {macro_:.6e}, relative {rel:.2e}")))
}

/// Runs every check; the suite passes when all entries pass.
pub fn run_selftest() -> Vec<Check> {
    vec![
        check("m_equation_residual", m_equation()),
        check("boundary_limit_identities", boundary_identities()),
        check("f1_boundary_imaginary", f1_imaginary()),
        check("quantile_inverse", quantiles()),
        check("sine_kernel_window_average", sine_kernel_average()),
        check("formal_worked_example", worked_example()),
        check("cauchy_reconstruction", reconstruction()),
        check("macroscopic_variance", lp_variance()),
        check("gaussian_cumulants_vanish", cumulant_sums()),
        check("linstat_cross_representation", linstat_routes()),
        check("macroscopic_polarization", polarization()),
    ]
}
