//! Quadrature, test functions, almost-analytic extensions and the predicted
//! covariance of mesoscopic linear statistics.

pub mod quad;
pub mod testfn;

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::ensemble::{CumulantSums, Symmetry};
use crate::error::{Error, Result};
use crate::theory::{conjugate_terms, nonconjugate_terms, upsilon};
use crate::window::SpectralWindow;
use quad::{quad1d_complex, quad2d_split, QuadOptions};
pub use testfn::{Bump, SampledFunction, TestFunction, TestFunctionSpec, MAX_DERIVATIVE};

/// Largest truncation order accepted by [`almost_analytic`].
pub const MAX_EXTENSION_ORDER: usize = 12;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

fn check_order(k: usize) -> Result<()> {
    if k > MAX_EXTENSION_ORDER {
        Err(Error::config(format!("extension order {k} exceeds {MAX_EXTENSION_ORDER}")))
    } else {
        Ok(())
    }
}

/// `f̃(x+iy) = Σ_{j≤k} (iy)^j f^{(j)}(x)/j!`.
pub fn almost_analytic(f: &TestFunction, k: usize, x: f64, y: f64) -> Result<Complex64> {
    check_order(k)?;
    let iy = Complex64::new(0.0, y);
    let mut pow = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..=k {
        sum += pow * (f.derivative(j, x) / factorial(j));
        pow *= iy;
    }
    Ok(sum)
}

/// `∂_z̄ f̃ = ½ (iy)^k f^{(k+1)}(x)/k!`; the sum telescopes.
pub fn almost_analytic_dbar(f: &TestFunction, k: usize, x: f64, y: f64) -> Result<Complex64> {
    check_order(k)?;
    Ok(0.5 * Complex64::new(0.0, y).powu(k as u32) * (f.derivative(k + 1, x) / factorial(k)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Reconstruction {
    pub contour: f64,
    pub area: f64,
    pub value: f64,
}

/// `∫_{−a}^{a} (iy)^j dy`.
fn strip_moment(j: usize, a: f64) -> Complex64 {
    if j % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let sign = if j % 4 == 0 { 1.0 } else { -1.0 };
    Complex64::new(sign * 2.0 * a.powi(j as i32 + 1) / (j + 1) as f64, 0.0)
}

/// `I_k(d) = ∫_{−a}^{a} (iy)^k/(d − iy) dy`, exactly.
///
/// Near the strip the recursion `I_k = d I_{k−1} − ∫(iy)^{k−1}` from
/// `I_0 = 2 atan(a/d)` is used; far from it the geometric series in `iy/d`.
fn strip_kernel(k: usize, d: f64, a: f64) -> Complex64 {
    if d.abs() <= 2.0 * a {
        let mut i = Complex64::new(if d == 0.0 { 0.0 } else { 2.0 * (a / d).atan() }, 0.0);
        for j in 1..=k {
            i = i * d - strip_moment(j - 1, a);
        }
        i
    } else {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut scale = 1.0 / d;
        for j in 0..200 {
            sum += strip_moment(k + j, a) * scale;
            if (scale * a.powi((k + j) as i32 + 1)).abs() <= 1e-18 * sum.norm() {
                break;
            }
            scale /= d;
        }
        sum
    }
}

/// Rebuilds `f(λ)` from its extension on the strip `|Im z| ≤ a`.
///
/// The area integrand `∂_z̄f̃/(λ−z)` factors as `f^{(k+1)}(x)` times
/// `(iy)^k/(λ−x−iy)`; the `y` integral is done exactly, leaving a 1-D
/// integral in `x` whose only kink is at `x = λ`.
pub fn cauchy_reconstruct(f: &TestFunction, lambda: f64, a: f64, k: usize) -> Result<Reconstruction> {
    check_order(k)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain("a", a));
    }
    let m = f.support();
    // The strip integrands grow like a^k max|f^(k)|/k!, so the achievable
    // absolute accuracy is limited by cancellation, not by the rule.
    let opts = QuadOptions { abs_tol: 1e-7, rel_tol: 1e-12, max_subdivisions: 4000 };
    let lz = Complex64::new(lambda, 0.0);
    let edge = |y: f64| {
        quad1d_complex(
            |x| {
                let z = Complex64::new(x, y);
                almost_analytic(f, k, x, y).unwrap() / (lz - z)
            },
            &[-m, m],
            opts,
        )
    };
    // Positively oriented boundary: bottom edge left to right, top edge right to left.
    let contour = Complex64::new(0.0, 1.0 / (2.0 * PI)) * (edge(-a)? - edge(a)?);

    let mut xs = vec![-m, m];
    if lambda.abs() < m {
        xs.insert(1, lambda);
    }
    let kf = 0.5 / factorial(k);
    let area = quad1d_complex(|x| strip_kernel(k, lambda - x, a) * (kf * f.derivative(k + 1, x)), &xs, opts)? / PI;
    let total = contour + area;
    debug_assert!(total.im.abs() < 1e-6);
    Ok(Reconstruction { contour: contour.re, area: area.re, value: total.re })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinstatPrediction {
    /// `∬ Υ f₊ g₋` with every printed block.
    pub value: f64,
    /// Same integral with only `−c_β/(π²(u−v)²)` in the kernel.
    pub leading: f64,
    /// Error term of the kernel at the window separation `2Nω`.
    pub error_bound: f64,
}

fn linstat_grid(f: &TestFunction, g: &TestFunction) -> (Vec<f64>, Vec<f64>) {
    let (mf, mg) = (f.support(), g.support());
    (vec![-mf, 0.0, mf], vec![-mg, 0.0, mg])
}

/// `N⁻² Cov(tr f^η(H), tr g^η(H))` predicted through `Υ`, in the variables
/// `u = Nω + Nη s`, `v = −Nω + Nη t`.
pub fn predicted_linstat_cov(
    window: &SpectralWindow,
    f: &TestFunction,
    g: &TestFunction,
    sums: &CumulantSums,
    sym: Symmetry,
    n: usize,
    zeta: Option<&[f64]>,
) -> Result<LinstatPrediction> {
    window.validate()?;
    if f.support().max(g.support()) * window.eta > window.omega {
        return Err(Error::config("test-function supports overlap: M*eta exceeds omega"));
    }
    let nf = n as f64;
    let (a, b) = (nf * window.omega, nf * window.eta);
    let (xs, ys) = linstat_grid(f, g);
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-8, max_subdivisions: 4000 };
    let err = std::cell::Cell::new(None);
    let kernel = |s: f64, t: f64| -> f64 {
        let (fs, gt) = (f.value(s), g.value(t));
        if fs == 0.0 || gt == 0.0 {
            return 0.0;
        }
        match upsilon(window.e, n, a + b * s, -a + b * t, sums, sym, zeta) {
            Ok(u) => u.value * fs * gt,
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        }
    };
    let value = quad2d_split(kernel, &xs, &ys, opts)?;
    if let Some(e) = err.take() {
        return Err(e);
    }
    let c = if sym == Symmetry::Real { 1.0 } else { 0.5 };
    let leading = quad2d_split(
        |s, t| {
            let d = a + b * s - (-a + b * t);
            -c / (PI * PI * d * d) * f.value(s) * g.value(t)
        },
        &xs,
        &ys,
        opts,
    )?;
    let sep = 2.0 * a;
    let error_bound = 1.0 / sep.powi(5) + 1.0 / (nf * sep.powi(3)) + 1.0 / (nf.powf(1.5) * sep * sep) + 1.0 / (nf * nf * sep);
    Ok(LinstatPrediction { value, leading, error_bound })
}

/// Macroscopic counterpart of [`predicted_linstat_cov`]: the polarization
/// `¼[V(f̂ + ĝ) − V(f̂ − ĝ)]` of the macroscopic variance, where `f̂` and `ĝ`
/// are the window profiles `x ↦ η⁻¹ f(((x − E)ϱ_E ∓ ω)/η)`. For well separated
/// windows it equals `N²` times the mesoscopic prediction at leading order.
pub fn macroscopic_polarization(window: &SpectralWindow, f: &TestFunction, g: &TestFunction, sum_c4: f64) -> Result<f64> {
    window.validate()?;
    let (rho, om, eta) = (window.rho(), window.omega, window.eta);
    let x = |t: f64, shift: f64| window.e + (shift + eta * t) / rho;
    let fh = |y: f64| f.value(((y - window.e) * rho - om) / eta) / eta;
    let gh = |y: f64| g.value(((y - window.e) * rho + om) / eta) / eta;
    let (mf, mg) = (f.support(), g.support());
    let breaks = [x(-mf, om), x(0.0, om), x(mf, om), x(-mg, -om), x(0.0, -om), x(mg, -om)];
    let plus = crate::theory::lp_macroscopic_variance(|y| fh(y) + gh(y), &breaks, sum_c4)?;
    let minus = crate::theory::lp_macroscopic_variance(|y| fh(y) - gh(y), &breaks, sum_c4)?;
    Ok(0.25 * (plus - minus))
}

/// The same covariance assembled from the resolvent formulas on the real axis,
/// `(1/4π²)∬ f_η g_η [2Re F₄(x₁+iε, x₂−iε) − 2Re F₅(x₁+iε, x₂+iε)]`, with the
/// `ε → 0` limit taken by one Richardson step on `(ε, ε/2)`.
pub fn predicted_linstat_cov_resolvent(
    window: &SpectralWindow,
    f: &TestFunction,
    g: &TestFunction,
    sums: &CumulantSums,
    sym: Symmetry,
    n: usize,
    eps: f64,
) -> Result<f64> {
    window.validate()?;
    let rho = window.rho();
    let x1 = |s: f64| window.e + (window.omega + window.eta * s) / rho;
    let x2 = |t: f64| window.e + (-window.omega + window.eta * t) / rho;
    let bracket = |a: f64, b: f64, e: f64| -> Result<f64> {
        let p = Complex64::new(a, e);
        let q = Complex64::new(b, e);
        let four = conjugate_terms(p, q.conj(), window.e, n, sums, sym)?.total();
        let five = nonconjugate_terms(p, q, n, sums, sym)?.total();
        Ok(2.0 * four.re - 2.0 * five.re)
    };
    let err = std::cell::Cell::new(None);
    let integrand = |s: f64, t: f64| -> f64 {
        let (fs, gt) = (f.value(s), g.value(t));
        if fs == 0.0 || gt == 0.0 {
            return 0.0;
        }
        let (a, b) = (x1(s), x2(t));
        match (bracket(a, b, eps), bracket(a, b, eps / 2.0)) {
            (Ok(k1), Ok(k2)) => (2.0 * k2 - k1) * fs * gt,
            (Err(e), _) | (_, Err(e)) => {
                err.set(Some(e));
                0.0
            }
        }
    };
    let (xs, ys) = linstat_grid(f, g);
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-8, max_subdivisions: 4000 };
    let v = quad2d_split(integrand, &xs, &ys, opts)?;
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(v / (4.0 * PI * PI * rho * rho))
}
