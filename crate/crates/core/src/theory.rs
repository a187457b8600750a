//! Closed-form covariance predictions.
//!
//! Everything here is a pure function of spectral parameters, the matrix size
//! and the cumulant sums of the ensemble.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::analysis::quad::{quad2d_split, QuadOptions};
use crate::ensemble::{CumulantSums, Symmetry};
use crate::error::{Error, Result};
use crate::spectral::{msc_boundary, msc_stieltjes, semicircle, sqrt_zsq_minus4};
use crate::window::GreenWindow;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub re: f64,
    pub im: f64,
}

impl Term {
    pub fn new(label: &str, value: Complex64) -> Self {
        Term { label: label.to_string(), re: value.re, im: value.im }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A prediction split into named contributions plus a unit-constant error bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermBreakdown {
    pub terms: Vec<Term>,
    pub error_bound: f64,
}

impl TermBreakdown {
    pub fn push(&mut self, label: &str, value: Complex64) {
        self.terms.push(Term::new(label, value));
    }

    pub fn total(&self) -> Complex64 {
        self.terms.iter().map(Term::value).sum()
    }

    pub fn get(&self, label: &str) -> Option<Complex64> {
        self.terms.iter().find(|t| t.label == label).map(Term::value)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.label.as_str()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FValues {
    pub f1: Complex64,
    pub f2: Complex64,
    pub f3: Complex64,
    pub f4: Complex64,
    pub f5: Complex64,
    pub f6: Complex64,
    pub f7: Complex64,
}

/// The seven elementary functions. Arguments are used as given: pass `z2*`
/// for the conjugate family and `z2` for the non-conjugate one.
pub fn f_functions(z1: Complex64, z2: Complex64) -> Result<FValues> {
    let (s1, s2) = (sqrt_zsq_minus4(z1), sqrt_zsq_minus4(z2));
    if (s1 - s2).norm() <= 1e-14 * (s1.norm() + s2.norm()) {
        return Err(Error::CoincidentSpectralParameter);
    }
    let (m1, m2) = (msc_stieltjes(z1), msc_stieltjes(z2));
    let ss = s1 * s2;
    let f3 = 2.0 * m1 * m1 * m2 * m2 / ss;
    let f4 = -m1 * m2 * (m1 + m2) / ss;
    Ok(FValues {
        f1: -2.0 / s1 + 2.0 / s2,
        f2: (4.0 + z1 * z2 + ss) / (ss * (s1 - s2).powu(2)),
        f3,
        f4,
        f5: (4.0 + z1 * z2 - ss) / (ss * (s1 + s2).powu(2)),
        f6: f3,
        f7: f4,
    })
}

fn kappa_checked(e: f64) -> Result<f64> {
    if !(e.abs() < 2.0) {
        return Err(Error::domain("E", e));
    }
    Ok(semicircle(e).kappa)
}

/// `V(E) = 2E(E²−2)/κ + 2 Im(m(E+i0)⁴)/κ²`.
pub fn v_of_e(e: f64) -> Result<f64> {
    let k = kappa_checked(e)?;
    Ok(2.0 * e * (e * e - 2.0) / k + 2.0 * msc_boundary(e).powu(4).im / (k * k))
}

fn assert_upper(z: Complex64, what: &str) -> Result<()> {
    if z.im > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Im {what}"), z.im))
    }
}

/// Conjugate-family terms at arbitrary `z1` and `w = z2*`, with `κ` and `V`
/// taken at the reference energy `e_ref`.
pub fn conjugate_terms(z1: Complex64, w: Complex64, e_ref: f64, n: usize, sums: &CumulantSums, sym: Symmetry) -> Result<TermBreakdown> {
    let k = kappa_checked(e_ref)?;
    let v = v_of_e(e_ref)?;
    let f = f_functions(z1, w)?;
    let nf = n as f64;
    let d = z1 - w;
    let d2 = d * d;
    let n2 = nf * nf;
    let n3 = n2 * nf;
    let mut out = TermBreakdown::default();
    match sym {
        Symmetry::Real => {
            out.push("leading", -2.0 / (n2 * d2));
            out.push("f1_term", f.f1 / (n3 * d2 * d));
            out.push("quartic_term", 12.0 / (n2 * n2 * d2 * d2 * k * k));
            out.push("f2_block", f.f2 / n2);
            out.push("f3_cumulant_block", f.f3 * sums.sum_c4 / n2);
            out.push("f4_cumulant_block", f.f4 * sums.sum_c3_diag / n2);
            out.push("V_block", I / (n3 * d2) * (-e_ref / k.powi(3) + v * sums.sum_c4));
        }
        Symmetry::Complex => {
            out.push("leading", -1.0 / (n2 * d2));
            out.push("f2_block", f.f2 / (2.0 * n2));
            out.push("f3_cumulant_block", f.f3 * sums.sum_c22 / n2);
            out.push("f4_cumulant_block", f.f4 * sums.sum_c3_diag / n2);
            out.push("V_block", I * v * sums.sum_c22 / (2.0 * n3 * d2));
        }
    }
    Ok(out)
}

/// `Cov(G(z1), G(z2*))` at `z_k = E_k + iη`, with `E = (E1+E2)/2` inside `κ` and `V`.
pub fn cov_green_conjugate(w: &GreenWindow, n: usize, sums: &CumulantSums, sym: Symmetry) -> Result<TermBreakdown> {
    w.validate()?;
    let mut out = conjugate_terms(w.z1(), w.z2().conj(), w.e_mid(), n, sums, sym)?;
    let (nf, om) = (n as f64, w.omega());
    out.error_bound = 1.0 / (nf.powi(5) * om.powi(5)) + 1.0 / (nf.powi(4) * om.powi(3)) + 1.0 / (nf.powf(3.5) * om * om) + 1.0 / (nf.powi(3) * om);
    Ok(out)
}

/// Terms of `Cov(G(z1), G(z2))` for arbitrary arguments.
pub fn nonconjugate_terms(z1: Complex64, z2: Complex64, n: usize, sums: &CumulantSums, sym: Symmetry) -> Result<TermBreakdown> {
    let f = f_functions(z1, z2)?;
    let n2 = (n * n) as f64;
    let mut out = TermBreakdown::default();
    match sym {
        Symmetry::Real => {
            out.push("f5_block", f.f5 / n2);
            out.push("f6_cumulant_block", f.f6 * sums.sum_c4 / n2);
        }
        Symmetry::Complex => {
            out.push("f5_block", f.f5 / (2.0 * n2));
            out.push("f6_cumulant_block", f.f6 * sums.sum_c22 / n2);
        }
    }
    out.push("f7_cumulant_block", f.f7 * sums.sum_c3_diag / n2);
    Ok(out)
}

pub fn cov_green_nonconjugate(w: &GreenWindow, n: usize, sums: &CumulantSums, sym: Symmetry) -> Result<TermBreakdown> {
    w.validate()?;
    let mut out = nonconjugate_terms(w.z1(), w.z2(), n, sums, sym)?;
    let (nf, om) = (n as f64, w.omega());
    out.error_bound = 1.0 / (om * om * nf.powf(3.5)) + 1.0 / (om * nf.powi(3));
    Ok(out)
}

/// Shift of the conjugate covariance when the diagonal variances are `ζ_i/N`.
pub fn cov_green_zeta_correction(w: &GreenWindow, n: usize, zeta: &[f64], sym: Symmetry) -> Result<Complex64> {
    w.validate()?;
    if zeta.len() != n {
        return Err(Error::config(format!("zeta profile has length {}, expected N = {n}", zeta.len())));
    }
    let (z1, w2) = (w.z1(), w.z2().conj());
    let nf = n as f64;
    let d2 = (z1 - w2).powu(2);
    let im_m2 = msc_boundary(w.e_mid()).powu(2).im;
    let head = match sym {
        Symmetry::Real => Complex64::new(-2.0, 2.0 * im_m2),
        Symmetry::Complex => Complex64::new(-1.0, im_m2),
    };
    let tail = msc_stieltjes(z1) * msc_stieltjes(w2) / (nf.powi(3) * sqrt_zsq_minus4(z1) * sqrt_zsq_minus4(w2));
    let excess: f64 = zeta.iter().map(|z| z - sym.canonical_zeta()).sum();
    Ok((head / (nf.powi(4) * d2) + tail) * excess)
}

/// `E G(z)` to order `1/N`.
pub fn expected_stieltjes_terms(n: usize, sums: &CumulantSums, sym: Symmetry, z: Complex64) -> Result<TermBreakdown> {
    assert_upper(z, "z")?;
    let m = msc_stieltjes(z);
    let s = sqrt_zsq_minus4(z);
    let nf = n as f64;
    let mut out = TermBreakdown::default();
    out.push("m", m);
    let correction = match sym {
        Symmetry::Real => -(expected_stieltjes_sq(z)? + m.powu(4) * sums.sum_c4) / (nf * s),
        Symmetry::Complex => -m.powu(4) * sums.sum_c22 / (nf * s),
    };
    out.push("inverse_n_correction", correction);
    out.error_bound = nf.powf(-1.5) / z.im.powi(2);
    Ok(out)
}

pub fn expected_stieltjes(n: usize, sums: &CumulantSums, sym: Symmetry, z: Complex64) -> Result<Complex64> {
    Ok(expected_stieltjes_terms(n, sums, sym, z)?.total())
}

/// Leading value of `E G(z)²`, namely `m'(z)`.
pub fn expected_stieltjes_sq(z: Complex64) -> Result<Complex64> {
    assert_upper(z, "z")?;
    Ok(-0.5 + z / (2.0 * sqrt_zsq_minus4(z)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GValues {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
}

fn check_bulk(what: &str, x: f64) -> Result<f64> {
    if x.abs() < 2.0 {
        Ok((4.0 - x * x).sqrt())
    } else {
        Err(Error::domain(what, x))
    }
}

pub fn g_functions(x1: f64, x2: f64) -> Result<GValues> {
    let k1 = check_bulk("x1", x1)?;
    let k2 = check_bulk("x2", x2)?;
    let kk = k1 * k2;
    Ok(GValues {
        g1: -4.0 * (4.0 + x1 * x2 + kk) / (kk * (k1 + k2).powi(2)),
        g2: 2.0 * (x1 * x1 - 2.0) * (x2 * x2 - 2.0) / kk,
        g3: (x1 * x1 * x2 + x1 * x2 * x2 - 2.0 * x1 - 2.0 * x2) / kk,
        g4: x1 * x2 / kk,
    })
}

/// `F_i(u, v) = g_i(x(u), x(v))` with `x(u) = E + u/(N ϱ_E)`.
pub fn f_upsilon(e: f64, n: usize, u: f64, v: f64) -> Result<GValues> {
    kappa_checked(e)?;
    let scale = n as f64 * semicircle(e).rho;
    let (x1, x2) = (e + u / scale, e + v / scale);
    for (what, x) in [("x(u)", x1), ("x(v)", x2)] {
        check_bulk(what, x)?;
    }
    g_functions(x1, x2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpsilonValue {
    pub value: f64,
    pub terms: TermBreakdown,
    pub error_bound: f64,
}

/// Smoothed two-point kernel in microscopic units around `E`.
pub fn upsilon(e: f64, n: usize, u: f64, v: f64, sums: &CumulantSums, sym: Symmetry, zeta: Option<&[f64]>) -> Result<UpsilonValue> {
    let d = u - v;
    if d == 0.0 || !d.is_finite() {
        return Err(Error::domain("u - v", d));
    }
    let k = kappa_checked(e)?;
    let g = f_upsilon(e, n, u, v)?;
    let nf = n as f64;
    let pref = 1.0 / (nf * nf * k * k);
    let d2 = d * d;
    let pi2 = PI * PI;
    let mut terms = TermBreakdown::default();
    let real = |x: f64| Complex64::new(x, 0.0);
    match sym {
        Symmetry::Real => {
            terms.push("leading", real(-1.0 / (pi2 * d2)));
            terms.push("quartic_term", real(3.0 / (2.0 * pi2 * pi2 * d2 * d2)));
            terms.push("F1_block", real(pref * g.g1));
            terms.push("F2_cumulant_block", real(pref * g.g2 * sums.sum_c4));
        }
        Symmetry::Complex => {
            terms.push("leading", real(-1.0 / (2.0 * pi2 * d2)));
            terms.push("F1_block", real(pref * g.g1 / 2.0));
            terms.push("F2_cumulant_block", real(pref * g.g2 * sums.sum_c22));
        }
    }
    terms.push("F3_cumulant_block", real(pref * g.g3 * sums.sum_c3_diag));
    if let Some(z) = zeta {
        if z.len() != n {
            return Err(Error::config(format!("zeta profile has length {}, expected N = {n}", z.len())));
        }
        let c = if sym == Symmetry::Real { 1.0 } else { 0.5 };
        let excess: f64 = z.iter().map(|x| x - sym.canonical_zeta()).sum();
        terms.push("zeta_block", real((g.g4 / (nf.powi(3) * k * k) - c / (nf * nf * pi2 * d2)) * excess));
    }
    let a = d.abs();
    terms.error_bound = 1.0 / a.powi(5) + 1.0 / (nf * a.powi(3)) + 1.0 / (nf.powf(1.5) * d2) + 1.0 / (nf * nf * a);
    Ok(UpsilonValue { value: terms.total().re, error_bound: terms.error_bound, terms })
}

/// Macroscopic variance of `Σ f(λ_i)` for a function smooth on `[−2, 2]`.
///
/// Both integrals are taken in the angle variable `x = 2cos θ`, which absorbs
/// the inverse square-root weights. `breaks` lists points of reduced smoothness
/// (e.g. support edges of a bump) in the `x` variable.
pub fn lp_macroscopic_variance<F: Fn(f64) -> f64 + Sync>(f: F, breaks: &[f64], sum_c4: f64) -> Result<f64> {
    let mut thetas: Vec<f64> = vec![0.0, PI];
    thetas.extend(breaks.iter().filter(|x| x.abs() < 2.0).map(|x| (x / 2.0).acos()));
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    let fx = |t: f64| f(2.0 * t.cos());
    let quotient = |x: f64, y: f64| {
        let h = x - y;
        if h.abs() > 1e-7 {
            (f(x) - f(y)) / h
        } else {
            let c = 0.5 * (x + y);
            let e = 1e-5;
            (f(c + e) - f(c - e)) / (2.0 * e)
        }
    };
    let opts = QuadOptions { abs_tol: 1e-11, rel_tol: 1e-9, max_subdivisions: 4000 };
    let first = quad2d_split(
        |t, p| {
            let (x, y) = (2.0 * t.cos(), 2.0 * p.cos());
            quotient(x, y).powi(2) * 4.0 * (1.0 - t.cos() * p.cos())
        },
        &thetas,
        &thetas,
        opts,
    )? / (2.0 * PI * PI);
    let moment = crate::analysis::quad::quad1d_split(|t| fx(t) * 2.0 * (2.0 * t).cos(), &thetas, opts)?;
    Ok(first + sum_c4 / (2.0 * PI * PI) * moment * moment)
}
