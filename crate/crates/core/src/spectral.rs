//! Eigenvalues, empirical resolvent traces and semicircle reference quantities.

use faer::Side;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::analysis::TestFunction;
use crate::ensemble::HermitianMatrix;
use crate::error::{Error, Result};
use crate::special::si;
use crate::window::SpectralWindow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSample {
    pub eigenvalues: Vec<f64>,
    pub sample_index: u64,
}

/// Full spectrum of `h`, ascending.
pub fn eigen_decompose(h: &HermitianMatrix, sample_index: u64) -> Result<EigenSample> {
    let eig = match h {
        HermitianMatrix::Real(m) => m.self_adjoint_eigenvalues(Side::Lower),
        HermitianMatrix::Complex(m) => m.self_adjoint_eigenvalues(Side::Lower),
    };
    let mut eigenvalues = eig.map_err(|_| Error::EigenFailure { sample_index })?;
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure { sample_index });
    }
    eigenvalues.sort_by(f64::total_cmp);
    Ok(EigenSample { eigenvalues, sample_index })
}

impl EigenSample {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `(1/N) Σ (λ_i − z)^(−m)`.
    pub fn stieltjes_power(&self, z: Complex64, m: u32) -> Complex64 {
        empirical_stieltjes_power(&self.eigenvalues, z, m)
    }

    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        self.stieltjes_power(z, 1)
    }
}

pub fn empirical_stieltjes_power(eigs: &[f64], z: Complex64, m: u32) -> Complex64 {
    let sum: Complex64 = eigs.iter().map(|&l| (Complex64::new(l, 0.0) - z).inv().powu(m)).sum();
    sum / eigs.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `Σ_i η⁻¹ f(((λ_i − E) ϱ_E ∓ ω)/η)`, `∓ = −sign`: the `+` statistic looks at
/// energies `E + ω/ϱ_E`.
pub fn linear_statistic(eigs: &[f64], window: &SpectralWindow, f: &TestFunction, sign: Sign) -> f64 {
    let rho = window.rho();
    let shift = sign.value() * window.omega;
    eigs.iter().map(|&l| f.value(((l - window.e) * rho - shift) / window.eta)).sum::<f64>() / window.eta
}

/// `z sqrt(1 − 4/z²)` with the principal root; boundary value `i κ_x` from above.
pub fn sqrt_zsq_minus4(z: Complex64) -> Complex64 {
    z * (Complex64::new(1.0, 0.0) - 4.0 / (z * z)).sqrt()
}

/// Stieltjes transform of the semicircle law, written as `−2/(z + s(z))`
/// to avoid cancellation at large `|z|`.
pub fn msc_stieltjes(z: Complex64) -> Complex64 {
    -2.0 / (z + sqrt_zsq_minus4(z))
}

/// Boundary value `m(x + i0)` for `|x| < 2`.
pub fn msc_boundary(x: f64) -> Complex64 {
    Complex64::new(-x, semicircle(x).kappa) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Semicircle {
    pub rho: f64,
    pub kappa: f64,
}

pub fn semicircle(e: f64) -> Semicircle {
    let kappa = (4.0 - e * e).max(0.0).sqrt();
    Semicircle { rho: kappa / (2.0 * PI), kappa }
}

/// Semicircle distribution function.
pub fn semicircle_cdf(x: f64) -> f64 {
    let x = x.clamp(-2.0, 2.0);
    0.5 + (x * (4.0 - x * x).sqrt() + 4.0 * (x / 2.0).asin()) / (4.0 * PI)
}

/// Classical location `γ_k` with `F(γ_k) = k/N`, by bisection.
pub fn quantile(k: usize, n: usize) -> Result<f64> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::config(format!("quantile needs 1 <= k <= N, got k={k}, N={n}")));
    }
    if k == n {
        return Ok(2.0);
    }
    let target = k as f64 / n as f64;
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if semicircle_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SineKernel {
    pub u: f64,
    pub s: f64,
    #[serde(rename = "Y1")]
    pub y1: f64,
    #[serde(rename = "Y2")]
    pub y2: f64,
    #[serde(rename = "Y1_avg_asym")]
    pub y1_avg_asym: f64,
}

fn sinc_and_derivative(u: f64) -> (f64, f64) {
    let x = PI * u;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        (1.0 - x2 / 6.0 + x2 * x2 / 120.0, PI * (-x / 3.0 + x * x2 / 30.0))
    } else {
        (x.sin() / x, PI * (x * x.cos() - x.sin()) / (x * x))
    }
}

/// Two-term large-`u` form of the locally averaged GOE kernel.
pub fn y1_avg_asym(u: f64) -> f64 {
    let u2 = u * u;
    -1.0 / (PI * PI * u2) + 3.0 / (2.0 * PI.powi(4) * u2 * u2)
}

/// Sine-kernel two-point functions. `Y1` is even and evaluated at `|u|`.
pub fn sine_kernel(u: f64) -> SineKernel {
    let a = u.abs();
    let (s, ds) = sinc_and_derivative(a);
    let tail = (FRAC_PI_2 - si(PI * a)) / PI;
    SineKernel { u, s, y1: -ds * tail - s * s, y2: -s * s, y1_avg_asym: if u == 0.0 { f64::NAN } else { y1_avg_asym(u) } }
}

/// Mean of `Y1` over `[u0 − half, u0 + half]` by composite Simpson, and the exact
/// mean of [`y1_avg_asym`] over the same interval.
pub fn y1_window_average(u0: f64, half: f64, intervals: usize) -> (f64, f64) {
    let n = intervals + intervals % 2;
    let (a, b) = (u0 - half, u0 + half);
    let h = (b - a) / n as f64;
    let mut acc = sine_kernel(a).y1 + sine_kernel(b).y1;
    for i in 1..n {
        acc += sine_kernel(a + i as f64 * h).y1 * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let simpson = acc * h / 3.0 / (b - a);
    let anti = |u: f64| 1.0 / (PI * PI * u) - 1.0 / (2.0 * PI.powi(4) * u.powi(3));
    (simpson, (anti(b) - anti(a)) / (b - a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EnsembleSpec;
    use crate::rng::RngStream;
    use faer::Mat;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigen_examples() {
        let zero = HermitianMatrix::Real(Mat::zeros(3, 3));
        assert_eq!(eigen_decompose(&zero, 0).unwrap().eigenvalues, vec![0.0; 3]);
        let mut d = Mat::<f64>::zeros(2, 2);
        d[(0, 0)] = 1.0;
        d[(1, 1)] = -1.0;
        let e = eigen_decompose(&HermitianMatrix::Real(d), 0).unwrap().eigenvalues;
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        let mut o = Mat::<f64>::zeros(2, 2);
        o[(0, 1)] = 1.0;
        o[(1, 0)] = 1.0;
        let e = eigen_decompose(&HermitianMatrix::Real(o), 0).unwrap().eigenvalues;
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenpair_residuals() {
        let h = EnsembleSpec::gue(60).sample(RngStream::new(9, 0)).unwrap();
        let HermitianMatrix::Complex(m) = &h else { panic!() };
        let evd = m.self_adjoint_eigen(Side::Lower).unwrap();
        let norm = m.norm_l2();
        let (u, s) = (evd.U(), evd.S());
        for k in [0, 17, 59] {
            let v = u.col(k);
            let r = m * v - v * faer::Scale(s[k]);
            assert!(r.norm_l2() <= 1e-10 * norm);
        }
        let sample = eigen_decompose(&h, 0).unwrap();
        let tr: f64 = sample.eigenvalues.iter().sum();
        assert!((tr - h.trace()).abs() < 1e-8 * 60.0);
        assert!(sample.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn stieltjes_examples() {
        assert!((empirical_stieltjes_power(&[0.0, 0.0], c(0.0, 1.0), 1) - c(0.0, 1.0)).norm() < 1e-15);
        assert!((empirical_stieltjes_power(&[-1.0, 1.0], c(0.0, 2.0), 1) - c(0.0, 0.4)).norm() < 1e-15);
        let eigs = [-1.3, 0.2, 0.7];
        for z in [c(0.3, 0.1), c(-1.0, 2.0)] {
            for m in 1..4 {
                let a = empirical_stieltjes_power(&eigs, z.conj(), m);
                let b = empirical_stieltjes_power(&eigs, z, m).conj();
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn msc_values() {
        assert!((msc_stieltjes(c(0.0, 1.0)) - c(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-15);
        assert!((sqrt_zsq_minus4(c(0.0, 1.0)) - c(0.0, 5f64.sqrt())).norm() < 1e-15);
        assert!((sqrt_zsq_minus4(c(3.0, 0.0)) - c(5f64.sqrt(), 0.0)).norm() < 1e-15);
        for x in [-1.0f64, 1.0, -1.9, 0.0] {
            let k = (4.0 - x * x).sqrt();
            assert!((sqrt_zsq_minus4(c(x, 1e-8)) - c(0.0, k)).norm() < 1e-7);
            assert!((msc_stieltjes(c(x, 1e-10)) - msc_boundary(x)).norm() < 1e-8);
        }
    }

    #[test]
    fn semicircle_and_quantiles() {
        let s = semicircle(0.0);
        assert!((s.rho - 1.0 / PI).abs() < 1e-16 && s.kappa == 2.0);
        assert_eq!(semicircle(2.0).kappa, 0.0);
        assert_eq!(semicircle(3.0).rho, 0.0);
        assert!((semicircle(1.0).kappa - 3f64.sqrt()).abs() < 1e-15);
        assert!(quantile(50, 100).unwrap().abs() < 1e-12);
        assert!((quantile(7, 7).unwrap() - 2.0).abs() < 1e-12);
        // Independent oracle: Simpson mass of the density to the left of γ₁.
        let g1 = quantile(1, 4).unwrap();
        let steps = 20_000;
        let h = (g1 + 2.0) / steps as f64;
        let mass: f64 = (0..=steps)
            .map(|i| {
                let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * semicircle(-2.0 + i as f64 * h).rho
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((mass - 0.25).abs() < 1e-6);
        assert!((g1 + 0.80795).abs() < 1e-5);
        for (k, n) in [(1, 4), (3, 10), (450, 1000), (999, 1000)] {
            let g = quantile(k, n).unwrap();
            assert!((semicircle_cdf(g) - k as f64 / n as f64).abs() < 1e-10);
        }
        assert!(quantile(0, 4).is_err());
    }

    #[test]
    fn sine_kernel_values() {
        let k0 = sine_kernel(0.0);
        assert_eq!((k0.s, k0.y1, k0.y2), (1.0, -1.0, -1.0));
        let k1 = sine_kernel(1.0);
        assert!(k1.s.abs() < 1e-16 && k1.y2.abs() < 1e-32);
        assert!((sine_kernel(50.0).y1_avg_asym + 4.05259e-5).abs() < 1e-9);
        let a = sine_kernel(2.7);
        assert_eq!(a.y1, sine_kernel(-2.7).y1);
    }

    #[test]
    fn window_averaged_y1() {
        for u in [20.0, 50.0, 100.0] {
            let (avg, asym) = y1_window_average(u, 5.0, 10_000);
            assert!((avg - asym).abs() <= 10.0 * u.powi(-6), "u={u}: {avg} vs {asym}");
        }
    }
}
