//! Compactly supported test functions with derivatives.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use super::quad::{quad1d_split, QuadOptions};
use crate::error::{Error, Result};

/// Highest derivative order kept in closed form.
pub const MAX_DERIVATIVE: usize = 13;

/// Taylor coefficients `a_n = g^{(n)}(t)/n!` of `g = exp(−1/(1−t²))` at `t`,
/// divided by `g(t)`. Series arithmetic on `1/(1−(t+s)²)` and then `exp` is far
/// better conditioned than expanding the derivatives as explicit polynomials.
fn scaled_taylor(t: f64, order: usize) -> [f64; MAX_DERIVATIVE + 1] {
    let q = [1.0 - t * t, -2.0 * t, -1.0];
    let mut inv = [0.0; MAX_DERIVATIVE + 1];
    inv[0] = 1.0 / q[0];
    for n in 1..=order {
        let s: f64 = (1..=n.min(2)).map(|j| q[j] * inv[n - j]).sum();
        inv[n] = -s / q[0];
    }
    let mut a = [0.0; MAX_DERIVATIVE + 1];
    a[0] = 1.0;
    for n in 1..=order {
        // (e^h)' = h' e^h with h = −inv
        let s: f64 = (1..=n).map(|j| j as f64 * -inv[j] * a[n - j]).sum();
        a[n] = s / n as f64;
    }
    a
}

fn unit_bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-13, max_subdivisions: 4000 };
        quad1d_split(|t| (-1.0 / (1.0 - t * t)).exp(), &[-1.0, 0.0, 1.0], opts).expect("bump mass converges")
    })
}

/// `c exp(−1/(1−(x/M)²))` normalised to unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub m: f64,
    pub c: f64,
}

impl Bump {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::domain("M", m));
        }
        Ok(Bump { m, c: 1.0 / (m * unit_bump_mass()) })
    }

    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        assert!(k <= MAX_DERIVATIVE, "derivative order {k} exceeds {MAX_DERIVATIVE}");
        let t = x / self.m;
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let h0 = -1.0 / (1.0 - t * t);
        if h0 < -800.0 {
            return 0.0;
        }
        let ak = scaled_taylor(t, k)[k];
        if ak == 0.0 {
            return 0.0;
        }
        let log_k_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
        let mag = (ak.abs().ln() + log_k_fact + h0).exp();
        self.c * self.m.powi(-(k as i32)) * mag.copysign(ak)
    }
}

/// Polynomial interpolant on Chebyshev–Lobatto nodes of `[−M, M]`, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    pub m: f64,
    /// Chebyshev coefficients of each derivative, order 0 first.
    derivs: Vec<Vec<f64>>,
}

impl SampledFunction {
    /// `values[j] = f(M cos(jπ/n))`, `j = 0..=n`.
    pub fn from_values(m: f64, values: &[f64]) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::domain("M", m));
        }
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sampled test function needs at least two finite values"));
        }
        let n = values.len() - 1;
        let nf = n as f64;
        let mut a: Vec<f64> = (0..=n)
            .map(|k| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                        w * v * (std::f64::consts::PI * (j * k) as f64 / nf).cos()
                    })
                    .sum();
                2.0 * s / nf
            })
            .collect();
        a[0] *= 0.5;
        a[n] *= 0.5;
        let mut derivs = vec![a];
        for _ in 0..MAX_DERIVATIVE {
            let a = derivs.last().unwrap();
            let len = a.len();
            let mut b = vec![0.0; len.max(1)];
            if len > 1 {
                for k in (1..len).rev() {
                    let above = if k + 1 < len { b[k + 1] } else { 0.0 };
                    b[k - 1] = above + 2.0 * k as f64 * a[k];
                }
                b[0] *= 0.5;
                b.truncate(len - 1);
            } else {
                b[0] = 0.0;
            }
            derivs.push(b.iter().map(|c| c / m).collect());
        }
        Ok(SampledFunction { m, derivs })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(m: f64, degree: usize, f: F) -> Result<Self> {
        let values: Vec<f64> = (0..=degree).map(|j| f(m * (std::f64::consts::PI * j as f64 / degree as f64).cos())).collect();
        Self::from_values(m, &values)
    }

    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        assert!(k <= MAX_DERIVATIVE, "derivative order {k} exceeds {MAX_DERIVATIVE}");
        let t = x / self.m;
        if t.abs() > 1.0 {
            return 0.0;
        }
        clenshaw(&self.derivs[k], t)
    }
}

fn clenshaw(a: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in a.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + a.first().copied().unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Bump(Bump),
    Sampled(SampledFunction),
}

/// Serialized form of a [`TestFunction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionSpec {
    Bump {
        #[serde(rename = "M")]
        m: f64,
    },
    Sampled {
        #[serde(rename = "M")]
        m: f64,
        values: Vec<f64>,
    },
}

impl TestFunctionSpec {
    pub fn build(&self) -> Result<TestFunction> {
        match self {
            TestFunctionSpec::Bump { m } => Ok(TestFunction::Bump(Bump::new(*m)?)),
            TestFunctionSpec::Sampled { m, values } => Ok(TestFunction::Sampled(SampledFunction::from_values(*m, values)?)),
        }
    }
}

impl TestFunction {
    pub fn bump(m: f64) -> Result<Self> {
        Ok(TestFunction::Bump(Bump::new(m)?))
    }

    /// Support radius `M`.
    pub fn support(&self) -> f64 {
        match self {
            TestFunction::Bump(b) => b.m,
            TestFunction::Sampled(s) => s.m,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        match self {
            TestFunction::Bump(b) => b.derivative(k, x),
            TestFunction::Sampled(s) => s.derivative(k, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson, independent of the adaptive integrator.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn normalization() {
        let b = Bump::new(1.0).unwrap();
        let oracle = 1.0 / simpson(|t| if t.abs() < 1.0 { (-1.0 / (1.0 - t * t)).exp() } else { 0.0 }, -1.0, 1.0, 200_000);
        assert!((b.c - oracle).abs() < 1e-10);
        assert!((b.c - 2.25229).abs() < 1e-5);
        for m in [1.0, 2.5] {
            let f = TestFunction::bump(m).unwrap();
            assert!((simpson(|x| f.value(x), -m, m, 200_000) - 1.0).abs() < 1e-10);
        }
        assert!(Bump::new(0.0).is_err());
    }

    #[test]
    fn flat_edges_and_symmetry() {
        let f = TestFunction::bump(1.5).unwrap();
        assert_eq!(f.value(1.5), 0.0);
        assert_eq!(f.value(-1.5), 0.0);
        for k in 0..=MAX_DERIVATIVE {
            assert!(f.derivative(k, 1.5 * (1.0 - 1e-6)).abs() < 1e-30);
            assert!(f.derivative(k, -1.5 * (1.0 - 1e-6)).abs() < 1e-30);
        }
        for x in [0.1, 0.7, 1.3] {
            assert_eq!(f.value(x), f.value(-x));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = TestFunction::bump(1.0).unwrap();
        let h = 1e-3;
        for k in 0..6 {
            for x in [-0.6, -0.2, 0.05, 0.45] {
                let d = |t: f64| f.derivative(k, t);
                let fd = (8.0 * (d(x + h) - d(x - h)) - (d(x + 2.0 * h) - d(x - 2.0 * h))) / (12.0 * h);
                let exact = f.derivative(k + 1, x);
                assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "k={k} x={x}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn sampled_reproduces_polynomials() {
        let s = SampledFunction::from_fn(2.0, 8, |x| x.powi(3) - x).unwrap();
        for x in [-1.7, 0.0, 0.9] {
            assert!((s.derivative(0, x) - (x.powi(3) - x)).abs() < 1e-12);
            assert!((s.derivative(1, x) - (3.0 * x * x - 1.0)).abs() < 1e-11);
            assert!((s.derivative(2, x) - 6.0 * x).abs() < 1e-10);
            assert!(s.derivative(4, x).abs() < 1e-8);
        }
        assert_eq!(s.derivative(0, 2.5), 0.0);
        let spec: TestFunctionSpec = serde_json::from_str(r#"{"kind":"bump","M":1}"#).unwrap();
        assert_eq!(spec.build().unwrap().support(), 1.0);
    }
}
