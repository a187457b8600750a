//! Globally adaptive Gauss–Kronrod (7/15) quadrature in one and two dimensions.

use num_complex::Complex64;
use std::cell::Cell;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Values the integrator can accumulate.
pub trait Quadrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Quadrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Quadrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Stop when `error <= max(abs_tol, rel_tol * |result|)`. Relative targets
/// much below `1e-13` sit under the rounding floor and cannot be met.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadOptions {
    /// The `tol * max(1, |result|)` criterion.
    pub fn tol(tol: f64) -> Self {
        QuadOptions { abs_tol: tol, rel_tol: tol, max_subdivisions: 2000 }
    }

    pub fn relative(rel_tol: f64) -> Self {
        QuadOptions { abs_tol: 0.0, rel_tol, max_subdivisions: 2000 }
    }

    fn accepts(&self, err: f64, value: f64) -> bool {
        err <= self.abs_tol.max(self.rel_tol * value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub subdivisions: usize,
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic, which
/// sharpens `|K − G|` for smooth integrands and floors it at rounding level.
fn gk15<T: Quadrand, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut values = [T::zero(); 15];
    values[7] = f(c);
    for j in 0..7 {
        let x = h * XGK[j];
        values[j] = f(c - x);
        values[14 - j] = f(c + x);
    }
    let weight = |i: usize| WGK[if i <= 7 { i } else { 14 - i }];
    let mut k = T::zero();
    let mut g = values[7] * WG[3];
    let mut resabs = 0.0;
    for (i, v) in values.iter().enumerate() {
        k = k + *v * weight(i);
        resabs += weight(i) * v.magnitude();
        let j = if i <= 7 { i } else { 14 - i };
        if j % 2 == 1 && j < 7 {
            g = g + *v * WG[j / 2];
        }
    }
    let mean = k * 0.5;
    let resasc: f64 = values.iter().enumerate().map(|(i, v)| weight(i) * (*v - mean).magnitude()).sum::<f64>() * h.abs();
    let resabs = resabs * h.abs();
    let mut err = (k - g).magnitude() * h.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (k * h, err)
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration over the union of `[p_k, p_{k+1}]`.
/// Returns the best estimate even when the subdivision budget runs out.
pub fn integrate<T: Quadrand, F: FnMut(f64) -> T>(mut f: F, points: &[f64], opts: QuadOptions) -> QuadResult<T> {
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (T::zero(), 0.0);
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (v, e) = gk15(&mut f, w[0], w[1]);
        total = total + v;
        err += e;
        heap.push(Piece { a: w[0], b: w[1], value: v, error: e });
    }
    let mut subdivisions = 0;
    while !opts.accepts(err, total.magnitude()) && subdivisions < opts.max_subdivisions {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a.min(p.b) || m >= p.a.max(p.b) {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total = total - p.value + v1 + v2;
        err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
        subdivisions += 1;
        // Re-sum occasionally to shed drift in the running totals.
        if subdivisions % 256 == 0 {
            total = heap.iter().fold(T::zero(), |s, p| s + p.value);
            err = heap.iter().map(|p| p.error).sum();
        }
    }
    QuadResult { value: total, error: err, subdivisions }
}

fn finish(r: QuadResult<f64>, opts: QuadOptions) -> Result<f64> {
    if opts.accepts(r.error, r.value.abs()) {
        Ok(r.value)
    } else {
        Err(Error::Quadrature { best: r.value, error: r.error })
    }
}

/// `∫_a^b f` with `error <= tol * max(1, |result|)`.
pub fn quad1d<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let opts = QuadOptions::tol(tol);
    finish(integrate(f, &[a, b], opts), opts)
}

pub fn quad1d_split<F: FnMut(f64) -> f64>(f: F, points: &[f64], opts: QuadOptions) -> Result<f64> {
    finish(integrate(f, points, opts), opts)
}

/// Complex-valued variant; the tolerance applies to the modulus.
pub fn quad1d_complex<F: FnMut(f64) -> Complex64>(f: F, points: &[f64], opts: QuadOptions) -> Result<Complex64> {
    let r = integrate(f, points, opts);
    if opts.accepts(r.error, r.value.norm()) {
        Ok(r.value)
    } else {
        Err(Error::Quadrature { best: r.value.norm(), error: r.error })
    }
}

/// Iterated integral over the product of two partitions. The inner rule runs
/// ten times tighter than the outer one; an inner failure fails the whole call.
pub fn quad2d_split<F: Fn(f64, f64) -> f64>(f: F, xs: &[f64], ys: &[f64], opts: QuadOptions) -> Result<f64> {
    let inner_opts = QuadOptions { abs_tol: opts.abs_tol * 0.1, rel_tol: opts.rel_tol * 0.1, ..opts };
    let failure = Cell::new(None);
    let outer = integrate(
        |x| {
            let r = integrate(|y| f(x, y), ys, inner_opts);
            if !inner_opts.accepts(r.error, r.value.abs()) && failure.get().is_none() {
                failure.set(Some((r.value, r.error)));
            }
            r.value
        },
        xs,
        opts,
    );
    if let Some((_, error)) = failure.get() {
        // Inner error is absolute per line; tolerate it if it is negligible against the target.
        let width: f64 = (xs[xs.len() - 1] - xs[0]).abs();
        if !opts.accepts(error * width, outer.value.abs()) {
            return Err(Error::Quadrature { best: outer.value, error: outer.error + error * width });
        }
    }
    finish(outer, opts)
}

/// `∬_{[ax,bx]×[ay,by]} f` with `error <= tol * max(1, |result|)`.
pub fn quad2d<F: Fn(f64, f64) -> f64>(f: F, x: (f64, f64), y: (f64, f64), tol: f64) -> Result<f64> {
    quad2d_split(f, &[x.0, x.1], &[y.0, y.1], QuadOptions::tol(tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::semicircle;

    #[test]
    fn simple_integrals() {
        assert!((quad1d(|x| x * x, 0.0, 1.0, 1e-13).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((quad1d(|x| semicircle(x).rho, -2.0, 2.0, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert!((quad2d(|x, y| x * y, (0.0, 1.0), (0.0, 1.0), 1e-12).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn relative_tolerance_on_tiny_values() {
        let v = quad1d_split(|x| 1e-9 * x.exp(), &[0.0, 1.0], QuadOptions::relative(1e-10)).unwrap();
        assert!((v / (1e-9 * (1f64.exp() - 1.0)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reports_budget_exhaustion() {
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-15, max_subdivisions: 3 };
        let err = quad1d_split(|x: f64| x.sqrt().recip(), &[0.0, 1.0], opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { best, .. } if best > 1.0));
    }

    #[test]
    fn complex_integrand() {
        let v = quad1d_complex(|t| Complex64::new(0.0, t).exp(), &[0.0, std::f64::consts::PI], QuadOptions::tol(1e-12)).unwrap();
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }
}
