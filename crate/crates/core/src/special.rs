//! Sine integral.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

/// Si(x) = ∫_0^x sin(t)/t dt, accurate to about 1e-15 absolute.
///
/// Power series below 2, continued fraction for E1(ix) above.
pub fn si(x: f64) -> f64 {
    let t = x.abs();
    let v = if t < 2.0 { si_series(t) } else { si_cf(t) };
    v.copysign(x)
}

fn si_series(t: f64) -> f64 {
    let t2 = t * t;
    let mut term = t; // t^(2k+1)/(2k+1)!
    let mut sum = t;
    for k in 1..60 {
        let a = (2 * k) as f64;
        term *= -t2 / (a * (a + 1.0));
        let add = term / (a + 1.0);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Lentz on the continued fraction of exp(ix) E1(ix).
fn si_cf(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(1.0, t);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..10_000 {
        let a = -((i - 1) * (i - 1)) as f64;
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h *= Complex64::new(t.cos(), -t.sin());
    FRAC_PI_2 + h.im
}
