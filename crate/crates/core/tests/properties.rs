use mesocov::analysis::{cauchy_reconstruct, TestFunction};
use mesocov::formal::{exponents, parse_monomial, Atom, Exponent, Factor, FormalMonomial, Label};
use mesocov::mc::{Estimator, McEstimate, PairAccumulator};
use mesocov::spectral::{msc_stieltjes, semicircle_cdf, quantile};
use mesocov::theory::{f_functions, g_functions};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn m_solves_quadratic_in_upper_half_plane(re in -6.0f64..6.0, log_im in -6.0f64..1.0) {
        let z = c(re, 10f64.powf(log_im));
        let m = msc_stieltjes(z);
        prop_assert!((m * m + z * m + 1.0).norm() < 1e-12);
        prop_assert!(m.im > 0.0);
        prop_assert!(m.norm() <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn boundary_limits_reproduce_g_functions(x1 in -1.8f64..1.8, x2 in -1.8f64..1.8) {
        prop_assume!((x1 - x2).abs() > 1e-3);
        let eps = 1e-7;
        let pm = f_functions(c(x1, eps), c(x2, -eps)).unwrap();
        let pp = f_functions(c(x1, eps), c(x2, eps)).unwrap();
        let g = g_functions(x1, x2).unwrap();
        let tol = |v: f64| 1e-5 * v.abs().max(1.0);
        prop_assert!((g.g1 - (2.0 * pm.f2.re - 2.0 * pp.f5.re)).abs() < tol(g.g1));
        prop_assert!((g.g2 - (2.0 * pm.f3.re - 2.0 * pp.f6.re)).abs() < tol(g.g2));
        prop_assert!((g.g3 - (2.0 * pm.f4.re - 2.0 * pp.f7.re)).abs() < tol(g.g3));
        let (m1, m2) = (msc_stieltjes(c(x1, eps)), msc_stieltjes(c(x2, eps)));
        let kk = ((4.0 - x1 * x1) * (4.0 - x2 * x2)).sqrt();
        let g4 = (2.0 * (m1 * m2.conj()).re + 2.0 * (m1 * m2).re) / kk;
        prop_assert!((g.g4 - g4).abs() < tol(g.g4));
    }

    #[test]
    fn quantile_inverts_cdf(n in 2usize..5000, frac in 0.0f64..1.0) {
        let k = ((frac * n as f64) as usize).clamp(1, n);
        let g = quantile(k, n).unwrap();
        prop_assert!((semicircle_cdf(g) - k as f64 / n as f64).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn almost_analytic_reconstruction(lambda in -0.95f64..0.95, a in 0.1f64..=1.0, k in 2usize..=6) {
        let f = TestFunction::bump(1.0).unwrap();
        let r = cauchy_reconstruct(&f, lambda, a, k).unwrap();
        prop_assert!((r.value - f.value(lambda)).abs() < 1e-6, "k {} a {} λ {}: {} vs {}", k, a, lambda, r.value, f.value(lambda));
    }
}

fn pairs(seed: u64, n: usize) -> Vec<(Complex64, Complex64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = c(rng.random::<f64>() * 1e3, rng.random::<f64>() - 0.5);
            (x, x * 0.3 + c(rng.random::<f64>(), 1e-3 * rng.random::<f64>()))
        })
        .collect()
}

fn fold(data: &[(Complex64, Complex64)]) -> PairAccumulator {
    let mut a = PairAccumulator::default();
    for &(x, y) in data {
        a.push(x, y);
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn merge_is_associative(seed in any::<u64>(), cut1 in 0usize..200, cut2 in 0usize..200) {
        let data = pairs(seed, 200);
        let (i, j) = (cut1.min(cut2), cut1.max(cut2));
        let (a, b, d) = (fold(&data[..i]), fold(&data[i..j]), fold(&data[j..]));
        let left = a.merge(&b).merge(&d);
        let right = a.merge(&b.merge(&d));
        let whole = fold(&data);
        for acc in [&left, &right] {
            prop_assert_eq!(acc.n, whole.n);
            let (p, q) = (acc.covariance(), whole.covariance());
            prop_assert!((p - q).norm() <= 1e-12 * q.norm().max(1.0), "{} vs {}", p, q);
            prop_assert!((acc.mean_x - whole.mean_x).norm() <= 1e-12 * whole.mean_x.norm().max(1.0));
        }
    }
}

#[test]
fn covariance_estimator_is_unbiased() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    // Y = conj(c X + W) with X, W standard complex normals (E|X|² = 2), so the
    // bilinear covariance E[(X − EX)(Y − EY)] is conj(c)·2.
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2024);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let batches = 20;
    let per = 5_000;
    let coef = c(0.6, -0.2);
    let mut accs = vec![PairAccumulator::default(); batches];
    for acc in accs.iter_mut() {
        for _ in 0..per {
            let x = c(draw(), draw()) + 3.0;
            let w = c(draw(), draw());
            acc.push(x, (coef * x).conj() + w.conj());
        }
    }
    let est = McEstimate::from_batches(&accs, Estimator::Covariance, 0);
    assert_eq!(est.n_samples, 100_000);
    let truth = coef.conj() * 2.0;
    assert!((est.re - truth.re).abs() <= 4.0 * est.stderr_re, "{est:?}");
    assert!((est.im - truth.im).abs() <= 4.0 * est.stderr_im, "{est:?}");
}

fn label() -> impl Strategy<Value = Label> {
    (prop::sample::select(vec!['A', 'B', 'F', 'G']), any::<bool>()).prop_map(|(letter, adjoint)| Label { letter, adjoint })
}

fn atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        (label(), 1u32..6).prop_map(|(label, power)| Atom::AngleUnderline { label, power }),
        (label(), 1u32..4, 1u32..7, 1u32..7).prop_map(|(label, power, row, col)| Atom::Entry { label, power, row, col }),
    ]
}

fn factor() -> impl Strategy<Value = Factor> {
    prop_oneof![
        (label(), 1u32..5).prop_map(|(label, power)| Factor { atoms: vec![Atom::Underline { label, power }] }),
        prop::collection::vec(atom(), 1..4).prop_map(|atoms| Factor { atoms }),
    ]
}

fn exponent() -> impl Strategy<Value = Exponent> {
    let coef = prop::sample::select(vec![-2.0, -1.0, 0.0, 0.5, 1.0, 3.0]);
    (-8i32..8, coef.clone(), coef).prop_map(|(k, alpha, beta)| Exponent { constant: k as f64 / 2.0, alpha, beta })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn formal_monomials_round_trip(t in exponent(), factors in prop::collection::vec(factor(), 1..5)) {
        let m = FormalMonomial { t, factors };
        let text = m.to_string();
        let back = parse_monomial(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(&back, &m);
        let r = exponents(&back, 0.6, 0.3).unwrap();
        prop_assert_eq!(r.t, t.eval(0.6, 0.3));
    }
}

#[test]
fn formal_corpus_round_trip() {
    let corpus = include_str!("data/formal_corpus.txt");
    let mut count = 0;
    for line in corpus.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let p = parse_monomial(line).unwrap_or_else(|e| panic!("{line}: {e}"));
        let again = parse_monomial(&p.to_string()).unwrap();
        assert_eq!(p, again, "{line}");
        count += 1;
    }
    assert!(count >= 10);
}

#[test]
fn formal_rejections_carry_positions() {
    for (text, column) in [("N^2 E[u(G,0)]", 12), ("N^1 E[e(G,1,i0,i1)]", 13), ("N^1 E[u(G,1) au(G,2)]", 7), ("N^{α+} E[u(G,1)]", 6)] {
        let e = parse_monomial(text).unwrap_err();
        assert_eq!(e.line, 1, "{text}");
        assert!(e.column <= column && e.column >= 4, "{text}: column {}", e.column);
        assert!(!e.message.is_empty());
    }
}
