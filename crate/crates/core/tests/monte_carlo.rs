use mesocov::analysis::{TestFunction, TestFunctionSpec};
use mesocov::ensemble::{EnsembleSpec, EntryDistribution, Family};
use mesocov::mc::{run_experiment, ExperimentConfig, Observable};
use mesocov::rng::RngStream;
use mesocov::spectral::{eigen_decompose, linear_statistic, msc_stieltjes, Sign};
use mesocov::window::{GreenWindow, SpectralWindow};
use num_complex::Complex64;

fn config(spec: EnsembleSpec, n_samples: u64, observables: Vec<Observable>) -> ExperimentConfig {
    ExperimentConfig { spec, n_samples, batch_count: 20, master_seed: 11, observables }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let window = GreenWindow::centered(0.1, 0.2, 0.05).unwrap();
    let cfg = config(
        EnsembleSpec::gue(24),
        800,
        vec![
            Observable::GreenCovConjugate { window },
            Observable::MeanStieltjes { z_re: 0.0, z_im: 0.3 },
            Observable::PolyLinstatVariance { coeffs: vec![0.0, 1.0, 0.5] },
        ],
    );
    let one = run_experiment(&cfg, Some(1), |_| {}).unwrap();
    let mut seen = Vec::new();
    let three = run_experiment(&cfg, Some(3), |b| seen.push(b.batch)).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&three).unwrap());
    assert_eq!(seen, (0..20).collect::<Vec<u64>>());
}

#[test]
fn gaussian_samples_have_exact_trace_square_variance() {
    // tr H² = Σ h_ii² + 2Σ_{i<j} h_ij², so Var tr H² = N·2(2/N)² + 2N(N−1)(1/N)²·2 = 4 + 4/N.
    let n = 200;
    let cfg = config(EnsembleSpec::goe(n), 2000, vec![Observable::PolyLinstatVariance { coeffs: vec![0.0, 0.0, 1.0] }]);
    let r = run_experiment(&cfg, None, |_| {}).unwrap();
    let est = &r.estimates[0].estimate;
    let exact = 4.0 + 4.0 / n as f64;
    assert!((est.re - exact).abs() < 4.0 * est.stderr_re, "{est:?}");
    assert!(est.stderr_re < 0.3);
}

#[test]
fn local_law_at_mesoscopic_scale() {
    let n = 400;
    let spec = EnsembleSpec::goe(n);
    let eta = (n as f64).powf(-0.5);
    for k in 0..5 {
        let eig = eigen_decompose(&spec.sample(RngStream::new(3, k)).unwrap(), k).unwrap();
        for e in [-1.5, 0.0, 0.7] {
            let z = Complex64::new(e, eta);
            let dev = (eig.stieltjes(z) - msc_stieltjes(z)).norm();
            assert!(dev < (n as f64).powf(0.2) / (n as f64 * eta), "sample {k}, E {e}: {dev}");
        }
    }
}

#[test]
fn mean_linear_statistic_follows_density() {
    // E tr f^η(H) ≈ N ∫ η⁻¹ f(((x − E)ϱ − ω)/η) ϱ(x) dx, computed here by Simpson's rule.
    let n = 400;
    let w = SpectralWindow::new(0.0, 0.1, 0.02, 1.0).unwrap();
    let f = TestFunction::bump(1.0).unwrap();
    let rho_e = w.rho();
    let (lo, hi) = ((w.omega - w.eta) / rho_e, (w.omega + w.eta) / rho_e);
    let m = 2000;
    let h = (hi - lo) / m as f64;
    let integrand = |x: f64| f.value((x * rho_e - w.omega) / w.eta) / w.eta * (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI);
    let simpson: f64 = (0..=m).map(|i| integrand(lo + i as f64 * h) * if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 }).sum::<f64>() * h / 3.0;
    let expected = n as f64 * simpson;
    let spec = EnsembleSpec::goe(n);
    let samples = 200;
    let mean = (0..samples)
        .map(|k| linear_statistic(&eigen_decompose(&spec.sample(RngStream::new(8, k)).unwrap(), k).unwrap().eigenvalues, &w, &f, Sign::Plus))
        .sum::<f64>()
        / samples as f64;
    assert!((mean - expected).abs() < 0.05 * expected, "{mean} vs {expected}");
}

#[test]
fn two_point_entries_have_predicted_third_moment() {
    // Values 2σ w.p. 0.2 and −σ/2 w.p. 0.8: E X³ = 0.2·8 − 0.8/8 = 1.5.
    let n = 100;
    let mut spec = EnsembleSpec::goe(n);
    spec.offdiag = EntryDistribution::new(Family::TwoPoint { p: 0.2, a_over_sigma: Some(2.0) });
    let scale = (n as f64).sqrt();
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut count = 0u64;
    for k in 0..203 {
        let h = spec.sample(RngStream::new(17, k)).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                let x3 = (h.get(i, j).re * scale).powi(3);
                s1 += x3;
                s2 += x3 * x3;
                count += 1;
            }
        }
    }
    assert!(count >= 1_000_000);
    let mean = s1 / count as f64;
    let stderr = ((s2 / count as f64 - mean * mean) / count as f64).sqrt();
    assert!((mean - 1.5).abs() < 3.0 * stderr, "{mean} ± {stderr}");
}

#[test]
fn linstat_observable_evaluates_both_windows() {
    let window = SpectralWindow::new(0.0, 0.2, 0.05, 1.0).unwrap();
    let bump = TestFunctionSpec::Bump { m: 1.0 };
    let cfg = config(
        EnsembleSpec::goe(60),
        800,
        vec![Observable::LinstatCov { window, f: bump.clone(), g: bump }, Observable::Gustavsson { i: 20, j: 40 }],
    );
    let r = run_experiment(&cfg, None, |_| {}).unwrap();
    assert_eq!(r.failures, 0);
    let cov = &r.estimates[0].estimate;
    // Repulsion between the two windows makes the covariance negative.
    assert!(cov.re < 0.0 && cov.im == 0.0, "{cov:?}");
    let corr = &r.estimates[1].estimate;
    assert!(corr.re > 0.0 && corr.re < 1.0, "{corr:?}");
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(EnsembleSpec::goe(10), 100, vec![Observable::MeanStieltjes { z_re: 0.0, z_im: 1.0 }]);
    assert!(cfg.validate().is_err());
    cfg.n_samples = 800;
    assert!(cfg.validate().is_ok());
    cfg.batch_count = 10;
    assert!(cfg.validate().is_err());
    cfg.batch_count = 20;
    cfg.observables = vec![Observable::Gustavsson { i: 5, j: 11 }];
    assert!(run_experiment(&cfg, None, |_| {}).is_err());
}
