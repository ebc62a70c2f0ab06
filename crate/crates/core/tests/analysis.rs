use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ringtheta::analysis::*;
use ringtheta::dynamics::*;
use ringtheta::labframe::*;
use ringtheta::model::*;
use ringtheta::Error;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn noiseless_round_trip_all_models() {
    let times = uniform_times(20000.0, 4000);
    for model in [FitModel::N2Prob, FitModel::N3CosHighsym, FitModel::N3CosGeneric] {
        let y = synthesize(model, 8e-4, 0.01, 0.45, 0.05, 0.3, &times);
        let f = fit_tunneling_probability(&times, &y, model).unwrap();
        assert!(f.converged, "{model:?}");
        assert!(!f.frozen);
        assert!(rel(f.omega_tun, 8e-4) < 1e-6, "{model:?}: {}", f.omega_tun);
        assert!(rel(f.omega_fast, 0.01) < 1e-6);
        assert!(rel(f.a1, 0.45) < 1e-6);
        assert!(rel(f.a2, 0.05) < 1e-6);
        assert!(rel(f.phi_fast, 0.3) < 1e-6);
        assert!(f.residual_rms < 1e-8);
    }
}

#[test]
fn noisy_recovery_within_two_percent() {
    let times = uniform_times(20000.0, 4000);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let y: Vec<f64> = synthesize(FitModel::N2Prob, 8e-4, 0.01, 0.45, 0.05, 0.3, &times)
        .into_iter()
        .map(|v| v + rng.gen_range(-0.01..0.01))
        .collect();
    let f = fit_tunneling_probability(&times, &y, FitModel::N2Prob).unwrap();
    assert!(rel(f.omega_tun, 8e-4) < 0.02, "{}", f.omega_tun);
    assert!(f.covariance_diag.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn best_start_is_returned() {
    let times = uniform_times(20000.0, 1000);
    let y = synthesize(FitModel::N2Prob, 5e-4, 0.02, 0.4, 0.1, -1.0, &times);
    let f = fit_tunneling_probability(&times, &y, FitModel::N2Prob).unwrap();
    assert!(f.multistart_residuals.len() >= 5);
    for r in &f.multistart_residuals {
        assert!(f.residual_rms <= *r + 1e-15);
    }
}

#[test]
fn fast_only_series_is_frozen() {
    let times = uniform_times(5000.0, 2000);
    let y: Vec<f64> = times.iter().map(|t| 0.9 + 0.1 * (0.01 * t).cos()).collect();
    let f = fit_tunneling_probability(&times, &y, FitModel::N2Prob).unwrap();
    assert!(f.frozen);
    assert_eq!(f.omega_tun, 0.0);
    assert!(rel(f.omega_fast, 0.01) < 1e-6);
}

#[test]
fn bad_series_are_rejected() {
    let times = uniform_times(100.0, 300);
    let y = vec![0.5; 300];
    assert!(matches!(fit_tunneling_probability(&times[..100], &y[..100], FitModel::N2Prob), Err(Error::Fit(_))));
    assert!(matches!(
        fit_tunneling_probability(&times, &y[..299], FitModel::N2Prob),
        Err(Error::DimensionMismatch { .. })
    ));
    let mut nan = y.clone();
    nan[7] = f64::NAN;
    assert!(fit_tunneling_probability(&times, &nan, FitModel::N2Prob).is_err());
    let mut back = times.clone();
    back[10] = back[9];
    assert!(fit_tunneling_probability(&back, &y, FitModel::N2Prob).is_err());
}

#[test]
fn fit_report_json() {
    let times = uniform_times(20000.0, 1000);
    let y = synthesize(FitModel::N2Prob, 8e-4, 0.01, 0.45, 0.05, 0.3, &times);
    let f = fit_tunneling_probability(&times, &y, FitModel::N2Prob).unwrap();
    let v: serde_json::Value = serde_json::from_str(&f.to_json_string()).unwrap();
    assert_eq!(v["model"], "n2_prob");
    assert!(v["A1"].is_number() && v["A2"].is_number());
    let expected = synthesize(FitModel::N2Prob, 8e-4, 0.01, 0.45, 0.05, 0.3, &[1234.0])[0];
    assert!((f.predict(1234.0) - expected).abs() < 1e-6);
}

#[test]
fn periodogram_orders_by_power() {
    let times = uniform_times(20000.0, 4000);
    let y: Vec<f64> = times.iter().map(|t| (1e-3 * t).cos() + 0.2 * (0.03 * t).cos()).collect();
    let peaks = periodogram_peaks(&times, &y);
    assert!(peaks.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(rel(peaks[0].0, 1e-3) < 0.02);
    assert!(peaks.iter().take(4).any(|p| rel(p.0, 0.03) < 0.01));
}

fn table1_fit(omega: f64, theta: f64) -> FitResult {
    // Row (a) geometry: the RWA ring realized by designed drives.
    let p = ModelParams::new(2, 4, theta, omega, 150.0).unwrap();
    let graph = synthetic_level_graph(&SyntheticSpec::new(4, DEFAULT_DELTA_SEP, 2, 7)).unwrap();
    let reduced = rwa_reduce(&graph, &design_drives(&graph, &p).unwrap()).unwrap();
    let psi = prepare_initial_state(&InitialState::Delta { site: 0 }, &p).unwrap();
    let times = uniform_times(20000.0, 4000);
    // The reduced Hamiltonian is already in ns⁻¹.
    let tr = evolve(&reduced.hamiltonian, &psi, &times, 1.0).unwrap();
    fit_tunneling_probability(&times, &tr.site_series(0), FitModel::N2Prob).unwrap()
}

#[test]
fn table1_row_a_from_rwa_model() {
    let zero = table1_fit(1.5, 0.0);
    assert!(rel(zero.omega_tun, 8.56e-4) < 0.05, "{}", zero.omega_tun);
    let half = table1_fit(1.5, PI / 2.0);
    assert!((half.omega_tun / zero.omega_tun - 0.707).abs() < 0.03);
    assert!(table1_fit(1.5, PI).frozen);
}

#[test]
fn gap_sweep_converges_and_survives_failures() {
    let p = ModelParams::new(2, 60, 0.0, 2.0, 150.0).unwrap();
    let t = convergence_suite(SweepKind::GapVsNs, &p, &[60.0, 61.0, 120.0, 2.5]).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.failures.len(), 2);
    let gaps = t.column("E1_minus_E0").unwrap();
    assert!(rel(gaps[0], gaps[1]) < 0.005, "{gaps:?}");
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("n_s,E1_minus_E0,E1_minus_E0_DIGA"));
    assert!(convergence_suite(SweepKind::GapVsNs, &p, &[]).is_err());
}

#[test]
fn ed_over_diga_near_one_at_large_omega() {
    let p = ModelParams::new(2, 2000, 0.0, 8.0, 150.0).unwrap();
    let t = convergence_suite(SweepKind::EdDigaRatioVsOmega, &p, &[8.0]).unwrap();
    let r = t.column("ratio_ED_DIGA").unwrap()[0];
    assert!((0.9..=1.1).contains(&r), "{r}");
}

#[test]
fn fuzziness_minimized_at_alpha_equal_omega() {
    let p = ModelParams::new(2, 120, 0.0, 4.0, 150.0).unwrap();
    let t = convergence_suite(SweepKind::FuzzinessVsAlpha, &p, &[2.0, 4.0, 6.0, 8.0]).unwrap();
    assert!(t.failures.is_empty());
    let a2 = t.column("A2_abs").unwrap();
    let best = a2.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(best, 1, "{a2:?}");
}
