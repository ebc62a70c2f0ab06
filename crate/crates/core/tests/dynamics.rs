use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use ringtheta::dynamics::*;
use ringtheta::model::*;
use ringtheta::Error;

fn delta(p: &ModelParams, site: usize) -> StateVector {
    prepare_initial_state(&InitialState::Delta { site }, p).unwrap()
}

#[test]
fn delta_state_is_a_unit_vector() {
    let p = ModelParams::new(2, 4, 0.0, 1.5, 150.0).unwrap();
    let s = delta(&p, 0);
    assert_eq!(s.probabilities(), vec![1.0, 0.0, 0.0, 0.0]);
    assert!(prepare_initial_state(&InitialState::Delta { site: 4 }, &p).is_err());
}

#[test]
fn cosine_power_family() {
    let p = ModelParams::new(2, 120, 0.0, 4.0, 150.0).unwrap();
    let flat = prepare_initial_state(&InitialState::CosinePower { alpha: 0.0, center_site: 0 }, &p).unwrap();
    for a in flat.amplitudes() {
        assert!((a.re - 1.0 / 120f64.sqrt()).abs() < 1e-15);
    }
    let peaked = prepare_initial_state(&InitialState::CosinePower { alpha: 4.0, center_site: 0 }, &p).unwrap();
    let amp = peaked.amplitudes();
    let peak = amp.iter().map(|a| a.norm()).fold(0.0, f64::max);
    assert_eq!(amp[0].norm(), peak);
    assert!(amp[60].norm() < 1e-9 * peak);
    assert!(prepare_initial_state(&InitialState::CosinePower { alpha: -1.0, center_site: 0 }, &p).is_err());
    assert!(prepare_initial_state(&InitialState::CosinePower { alpha: 1.0, center_site: 120 }, &p).is_err());
}

#[test]
fn initial_state_json_shape() {
    let s: InitialState = serde_json::from_str(r#"{"kind": "cosine_power", "alpha": 2.0, "center_site": 3}"#).unwrap();
    assert_eq!(s, InitialState::CosinePower { alpha: 2.0, center_site: 3 });
    assert!(serde_json::from_str::<InitialState>(r#"{"kind": "delta", "site": 1, "x": 0}"#).is_err());
}

#[test]
fn zero_time_returns_initial_state() {
    let p = ModelParams::new(2, 8, 0.4, 2.0, 150.0).unwrap();
    let h = build_ring_hamiltonian(&p).unwrap();
    let psi = delta(&p, 3);
    let tr = evolve(&h, &psi, &[0.0, 10.0], p.inertia_ns).unwrap();
    for (a, b) in tr.states[0].iter().zip(psi.amplitudes()) {
        assert!((a - b).norm() < 1e-14);
    }
    let rec = &tr.records[0];
    assert!((rec.probabilities[3] - 1.0).abs() < 1e-14);
}

#[test]
fn delta_observables_at_origin() {
    let p = ModelParams::new(2, 8, 0.0, 2.0, 150.0).unwrap();
    let h = build_ring_hamiltonian(&p).unwrap();
    let tr = evolve(&h, &delta(&p, 0), &[0.0], p.inertia_ns).unwrap();
    assert!((tr.records[0].cos_x - 1.0).abs() < 1e-14);
    assert!(tr.records[0].sin_x.abs() < 1e-14);
    let (c, s) = circle_moments(&[0.125; 8]);
    assert!(c.abs() < 1e-15 && s.abs() < 1e-15);
}

#[test]
fn unitarity_and_energy_conservation() {
    let p = ModelParams::new(2, 40, 0.9, 2.0, 150.0).unwrap();
    let h = build_ring_hamiltonian(&p).unwrap();
    let psi = prepare_initial_state(&InitialState::CosinePower { alpha: 2.0, center_site: 0 }, &p).unwrap();
    let tr = evolve(&h, &psi, &uniform_times(20000.0, 300), p.inertia_ns).unwrap();
    assert!(tr.norm_drift() < 1e-9);
    let e0 = tr.records[0].energy;
    for r in &tr.records {
        assert!(((r.energy - e0) / e0).abs() < 1e-10);
        assert!((r.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn frozen_tunnelling_at_pi() {
    let p = ModelParams::new(2, 4, PI, 1.5, 150.0).unwrap();
    let h = build_ring_hamiltonian(&p).unwrap();
    let tr = evolve(&h, &delta(&p, 0), &uniform_times(5000.0, 2001), p.inertia_ns).unwrap();
    let peak = tr.site_series(2).into_iter().fold(0.0, f64::max);
    assert!(peak < 0.05, "{peak}");
}

#[test]
fn odd_n_reflection_symmetry_of_wells() {
    for theta in [0.0, PI] {
        let p = ModelParams::new(3, 6, theta, 3.0, 300.0).unwrap();
        let h = build_ring_hamiltonian(&p).unwrap();
        let tr = evolve(&h, &delta(&p, 0), &uniform_times(10000.0, 500), p.inertia_ns).unwrap();
        for w in tr.well_series(3).unwrap() {
            assert!((w[1] - w[2]).abs() < 1e-10, "θ={theta}: {w:?}");
        }
        for s in tr.sin_series() {
            assert!(s.abs() < 0.02);
        }
    }
}

#[test]
fn theta_reversal_mirrors_sites() {
    let p = ModelParams::new(2, 12, 1.1, 2.0, 150.0).unwrap();
    let times = uniform_times(3000.0, 50);
    let a = evolve(&build_ring_hamiltonian(&p).unwrap(), &delta(&p, 0), &times, p.inertia_ns).unwrap();
    let q = p.with_theta(-1.1);
    let b = evolve(&build_ring_hamiltonian(&q).unwrap(), &delta(&q, 0), &times, q.inertia_ns).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        for i in 0..12 {
            assert!((ra.probabilities[i] - rb.probabilities[(12 - i) % 12]).abs() < 1e-10);
        }
    }
}

#[test]
fn constant_ramp_matches_static_evolution() {
    let p = ModelParams::new(2, 8, 0.6, 2.0, 150.0).unwrap();
    let times = uniform_times(2000.0, 41);
    let psi = prepare_initial_state(&InitialState::CosinePower { alpha: 1.0, center_site: 0 }, &p).unwrap();
    let stat = evolve(&build_ring_hamiltonian(&p).unwrap(), &psi, &times, p.inertia_ns).unwrap();
    let ramp = evolve_theta_ramp(&p, &ThetaSchedule::constant(0.6, 2000.0), &psi, &times, 37).unwrap();
    for (a, b) in stat.states.iter().zip(&ramp.states) {
        let d = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-9, "{d}");
    }
    assert!(ramp.norm_drift() < 1e-6);
}

fn ramp_fidelity(t_end: f64) -> f64 {
    let p = ModelParams::new(2, 8, 0.0, 2.0, 1.0).unwrap();
    let psi = ground_state(&build_ring_hamiltonian(&p).unwrap()).unwrap();
    let sched = ThetaSchedule::linear(0.0, 0.0, t_end, 0.9 * PI);
    let tr = evolve_theta_ramp(&p, &sched, &psi, &[0.0, t_end], DEFAULT_RAMP_STEPS).unwrap();
    assert!(tr.norm_drift() < 1e-6);
    *tr.ground_fidelity.unwrap().last().unwrap()
}

#[test]
fn slow_ramp_is_adiabatic_and_monotone() {
    let grid = [320.0, 160.0, 80.0, 40.0, 20.0, 10.0];
    let f: Vec<f64> = grid.iter().map(|&t| ramp_fidelity(t)).collect();
    assert!(f[0] >= 0.99, "{f:?}");
    // Doubling the ramp speed never improves the final fidelity.
    assert!(f.windows(2).all(|w| w[1] <= w[0]), "{f:?}");
}

#[test]
fn ramp_schedule_must_cover_the_run() {
    let p = ModelParams::new(2, 8, 0.0, 2.0, 1.0).unwrap();
    let psi = delta(&p, 0);
    let sched = ThetaSchedule::linear(0.0, 0.0, 10.0, 1.0);
    assert!(matches!(evolve_theta_ramp(&p, &sched, &psi, &[0.0, 20.0], 10), Err(Error::ScheduleGap(_))));
    assert!(evolve_theta_ramp(&p, &ThetaSchedule { knots: vec![] }, &psi, &[0.0], 10).is_err());
    assert!(evolve_theta_ramp(&p, &sched, &psi, &[0.0, 5.0], 0).is_err());
}

#[test]
fn schedule_interpolates_linearly() {
    let s = ThetaSchedule { knots: vec![(0.0, 0.0), (10.0, 1.0), (20.0, -1.0)] };
    assert_eq!(s.theta_at(5.0), Some(0.5));
    assert_eq!(s.theta_at(15.0), Some(0.0));
    assert_eq!(s.theta_at(20.0), Some(-1.0));
    assert_eq!(s.theta_at(21.0), None);
}

#[test]
fn bad_inputs_are_rejected() {
    let p = ModelParams::new(2, 8, 0.0, 2.0, 1.0).unwrap();
    let h = build_ring_hamiltonian(&p).unwrap();
    let short = StateVector::normalized(vec![Complex64::new(1.0, 0.0); 4]).unwrap();
    assert!(matches!(evolve(&h, &short, &[0.0], 1.0), Err(Error::DimensionMismatch { .. })));
    assert!(evolve(&h, &delta(&p, 0), &[1.0, 0.5], 1.0).is_err());
    assert!(evolve(&h, &delta(&p, 0), &[], 1.0).is_err());
    assert!(StateVector::new(vec![Complex64::new(2.0, 0.0)]).is_err());
    assert!(StateVector::normalized(vec![Complex64::new(0.0, 0.0); 3]).is_err());
}

#[test]
fn wells_split_barrier_sites() {
    let w = aggregate_wells(&[0.1, 0.2, 0.3, 0.4], 2).unwrap();
    assert!((w[0] - (0.1 + 0.2 / 2.0 + 0.4 / 2.0)).abs() < 1e-15);
    assert!((w[1] - (0.3 + 0.2 / 2.0 + 0.4 / 2.0)).abs() < 1e-15);
    assert!(aggregate_wells(&[0.5; 5], 2).is_err());
}

#[test]
fn observables_match_trajectory_records() {
    let p = ModelParams::new(3, 12, 0.3, 3.0, 300.0).unwrap();
    let h = build_ring_hamiltonian(&p).unwrap();
    let tr = evolve(&h, &delta(&p, 0), &uniform_times(100.0, 5), p.inertia_ns).unwrap();
    let obs = observables(&tr, &p, true).unwrap();
    for (o, r) in obs.iter().zip(&tr.records) {
        assert_eq!(o.cos_x, r.cos_x);
        let w = o.wells.as_ref().unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn trajectory_csv_layout() {
    let p = ModelParams::new(2, 4, 0.0, 1.5, 150.0).unwrap();
    let h = build_ring_hamiltonian(&p).unwrap();
    let tr = evolve(&h, &delta(&p, 0), &uniform_times(100.0, 3), p.inertia_ns).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let table = ringtheta::io::read_table(&text).unwrap();
    assert_eq!(table.header, ["time_ns", "P_0", "P_1", "P_2", "P_3", "cos_x", "sin_x", "norm", "energy"]);
    assert_eq!(table.rows.len(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_preserves_norm(ns in 2usize..16, theta in -PI..PI, omega in 0.5f64..6.0, t in 0.0f64..1e5) {
        let p = ModelParams::new(2, 2 * ns, theta, omega, 150.0).unwrap();
        let h = build_ring_hamiltonian(&p).unwrap();
        let tr = evolve(&h, &delta(&p, 0), &[0.0, t], p.inertia_ns).unwrap();
        prop_assert!(tr.norm_drift() < 1e-9);
        let e = &tr.records;
        prop_assert!(((e[1].energy - e[0].energy) / e[0].energy).abs() < 1e-10);
    }
}
