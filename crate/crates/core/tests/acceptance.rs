//! Acceptance suite. Runs every criterion, prints one `PASS`/`FAIL` line per
//! check with the measured value and its tolerance, and exits non-zero if any
//! check fails. Runs without the libtest harness so the report is always
//! shown.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use ringtheta::analysis::*;
use ringtheta::detfunc::*;
use ringtheta::dynamics::*;
use ringtheta::labframe::*;
use ringtheta::model::*;
use ringtheta::semiclassics::*;
use ringtheta::spectral::*;
use ringtheta::Result;

#[derive(Default)]
struct Report {
    passed: usize,
    failed: Vec<String>,
}

impl Report {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {what}: {detail}");
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(format!("[{id}] {what}"));
        }
    }

    /// Records an error that stopped a criterion from being evaluated.
    fn run(&mut self, id: &str, f: impl FnOnce(&mut Report) -> Result<()>) {
        let start = Instant::now();
        if let Err(e) = f(self) {
            self.check(id, "evaluation", false, format!("error: {e}"));
        }
        println!("     [{id}] {:.1} s", start.elapsed().as_secs_f64());
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// 1. Doublet degeneracy at θ = π for n = 2.
fn degeneracy_at_pi(r: &mut Report) -> Result<()> {
    for omega in [1.5, 2.0, 3.0] {
        for ns in [4usize, 8, 120] {
            let e = eigenvalues(&build_ring_hamiltonian(&ModelParams::new(2, ns, PI, omega, 1.0)?)?)?;
            let gap = (e[1] - e[0]).abs();
            let tol = 1e-10 * omega;
            r.check("1", &format!("|E1-E0| at pi, omega={omega}, n_s={ns}"), gap < tol, format!("{gap:.3e} < {tol:.1e}"));
        }
    }
    Ok(())
}

fn site0_fit(omega: f64, theta: f64) -> Result<FitResult> {
    let p = ModelParams::new(2, 4, theta, omega, 150.0)?;
    let psi = prepare_initial_state(&InitialState::Delta { site: 0 }, &p)?;
    let times = uniform_times(20000.0, 4000);
    let tr = evolve(&build_ring_hamiltonian(&p)?, &psi, &times, p.inertia_ns)?;
    fit_tunneling_probability(&times, &tr.site_series(0), FitModel::N2Prob)
}

/// 2. Two-well tunneling frequencies versus θ.
fn two_well_table(r: &mut Report) -> Result<()> {
    for (omega, target) in [(1.5, 8.56e-4), (2.0, 5.17e-4), (3.0, 2.40e-4)] {
        let zero = site0_fit(omega, 0.0)?;
        let half = site0_fit(omega, PI / 2.0)?;
        let pi = site0_fit(omega, PI)?;
        let d = rel(zero.omega_tun, target);
        r.check(
            "2",
            &format!("omega_tun(0), omega={omega}"),
            d < 0.05,
            format!("{:.4e} ns^-1 vs {target:.2e} (rel {d:.3} < 0.05)", zero.omega_tun),
        );
        let ratio = half.omega_tun / zero.omega_tun;
        r.check(
            "2",
            &format!("omega_tun(pi/2)/omega_tun(0), omega={omega}"),
            (ratio - 0.707).abs() < 0.03,
            format!("{ratio:.4} vs 0.707 +- 0.03"),
        );
        r.check(
            "2",
            &format!("omega_tun(pi) frozen, omega={omega}"),
            pi.frozen && pi.omega_tun < 2e-5,
            format!("frozen={} omega_tun={:.2e} < 2e-5", pi.frozen, pi.omega_tun),
        );
    }
    Ok(())
}

fn three_well_run(theta: f64, horizon: f64) -> Result<Trajectory> {
    let p = ModelParams::new(3, 6, theta, 3.0, 300.0)?;
    let psi = prepare_initial_state(&InitialState::Delta { site: 0 }, &p)?;
    evolve(&build_ring_hamiltonian(&p)?, &psi, &uniform_times(horizon, 4000), p.inertia_ns)
}

/// 3. Three-well ⟨cos x⟩ frequencies and ⟨sin x⟩ symmetry.
fn three_well_table(r: &mut Report) -> Result<()> {
    let horizon = 10000.0;
    let times = uniform_times(horizon, 4000);
    let mut fits = Vec::new();
    for (theta, model) in [(0.0, FitModel::N3CosHighsym), (PI / 2.0, FitModel::N3CosGeneric), (PI, FitModel::N3CosHighsym)] {
        let tr = three_well_run(theta, horizon)?;
        fits.push(fit_tunneling_probability(&times, &tr.cos_series(), model)?);
        if theta != PI / 2.0 {
            let s = tr.sin_series().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            r.check("3", &format!("max |<sin x>| at theta={theta:.3}"), s < 0.02, format!("{s:.2e} < 0.02"));
        }
    }
    let d0 = rel(fits[0].omega_tun, 8.20e-4);
    r.check("3", "omega_tun(0)", d0 < 0.1, format!("{:.4e} vs 8.20e-4 (rel {d0:.3} < 0.1)", fits[0].omega_tun));
    let dp = rel(fits[2].omega_tun, 8.85e-4);
    r.check("3", "omega_tun(pi)", dp < 0.1, format!("{:.4e} vs 8.85e-4 (rel {dp:.3} < 0.1)", fits[2].omega_tun));
    let ratio = fits[0].omega_tun / fits[1].omega_tun;
    let dr = rel(ratio, 3f64.sqrt());
    r.check("3", "omega_tun(0)/omega_tun(pi/2)", dr < 0.1, format!("{ratio:.4} vs sqrt(3) (rel {dr:.3} < 0.1)"));
    Ok(())
}

/// 4. Fluctuation determinant ratios.
fn determinants(r: &mut Report) -> Result<()> {
    let config = GyConfig::default();
    let odd = gy_ratio_odd(&config)?;
    r.check("4", "odd-sector ratio", (odd.ratio - 0.5).abs() < 1e-6, format!("{:.12} vs 0.5 +- 1e-6", odd.ratio));
    let even = gy_ratio_even_primed(&config)?;
    r.check(
        "4",
        "even-sector primed ratio",
        (even.extrapolated - 0.5).abs() < 1e-3,
        format!("{:.10} vs 0.5 +- 1e-3", even.extrapolated),
    );
    let fd = fd_determinant_oracle(&config, 4000)?;
    let d_odd = (fd.ratio_odd - odd.ratio).abs();
    r.check("4", "finite-difference odd ratio", d_odd < 1e-3, format!("{:.7} (diff {d_odd:.2e} < 1e-3)", fd.ratio_odd));
    let d_even = (fd.ratio_even_primed - even.extrapolated).abs();
    r.check(
        "4",
        "finite-difference even ratio",
        d_even < 1e-2,
        format!("{:.7} (diff {d_even:.2e} < 1e-2)", fd.ratio_even_primed),
    );
    Ok(())
}

/// 5. Internal consistency of the instanton-gas formulas.
fn instanton_gas(r: &mut Report) -> Result<()> {
    let thetas = [0.0, 0.4, PI / 2.0, 2.0, PI, -1.1];
    let omegas = [1.0, 3.0, 8.0];
    let mut spec_dev: f64 = 0.0;
    let mut sum_dev: f64 = 0.0;
    for n in 2..=8 {
        for &omega in &omegas {
            for &theta in &thetas {
                let e = eigenvalues(&diga_effective_hamiltonian(n, omega, theta)?)?;
                let mut expected = diga_spectrum(n, omega, theta);
                expected.sort_by(f64::total_cmp);
                for (a, b) in e.iter().zip(&expected) {
                    spec_dev = spec_dev.max((a - b).abs());
                }
                for from in 0..n {
                    for t in [0.0, 13.0, 700.0, 9.0e4] {
                        let p = diga_well_probabilities(n, omega, theta, from, t)?;
                        sum_dev = sum_dev.max((p.iter().sum::<f64>() - 1.0).abs());
                    }
                }
            }
        }
    }
    r.check("5", "H_wells spectrum vs E_k(theta), n=2..8", spec_dev < 1e-12, format!("{spec_dev:.2e} < 1e-12"));
    r.check("5", "sum of well probabilities", sum_dev < 1e-12, format!("{sum_dev:.2e} < 1e-12"));

    // Propagating H_wells against the closed forms.
    let omega = 3.0;
    let mut exp_dev: f64 = 0.0;
    let times = [0.0, 5.0, 60.0, 450.0, 2000.0];
    for n in [2usize, 3] {
        let wd = omega * instanton_density(n, omega);
        for theta in [0.0, 0.7, PI / 2.0, PI] {
            let mut start = vec![Complex64::new(0.0, 0.0); n];
            start[0] = Complex64::new(1.0, 0.0);
            let tr = evolve(&diga_effective_hamiltonian(n, omega, theta)?, &StateVector::new(start)?, &times, 1.0)?;
            for (rec, &t) in tr.records.iter().zip(&times) {
                let closed = match n {
                    2 => {
                        let c = (2.0 * wd * (theta / 2.0).cos() * t).cos();
                        vec![c * c, 1.0 - c * c]
                    }
                    _ if theta == PI / 2.0 => {
                        let u = 3f64.sqrt() / 2.0 * wd * t;
                        let s2 = u.sin().powi(2);
                        let p1 = 16.0 / 9.0 * s2 * (u - PI / 6.0).cos().powi(2);
                        let p2 = 16.0 / 9.0 * s2 * (u + PI / 6.0).cos().powi(2);
                        vec![1.0 - p1 - p2, p1, p2]
                    }
                    _ if theta == 0.0 || theta == PI => {
                        let c = (3.0 * wd * t).cos();
                        vec![(5.0 + 4.0 * c) / 9.0, (2.0 - 2.0 * c) / 9.0, (2.0 - 2.0 * c) / 9.0]
                    }
                    // Generic θ: the mode sum itself.
                    _ => diga_well_probabilities(n, omega, theta, 0, t)?,
                };
                for (a, b) in rec.probabilities.iter().zip(&closed) {
                    exp_dev = exp_dev.max((a - b).abs());
                }
            }
        }
    }
    r.check("5", "matrix exponential vs closed forms", exp_dev < 1e-10, format!("{exp_dev:.2e} < 1e-10"));

    let mut chi_dev: f64 = 0.0;
    for (n, omega) in [(2usize, 2.0), (2, 6.0), (3, 3.0), (4, 6.0), (6, 10.0)] {
        // Balances O(h²/n²) truncation against cancellation with ω/2.
        let h = 3e-3;
        let e = |th: f64| diga_spectrum(n, omega, th)[0];
        let fd = (e(h) - 2.0 * e(0.0) + e(-h)) / (h * h);
        chi_dev = chi_dev.max(rel(fd, topological_susceptibility(n, omega)));
    }
    r.check("5", "chi_t vs second difference of E_0", chi_dev < 1e-6, format!("rel {chi_dev:.2e} < 1e-6"));
    Ok(())
}

/// 6. Lattice convergence and the ED / instanton-gas gap ratio.
fn convergence(r: &mut Report) -> Result<()> {
    for omega in [2.0, 8.0] {
        let coarse = doublet_gap_dense(&ModelParams::new(2, 60, 0.0, omega, 1.0)?)?;
        let fine = doublet_gap_dense(&ModelParams::new(2, 120, 0.0, omega, 1.0)?)?;
        let d = rel(coarse, fine);
        r.check(
            "6",
            &format!("gap change n_s 60 -> 120, omega={omega}"),
            d < 0.01,
            format!("{coarse:.6e} -> {fine:.6e} (rel {d:.4} < 0.01)"),
        );
    }
    let grid = [4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0];
    for (ns, label) in [(500usize, "smoke"), (2000, "full")] {
        let params = ModelParams::new(2, ns, 0.0, 4.0, 1.0)?;
        let table = convergence_suite(SweepKind::EdDigaRatioVsOmega, &params, &grid)?;
        for f in &table.failures {
            r.check("6", &format!("ED/DIGA ratio at n_s={ns} ({label})"), false, format!("{f:?}"));
        }
        let omegas = table.column("omega").unwrap_or_default();
        let ratios = table.column("ratio_ED_DIGA").unwrap_or_default();
        for (omega, ratio) in omegas.iter().zip(&ratios) {
            r.check(
                "6",
                &format!("ED/DIGA ratio, omega={omega}, n_s={ns} ({label})"),
                (0.8..=1.2).contains(ratio),
                format!("{ratio:.4} in [0.8, 1.2]"),
            );
        }
    }
    Ok(())
}

/// Max site-population deviation between the lab-frame and rotating-wave
/// propagations over `horizon` ns.
fn lab_deviation(graph: &LevelGraph, omega_rabi: f64, delta: f64, horizon: f64) -> Result<f64> {
    let p = map_experimental_params(omega_rabi, delta, 2, 4)?.to_model_params(0.0)?;
    let drives = design_drives(graph, &p)?;
    let rwa = rwa_reduce(graph, &drives)?;
    let psi = prepare_initial_state(&InitialState::Delta { site: 0 }, &p)?;
    let times = uniform_times(horizon, 1001);
    let lab = simulate_lab_frame(graph, &drives, &graph.embed_ring_state(&psi)?, &times, &LabIntegratorConfig::default())?;
    let reference = evolve(&rwa.hamiltonian, &psi, &times, 1.0)?;
    let mut dev: f64 = 0.0;
    for (a, b) in lab.trajectory.records.iter().zip(&reference.records) {
        for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
            dev = dev.max((x - y).abs());
        }
    }
    Ok(dev)
}

/// 7. Lab frame versus rotating-wave model.
fn lab_frame(r: &mut Report) -> Result<()> {
    let (om, de) = (0.00135, 0.00375);
    let spectators = synthetic_level_graph(&SyntheticSpec::new(4, DEFAULT_DELTA_SEP, 2, 7))?;
    r.check(
        "7",
        "synthetic spectator separation",
        spectators.delta_sep() >= DEFAULT_DELTA_SEP,
        format!("{:.4} >= {DEFAULT_DELTA_SEP} ns^-1", spectators.delta_sep()),
    );
    let full = lab_deviation(&spectators, om, de, 5000.0)?;
    r.check("7", "lab vs RWA max deviation over 5000 ns", full < 0.05, format!("{full:.4} < 0.05"));
    let halved = lab_deviation(&spectators, om / 2.0, de / 2.0, 5000.0)?;
    r.check(
        "7",
        "halving (Omega, Delta) halves the deviation",
        halved <= 0.5 * full,
        format!("{halved:.4} <= {:.4}", 0.5 * full),
    );
    let bare = synthetic_level_graph(&SyntheticSpec::new(4, DEFAULT_DELTA_SEP, 0, 7))?;
    let without = lab_deviation(&bare, om, de, 5000.0)?;
    r.check("7", "deviation without spectators", without < 0.05, format!("{without:.4} < 0.05"));
    Ok(())
}

/// 8. Three-well θ = 0 / π equivalence and the θ = π/2 asymmetry.
fn global_inconsistency(r: &mut Report) -> Result<()> {
    let horizon = 10000.0;
    let zero = three_well_run(0.0, horizon)?;
    let pi = three_well_run(PI, horizon)?;
    let (wz, wp) = (zero.well_series(3)?, pi.well_series(3)?);
    let mut diff: f64 = 0.0;
    for (a, b) in wz.iter().zip(&wp) {
        for (x, y) in a.iter().zip(b) {
            diff = diff.max((x - y).abs());
        }
    }
    r.check(
        "8",
        "max |P_wells(theta=0) - P_wells(theta=pi)| over 10000 ns",
        diff < 0.05,
        format!("{diff:.4} < 0.05"),
    );

    // Quarter period u = (√3/2)·ωd·t = π/4 of the θ = π/2 closed forms, with
    // ωd taken from the exact θ = 0 splitting E₁ − E₀ = 3ωd.
    let p = ModelParams::new(3, 6, PI / 2.0, 3.0, 300.0)?;
    let e = eigenvalues(&build_ring_hamiltonian(&p.with_theta(0.0))?)?;
    let wd = (e[1] - e[0]) / 3.0;
    let t_ns = PI / 4.0 / (3f64.sqrt() / 2.0 * wd) * p.inertia_ns;
    let psi = prepare_initial_state(&InitialState::Delta { site: 0 }, &p)?;
    let tr = evolve(&build_ring_hamiltonian(&p)?, &psi, &[t_ns], p.inertia_ns)?;
    let wells = tr.well_series(3)?;
    let split = wells[0][1] - wells[0][2];
    r.check(
        "8",
        "P(well 1) - P(well 2) at theta=pi/2, quarter period",
        split.abs() > 0.1,
        format!("{split:.4} at t = {t_ns:.1} ns (|.| > 0.1)"),
    );
    Ok(())
}

/// 9. Fast-component amplitude versus initial width.
fn width_study(r: &mut Report) -> Result<()> {
    let p = ModelParams::new(2, 120, 0.0, 4.0, 150.0)?;
    let alphas = [2.0, 4.0, 6.0, 8.0];
    let table = convergence_suite(SweepKind::FuzzinessVsAlpha, &p, &alphas)?;
    let a2 = table.column("A2_abs").unwrap_or_default();
    let best = table
        .column("alpha")
        .unwrap_or_default()
        .into_iter()
        .zip(&a2)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(alpha, _)| alpha);
    r.check(
        "9",
        "|A2| minimized at alpha = omega = 4",
        table.failures.is_empty() && best == Some(4.0),
        format!("|A2| = {} over alpha = {alphas:?}", a2.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")),
    );
    Ok(())
}

fn main() -> ExitCode {
    // Accept (and ignore) libtest arguments such as `--nocapture` or filters.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut report = Report::default();
    report.run("1", degeneracy_at_pi);
    report.run("2", two_well_table);
    report.run("3", three_well_table);
    report.run("4", determinants);
    report.run("5", instanton_gas);
    report.run("6", convergence);
    report.run("7", lab_frame);
    report.run("8", global_inconsistency);
    report.run("9", width_study);
    println!("\nacceptance: {} passed, {} failed", report.passed, report.failed.len());
    for f in &report.failed {
        println!("  failed: {f}");
    }
    if report.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
