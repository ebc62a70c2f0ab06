//! One function per subcommand. Each takes a resolved [`RunConfig`] and
//! writes its files through an [`Output`].

use std::f64::consts::PI;
use std::path::PathBuf;

use ringtheta::analysis::{convergence_suite, fit_tunneling_probability, FitModel, SweepKind};
use ringtheta::detfunc::{gy_report, GyConfig};
use ringtheta::dynamics::{
    evolve, evolve_theta_ramp, ground_state, prepare_initial_state, uniform_times, InitialState, ThetaSchedule,
    DEFAULT_RAMP_STEPS, DEFAULT_SAMPLES,
};
use ringtheta::labframe::{
    build_level_graph, design_drives, map_experimental_params, rwa_reduce, simulate_lab_frame, DriveSet,
    LabIntegratorConfig, LevelGraphSource, DEFAULT_DELTA_SEP, DEFAULT_RING_SEPARATION,
};
use ringtheta::model::{build_ring_hamiltonian, ModelParams};
use ringtheta::semiclassics::{diga_branches, diga_well_probabilities, instanton_quantities};
use ringtheta::spectral::{spectral_diagnostics, spectrum_sweep, uniform_grid};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Output;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Model parameters shared by several commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub n_sites: usize,
    pub theta: f64,
    pub omega: f64,
    pub inertia_ns: f64,
    pub include_constant_shift: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { n: 2, n_sites: 120, theta: 0.0, omega: 2.0, inertia_ns: 1.0, include_constant_shift: true }
    }
}

impl ModelSection {
    fn params(&self) -> Result<ModelParams, CliError> {
        let mut p = ModelParams::new(self.n, self.n_sites, self.theta, self.omega, self.inertia_ns)?;
        p.include_constant_shift = self.include_constant_shift;
        Ok(p)
    }
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subtract {
    #[default]
    None,
    Ground,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(flatten)]
    pub model: ModelSection,
    /// Number of θ points over `[theta_min, theta_max]`.
    pub theta_grid: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Branches reported; defaults to `n + 2` (capped at `n_sites`).
    pub branches: Option<usize>,
    pub subtract: Subtract,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            model: ModelSection::default(),
            theta_grid: 101,
            theta_min: -PI,
            theta_max: PI,
            branches: None,
            subtract: Subtract::None,
        }
    }
}

pub fn spectrum(run: &RunConfig<SpectrumConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    let params = c.model.params()?;
    if c.theta_grid == 0 {
        return Err(bad("theta_grid must be at least 1"));
    }
    let branches = c.branches.unwrap_or(params.n + 2).min(params.n_sites);
    let grid = uniform_grid(c.theta_min, c.theta_max, c.theta_grid);
    let result = spectrum_sweep(&params, &grid, branches, false)?;
    let energies = match c.subtract {
        Subtract::None => result.energies.clone(),
        Subtract::Ground => result.ground_subtracted(),
        Subtract::Mean => result.mean_subtracted(),
    };
    let mut header = vec!["theta".to_string()];
    header.extend((0..branches).map(|k| format!("E_{k}")));
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .zip(&energies)
        .map(|(t, e)| {
            let mut r = vec![*t];
            r.extend_from_slice(e);
            r
        })
        .collect();
    out.table("spectrum", &header, &rows)?;

    let has_pi = grid.iter().any(|&t| (ringtheta::model::reduce_angle(t) - PI).abs() < 1e-9);
    let diagnostics = if has_pi && branches >= 2 {
        let d = spectral_diagnostics(&result, &params)?;
        json!({
            "gap_at_pi": d.gap_at_pi,
            "monodromy_theta": d.monodromy_theta,
            "ed_periodicity_residual": d.ed_periodicity_residual,
            "diga_monodromy_residual": d.diga_monodromy_residual,
            "parity": d.parity,
        })
    } else {
        json!({ "note": "theta grid does not contain pi; degeneracy diagnostics skipped" })
    };
    out.json("diagnostics.json", &diagnostics)
}

// ---------------------------------------------------------------- converge

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergeKind {
    #[default]
    GapVsNs,
    RatioVsOmega,
    FuzzinessVsAlpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(flatten)]
    pub model: ModelSection,
    pub kind: ConvergeKind,
    /// Sweep values: `n_s`, ω or α depending on `kind`.
    pub grid: Vec<f64>,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            model: ModelSection::default(),
            kind: ConvergeKind::GapVsNs,
            grid: vec![10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0],
        }
    }
}

pub fn converge(run: &RunConfig<ConvergeConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    let kind = match c.kind {
        ConvergeKind::GapVsNs => SweepKind::GapVsNs,
        ConvergeKind::RatioVsOmega => SweepKind::EdDigaRatioVsOmega,
        ConvergeKind::FuzzinessVsAlpha => SweepKind::FuzzinessVsAlpha,
    };
    let table = convergence_suite(kind, &c.model.params()?, &c.grid)?;
    out.table("converge", &table.header, &table.rows)?;
    out.json("converge_summary.json", &json!({ "kind": table.kind, "rows": table.rows.len(), "failures": table.failures }))
}

// ---------------------------------------------------------------- dynamics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(flatten)]
    pub model: ModelSection,
    pub initial: InitialState,
    /// Start in the ground state of `H(θ)` instead of `initial`.
    pub start_in_ground_state: bool,
    pub t_end_ns: f64,
    pub samples: usize,
    /// Ramp θ linearly from `theta` to this value over `[0, t_end_ns]`.
    pub ramp_to: Option<f64>,
    pub ramp_steps: usize,
    /// Also write well-aggregated populations.
    pub wells: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            model: ModelSection { n_sites: 4, omega: 1.5, inertia_ns: 150.0, ..Default::default() },
            initial: InitialState::Delta { site: 0 },
            start_in_ground_state: false,
            t_end_ns: 20000.0,
            samples: DEFAULT_SAMPLES,
            ramp_to: None,
            ramp_steps: DEFAULT_RAMP_STEPS,
            wells: false,
        }
    }
}

pub fn dynamics(run: &RunConfig<DynamicsConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    let params = c.model.params()?;
    if !(c.t_end_ns.is_finite() && c.t_end_ns > 0.0) || c.samples < 2 {
        return Err(bad("t_end_ns must be positive and samples at least 2"));
    }
    let h = build_ring_hamiltonian(&params)?;
    let psi = if c.start_in_ground_state { ground_state(&h)? } else { prepare_initial_state(&c.initial, &params)? };
    let times = uniform_times(c.t_end_ns, c.samples);
    let traj = match c.ramp_to {
        Some(theta_end) => {
            let schedule = ThetaSchedule::linear(0.0, params.theta, c.t_end_ns, theta_end);
            evolve_theta_ramp(&params, &schedule, &psi, &times, c.ramp_steps)?
        }
        None => evolve(&h, &psi, &times, params.inertia_ns)?,
    };
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    let table = ringtheta::io::read_table(std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    out.table("trajectory", &table.header, &table.rows)?;
    if c.wells {
        let wells = traj.well_series(params.n)?;
        let mut header = vec!["time_ns".to_string()];
        header.extend((0..params.n).map(|l| format!("W_{l}")));
        let rows: Vec<Vec<f64>> = times
            .iter()
            .zip(&wells)
            .map(|(t, w)| {
                let mut r = vec![*t];
                r.extend_from_slice(w);
                r
            })
            .collect();
        out.table("wells", &header, &rows)?;
    }
    out.json(
        "dynamics_summary.json",
        &json!({
            "params": params,
            "initial": if c.start_in_ground_state { json!("ground_state") } else { json!(c.initial) },
            "ramp_to": c.ramp_to,
            "norm_drift": traj.norm_drift(),
        }),
    )
}

// -------------------------------------------------------------------- diga

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigaConfig {
    pub n: usize,
    pub omega: f64,
    pub theta: f64,
    pub theta_grid: usize,
    /// Dimensionless horizon for the well probabilities (`0` skips them).
    pub t_end: f64,
    pub samples: usize,
}

impl Default for DigaConfig {
    fn default() -> Self {
        DigaConfig { n: 2, omega: 2.0, theta: 0.0, theta_grid: 101, t_end: 0.0, samples: DEFAULT_SAMPLES }
    }
}

pub fn diga(run: &RunConfig<DigaConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    let q = instanton_quantities(c.n, c.omega, c.theta)?;
    let grid = uniform_grid(-PI, PI, c.theta_grid);
    let branches = diga_branches(c.n, c.omega, &grid)?;
    let mut header = vec!["theta".to_string()];
    header.extend((0..c.n).map(|k| format!("E_{k}")));
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .zip(&branches)
        .map(|(t, e)| {
            let mut r = vec![*t];
            r.extend_from_slice(e);
            r
        })
        .collect();
    out.table("diga_branches", &header, &rows)?;
    if c.t_end > 0.0 {
        if c.samples < 2 {
            return Err(bad("samples must be at least 2"));
        }
        let mut header = vec!["time".to_string()];
        header.extend((0..c.n).map(|l| format!("P_{l}")));
        let mut rows = Vec::with_capacity(c.samples);
        for t in uniform_grid(0.0, c.t_end, c.samples) {
            let mut r = vec![t];
            r.extend(diga_well_probabilities(c.n, c.omega, c.theta, 0, t)?);
            rows.push(r);
        }
        out.table("diga_wells", &header, &rows)?;
    }
    out.json("diga.json", &q)
}

// ---------------------------------------------------------------------- gy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GyRunConfig {
    #[serde(flatten)]
    pub gy: GyConfig,
    /// Grid points of the finite-difference cross-check; `0` skips it.
    pub fd_points: usize,
}

impl Default for GyRunConfig {
    fn default() -> Self {
        GyRunConfig { gy: GyConfig::default(), fd_points: 4000 }
    }
}

pub fn gy(run: &RunConfig<GyRunConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    let report = gy_report(&c.gy, (c.fd_points > 0).then_some(c.fd_points))?;
    out.json("gy.json", &report)
}

// ---------------------------------------------------------------- labframe

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabframeConfig {
    /// Resonant Rabi frequency, in the run's units.
    pub omega_rabi: f64,
    /// Detuning scale, in the run's units.
    pub delta: f64,
    pub n: usize,
    pub n_sites: usize,
    pub theta: f64,
    /// Level graph; a seeded synthetic ladder by default.
    pub graph: Option<LevelGraphSource>,
    pub spectators_per_level: usize,
    pub delta_sep: f64,
    pub seed: u64,
    /// Explicit drives (JSON file); designed from the model otherwise.
    pub drives: Option<PathBuf>,
    pub t_end_ns: f64,
    pub samples: usize,
    pub integrator: LabIntegratorConfig,
}

impl Default for LabframeConfig {
    fn default() -> Self {
        LabframeConfig {
            omega_rabi: 0.00135,
            delta: 0.00375,
            n: 2,
            n_sites: 4,
            theta: 0.0,
            graph: None,
            spectators_per_level: 2,
            delta_sep: DEFAULT_DELTA_SEP,
            seed: 7,
            drives: None,
            t_end_ns: 5000.0,
            samples: 1001,
            integrator: LabIntegratorConfig::default(),
        }
    }
}

pub fn labframe(run: &RunConfig<LabframeConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    let units = run.common.units;
    let map = map_experimental_params(units.to_angular(c.omega_rabi), units.to_angular(c.delta), c.n, c.n_sites)?;
    let params = map.to_model_params(c.theta)?;
    let source = c.graph.clone().unwrap_or(LevelGraphSource::Synthetic {
        n_sites: c.n_sites,
        delta_sep: c.delta_sep,
        spectators_per_level: c.spectators_per_level,
        seed: c.seed,
        transition_scale: 1.0,
        ring_separation: DEFAULT_RING_SEPARATION,
    });
    let graph = build_level_graph(&source)?;
    let drives = match &c.drives {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            DriveSet::from_json_str(&text)?
        }
        None => design_drives(&graph, &params)?,
    };
    let rwa = rwa_reduce(&graph, &drives)?;
    if c.samples < 2 || !(c.t_end_ns.is_finite() && c.t_end_ns > 0.0) {
        return Err(bad("t_end_ns must be positive and samples at least 2"));
    }
    let times = uniform_times(c.t_end_ns, c.samples);
    let psi = prepare_initial_state(&InitialState::Delta { site: 0 }, &params)?;
    let lab = simulate_lab_frame(&graph, &drives, &graph.embed_ring_state(&psi)?, &times, &c.integrator)?;
    let reference = evolve(&rwa.hamiltonian, &psi, &times, 1.0)?;

    let ns = graph.n_sites();
    let mut header = vec!["time_ns".to_string()];
    header.extend((0..ns).map(|i| format!("P_{i}_lab")));
    header.extend((0..ns).map(|i| format!("P_{i}_rwa")));
    header.push("leakage".into());
    let mut max_dev = 0.0_f64;
    let rows: Vec<Vec<f64>> = times
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let a = &lab.trajectory.records[k].probabilities;
            let b = &reference.records[k].probabilities;
            for (x, y) in a.iter().zip(b) {
                max_dev = max_dev.max((x - y).abs());
            }
            let mut r = vec![*t];
            r.extend_from_slice(a);
            r.extend_from_slice(b);
            r.push((1.0 - a.iter().sum::<f64>()).max(0.0));
            r
        })
        .collect();
    out.table("labframe", &header, &rows)?;
    out.json("graph.json", &graph)?;
    out.json("drives.json", &drives)?;
    out.json(
        "labframe_summary.json",
        &json!({
            "max_site_deviation": max_dev,
            "max_leakage": lab.max_leakage,
            "max_norm_drift": lab.max_norm_drift,
            "delta_sep": graph.delta_sep(),
            "rwa_theta": rwa.theta()?,
            "phase_winding": rwa.phase_winding,
            "accepted_steps": lab.stats.accepted,
            "model": params,
        }),
    )
}

// -------------------------------------------------------------- map-params

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub omega_rabi: f64,
    pub delta: f64,
    pub n: usize,
    pub n_sites: usize,
    /// Optional `n_s` values for a feasibility table.
    pub n_sites_grid: Vec<usize>,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig { omega_rabi: 0.00135, delta: 0.00375, n: 2, n_sites: 4, n_sites_grid: Vec::new() }
    }
}

pub fn map_params(run: &RunConfig<MapConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    let u = run.common.units;
    let (om, de) = (u.to_angular(c.omega_rabi), u.to_angular(c.delta));
    let m = map_experimental_params(om, de, c.n, c.n_sites)?;
    out.json(
        "map.json",
        &json!({
            "units": u.label(),
            "omega_rabi": u.from_angular(m.omega_rabi_ns_inv),
            "delta": u.from_angular(m.delta_ns_inv),
            "omega_tilde": u.from_angular(m.omega_tilde_ns_inv),
            "omega_diga_tilde": u.from_angular(m.omega_diga_tilde_ns_inv),
            "omega_dimless": m.omega_dimless,
            "inertia_ns": m.inertia_ns,
            "feasibility_ratio": m.feasibility_ratio,
            "n": m.n,
            "n_sites": m.n_sites,
        }),
    )?;
    if !c.n_sites_grid.is_empty() {
        let header: Vec<String> =
            ["n_s", "omega_tilde", "omega_diga_tilde", "omega_dimless", "inertia_ns", "feasibility_ratio"]
                .map(String::from)
                .to_vec();
        let mut rows = Vec::new();
        for &ns in &c.n_sites_grid {
            let m = map_experimental_params(om, de, c.n, ns)?;
            rows.push(vec![
                ns as f64,
                u.from_angular(m.omega_tilde_ns_inv),
                u.from_angular(m.omega_diga_tilde_ns_inv),
                m.omega_dimless,
                m.inertia_ns,
                m.feasibility_ratio,
            ]);
        }
        out.table("feasibility", &header, &rows)?;
    }
    Ok(())
}

// --------------------------------------------------------------------- fit

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FitModelArg {
    #[default]
    N2Prob,
    N3CosHighsym,
    N3CosGeneric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// CSV with a `time_ns` column.
    pub input: PathBuf,
    pub column: String,
    pub model: FitModelArg,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { input: PathBuf::new(), column: "P_0".into(), model: FitModelArg::N2Prob }
    }
}

pub fn fit(run: &RunConfig<FitConfig>, out: &mut Output) -> Result<(), CliError> {
    let c = &run.params;
    if c.input.as_os_str().is_empty() {
        return Err(bad("fit needs an input CSV"));
    }
    let text = std::fs::read_to_string(&c.input).map_err(|e| CliError::io(&c.input, e))?;
    let series = ringtheta::io::read_series(&text, &c.column)?;
    let model = match c.model {
        FitModelArg::N2Prob => FitModel::N2Prob,
        FitModelArg::N3CosHighsym => FitModel::N3CosHighsym,
        FitModelArg::N3CosGeneric => FitModel::N3CosGeneric,
    };
    let result = fit_tunneling_probability(&series.times_ns, &series.values, model)?;
    let u = run.common.units;
    let mut report = serde_json::to_value(&result).expect("fit serializes");
    report["omega_tun"] = json!(u.from_angular(result.omega_tun));
    report["omega_fast"] = json!(u.from_angular(result.omega_fast));
    report["units"] = json!(u.label());
    out.json("fit.json", &report)?;
    let header: Vec<String> = ["time_ns", "data", "model"].map(String::from).to_vec();
    let rows: Vec<Vec<f64>> =
        series.times_ns.iter().zip(&series.values).map(|(&t, &v)| vec![t, v, result.predict(t)]).collect();
    out.table("fit_curve", &header, &rows)
}
