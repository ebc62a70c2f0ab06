//! Initial states, unitary real-time evolution and circle observables.
//!
//! Times are in ns; the dimensionless time is `t̃ / I`. Energies in
//! trajectory records are reported in ns⁻¹.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_ring_hamiltonian, site_position, HermitianOperator, ModelParams};
use crate::spectral::{eigendecompose, Eigensystem};

/// Default number of piecewise-constant steps per θ ramp.
pub const DEFAULT_RAMP_STEPS: usize = 200;
/// Default number of output samples.
pub const DEFAULT_SAMPLES: usize = 1000;

const NORM_TOL: f64 = 1e-12;

/// A normalized site-basis wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Accepts amplitudes whose 2-norm is 1 within 1e-12.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm2(&amplitudes);
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
        }
        Ok(StateVector { amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm2(&amplitudes);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("cannot normalize a zero or non-finite vector".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(StateVector { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Initial-state families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// All amplitude on one site.
    Delta { site: usize },
    /// `((1 + cos(x_i − x_c))/2)^{2α}`, normalized.
    CosinePower { alpha: f64, center_site: usize },
}

pub fn prepare_initial_state(kind: &InitialState, params: &ModelParams) -> Result<StateVector> {
    let ns = params.n_sites;
    match *kind {
        InitialState::Delta { site } => {
            if site >= ns {
                return Err(Error::InvalidState(format!("site {site} outside 0..{ns}")));
            }
            let mut v = vec![Complex64::new(0.0, 0.0); ns];
            v[site] = Complex64::new(1.0, 0.0);
            StateVector::new(v)
        }
        InitialState::CosinePower { alpha, center_site } => {
            if center_site >= ns {
                return Err(Error::InvalidState(format!("center site {center_site} outside 0..{ns}")));
            }
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidState(format!("alpha must be non-negative, got {alpha}")));
            }
            let xc = site_position(center_site, ns);
            let v = (0..ns)
                .map(|i| {
                    let base = 0.5 * (1.0 + (site_position(i, ns) - xc).cos());
                    Complex64::new(base.max(0.0).powf(2.0 * alpha), 0.0)
                })
                .collect();
            StateVector::normalized(v)
        }
    }
}

/// Ground state of `h` (phase-fixed).
pub fn ground_state(h: &HermitianOperator) -> Result<StateVector> {
    let eig = crate::spectral::lowest_eigenpairs(h, 1)?;
    StateVector::normalized(eig.vector(0).to_vec())
}

/// Observables at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub probabilities: Vec<f64>,
    pub cos_x: f64,
    pub sin_x: f64,
    pub norm: f64,
    /// `⟨H⟩` in ns⁻¹.
    pub energy: f64,
}

impl ObservableRecord {
    /// Energy is `⟨ψ|H|ψ⟩ · energy_scale`.
    pub fn from_state(psi: &[Complex64], h: Option<&HermitianOperator>, energy_scale: f64) -> Self {
        let probabilities: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
        let (cos_x, sin_x) = circle_moments(&probabilities);
        let norm = probabilities.iter().sum::<f64>().sqrt();
        let energy = h.map_or(f64::NAN, |h| h.expectation(psi) * energy_scale);
        ObservableRecord { probabilities, cos_x, sin_x, norm, energy }
    }
}

/// `(Σ P_i cos x_i, Σ P_i sin x_i)` with `x_i = 2πi/len`.
pub fn circle_moments(probabilities: &[f64]) -> (f64, f64) {
    let ns = probabilities.len();
    probabilities.iter().enumerate().fold((0.0, 0.0), |(c, s), (i, p)| {
        let x = site_position(i, ns);
        (c + p * x.cos(), s + p * x.sin())
    })
}

/// Time grid, amplitudes and observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times_ns: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub records: Vec<ObservableRecord>,
    /// Weight in the instantaneous ground eigenspace (θ ramps only).
    pub ground_fidelity: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Largest `|norm(t) − norm(0)|`.
    pub fn norm_drift(&self) -> f64 {
        let first = self.records.first().map_or(1.0, |r| r.norm);
        self.records.iter().map(|r| (r.norm - first).abs()).fold(0.0, f64::max)
    }

    /// Site-probability time series of one site.
    pub fn site_series(&self, site: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.probabilities[site]).collect()
    }

    pub fn cos_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cos_x).collect()
    }

    pub fn sin_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sin_x).collect()
    }

    /// Well-aggregated probabilities per time.
    pub fn well_series(&self, n_wells: usize) -> Result<Vec<Vec<f64>>> {
        self.records.iter().map(|r| aggregate_wells(&r.probabilities, n_wells)).collect()
    }

    /// CSV `time_ns, P_0.., cos_x, sin_x, norm, energy` (plus
    /// `ground_fidelity` for ramps).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let ns = self.dim();
        let mut header = vec!["time_ns".to_string()];
        header.extend((0..ns).map(|i| format!("P_{i}")));
        header.extend(["cos_x", "sin_x", "norm", "energy"].map(String::from));
        if self.ground_fidelity.is_some() {
            header.push("ground_fidelity".into());
        }
        let rows = self.records.iter().enumerate().map(|(k, r)| {
            let mut row = vec![self.times_ns[k]];
            row.extend_from_slice(&r.probabilities);
            row.extend([r.cos_x, r.sin_x, r.norm, r.energy]);
            if let Some(f) = &self.ground_fidelity {
                row.push(f[k]);
            }
            row
        });
        crate::io::write_table(w, &header, rows)
    }
}

/// `count` uniform samples over `[0, t_end]`.
pub fn uniform_times(t_end_ns: f64, count: usize) -> Vec<f64> {
    crate::spectral::uniform_grid(0.0, t_end_ns, count)
}

fn check_times(times_ns: &[f64]) -> Result<()> {
    if times_ns.is_empty() {
        return Err(Error::InvalidParams("time grid is empty".into()));
    }
    if times_ns.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParams("times must be finite and non-negative".into()));
    }
    if times_ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("times must be nondecreasing".into()));
    }
    Ok(())
}

/// `ψ(t) = V e^{−iE t}V† ψ₀` for an eigensystem, with `t` dimensionless.
fn propagate(eig: &Eigensystem, coeffs: &[Complex64], t: f64) -> Vec<Complex64> {
    let n = eig.dim;
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    for (k, c) in coeffs.iter().enumerate() {
        let w = c * Complex64::from_polar(1.0, -eig.values[k] * t);
        for (p, v) in psi.iter_mut().zip(eig.vector(k)) {
            *p += w * v;
        }
    }
    psi
}

fn project(eig: &Eigensystem, psi: &[Complex64]) -> Vec<Complex64> {
    (0..eig.n_vectors())
        .map(|k| eig.vector(k).iter().zip(psi).map(|(v, p)| v.conj() * p).sum())
        .collect()
}

/// Exact evolution under a static Hamiltonian (dimensionless `H`, lab time
/// `t̃ = I·t`). `psi0` is the state at `t̃ = 0`.
pub fn evolve(h: &HermitianOperator, psi0: &StateVector, times_ns: &[f64], inertia_ns: f64) -> Result<Trajectory> {
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi0.dim() });
    }
    if !(inertia_ns > 0.0 && inertia_ns.is_finite()) {
        return Err(Error::InvalidParams(format!("inertia must be positive, got {inertia_ns}")));
    }
    check_times(times_ns)?;
    let eig = eigendecompose(h)?;
    let coeffs = project(&eig, psi0.amplitudes());
    let mut states = Vec::with_capacity(times_ns.len());
    let mut records = Vec::with_capacity(times_ns.len());
    for &t in times_ns {
        let psi = propagate(&eig, &coeffs, t / inertia_ns);
        records.push(ObservableRecord::from_state(&psi, Some(h), 1.0 / inertia_ns));
        states.push(psi);
    }
    Ok(Trajectory { times_ns: times_ns.to_vec(), states, records, ground_fidelity: None })
}

/// Piecewise-linear θ(t̃) through `(t_ns, θ)` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSchedule {
    pub knots: Vec<(f64, f64)>,
}

impl ThetaSchedule {
    pub fn constant(theta: f64, t_end_ns: f64) -> Self {
        ThetaSchedule { knots: vec![(0.0, theta), (t_end_ns, theta)] }
    }

    pub fn linear(t0: f64, theta0: f64, t1: f64, theta1: f64) -> Self {
        ThetaSchedule { knots: vec![(t0, theta0), (t1, theta1)] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::ScheduleGap("schedule has no knots".into()));
        }
        if self.knots.iter().any(|(t, th)| !t.is_finite() || !th.is_finite()) {
            return Err(Error::InvalidParams("schedule knots must be finite".into()));
        }
        if self.knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParams("schedule knot times must be strictly increasing".into()));
        }
        Ok(())
    }

    /// θ at `t`, or `None` outside the knot range.
    pub fn theta_at(&self, t: f64) -> Option<f64> {
        let first = self.knots.first()?;
        let last = self.knots.last()?;
        if t < first.0 || t > last.0 {
            return None;
        }
        if self.knots.len() == 1 {
            return Some(first.1);
        }
        let i = self.knots.partition_point(|k| k.0 <= t).clamp(1, self.knots.len() - 1);
        let (t0, a) = self.knots[i - 1];
        let (t1, b) = self.knots[i];
        Some(a + (b - a) * (t - t0) / (t1 - t0))
    }
}

/// Evolution with θ held piecewise constant on `steps` equal steps over
/// `[0, t_last]` (θ taken at each step midpoint). Each record carries
/// `⟨H(θ(t))⟩` and the weight in the ground eigenspace of `H(θ(t))`.
pub fn evolve_theta_ramp(
    params: &ModelParams,
    schedule: &ThetaSchedule,
    psi0: &StateVector,
    times_ns: &[f64],
    steps: usize,
) -> Result<Trajectory> {
    params.validate()?;
    schedule.validate()?;
    check_times(times_ns)?;
    if psi0.dim() != params.n_sites {
        return Err(Error::DimensionMismatch { expected: params.n_sites, found: psi0.dim() });
    }
    if steps == 0 {
        return Err(Error::InvalidParams("ramp needs at least one step".into()));
    }
    let t_end = *times_ns.last().expect("nonempty");
    for t in [0.0, t_end] {
        if schedule.theta_at(t).is_none() {
            return Err(Error::ScheduleGap(format!("theta undefined at t = {t} ns")));
        }
    }
    let inertia = params.inertia_ns;
    let dt = if t_end > 0.0 { t_end / steps as f64 } else { 1.0 };
    let step_of = |t: f64| (((t / dt).floor()) as usize).min(steps - 1);

    let mut cache: Vec<Option<Eigensystem>> = vec![None; steps];
    let mut step_eig = |k: usize| -> Result<Eigensystem> {
        if cache[k].is_none() {
            let theta = schedule.theta_at((k as f64 + 0.5) * dt).expect("validated range");
            cache[k] = Some(eigendecompose(&build_ring_hamiltonian(&params.with_theta(theta))?)?);
        }
        Ok(cache[k].clone().expect("filled"))
    };

    let mut psi = psi0.amplitudes().to_vec();
    let mut now = 0.0;
    let mut states = Vec::with_capacity(times_ns.len());
    let mut records = Vec::with_capacity(times_ns.len());
    let mut fidelity = Vec::with_capacity(times_ns.len());
    for &target in times_ns {
        while now < target {
            let mut k = step_of(now);
            let boundary_of = |k: usize| if k + 1 == steps { t_end } else { (k + 1) as f64 * dt };
            // Rounding can leave `now` on (or past) the computed boundary.
            while k + 1 < steps && boundary_of(k) <= now {
                k += 1;
            }
            let next = boundary_of(k).min(target);
            if next <= now {
                now = target;
                continue;
            }
            let eig = step_eig(k)?;
            let coeffs = project(&eig, &psi);
            psi = propagate(&eig, &coeffs, (next - now) / inertia);
            now = next;
        }
        let theta = schedule.theta_at(target).expect("validated range");
        let h = build_ring_hamiltonian(&params.with_theta(theta))?;
        let eig = eigendecompose(&h)?;
        fidelity.push(ground_weight(&eig, &psi));
        records.push(ObservableRecord::from_state(&psi, Some(&h), 1.0 / inertia));
        states.push(psi.clone());
    }
    Ok(Trajectory { times_ns: times_ns.to_vec(), states, records, ground_fidelity: Some(fidelity) })
}

/// Weight of `psi` in the (possibly degenerate) lowest eigenspace.
fn ground_weight(eig: &Eigensystem, psi: &[Complex64]) -> f64 {
    let e0 = eig.values[0];
    let tol = 1e-9 * e0.abs().max(1.0);
    (0..eig.n_vectors())
        .take_while(|&k| eig.values[k] - e0 <= tol)
        .map(|k| eig.vector(k).iter().zip(psi).map(|(v, p)| v.conj() * p).sum::<Complex64>().norm_sqr())
        .sum()
}

/// Site probabilities summed into wells; each site goes to its nearest well
/// centre (site `l·n_s/n`), equidistant sites split evenly.
pub fn aggregate_wells(probabilities: &[f64], n_wells: usize) -> Result<Vec<f64>> {
    let ns = probabilities.len();
    if n_wells == 0 || ns % n_wells != 0 {
        return Err(Error::InvalidParams(format!("{ns} sites cannot be split into {n_wells} wells")));
    }
    let spacing = ns / n_wells;
    let mut wells = vec![0.0; n_wells];
    for (i, p) in probabilities.iter().enumerate() {
        let dist: Vec<usize> = (0..n_wells)
            .map(|l| {
                let c = l * spacing;
                let d = i.abs_diff(c);
                d.min(ns - d)
            })
            .collect();
        let best = *dist.iter().min().expect("n_wells > 0");
        let nearest: Vec<usize> = (0..n_wells).filter(|&l| dist[l] == best).collect();
        for &l in &nearest {
            wells[l] += p / nearest.len() as f64;
        }
    }
    Ok(wells)
}

/// Circle observables per time, optionally with well aggregation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleRecord {
    pub probabilities: Vec<f64>,
    pub cos_x: f64,
    pub sin_x: f64,
    pub wells: Option<Vec<f64>>,
}

pub fn observables(traj: &Trajectory, params: &ModelParams, with_wells: bool) -> Result<Vec<CircleRecord>> {
    traj.states
        .iter()
        .map(|psi| {
            if psi.len() != params.n_sites {
                return Err(Error::DimensionMismatch { expected: params.n_sites, found: psi.len() });
            }
            let probabilities: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
            let (cos_x, sin_x) = circle_moments(&probabilities);
            let wells = if with_wells { Some(aggregate_wells(&probabilities, params.n)?) } else { None };
            Ok(CircleRecord { probabilities, cos_x, sin_x, wells })
        })
        .collect()
}
