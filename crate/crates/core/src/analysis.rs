//! Oscillation-model fits and convergence sweeps.
//!
//! The fits use damped Gauss–Newton (Levenberg–Marquardt) with analytic
//! Jacobians on a rescaled time axis `τ = t/span`, seeded from periodogram
//! peaks and a deterministic multistart over slow-frequency candidates.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, prepare_initial_state, uniform_times, InitialState};
use crate::error::{Error, Result};
use crate::model::{build_ring_hamiltonian, ModelParams};
use crate::semiclassics::diga_spectrum;
use crate::spectral::{bloch_doublet_gap, doublet_gap_dense};

/// Fewer samples than this are rejected.
pub const MIN_SAMPLES: usize = 200;
/// A slow mode advancing less than this phase over the series is "frozen".
pub const FROZEN_PHASE_RAD: f64 = 0.1;
const MAX_ITERATIONS: usize = 500;
/// Iteration budget of the screening pass over all starts.
const SCREEN_ITERATIONS: usize = 25;
/// Starts refined to convergence after screening.
const REFINED_STARTS: usize = 3;
const N_PARAMS: usize = 5;

/// The three oscillation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `A₁(1 + cos ω_tun t) + A₂ cos(ω_fast t + φ)`.
    N2Prob,
    /// `A₁(1 + 2cos ω_tun t) + A₂ cos(ω_fast t + φ)`.
    N3CosHighsym,
    /// `A₁(2cos ω_tun t + cos 2ω_tun t) + A₂ cos(ω_fast t + φ)`.
    N3CosGeneric,
}

impl FitModel {
    /// Slow part `g(aτ)` and its derivative in `a`.
    fn slow(self, a: f64, tau: f64) -> (f64, f64) {
        let (s, c) = (a * tau).sin_cos();
        match self {
            FitModel::N2Prob => (1.0 + c, -tau * s),
            FitModel::N3CosHighsym => (1.0 + 2.0 * c, -2.0 * tau * s),
            FitModel::N3CosGeneric => {
                let (s2, c2) = (2.0 * a * tau).sin_cos();
                (2.0 * c + c2, -2.0 * tau * (s + s2))
            }
        }
    }

    /// Model value at `τ` for `p = [ω_tun, ω_fast, A₁, A₂, φ]` (scaled units).
    pub fn eval(self, p: &[f64; N_PARAMS], tau: f64) -> f64 {
        let (g, _) = self.slow(p[0], tau);
        p[2] * g + p[3] * (p[1] * tau + p[4]).cos()
    }

    fn eval_grad(self, p: &[f64; N_PARAMS], tau: f64) -> (f64, [f64; N_PARAMS]) {
        let (g, dg) = self.slow(p[0], tau);
        let (sf, cf) = (p[1] * tau + p[4]).sin_cos();
        let value = p[2] * g + p[3] * cf;
        (value, [p[2] * dg, -p[3] * tau * sf, g, cf, -p[3] * sf])
    }
}

/// Fitted parameters and diagnostics; frequencies in ns⁻¹.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    pub omega_tun: f64,
    pub omega_fast: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub phi_fast: f64,
    pub residual_rms: f64,
    pub converged: bool,
    /// Slow mode absent: `omega_tun` reported as 0 from a fast-only refit.
    pub frozen: bool,
    /// Variances of `[ω_tun, ω_fast, A₁, A₂, φ]` (zero for fixed parameters).
    pub covariance_diag: Vec<f64>,
    pub iterations: usize,
    /// RMS residual of every multistart candidate, in start order.
    pub multistart_residuals: Vec<f64>,
}

impl FitResult {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("FitResult serializes")
    }

    /// Model value at `t` ns.
    pub fn predict(&self, t: f64) -> f64 {
        let (g, _) = self.model.slow(self.omega_tun, t);
        self.a1 * g + self.a2 * (self.omega_fast * t + self.phi_fast).cos()
    }
}

struct LmOutcome {
    p: [f64; N_PARAMS],
    cost: f64,
    converged: bool,
    iterations: usize,
    jtj: [[f64; N_PARAMS]; N_PARAMS],
}

/// Solves `a x = b` in place (Gaussian elimination, partial pivoting).
fn solve_small(a: &mut [[f64; N_PARAMS]; N_PARAMS], b: &mut [f64; N_PARAMS], free: &[bool; N_PARAMS]) -> bool {
    let idx: Vec<usize> = (0..N_PARAMS).filter(|&i| free[i]).collect();
    let m = idx.len();
    let mut mat: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| a[i][j]).collect()).collect();
    let mut rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs())).expect("nonempty");
        if mat[piv][col].abs() < 1e-300 || !mat[piv][col].is_finite() {
            return false;
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..m {
            let f = mat[row][col] / mat[col][col];
            for k in col..m {
                mat[row][k] -= f * mat[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| mat[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / mat[row][row];
    }
    *b = [0.0; N_PARAMS];
    for (k, &i) in idx.iter().enumerate() {
        b[i] = x[k];
    }
    true
}

fn cost_of(model: FitModel, p: &[f64; N_PARAMS], tau: &[f64], y: &[f64]) -> f64 {
    0.5 * tau.iter().zip(y).map(|(&t, &v)| (model.eval(p, t) - v).powi(2)).sum::<f64>()
}

fn normal_equations(
    model: FitModel,
    p: &[f64; N_PARAMS],
    tau: &[f64],
    y: &[f64],
) -> ([[f64; N_PARAMS]; N_PARAMS], [f64; N_PARAMS]) {
    let mut jtj = [[0.0; N_PARAMS]; N_PARAMS];
    let mut jtr = [0.0; N_PARAMS];
    for (&t, &v) in tau.iter().zip(y) {
        let (f, g) = model.eval_grad(p, t);
        let r = f - v;
        for i in 0..N_PARAMS {
            jtr[i] += g[i] * r;
            for j in 0..=i {
                jtj[i][j] += g[i] * g[j];
            }
        }
    }
    for i in 0..N_PARAMS {
        for j in 0..i {
            jtj[j][i] = jtj[i][j];
        }
    }
    (jtj, jtr)
}

fn levenberg_marquardt(
    model: FitModel,
    start: [f64; N_PARAMS],
    free: [bool; N_PARAMS],
    tau: &[f64],
    y: &[f64],
    max_iterations: usize,
) -> LmOutcome {
    let mut p = start;
    let mut cost = cost_of(model, &p, tau, y);
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let (mut jtj, mut jtr) = normal_equations(model, &p, tau, y);
    while iterations < max_iterations && !converged {
        iterations += 1;
        let mut accepted = false;
        while !accepted {
            let mut a = jtj;
            for i in 0..N_PARAMS {
                a[i][i] += damping * jtj[i][i].max(1e-30);
            }
            let mut step = jtr.map(|g| -g);
            if !solve_small(&mut a, &mut step, &free) {
                damping *= 4.0;
            } else {
                let mut trial = p;
                for i in 0..N_PARAMS {
                    trial[i] += step[i];
                }
                let trial_cost = cost_of(model, &trial, tau, y);
                if trial_cost.is_finite() && trial_cost <= cost {
                    let small_step = (0..N_PARAMS).all(|i| step[i].abs() <= 1e-12 * (p[i].abs() + 1e-12));
                    let small_gain = cost - trial_cost <= 1e-15 * cost.max(1e-300);
                    p = trial;
                    cost = trial_cost;
                    damping = (damping / 3.0).max(1e-15);
                    accepted = true;
                    converged = small_step || small_gain;
                } else {
                    damping *= 4.0;
                }
            }
            if !accepted && damping > 1e16 {
                // No descent direction left: numerically stationary.
                converged = true;
                break;
            }
        }
        (jtj, jtr) = normal_equations(model, &p, tau, y);
    }
    LmOutcome { p, cost, converged, iterations, jtj }
}

/// Hann-windowed periodogram peaks `(ω, power)` sorted by decreasing power. Frequencies
/// are refined by parabolic interpolation; the lowest bin counts as a peak
/// when it beats its neighbour, so slow modes longer than the series show up.
pub fn periodogram_peaks(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let n = times.len();
    if n < 4 {
        return Vec::new();
    }
    let span = times[n - 1] - times[0];
    let dt = span / (n - 1) as f64;
    if !(span > 0.0) {
        return Vec::new();
    }
    // Hann taper: the slow mode's rectangular-window sidelobes would
    // otherwise outrank a weak fast mode. The window-weighted mean is removed
    // so the offset does not leak into the lowest bins.
    let window: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect();
    let mean = values.iter().zip(&window).map(|(v, w)| v * w).sum::<f64>() / window.iter().sum::<f64>();
    let centred: Vec<f64> = values.iter().zip(&window).map(|(v, w)| (v - mean) * w).collect();
    let d_omega = 2.0 * PI / (4.0 * span);
    let bins = ((PI / dt) / d_omega).floor() as usize;
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1e-300));
    let power: Vec<f64> = (1..=bins)
        .into_par_iter()
        .map(|j| {
            let omega = j as f64 * d_omega;
            let mut acc = Complex64::new(0.0, 0.0);
            if uniform {
                let rot = Complex64::from_polar(1.0, -omega * dt);
                let mut z = Complex64::from_polar(1.0, -omega * times[0]);
                for (k, v) in centred.iter().enumerate() {
                    if k % 256 == 0 {
                        z = Complex64::from_polar(1.0, -omega * times[k]);
                    }
                    acc += z * v;
                    z *= rot;
                }
            } else {
                for (t, v) in times.iter().zip(&centred) {
                    acc += Complex64::from_polar(*v, -omega * t);
                }
            }
            acc.norm_sqr()
        })
        .collect();
    let mut peaks = Vec::new();
    for j in 0..power.len() {
        let left = if j == 0 { 0.0 } else { power[j - 1] };
        let right = power.get(j + 1).copied().unwrap_or(0.0);
        if power[j] > left && power[j] >= right && power[j] > 0.0 {
            let mut offset = 0.0;
            if j > 0 && j + 1 < power.len() {
                let denom = left - 2.0 * power[j] + right;
                if denom < 0.0 {
                    offset = (0.5 * (left - right) / denom).clamp(-0.5, 0.5);
                }
            }
            peaks.push(((j as f64 + 1.0 + offset) * d_omega, power[j]));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks
}

/// Peaks tried as the slow mode, and fast partners tried per slow peak.
const SLOW_CANDIDATES: usize = 4;
const FAST_PARTNERS: usize = 2;

/// Candidate `(slow, fast)` assignments, strongest first: each of the
/// strongest peaks as slow mode paired with the strongest peaks at least a
/// factor 3 above it (searched over all peaks, since a weak fast mode can
/// rank below the slow mode's sidelobes), then each strong peak alone as a
/// fast mode.
fn peak_pairs(times: &[f64], values: &[f64]) -> Vec<(Option<f64>, f64)> {
    let peaks: Vec<f64> = periodogram_peaks(times, values).iter().map(|p| p.0).collect();
    let mut pairs = Vec::new();
    for &a in peaks.iter().take(SLOW_CANDIDATES) {
        for &b in peaks.iter().filter(|&&b| b >= 3.0 * a).take(FAST_PARTNERS) {
            pairs.push((Some(a), b));
        }
    }
    pairs.extend(peaks.iter().take(SLOW_CANDIDATES).map(|&w| (None, w)));
    pairs
}

#[cfg(test)]
fn dominant_pair(times: &[f64], values: &[f64]) -> (Option<f64>, Option<f64>) {
    match peak_pairs(times, values).first() {
        Some(&(slow, fast)) => (slow, Some(fast)),
        None => (None, None),
    }
}

/// Linear least squares for `(A₁, A₂, φ)` at fixed frequencies.
fn linear_amplitudes(model: FitModel, a: f64, b: f64, tau: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let mut m = [[0.0; N_PARAMS]; N_PARAMS];
    let mut rhs = [0.0; N_PARAMS];
    for (&t, &v) in tau.iter().zip(y) {
        let (g, _) = model.slow(a, t);
        let (s, c) = (b * t).sin_cos();
        let cols = [g, c, s];
        for i in 0..3 {
            rhs[i] += cols[i] * v;
            for j in 0..3 {
                m[i][j] += cols[i] * cols[j];
            }
        }
    }
    for i in 0..3 {
        m[i][i] += 1e-12 * m[i][i].max(1e-300);
    }
    if !solve_small(&mut m, &mut rhs, &[true, true, true, false, false]) {
        return None;
    }
    let (a1, bb, cc) = (rhs[0], rhs[1], rhs[2]);
    Some((a1, bb.hypot(cc), (-cc).atan2(bb)))
}

/// Canonical signs: `ω_tun, ω_fast, A₂ ≥ 0`, φ in `(−π, π]`.
fn canonicalize(mut p: [f64; N_PARAMS]) -> [f64; N_PARAMS] {
    p[0] = p[0].abs();
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[4] = -p[4];
    }
    if p[3] < 0.0 {
        p[3] = -p[3];
        p[4] += PI;
    }
    p[4] = crate::model::reduce_angle(p[4]);
    p
}

/// Fits one of the oscillation models to a time series (`times` in ns).
pub fn fit_tunneling_probability(times: &[f64], values: &[f64], model: FitModel) -> Result<FitResult> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    if times.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!("need at least {MIN_SAMPLES} samples, got {}", times.len())));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Fit("series contains non-finite values".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("times must be strictly increasing".into()));
    }
    let span = times[times.len() - 1].max(times[times.len() - 1] - times[0]);
    let tau: Vec<f64> = times.iter().map(|t| t / span).collect();
    let window = 2.0 * PI; // one full period over the series, in scaled units

    let mut pairs = peak_pairs(times, values);
    if pairs.is_empty() {
        pairs.push((None, 0.25 * PI * times.len() as f64 / span));
    }
    // (slow, fast) starting frequencies in scaled units.
    let mut starts: Vec<(f64, f64)> = Vec::new();
    for (slow_peak, fast_peak) in pairs {
        let fast = fast_peak * span;
        let mut slow: Vec<f64> = match slow_peak {
            Some(w) => {
                let w = w * span;
                vec![w, 0.5 * w, 2.0 * w]
            }
            None => vec![0.125 * window, 0.25 * window, 0.5 * window, window, 2.0 * window],
        };
        slow.retain(|w| *w > 0.0 && *w < fast);
        if slow.is_empty() {
            slow.push(0.25 * fast);
        }
        starts.extend(slow.into_iter().map(|a| (a, fast)));
    }

    let free = [true; N_PARAMS];
    let outcomes: Vec<LmOutcome> = starts
        .par_iter()
        .map(|&(a, fast)| {
            let (a1, a2, phi) = linear_amplitudes(model, a, fast, &tau, values).unwrap_or((0.5, 0.0, 0.0));
            levenberg_marquardt(model, [a, fast, a1, a2, phi], free, &tau, values, SCREEN_ITERATIONS)
        })
        .collect();
    // Refine the most promising screened starts; the rest keep their
    // screening result.
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&i, &j| outcomes[i].cost.total_cmp(&outcomes[j].cost).then(i.cmp(&j)));
    let refined: Vec<(usize, LmOutcome)> = order
        .par_iter()
        .take(REFINED_STARTS)
        .map(|&i| {
            let o = &outcomes[i];
            let mut r = levenberg_marquardt(model, o.p, free, &tau, values, MAX_ITERATIONS);
            r.iterations += o.iterations;
            r.converged |= o.converged && r.cost >= o.cost;
            (i, r)
        })
        .collect();
    let mut outcomes = outcomes;
    for (i, r) in refined {
        outcomes[i] = r;
    }
    let n = values.len() as f64;
    let multistart_residuals: Vec<f64> = outcomes.iter().map(|o| (2.0 * o.cost / n).sqrt()).collect();
    let best = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.cost.total_cmp(&b.cost).then(i.cmp(j)))
        .map(|(_, o)| o)
        .expect("at least one start");

    let mut p = canonicalize(best.p);
    let mut outcome = best;
    let frozen = p[0] < FROZEN_PHASE_RAD;
    let mut free_used = free;
    if frozen {
        let start = canonicalize(outcome.p);
        free_used = [false, true, true, true, true];
        outcome = levenberg_marquardt(
            model,
            [0.0, start[1], start[2], start[3], start[4]],
            free_used,
            &tau,
            values,
            MAX_ITERATIONS,
        );
        p = canonicalize(outcome.p);
        p[0] = 0.0;
    }

    let dof = (n - free_used.iter().filter(|f| **f).count() as f64).max(1.0);
    let sigma2 = 2.0 * outcome.cost / dof;
    let mut covariance_diag = vec![0.0; N_PARAMS];
    for i in (0..N_PARAMS).filter(|&i| free_used[i]) {
        let mut a = outcome.jtj;
        let mut e = [0.0; N_PARAMS];
        e[i] = 1.0;
        if solve_small(&mut a, &mut e, &free_used) {
            covariance_diag[i] = sigma2 * e[i];
        } else {
            covariance_diag[i] = f64::INFINITY;
        }
    }
    // Frequencies back to ns⁻¹.
    covariance_diag[0] /= span * span;
    covariance_diag[1] /= span * span;

    Ok(FitResult {
        model,
        omega_tun: p[0] / span,
        omega_fast: p[1] / span,
        a1: p[2],
        a2: p[3],
        phi_fast: p[4],
        residual_rms: (2.0 * outcome.cost / n).sqrt(),
        converged: outcome.converged && outcome.cost.is_finite(),
        frozen,
        covariance_diag,
        iterations: outcome.iterations,
        multistart_residuals,
    })
}

/// Synthetic series from a model, for round-trip checks.
pub fn synthesize(
    model: FitModel,
    omega_tun: f64,
    omega_fast: f64,
    a1: f64,
    a2: f64,
    phi: f64,
    times: &[f64],
) -> Vec<f64> {
    let fit = FitResult {
        model,
        omega_tun,
        omega_fast,
        a1,
        a2,
        phi_fast: phi,
        residual_rms: 0.0,
        converged: true,
        frozen: false,
        covariance_diag: Vec::new(),
        iterations: 0,
        multistart_residuals: Vec::new(),
    };
    times.iter().map(|&t| fit.predict(t)).collect()
}

/// Sweep families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Grid is `n_s`; dense ED gap `E₁ − E₀` and the DIGA value.
    GapVsNs,
    /// Grid is ω; ED (Bloch) doublet gap over the DIGA gap at `params.n_sites`.
    EdDigaRatioVsOmega,
    /// Grid is α; fast amplitude `|A₂|` of the site-0 probability over one
    /// slow period, starting from the cosine-power state.
    FuzzinessVsAlpha,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub grid_value: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub failures: Vec<SweepFailure>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_table(w, &self.header, self.rows.iter().cloned())
    }
}

/// Samples per slow period in the fuzziness sweep.
pub const FUZZINESS_SAMPLES: usize = 4000;

/// DIGA doublet gap: difference of the two lowest branches.
fn diga_gap(n: usize, omega: f64, theta: f64) -> f64 {
    let mut e = diga_spectrum(n, omega, theta);
    e.sort_by(f64::total_cmp);
    e[1] - e[0]
}

fn sweep_row(kind: SweepKind, params: &ModelParams, x: f64) -> Result<Vec<f64>> {
    match kind {
        SweepKind::GapVsNs => {
            if !(x.fract() == 0.0 && x >= 3.0) {
                return Err(Error::InvalidParams(format!("n_s grid value {x} is not an integer >= 3")));
            }
            let p = params.with_n_sites(x as usize);
            p.validate()?;
            let gap = doublet_gap_dense(&p)?;
            let diga = if p.n >= 2 { diga_gap(p.n, p.omega, p.theta) } else { f64::NAN };
            Ok(vec![x, gap, diga])
        }
        SweepKind::EdDigaRatioVsOmega => {
            let p = params.with_omega(x);
            p.validate()?;
            let ed = bloch_doublet_gap(&p)?.gap;
            let diga = diga_gap(p.n, p.omega, p.theta);
            Ok(vec![x, ed, diga, ed / diga])
        }
        SweepKind::FuzzinessVsAlpha => {
            params.validate()?;
            let gap = doublet_gap_dense(params)?;
            if !(gap > 0.0) {
                return Err(Error::InvalidParams("slow period undefined: degenerate doublet".into()));
            }
            let t_end = 2.0 * PI / gap * params.inertia_ns;
            let psi = prepare_initial_state(&InitialState::CosinePower { alpha: x, center_site: 0 }, params)?;
            let h = build_ring_hamiltonian(params)?;
            let times = uniform_times(t_end, FUZZINESS_SAMPLES);
            let traj = evolve(&h, &psi, &times, params.inertia_ns)?;
            let fit = fit_tunneling_probability(&times, &traj.site_series(0), FitModel::N2Prob)?;
            Ok(vec![x, fit.a2.abs(), fit.omega_fast, fit.omega_tun, fit.residual_rms])
        }
    }
}

/// Runs a sweep; failing grid points are recorded and skipped.
pub fn convergence_suite(kind: SweepKind, params: &ModelParams, grid: &[f64]) -> Result<SweepTable> {
    let header: Vec<String> = match kind {
        SweepKind::GapVsNs => vec!["n_s", "E1_minus_E0", "E1_minus_E0_DIGA"],
        SweepKind::EdDigaRatioVsOmega => vec!["omega", "gap_ED", "gap_DIGA", "ratio_ED_DIGA"],
        SweepKind::FuzzinessVsAlpha => vec!["alpha", "A2_abs", "omega_fast", "omega_tun", "residual_rms"],
    }
    .into_iter()
    .map(String::from)
    .collect();
    if grid.is_empty() {
        return Err(Error::InvalidParams("sweep grid is empty".into()));
    }
    let results: Vec<(f64, Result<Vec<f64>>)> = grid.par_iter().map(|&x| (x, sweep_row(kind, params, x))).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (x, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(SweepFailure { grid_value: x, message: e.to_string() }),
        }
    }
    Ok(SweepTable { kind, header, rows, failures })
}
