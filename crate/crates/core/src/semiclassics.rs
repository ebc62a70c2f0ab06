//! Dilute-instanton-gas (DIGA) closed forms.
//!
//! Everything dynamical derives from one amplitude sum over the `n` branches
//! `E_k(θ) = ω/2 − 2ωd·cos((2πk + θ)/n)`; closed forms for particular `n`
//! and θ live in the tests as oracles.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::HermitianOperator;

/// Semiclassical outputs for one `(n, ω, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigaPrediction {
    pub n: usize,
    pub omega: f64,
    pub theta: f64,
    /// Real part of the single-instanton action, `8ω/n²`.
    pub action_real: f64,
    /// Instanton density `d`.
    pub density: f64,
    /// `E_k(θ)` for `k = 0..n`.
    pub spectrum: Vec<f64>,
    /// Topological susceptibility `∂²E₀/∂θ²` at θ = 0.
    pub chi_t: f64,
    /// False when `S_I < 1`, where the dilute gas picture is not trustworthy.
    pub semiclassical_valid: bool,
}

impl DigaPrediction {
    /// Instanton amplitude `𝓘 = ωd·e^{iθ/n}`.
    pub fn instanton_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.omega * self.density, self.theta / self.n as f64)
    }

    /// Tunneling frequency scale `2ωd` (dimensionless).
    pub fn tunneling_scale(&self) -> f64 {
        2.0 * self.omega * self.density
    }
}

fn check_domain(n: usize, omega: f64, theta: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("DIGA needs n >= 2, got {n}")));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParams(format!("omega must be positive, got {omega}")));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidParams("theta must be finite".into()));
    }
    Ok(())
}

pub fn instanton_action(n: usize, omega: f64) -> f64 {
    8.0 * omega / (n * n) as f64
}

/// `d = (4/n)·e^{−8ω/n²}·√(ω/π)`.
pub fn instanton_density(n: usize, omega: f64) -> f64 {
    4.0 / n as f64 * (-instanton_action(n, omega)).exp() * (omega / PI).sqrt()
}

/// `E_k(θ) = ω/2 − 2ωd·cos((2πk + θ)/n)`.
pub fn diga_spectrum(n: usize, omega: f64, theta: f64) -> Vec<f64> {
    let scale = 2.0 * omega * instanton_density(n, omega);
    (0..n).map(|k| 0.5 * omega - scale * ((2.0 * PI * k as f64 + theta) / n as f64).cos()).collect()
}

/// `χ_t = (8/√π)(ω/n²)^{3/2}·e^{−8ω/n²}`.
pub fn topological_susceptibility(n: usize, omega: f64) -> f64 {
    let r = omega / (n * n) as f64;
    8.0 / PI.sqrt() * r.powf(1.5) * (-8.0 * r).exp()
}

pub fn instanton_quantities(n: usize, omega: f64, theta: f64) -> Result<DigaPrediction> {
    check_domain(n, omega, theta)?;
    let action_real = instanton_action(n, omega);
    Ok(DigaPrediction {
        n,
        omega,
        theta,
        action_real,
        density: instanton_density(n, omega),
        spectrum: diga_spectrum(n, omega, theta),
        chi_t: topological_susceptibility(n, omega),
        semiclassical_valid: action_real >= 1.0,
    })
}

/// Effective `n`-well Hamiltonian: `ω/2` on the diagonal, `−𝓘` on each link
/// `l → l+1` (so `⟨l+1|H|l⟩ = −𝓘`), `−𝓘̄` in the reverse direction. For
/// `n = 2` the two links merge.
pub fn diga_effective_hamiltonian(n: usize, omega: f64, theta: f64) -> Result<HermitianOperator> {
    let pred = instanton_quantities(n, omega, theta)?;
    let amp = pred.instanton_amplitude();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for l in 0..n {
        m[l * n + l] += 0.5 * omega;
        let next = (l + 1) % n;
        m[next * n + l] -= amp;
        m[l * n + next] -= amp.conj();
    }
    HermitianOperator::new(n, m)
}

/// `⟨to| e^{−iHt} |from⟩` up to the global phase `e^{−iωt/2}`:
/// `(1/n) Σ_k exp(i2πk(from − to)/n + i·2ωd·cos((2πk + θ)/n)·t)`.
pub fn diga_hop_amplitude(n: usize, omega: f64, theta: f64, from: usize, to: usize, t: f64) -> Result<Complex64> {
    check_domain(n, omega, theta)?;
    if from >= n || to >= n {
        return Err(Error::InvalidParams(format!("wells must lie in 0..{n}, got {from} -> {to}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParams(format!("time must be finite and non-negative, got {t}")));
    }
    let scale = 2.0 * omega * instanton_density(n, omega);
    let diff = (from + n - to) % n;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let winding = 2.0 * PI * ((k * diff) % n) as f64 / n as f64;
        // Signed branch index keeps mirror pairs (k, n − k) bit-identical.
        let m = if 2 * k > n { k as f64 - n as f64 } else { k as f64 };
        let energy = scale * ((2.0 * PI * m + theta) / n as f64).cos();
        // Separate factors: rounding `winding + energy·t` would differ per
        // target well and break Σ_l P = 1 at large t.
        acc += Complex64::from_polar(1.0, winding) * Complex64::from_polar(1.0, energy * t);
    }
    Ok(acc / n as f64)
}

pub fn diga_hop_probability(n: usize, omega: f64, theta: f64, from: usize, to: usize, t: f64) -> Result<f64> {
    Ok(diga_hop_amplitude(n, omega, theta, from, to, t)?.norm_sqr())
}

/// `P(from → l; t)` for every well `l`.
pub fn diga_well_probabilities(n: usize, omega: f64, theta: f64, from: usize, t: f64) -> Result<Vec<f64>> {
    (0..n).map(|to| diga_hop_probability(n, omega, theta, from, to, t)).collect()
}

/// `(⟨cos x⟩, ⟨sin x⟩)` starting from well 0, wells at `x_l = 2πl/n`.
pub fn diga_circle_expectations(n: usize, omega: f64, theta: f64, t: f64) -> Result<(f64, f64)> {
    let probs = diga_well_probabilities(n, omega, theta, 0, t)?;
    let mut c = 0.0;
    let mut s = 0.0;
    for (l, p) in probs.iter().enumerate() {
        let x = 2.0 * PI * l as f64 / n as f64;
        c += p * x.cos();
        s += p * x.sin();
    }
    Ok((c, s))
}

/// Instanton (`sign > 0`) or anti-instanton (`sign < 0`) path
/// `x(τ) = ±(4/n)·arctan(e^{ω(τ − τ₀)})`.
pub fn instanton_profile(tau: f64, tau0: f64, n: usize, omega: f64, sign: i32) -> f64 {
    let s = if sign < 0 { -1.0 } else { 1.0 };
    s * 4.0 / n as f64 * (omega * (tau - tau0)).exp().atan()
}

/// DIGA branches over a θ grid, CSV-compatible with the ED sweep.
pub fn diga_branches(n: usize, omega: f64, theta_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_domain(n, omega, 0.0)?;
    Ok(theta_grid.iter().map(|&t| diga_spectrum(n, omega, t)).collect())
}

/// CSV `theta, E_0 .. E_{n-1}` matching the ED sweep layout.
pub fn write_branches_csv<W: Write>(w: W, n: usize, omega: f64, theta_grid: &[f64]) -> Result<()> {
    let rows = diga_branches(n, omega, theta_grid)?;
    crate::spectral::write_branch_csv(w, theta_grid, &rows)
}

/// Well probabilities over dimensionless times, as CSV
/// `time, P_0 .. P_{n-1}, cos_x, sin_x`.
pub fn write_well_trajectory_csv<W: Write>(w: W, n: usize, omega: f64, theta: f64, times: &[f64]) -> Result<()> {
    let mut header = vec!["time".to_string()];
    header.extend((0..n).map(|l| format!("P_{l}")));
    header.push("cos_x".into());
    header.push("sin_x".into());
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let mut row = vec![t];
        row.extend(diga_well_probabilities(n, omega, theta, 0, t)?);
        let (c, s) = diga_circle_expectations(n, omega, theta, t)?;
        row.push(c);
        row.push(s);
        rows.push(row);
    }
    crate::io::write_table(w, &header, rows)
}
