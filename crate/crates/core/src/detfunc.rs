//! One-loop fluctuation determinants around the instanton.
//!
//! The fluctuation operator is `𝓜 = −∂²_r + 1 + W(r)` on `r = ωτ`, split into
//! odd and even sectors on the half line `[0, L]` with a Dirichlet wall at
//! `L`. Ratios against the free operator (`W = 0`) come from Gel'fand–Yaglom
//! shooting; an independent finite-difference diagonalization cross-checks.
//!
//! Zero-mode convention (shared by both routes): the even sector carries the
//! translation mode `ψ₀(r) = sech r`, normalized so `ψ₀(0) = 1`, and its
//! squared norm is taken over the half line, `𝒩 = ∫₀^L sech² r dr`
//! (analytically `tanh L`). The primed even ratio is
//! `det'𝓜 / det 𝓜_free = lim_{ε→0} det(𝓜 + ε) / (ε·𝒩·det 𝓜_free)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_ql;
use crate::ode::{self, Dopri5Config};

/// How far the domain must have converged between `L − 2` and `L`.
pub const DOMAIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GyConfig {
    /// Half-line length `L` in units of `r = ωτ`.
    #[serde(default = "default_length")]
    pub half_length: f64,
    #[serde(default = "default_tolerance")]
    pub ode_tolerance: f64,
    /// Zero-mode shifts, strictly decreasing.
    #[serde(default = "default_epsilons")]
    pub epsilon_grid: Vec<f64>,
    /// Step-size cap for the shooting integrator.
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

fn default_length() -> f64 {
    20.0
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_epsilons() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_max_step() -> f64 {
    1e-3
}

impl Default for GyConfig {
    fn default() -> Self {
        GyConfig {
            half_length: default_length(),
            ode_tolerance: default_tolerance(),
            epsilon_grid: default_epsilons(),
            max_step: default_max_step(),
        }
    }
}

impl GyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_length.is_finite() && self.half_length >= 10.0) {
            return Err(Error::InvalidParams(format!("half_length must be >= 10, got {}", self.half_length)));
        }
        if !(self.ode_tolerance > 0.0 && self.ode_tolerance < 1e-3) {
            return Err(Error::InvalidParams(format!("ode_tolerance out of range: {}", self.ode_tolerance)));
        }
        if !(self.max_step > 0.0 && self.max_step <= 1e-3) {
            return Err(Error::InvalidParams(format!("max_step must lie in (0, 1e-3], got {}", self.max_step)));
        }
        if self.epsilon_grid.is_empty() || self.epsilon_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParams("epsilon grid must be nonempty and positive".into()));
        }
        if self.epsilon_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParams("epsilon grid must be strictly decreasing".into()));
        }
        Ok(())
    }

    fn integrator(&self) -> Dopri5Config {
        Dopri5Config { rtol: self.ode_tolerance, atol: self.ode_tolerance, max_step: self.max_step, ..Default::default() }
    }
}

/// `W(r) = cos(4·arctan(eʳ)) − 1`.
pub fn fluctuation_potential(r: f64) -> f64 {
    (4.0 * r.exp().atan()).cos() - 1.0
}

/// Solves `y'' = (1 + W + shift)·y` from `r = 0`, returning `y` at `L − 2` and `L`.
fn shoot(config: &GyConfig, potential: &(dyn Fn(f64) -> f64 + Sync), shift: f64, y0: f64, dy0: f64) -> Result<(f64, f64)> {
    let l = config.half_length;
    let (ys, _) = ode::integrate(
        |r, y, dy| {
            dy[0] = y[1];
            dy[1] = (1.0 + potential(r) + shift) * y[0];
        },
        0.0,
        &[y0, dy0],
        &[l - 2.0, l],
        &config.integrator(),
    )?;
    Ok((ys[0][0], ys[1][0]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OddReport {
    pub ratio: f64,
    /// Same ratio evaluated at `L − 2`.
    pub ratio_shorter: f64,
}

/// `det 𝓜_odd / det 𝓜_odd^free` for an arbitrary potential.
pub fn gy_ratio_odd_with(config: &GyConfig, potential: &(dyn Fn(f64) -> f64 + Sync)) -> Result<OddReport> {
    config.validate()?;
    let l = config.half_length;
    let (u_short, u_long) = shoot(config, potential, 0.0, 0.0, 1.0)?;
    let ratio = u_long / l.sinh();
    let ratio_shorter = u_short / (l - 2.0).sinh();
    let difference = (ratio - ratio_shorter).abs();
    if !(difference < DOMAIN_TOL) {
        return Err(Error::DomainNotConverged { difference });
    }
    Ok(OddReport { ratio, ratio_shorter })
}

/// Odd-sector ratio for the instanton fluctuation potential (expected 1/2).
pub fn gy_ratio_odd(config: &GyConfig) -> Result<OddReport> {
    gy_ratio_odd_with(config, &fluctuation_potential)
}

/// `𝒩 = ∫₀^L sech² r dr` by composite Simpson quadrature.
pub fn zero_mode_norm(half_length: f64) -> f64 {
    let intervals = 2 * ((half_length * 1000.0).ceil() as usize).max(1000);
    let h = half_length / intervals as f64;
    let f = |r: f64| {
        let s = 1.0 / r.cosh();
        s * s
    };
    let mut acc = f(0.0) + f(half_length);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvenReport {
    pub per_epsilon: Vec<EpsilonPoint>,
    /// Polynomial (Richardson/Neville) extrapolation to ε = 0.
    pub extrapolated: f64,
    pub zero_mode_norm: f64,
}

/// Neville extrapolation of `(x_i, y_i)` to `x = 0`.
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> f64 {
    let mut p: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let x: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
    }
    p[0]
}

/// Primed even-sector ratio with the zero mode removed (expected 1/2).
pub fn gy_ratio_even_primed(config: &GyConfig) -> Result<EvenReport> {
    config.validate()?;
    let l = config.half_length;
    if let Some(&eps) = config.epsilon_grid.iter().find(|&&e| e * l > 1.0) {
        return Err(Error::ShiftTooLarge { epsilon: eps });
    }
    let norm = zero_mode_norm(l);
    let potential = fluctuation_potential;
    let per_epsilon: Vec<EpsilonPoint> = config
        .epsilon_grid
        .par_iter()
        .map(|&epsilon| {
            let (_, v) = shoot(config, &potential, epsilon, 1.0, 0.0)?;
            Ok(EpsilonPoint { epsilon, ratio: v / (epsilon * norm * l.cosh()) })
        })
        .collect::<Result<_>>()?;
    let raw: Vec<(f64, f64)> = per_epsilon.iter().map(|p| (p.epsilon, p.ratio)).collect();
    let steps: Vec<f64> = raw.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let monotone = steps.iter().all(|&d| d <= 0.0) || steps.iter().all(|&d| d >= 0.0);
    if !monotone {
        return Err(Error::NonMonotoneExtrapolation { raw });
    }
    Ok(EvenReport { extrapolated: extrapolate_to_zero(&raw), per_epsilon, zero_mode_norm: norm })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub grid_points: usize,
    pub spacing: f64,
    pub ratio_odd: f64,
    pub ratio_even_primed: f64,
    /// Lowest even-sector eigenvalue (the discretized zero mode).
    pub lowest_even_eigenvalue: f64,
    /// Whether that eigenvalue was treated as a zero mode and removed.
    pub zero_mode_removed: bool,
}

/// Eigenvalues of one parity sector on the positive half grid.
fn sector_eigenvalues(half: &[f64], h: f64, potential: &dyn Fn(f64) -> f64, even: bool) -> Result<Vec<f64>> {
    let inv_h2 = 1.0 / (h * h);
    let mut d: Vec<f64> = half.iter().map(|&r| 2.0 * inv_h2 + 1.0 + potential(r)).collect();
    // Mirror neighbour across r = 0: ψ(−r₀) = ±ψ(r₀).
    d[0] += if even { -inv_h2 } else { inv_h2 };
    let e = vec![-inv_h2; half.len() - 1];
    tridiagonal_ql(&mut d, &e, None)?;
    Ok(d)
}

/// Finite-difference determinant ratios for an arbitrary potential.
pub fn fd_determinant_oracle_with(config: &GyConfig, grid_points: usize, potential: &dyn Fn(f64) -> f64) -> Result<FdReport> {
    config.validate()?;
    if grid_points < 1000 {
        return Err(Error::InvalidParams(format!("grid_points must be >= 1000, got {grid_points}")));
    }
    // An even count keeps the grid symmetric with no node at r = 0.
    let n = grid_points + grid_points % 2;
    let l = config.half_length;
    let h = 2.0 * l / (n + 1) as f64;
    let half: Vec<f64> = (0..n / 2).map(|i| (i as f64 + 0.5) * h).collect();
    let free = |_: f64| 0.0;

    let odd = sector_eigenvalues(&half, h, potential, false)?;
    let odd_free = sector_eigenvalues(&half, h, &free, false)?;
    let even = sector_eigenvalues(&half, h, potential, true)?;
    let even_free = sector_eigenvalues(&half, h, &free, true)?;

    let log_ratio = |a: &[f64], b: &[f64]| -> Result<f64> {
        let mut acc = 0.0;
        for v in a.iter().chain(b) {
            if !(*v > 0.0) {
                return Err(Error::InvalidParams(format!("non-positive eigenvalue {v} in determinant")));
            }
        }
        for v in a {
            acc += v.ln();
        }
        for v in b {
            acc -= v.ln();
        }
        Ok(acc)
    };
    let ratio_odd = log_ratio(&odd, &odd_free)?.exp();
    let lowest = even[0];
    let zero_mode_removed = lowest.abs() < 1e-2;
    let ratio_even_primed = if zero_mode_removed {
        log_ratio(&even[1..], &even_free)?.exp() / zero_mode_norm(l)
    } else {
        log_ratio(&even, &even_free)?.exp()
    };
    Ok(FdReport { grid_points: n, spacing: h, ratio_odd, ratio_even_primed, lowest_even_eigenvalue: lowest, zero_mode_removed })
}

pub fn fd_determinant_oracle(config: &GyConfig, grid_points: usize) -> Result<FdReport> {
    fd_determinant_oracle_with(config, grid_points, &fluctuation_potential)
}

/// Max of `|(−∂² + 1 + W) sech r|` on a uniform grid over `[−L, L]`, using
/// the exact second derivative of `sech`.
pub fn zero_mode_residual(half_length: f64, points: usize) -> f64 {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let r = -half_length + 2.0 * half_length * i as f64 / (points - 1) as f64;
            let s = 1.0 / r.cosh();
            let second = s - 2.0 * s * s * s;
            (-second + (1.0 + fluctuation_potential(r)) * s).abs()
        })
        .fold(0.0, f64::max)
}

/// Max of the discretized `𝓜 sech` over interior points of a grid with spacing `h`.
pub fn fd_zero_mode_residual(half_length: f64, h: f64) -> f64 {
    let n = (2.0 * half_length / h).round() as usize;
    let f = |r: f64| 1.0 / r.cosh();
    (1..n)
        .map(|i| {
            let r = -half_length + i as f64 * h;
            let lap = (f(r - h) - 2.0 * f(r) + f(r + h)) / (h * h);
            (-lap + (1.0 + fluctuation_potential(r)) * f(r)).abs()
        })
        .fold(0.0, f64::max)
}

/// Everything the `gy` command reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GyReport {
    pub config: GyConfig,
    pub odd: OddReport,
    pub even: EvenReport,
    /// `odd × even`; 1/4 reproduces the one-instanton prefactor.
    pub product: f64,
    pub fd: Option<FdReport>,
}

pub fn gy_report(config: &GyConfig, fd_grid_points: Option<usize>) -> Result<GyReport> {
    let odd = gy_ratio_odd(config)?;
    let even = gy_ratio_even_primed(config)?;
    let fd = fd_grid_points.map(|g| fd_determinant_oracle(config, g)).transpose()?;
    Ok(GyReport { config: config.clone(), product: odd.ratio * even.extrapolated, odd, even, fd })
}
