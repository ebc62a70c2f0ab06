//! Adaptive Dormand–Prince 5(4) integrator for real first-order systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dopri5Config {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size.
    pub max_step: f64,
    /// Steps shorter than this abort with [`Error::StepUnderflow`].
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Config {
    fn default() -> Self {
        Dopri5Config { rtol: 1e-10, atol: 1e-10, max_step: f64::INFINITY, min_step: 1e-14, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    /// Largest scaled error estimate among accepted steps (≤ 1 by construction).
    pub max_error_estimate: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` and records `y` at each requested time.
///
/// `t_out` must be nondecreasing and not precede `t0`; steps are shortened to
/// land exactly on every output time.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], cfg: &Dopri5Config) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(cfg.rtol > 0.0 && cfg.atol >= 0.0 && cfg.max_step > 0.0 && cfg.min_step >= 0.0) {
        return Err(Error::InvalidParams("integrator tolerances and step bounds must be positive".into()));
    }
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParams("output times must be nondecreasing and start at or after t0".into()));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(t_out.len());

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    f(t, &y, &mut k1);
    stats.rhs_evaluations += 1;
    let span = t_out.last().map_or(0.0, |&te| te - t0);
    let mut h = cfg.max_step.min(if span > 0.0 { span / 100.0 } else { 1.0 });

    for &target in t_out {
        while t < target {
            if stats.accepted + stats.rejected >= cfg.max_steps {
                return Err(Error::ToleranceFailure { t, max_steps: cfg.max_steps, achieved: stats.max_error_estimate });
            }
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step < cfg.min_step && !last {
                return Err(Error::StepUnderflow { t, h: step });
            }

            for i in 0..dim {
                tmp[i] = y[i] + step * A21 * k1[i];
            }
            f(t + C2 * step, &tmp, &mut k2);
            for i in 0..dim {
                tmp[i] = y[i] + step * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * step, &tmp, &mut k3);
            for i in 0..dim {
                tmp[i] = y[i] + step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * step, &tmp, &mut k4);
            for i in 0..dim {
                tmp[i] = y[i] + step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * step, &tmp, &mut k5);
            for i in 0..dim {
                tmp[i] = y[i] + step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + step, &tmp, &mut k6);
            for i in 0..dim {
                y_new[i] = y[i] + step * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(t + step, &y_new, &mut k7);
            stats.rhs_evaluations += 6;

            let mut err = 0.0;
            for i in 0..dim {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = if dim > 0 { (err / dim as f64).sqrt() } else { 0.0 };

            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                stats.max_error_estimate = stats.max_error_estimate.max(err);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // A shortened final step says nothing about the natural size.
                if !last {
                    h = (step * grow).min(cfg.max_step);
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < cfg.min_step {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
