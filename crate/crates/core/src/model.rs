//! Parameters and Hamiltonians of the particle on a discretized circle.
//!
//! Internal units are dimensionless: the moment of inertia is 1, positions
//! live on `[0, 2π)`, and the lattice spacing is `a = 2π/n_sites`. Lab
//! frequencies are dimensionless values divided by `inertia_ns`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute per-entry tolerance for Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-14;

fn default_true() -> bool {
    true
}

/// One theory instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Number of potential wells.
    pub n: usize,
    /// Lattice sites on the ring.
    pub n_sites: usize,
    /// Topological angle, radians.
    pub theta: f64,
    /// Dimensionless curvature at the well bottom, `ω = n√λ`.
    pub omega: f64,
    /// Moment of inertia; the time unit in ns.
    pub inertia_ns: f64,
    /// Include the `1/a²` diagonal constant of the lattice kinetic term.
    #[serde(default = "default_true")]
    pub include_constant_shift: bool,
}

impl ModelParams {
    pub fn new(n: usize, n_sites: usize, theta: f64, omega: f64, inertia_ns: f64) -> Result<Self> {
        let p = ModelParams { n, n_sites, theta, omega, inertia_ns, include_constant_shift: true };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if self.n_sites < 3 {
            return Err(Error::InvalidParams(format!(
                "n_sites = {} < 3: neighbouring links of a ring need at least three sites",
                self.n_sites
            )));
        }
        if self.n_sites % self.n != 0 {
            return Err(Error::InvalidParams(format!(
                "n_sites = {} is not a multiple of n = {}",
                self.n_sites, self.n
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParams("theta must be finite".into()));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParams(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.inertia_ns.is_finite() && self.inertia_ns > 0.0) {
            return Err(Error::InvalidParams(format!(
                "inertia_ns must be positive, got {}",
                self.inertia_ns
            )));
        }
        Ok(())
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        ModelParams { theta, ..self.clone() }
    }

    pub fn with_n_sites(&self, n_sites: usize) -> Self {
        ModelParams { n_sites, ..self.clone() }
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        ModelParams { omega, ..self.clone() }
    }

    /// Potential depth, `λ = ω²/n²`.
    pub fn lambda(&self) -> f64 {
        let n = self.n as f64;
        self.omega * self.omega / (n * n)
    }

    /// Dimensionless lattice spacing.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_sites as f64
    }

    /// Hopping magnitude `1/(2a²)`.
    pub fn hopping(&self) -> f64 {
        let a = self.spacing();
        0.5 / (a * a)
    }

    pub fn position(&self, site: usize) -> f64 {
        site_position(site, self.n_sites)
    }

    /// `λ(1 − cos(n x_i))`.
    pub fn potential(&self, site: usize) -> f64 {
        self.lambda() * (1.0 - (self.n as f64 * self.position(site)).cos())
    }

    /// Constant added to every diagonal entry.
    pub fn diagonal_shift(&self) -> f64 {
        if self.include_constant_shift {
            2.0 * self.hopping()
        } else {
            0.0
        }
    }

    pub fn sites_per_well(&self) -> usize {
        self.n_sites / self.n
    }

    /// Site index of the centre of well `l`.
    pub fn well_site(&self, well: usize) -> usize {
        (well % self.n) * self.sites_per_well()
    }

    /// Converts a dimensionless frequency to ns⁻¹.
    pub fn to_lab_frequency(&self, dimless: f64) -> f64 {
        dimless / self.inertia_ns
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: ModelParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("ModelParams serializes")
    }
}

/// `x_i = 2πi/n_sites`, reduced exactly through the integer index.
pub fn site_position(site: usize, n_sites: usize) -> f64 {
    2.0 * PI * (site % n_sites) as f64 / n_sites as f64
}

/// Dense complex Hermitian matrix, certified at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl HermitianOperator {
    /// Takes a row-major `dim × dim` matrix. Entries must satisfy
    /// `|H_ij − conj(H_ji)| ≤ 1e-14`; the stored matrix is then made exactly
    /// Hermitian from its upper triangle.
    pub fn new(dim: usize, mut entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("operator dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        for i in 0..dim {
            for j in i..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::InvalidParams(format!("non-finite entry ({i},{j})")));
                }
                let deviation = (a - b.conj()).norm();
                if !(deviation <= HERMITIAN_TOL) {
                    return Err(Error::NotHermitian { i, j, deviation });
                }
            }
        }
        for i in 0..dim {
            entries[i * dim + i].im = 0.0;
            for j in i + 1..dim {
                entries[j * dim + i] = entries[i * dim + j].conj();
            }
        }
        Ok(HermitianOperator { dim, entries })
    }

    /// Builds from a real diagonal and the directed ring links
    /// `links[i]` = coefficient of `|i+1⟩⟨i|` (indices mod dim).
    pub fn ring(diagonal: &[f64], links: &[Complex64]) -> Result<Self> {
        let dim = diagonal.len();
        if links.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: links.len() });
        }
        if dim < 3 {
            return Err(Error::InvalidParams(format!("ring needs at least 3 sites, got {dim}")));
        }
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = Complex64::new(diagonal[i], 0.0);
            let j = (i + 1) % dim;
            m[j * dim + i] = links[i];
            m[i * dim + j] = links[i].conj();
        }
        Self::new(dim, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.entries[i * self.dim + i].re).collect()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.entries[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .fold(Complex64::new(0.0, 0.0), |acc, (a, x)| acc + a * x)
            })
            .collect()
    }

    /// `⟨v|H|v⟩` (real for Hermitian H).
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        let hv = self.apply(v);
        v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max_ij |H_ij − conj(H_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.entries[i * n + j] - self.entries[j * n + i].conj()).norm());
            }
        }
        worst
    }

    /// Operator with every diagonal entry shifted by `-shift`.
    pub fn shifted(&self, shift: f64) -> HermitianOperator {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.entries[i * self.dim + i].re -= shift;
        }
        out
    }

    /// All entries multiplied by a real factor.
    pub fn scaled(&self, factor: f64) -> HermitianOperator {
        HermitianOperator { dim: self.dim, entries: self.entries.iter().map(|c| c * factor).collect() }
    }

    /// Site reflection `i → (dim − i) mod dim`.
    pub fn reflected(&self) -> HermitianOperator {
        let n = self.dim;
        let r = |i: usize| (n - i) % n;
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                m[r(i) * n + r(j)] = self.entries[i * n + j];
            }
        }
        HermitianOperator { dim: n, entries: m }
    }
}

/// Site phases `α_i` of a diagonal unitary `U = diag(e^{iα_i})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugePhases {
    pub alphas: Vec<f64>,
}

impl GaugePhases {
    pub fn new(alphas: Vec<f64>) -> Self {
        GaugePhases { alphas }
    }

    /// `α_i = −w·2πi/n_sites`: shifts θ by `2πw` when applied.
    pub fn winding(n_sites: usize, w: i64) -> Self {
        let alphas = (0..n_sites).map(|i| -(w as f64) * site_position(i, n_sites)).collect();
        GaugePhases { alphas }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// The ring Hamiltonian: hopping `−e^{iθ/n_s}/(2a²)` on each directed link
/// `i → i+1`, potential `λ(1 − cos n x_i)` plus optionally `1/a²`.
pub fn build_ring_hamiltonian(params: &ModelParams) -> Result<HermitianOperator> {
    params.validate()?;
    let ns = params.n_sites;
    let shift = params.diagonal_shift();
    let diagonal: Vec<f64> = (0..ns).map(|i| params.potential(i) + shift).collect();
    HermitianOperator::ring(&diagonal, &vec![link_coefficient(params); ns])
}

fn link_coefficient(params: &ModelParams) -> Complex64 {
    -Complex64::from_polar(params.hopping(), params.theta / params.n_sites as f64)
}

/// Kinetic operator by the Fourier route: diagonal in the discrete momentum
/// basis with momenta shifted by `θ/2π`, transformed back to sites.
///
/// Equals `build_ring_hamiltonian(params)` minus the potential diagonal.
pub fn build_kinetic_fourier(params: &ModelParams) -> Result<HermitianOperator> {
    params.validate()?;
    let ns = params.n_sites;
    let a = params.spacing();
    let t = params.hopping();
    // κ_j = (1/a²)(1 − cos((p_j − θ/2π) a)), p_j a = 2πj/n_s.
    let kappa: Vec<f64> = (0..ns)
        .map(|j| {
            let arg = 2.0 * PI * j as f64 / ns as f64 - params.theta / ns as f64;
            (1.0 - arg.cos()) / (a * a)
        })
        .collect();
    let subtract = if params.include_constant_shift { 0.0 } else { 2.0 * t };
    let mut m = vec![Complex64::new(0.0, 0.0); ns * ns];
    for i in 0..ns {
        for k in 0..ns {
            // (1/n_s) Σ_j e^{i p_j (x_i − x_k)} κ_j with the phase index reduced mod n_s.
            let d = (i + ns - k) % ns;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, kj) in kappa.iter().enumerate() {
                let idx = (j * d) % ns;
                acc += Complex64::from_polar(*kj, site_position(idx, ns));
            }
            m[i * ns + k] = acc / ns as f64;
        }
        m[i * ns + i].re -= subtract;
    }
    // Symmetrize the roundoff before certification.
    for i in 0..ns {
        m[i * ns + i].im = 0.0;
        for k in i + 1..ns {
            let avg = 0.5 * (m[i * ns + k] + m[k * ns + i].conj());
            m[i * ns + k] = avg;
            m[k * ns + i] = avg.conj();
        }
    }
    HermitianOperator::new(ns, m)
}

/// `U†HU` with `U = diag(e^{iα_i})`, so the link `i → i+1` picks up
/// `e^{i(α_i − α_{i+1})}`.
pub fn gauge_transform(h: &HermitianOperator, phases: &GaugePhases) -> Result<HermitianOperator> {
    let n = h.dim();
    if phases.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: phases.len() });
    }
    let u: Vec<Complex64> = phases.alphas.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        m[i * n + i] = h.get(i, i);
        for j in i + 1..n {
            let v = u[i].conj() * h.get(i, j) * u[j];
            m[i * n + j] = v;
            m[j * n + i] = v.conj();
        }
    }
    HermitianOperator::new(n, m)
}

/// Reduces an angle to `(−π, π]`.
pub fn reduce_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = x - two_pi * (x / two_pi).round();
    if r <= -PI {
        r += two_pi;
    }
    if r > PI {
        r -= two_pi;
    }
    r
}

/// Phase of the product of directed link couplings `∏ H_{i+1,i}`, in `(−π, π]`.
///
/// Sign convention: the standard ring has negative real hopping, whose
/// product contributes `(−1)^{n_s}`. For even `n_s` the result is θ; for odd
/// `n_s` it is `θ + π`.
pub fn extract_theta(h: &HermitianOperator) -> Result<f64> {
    let n = h.dim();
    if n < 3 {
        return Err(Error::InvalidParams(format!("ring needs at least 3 sites, got {n}")));
    }
    for i in 0..n {
        for j in 0..n {
            let neighbour = j == (i + 1) % n || i == (j + 1) % n;
            if i != j && !neighbour && h.get(i, j).norm() != 0.0 {
                return Err(Error::NonRingSparsity { i, j });
            }
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let next = (i + 1) % n;
        let w = h.get(next, i);
        if w.norm() == 0.0 {
            return Err(Error::ZeroLink { site: i, next });
        }
        total += w.arg();
    }
    Ok(reduce_angle(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, ns: usize, theta: f64, omega: f64) -> ModelParams {
        ModelParams::new(n, ns, theta, omega, 1.0).unwrap()
    }

    #[test]
    fn four_site_entries() {
        let p = params(2, 4, 0.0, 2.0);
        let h = build_ring_hamiltonian(&p).unwrap();
        let hop = -2.0 / (PI * PI);
        for i in 0..4 {
            let j = (i + 1) % 4;
            assert!((h.get(j, i) - Complex64::new(hop, 0.0)).norm() < 1e-15);
        }
        let shift = 4.0 / (PI * PI);
        let lambda = 1.0;
        let expected = [0.0, 2.0 * lambda, 0.0, 2.0 * lambda];
        for (i, e) in expected.iter().enumerate() {
            assert!((h.get(i, i).re - e - shift).abs() < 1e-14);
        }
        assert_eq!(h.get(0, 2), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(1, 2, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(2, 5, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(2, 4, f64::NAN, 1.0, 1.0).is_err());
        assert!(ModelParams::new(2, 4, 0.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(2, 4, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn json_keys_round_trip() {
        let p = params(3, 6, 0.5, 3.0);
        let s = p.to_json_string();
        for key in ["n", "n_sites", "theta", "omega", "inertia_ns", "include_constant_shift"] {
            assert!(s.contains(&format!("\"{key}\"")));
        }
        assert_eq!(ModelParams::from_json_str(&s).unwrap(), p);
        let defaulted =
            ModelParams::from_json_str(r#"{"n":2,"n_sites":4,"theta":0,"omega":1.5,"inertia_ns":150}"#).unwrap();
        assert!(defaulted.include_constant_shift);
        assert!(ModelParams::from_json_str(r#"{"n":2,"n_sites":4,"theta":0,"omega":1.5,"inertia_ns":150,"x":1}"#)
            .is_err());
    }

    #[test]
    fn hermiticity_enforced() {
        let bad = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
        ];
        assert!(matches!(HermitianOperator::new(2, bad), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn fourier_route_textbook_laplacian() {
        let p = params(1, 4, 0.0, 1.0);
        let k = build_kinetic_fourier(&p).unwrap();
        let a = p.spacing();
        let s = 1.0 / (2.0 * a * a);
        for i in 0..4 {
            for j in 0..4 {
                let d = (i + 4 - j) % 4;
                let expected = match d {
                    0 => 2.0 * s,
                    1 | 3 => -s,
                    _ => 0.0,
                };
                assert!((k.get(i, j) - Complex64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn extract_theta_conventions() {
        let even = build_ring_hamiltonian(&params(2, 6, 1.3, 2.0)).unwrap();
        assert!((extract_theta(&even).unwrap() - 1.3).abs() < 1e-12);
        let real_even = build_ring_hamiltonian(&params(2, 8, 0.0, 2.0)).unwrap();
        assert!(extract_theta(&real_even).unwrap().abs() < 1e-12);
        let odd = build_ring_hamiltonian(&params(1, 5, 0.0, 2.0)).unwrap();
        assert!((extract_theta(&odd).unwrap() - PI).abs() < 1e-12);
        assert_eq!(reduce_angle(-PI), PI);
    }

    #[test]
    fn extract_theta_errors() {
        let mut diag = vec![0.0; 4];
        diag[0] = 1.0;
        let links = vec![
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ];
        let h = HermitianOperator::ring(&diag, &links).unwrap();
        assert!(matches!(extract_theta(&h), Err(Error::ZeroLink { site: 1, next: 2 })));

        let mut m = vec![Complex64::new(0.0, 0.0); 16];
        for i in 0..4 {
            m[((i + 1) % 4) * 4 + i] = Complex64::new(-1.0, 0.0);
            m[i * 4 + (i + 1) % 4] = Complex64::new(-1.0, 0.0);
        }
        m[2] = Complex64::new(0.5, 0.0);
        m[8] = Complex64::new(0.5, 0.0);
        let h = HermitianOperator::new(4, m).unwrap();
        assert!(matches!(extract_theta(&h), Err(Error::NonRingSparsity { .. })));
    }

    #[test]
    fn winding_gauge_maps_theta_to_theta_plus_two_pi() {
        let p = params(2, 8, 0.4, 2.0);
        let h = build_ring_hamiltonian(&p).unwrap();
        let g = gauge_transform(&h, &GaugePhases::winding(8, 1)).unwrap();
        let h2 = build_ring_hamiltonian(&p.with_theta(0.4 + 2.0 * PI)).unwrap();
        assert!(g.max_abs_diff(&h2) < 1e-13);
        let e1 = extract_theta(&h).unwrap();
        let e2 = extract_theta(&g).unwrap();
        assert!(reduce_angle(e2 - e1).abs() < 1e-12);
    }

    #[test]
    fn constant_gauge_is_identity() {
        let h = build_ring_hamiltonian(&params(2, 6, 0.9, 2.0)).unwrap();
        let g = gauge_transform(&h, &GaugePhases::new(vec![0.77; 6])).unwrap();
        assert!(g.max_abs_diff(&h) < 1e-15);
        assert!(gauge_transform(&h, &GaugePhases::new(vec![0.0; 5])).is_err());
    }
}
