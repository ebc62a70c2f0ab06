//! Driven multi-level systems encoding the ring, and their rotating-wave
//! (RWA) reduction.
//!
//! Energies and frequencies are angular, in ns⁻¹. A drive on edge `(a, b)`
//! contributes the field `2Ω cos(νt + φ)`; every drive couples every edge of
//! the graph through the edge's dipole weight, so spectator transitions and
//! counter-rotating terms are all present in the lab-frame simulation.
//!
//! Orientation convention: with the field above, the RWA couples
//! `⟨lower|H|upper⟩ = Ω·e^{iφ}`. The ring link `i → i+1` therefore carries
//! `w_{i,i+1} = Ω·w_e·e^{iσφ}` with `σ = +1` when the ring step goes down in
//! energy and `σ = −1` when it goes up.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ObservableRecord, StateVector, Trajectory};
use crate::error::{Error, Result};
use crate::model::{extract_theta, reduce_angle, HermitianOperator, ModelParams};
use crate::ode::{self, Dopri5Config, OdeStats};
use crate::semiclassics::instanton_density;

/// 2π × 10 MHz in ns⁻¹, the spectator separation scale of Rydberg ladders.
pub const DEFAULT_DELTA_SEP: f64 = 2.0 * PI * 0.01;
/// Default spacing between ring transition frequencies, ns⁻¹.
pub const DEFAULT_RING_SEPARATION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub id: String,
    pub energy_ns_inv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub dipole_weight: f64,
}

/// Levels, dipole-coupled edges and the ordered ring subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelGraph {
    pub levels: Vec<Level>,
    pub edges: Vec<Edge>,
    pub ring: Vec<String>,
}

impl LevelGraph {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let g: LevelGraph = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("LevelGraph serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for l in &self.levels {
            if l.id.is_empty() {
                return Err(Error::Schema("level id is empty".into()));
            }
            if !ids.insert(l.id.as_str()) {
                return Err(Error::Schema(format!("duplicate level id '{}'", l.id)));
            }
            if !l.energy_ns_inv.is_finite() {
                return Err(Error::Schema(format!("level '{}' has non-finite energy", l.id)));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.edges {
            for end in [&e.a, &e.b] {
                if !ids.contains(end.as_str()) {
                    return Err(Error::Schema(format!("edge references unknown level '{end}'")));
                }
            }
            if e.a == e.b {
                return Err(Error::Schema(format!("self-loop on '{}'", e.a)));
            }
            if !(e.dipole_weight.is_finite() && e.dipole_weight != 0.0) {
                return Err(Error::Schema(format!("edge {} -- {} needs a finite nonzero dipole weight", e.a, e.b)));
            }
            if !seen.insert(unordered(&e.a, &e.b)) {
                return Err(Error::Schema(format!("duplicate edge {} -- {}", e.a, e.b)));
            }
        }
        if self.ring.len() < 3 {
            return Err(Error::Schema(format!("ring needs at least 3 levels, got {}", self.ring.len())));
        }
        let mut ring_ids = HashSet::new();
        for id in &self.ring {
            if !ids.contains(id.as_str()) {
                return Err(Error::Schema(format!("ring references unknown level '{id}'")));
            }
            if !ring_ids.insert(id.as_str()) {
                return Err(Error::Schema(format!("ring visits '{id}' twice")));
            }
        }
        for (a, b) in self.ring_pairs() {
            if !seen.contains(&unordered(a, b)) {
                return Err(Error::Schema(format!("ring subset not closed: no edge {a} -- {b}")));
            }
            if self.energy(a) == self.energy(b) {
                return Err(Error::Schema(format!("ring edge {a} -- {b} has zero transition frequency")));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.ring.len()
    }

    /// Consecutive ring pairs, closing back to the first level.
    pub fn ring_pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        let n = self.ring.len();
        (0..n).map(move |i| (self.ring[i].as_str(), self.ring[(i + 1) % n].as_str()))
    }

    pub fn level_index(&self, id: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.id == id)
    }

    /// Energy of a level; panics on unknown ids (validated graphs only).
    pub fn energy(&self, id: &str) -> f64 {
        self.levels.iter().find(|l| l.id == id).map(|l| l.energy_ns_inv).expect("known level id")
    }

    pub fn edge(&self, a: &str, b: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    pub fn transition_frequency(&self, e: &Edge) -> f64 {
        (self.energy(&e.a) - self.energy(&e.b)).abs()
    }

    fn is_ring_edge(&self, e: &Edge) -> bool {
        self.ring_pairs().any(|(a, b)| unordered(a, b) == unordered(&e.a, &e.b))
    }

    /// Smallest `|ν_driven − ν_spectator|` between a ring transition and any
    /// non-ring transition sharing one of its levels (∞ if there is none).
    pub fn delta_sep(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (a, b) in self.ring_pairs() {
            let driven = (self.energy(a) - self.energy(b)).abs();
            for e in &self.edges {
                if self.is_ring_edge(e) {
                    continue;
                }
                if [a, b].iter().any(|x| *x == e.a || *x == e.b) {
                    best = best.min((self.transition_frequency(e) - driven).abs());
                }
            }
        }
        best
    }

    pub fn max_transition_frequency(&self) -> f64 {
        self.edges.iter().map(|e| self.transition_frequency(e)).fold(0.0, f64::max)
    }

    /// Embeds a ring-site state into the full level space.
    pub fn embed_ring_state(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        if psi.dim() != self.n_sites() {
            return Err(Error::DimensionMismatch { expected: self.n_sites(), found: psi.dim() });
        }
        let mut full = vec![Complex64::new(0.0, 0.0); self.levels.len()];
        for (id, a) in self.ring.iter().zip(psi.amplitudes()) {
            full[self.level_index(id).expect("validated")] = *a;
        }
        Ok(full)
    }
}

fn unordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One oscillating field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    pub edge: (String, String),
    /// Rabi angular frequency Ω, ns⁻¹.
    pub omega_ns_inv: f64,
    /// Carrier angular frequency ν, ns⁻¹.
    pub freq_ns_inv: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DriveSet {
    pub drives: Vec<Drive>,
}

impl DriveSet {
    /// Parses and checks field values (graph consistency is checked separately).
    pub fn from_json_str(s: &str) -> Result<Self> {
        let d: DriveSet = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("DriveSet serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.drives {
            if d.edge.0.is_empty() || d.edge.1.is_empty() || d.edge.0 == d.edge.1 {
                return Err(Error::Schema(format!("invalid drive edge {:?}", d.edge)));
            }
            if !(d.freq_ns_inv.is_finite() && d.freq_ns_inv > 0.0) {
                return Err(Error::Schema(format!("drive on {:?} needs a positive frequency", d.edge)));
            }
            if !(d.omega_ns_inv.is_finite() && d.omega_ns_inv >= 0.0) {
                return Err(Error::Schema(format!("drive on {:?} needs a non-negative amplitude", d.edge)));
            }
            if !d.phase_rad.is_finite() {
                return Err(Error::Schema(format!("drive on {:?} has a non-finite phase", d.edge)));
            }
        }
        Ok(())
    }

    /// Requires exactly one drive per ring edge and no others.
    pub fn validate_against(&self, graph: &LevelGraph) -> Result<()> {
        self.validate()?;
        let mut used = HashSet::new();
        for d in &self.drives {
            let key = unordered(&d.edge.0, &d.edge.1);
            if !graph.ring_pairs().any(|(a, b)| unordered(a, b) == key) {
                return Err(Error::Schema(format!("drive on {} -- {} is not a ring edge", d.edge.0, d.edge.1)));
            }
            if !used.insert(key) {
                return Err(Error::Schema(format!("two drives on {} -- {}", d.edge.0, d.edge.1)));
            }
        }
        for (a, b) in graph.ring_pairs() {
            if !used.contains(&unordered(a, b)) {
                return Err(Error::MissingDrive { a: a.into(), b: b.into() });
            }
        }
        Ok(())
    }

    fn for_edge(&self, a: &str, b: &str) -> Option<&Drive> {
        self.drives.iter().find(|d| unordered(&d.edge.0, &d.edge.1) == unordered(a, b))
    }

    /// Copy with every amplitude multiplied by `factor`.
    pub fn scaled_amplitudes(&self, factor: f64) -> DriveSet {
        DriveSet {
            drives: self.drives.iter().map(|d| Drive { omega_ns_inv: d.omega_ns_inv * factor, ..d.clone() }).collect(),
        }
    }
}

/// Experimental knobs and the theory they realize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentalMap {
    /// Resonant Rabi frequency Ω = hopping magnitude, ns⁻¹.
    pub omega_rabi_ns_inv: f64,
    /// Detuning scale Δ = potential depth, ns⁻¹.
    pub delta_ns_inv: f64,
    pub n: usize,
    pub n_sites: usize,
    /// Fast (intra-well) frequency `√(2ΔΩ)·2πn/n_s`.
    pub omega_tilde_ns_inv: f64,
    /// Semiclassical tunneling frequency `2ω̃d`.
    pub omega_diga_tilde_ns_inv: f64,
    pub omega_dimless: f64,
    pub inertia_ns: f64,
    /// `√(Δ² + Ω²)/ω̃_DIGA`.
    pub feasibility_ratio: f64,
}

pub fn map_experimental_params(omega_rabi: f64, delta: f64, n: usize, n_sites: usize) -> Result<ExperimentalMap> {
    if !(omega_rabi.is_finite() && omega_rabi > 0.0 && delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParams(format!("Omega and Delta must be positive, got {omega_rabi}, {delta}")));
    }
    if n == 0 || n_sites < 3 {
        return Err(Error::InvalidParams(format!("need n >= 1 and n_sites >= 3, got n={n}, n_sites={n_sites}")));
    }
    let nf = n as f64;
    let nsf = n_sites as f64;
    let omega_tilde = (2.0 * delta * omega_rabi).sqrt() * 2.0 * PI * nf / nsf;
    let omega_diga_tilde = 8.0
        * (2.0 * delta.powi(3) * omega_rabi).powf(0.25)
        * (2.0 * nf / nsf).sqrt()
        * (-2.0 * (2.0 * delta / omega_rabi).sqrt() * nsf / (PI * nf)).exp();
    let omega_dimless = (delta / (2.0 * omega_rabi)).sqrt() * nf * nsf / (2.0 * PI);
    let map = ExperimentalMap {
        omega_rabi_ns_inv: omega_rabi,
        delta_ns_inv: delta,
        n,
        n_sites,
        omega_tilde_ns_inv: omega_tilde,
        omega_diga_tilde_ns_inv: omega_diga_tilde,
        omega_dimless,
        inertia_ns: omega_dimless / omega_tilde,
        feasibility_ratio: (delta * delta + omega_rabi * omega_rabi).sqrt() / omega_diga_tilde,
    };
    let derived = [
        map.omega_tilde_ns_inv,
        map.omega_diga_tilde_ns_inv,
        map.omega_dimless,
        map.inertia_ns,
        map.feasibility_ratio,
    ];
    if derived.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParams("derived experimental quantities are not all positive and finite".into()));
    }
    Ok(map)
}

impl ExperimentalMap {
    pub fn recompute(&self) -> Result<ExperimentalMap> {
        map_experimental_params(self.omega_rabi_ns_inv, self.delta_ns_inv, self.n, self.n_sites)
    }

    pub fn to_model_params(&self, theta: f64) -> Result<ModelParams> {
        ModelParams::new(self.n, self.n_sites, theta, self.omega_dimless, self.inertia_ns)
    }

    /// Inverse map: Ω = hopping/I, Δ = λ/I.
    pub fn from_model(params: &ModelParams) -> Result<ExperimentalMap> {
        params.validate()?;
        map_experimental_params(
            params.hopping() / params.inertia_ns,
            params.lambda() / params.inertia_ns,
            params.n,
            params.n_sites,
        )
    }

    /// `2ω̃d` from the semiclassics module, for cross-checking.
    pub fn diga_tunneling_from_density(&self) -> f64 {
        2.0 * self.omega_tilde_ns_inv * instanton_density(self.n, self.omega_dimless)
    }
}

/// Where a level graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelGraphSource {
    Synthetic {
        n_sites: usize,
        #[serde(default = "default_delta_sep")]
        delta_sep: f64,
        #[serde(default)]
        spectators_per_level: usize,
        #[serde(default)]
        seed: u64,
        /// Lower end of the ring transition frequencies, ns⁻¹.
        #[serde(default = "default_transition_scale")]
        transition_scale: f64,
        /// Minimum spacing between ring transition frequencies, ns⁻¹.
        #[serde(default = "default_ring_separation")]
        ring_separation: f64,
    },
    File {
        path: PathBuf,
    },
}

fn default_delta_sep() -> f64 {
    DEFAULT_DELTA_SEP
}

fn default_transition_scale() -> f64 {
    1.0
}

fn default_ring_separation() -> f64 {
    DEFAULT_RING_SEPARATION
}

pub fn build_level_graph(source: &LevelGraphSource) -> Result<LevelGraph> {
    match source {
        LevelGraphSource::File { path } => LevelGraph::from_json_str(&std::fs::read_to_string(path)?),
        LevelGraphSource::Synthetic {
            n_sites,
            delta_sep,
            spectators_per_level,
            seed,
            transition_scale,
            ring_separation,
        } => synthetic_level_graph(&SyntheticSpec {
            n_sites: *n_sites,
            delta_sep: *delta_sep,
            spectators_per_level: *spectators_per_level,
            seed: *seed,
            transition_scale: *transition_scale,
            ring_separation: *ring_separation,
        }),
    }
}

const GENERATOR_ATTEMPTS: usize = 100_000;

/// Parameters of the synthetic ladder generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_sites: usize,
    pub delta_sep: f64,
    pub spectators_per_level: usize,
    pub seed: u64,
    pub transition_scale: f64,
    pub ring_separation: f64,
}

impl SyntheticSpec {
    pub fn new(n_sites: usize, delta_sep: f64, spectators_per_level: usize, seed: u64) -> Self {
        SyntheticSpec {
            n_sites,
            delta_sep,
            spectators_per_level,
            seed,
            transition_scale: default_transition_scale(),
            ring_separation: default_ring_separation(),
        }
    }
}

/// Seeded random ladder. Ring transitions lie in
/// `[scale, scale + 2·n_s·s]` and are mutually separated by at least
/// `s = max(ring_separation, 2Δ_sep)`: every drive also couples the other
/// ring edges, and the resulting light shifts `~Ω²/s` must stay small on the
/// tunneling time scale. Spectators hang off ring levels at `(1–1.5)·Δ_sep`
/// from a neighbouring driven transition and at least `Δ_sep` from every one.
pub fn synthetic_level_graph(spec: &SyntheticSpec) -> Result<LevelGraph> {
    let SyntheticSpec { n_sites, delta_sep, spectators_per_level, seed, transition_scale, ring_separation } =
        *spec;
    if n_sites < 3 {
        return Err(Error::InvalidParams(format!("ring needs at least 3 levels, got {n_sites}")));
    }
    if !(delta_sep > 0.0 && delta_sep.is_finite() && transition_scale > 0.0 && transition_scale.is_finite()) {
        return Err(Error::InvalidParams("delta_sep and transition_scale must be positive".into()));
    }
    if transition_scale <= 4.0 * delta_sep {
        return Err(Error::InvalidParams("transition_scale must exceed 4*delta_sep".into()));
    }
    if !(ring_separation >= 0.0 && ring_separation.is_finite()) {
        return Err(Error::InvalidParams("ring_separation must be non-negative".into()));
    }
    let separation = ring_separation.max(2.0 * delta_sep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = transition_scale;
    let hi = transition_scale + 2.0 * n_sites as f64 * separation;
    let up_steps = n_sites / 2;

    let mut energies = Vec::new();
    let mut found = false;
    for _ in 0..GENERATOR_ATTEMPTS {
        energies.clear();
        energies.push(0.0);
        for i in 0..n_sites - 1 {
            let nu = rng.gen_range(lo..hi);
            let prev = energies[i];
            energies.push(if i < up_steps { prev + nu } else { prev - nu });
        }
        let freqs: Vec<f64> = (0..n_sites).map(|i| (energies[(i + 1) % n_sites] - energies[i]).abs()).collect();
        let closing_ok = freqs[n_sites - 1] >= lo && freqs[n_sites - 1] <= hi;
        let separated = (0..n_sites).all(|i| (i + 1..n_sites).all(|j| (freqs[i] - freqs[j]).abs() >= separation));
        let distinct =
            (0..n_sites).all(|i| (i + 1..n_sites).all(|j| (energies[i] - energies[j]).abs() >= delta_sep));
        if closing_ok && separated && distinct {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::InvalidParams("could not place ring levels with the requested separation".into()));
    }

    let ring: Vec<String> = (0..n_sites).map(|i| format!("r{i}")).collect();
    let mut levels: Vec<Level> =
        ring.iter().zip(&energies).map(|(id, &e)| Level { id: id.clone(), energy_ns_inv: e }).collect();
    let mut edges: Vec<Edge> = (0..n_sites)
        .map(|i| Edge { a: ring[i].clone(), b: ring[(i + 1) % n_sites].clone(), dipole_weight: 1.0 })
        .collect();
    let driven: Vec<f64> = (0..n_sites).map(|i| (energies[(i + 1) % n_sites] - energies[i]).abs()).collect();

    for i in 0..n_sites {
        for s in 0..spectators_per_level {
            let mut placed = false;
            for _ in 0..GENERATOR_ATTEMPTS {
                let neighbour = if rng.gen_bool(0.5) { driven[i] } else { driven[(i + n_sites - 1) % n_sites] };
                let offset = delta_sep * rng.gen_range(1.0..1.5);
                let nu = if rng.gen_bool(0.5) { neighbour + offset } else { neighbour - offset };
                let energy = if rng.gen_bool(0.5) { energies[i] + nu } else { energies[i] - nu };
                let resolved = driven.iter().all(|d| (nu - d).abs() >= delta_sep);
                let distinct = levels.iter().all(|l| (l.energy_ns_inv - energy).abs() >= delta_sep);
                if nu > 0.0 && resolved && distinct {
                    let id = format!("s{i}_{s}");
                    levels.push(Level { id: id.clone(), energy_ns_inv: energy });
                    edges.push(Edge { a: ring[i].clone(), b: id, dipole_weight: rng.gen_range(0.5..1.5) });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::InvalidParams(format!("could not place spectator {s} of level r{i}")));
            }
        }
    }
    let graph = LevelGraph { levels, edges, ring };
    graph.validate()?;
    Ok(graph)
}

/// Rotating-frame tight-binding model of the driven ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RwaReduction {
    /// Ring-site Hamiltonian in ns⁻¹.
    pub hamiltonian: HermitianOperator,
    /// `V_i = E_i − f_i`, the accumulated detunings (`V_0 = 0`).
    pub site_energies: Vec<f64>,
    /// `w_{i,i+1}`, coefficient of `|i+1⟩⟨i|`.
    pub links: Vec<Complex64>,
    /// Frame frequencies `f_i` of the ring levels.
    pub frame_frequencies: Vec<f64>,
    /// `Σ_i arg w_{i,i+1}` reduced to `(−π, π]`.
    pub phase_winding: f64,
}

impl RwaReduction {
    pub fn theta(&self) -> Result<f64> {
        extract_theta(&self.hamiltonian)
    }

    /// The ring model this reduction realizes, if it has the uniform-hopping
    /// cosine-potential form with `n` wells.
    pub fn equivalent_params(&self, n: usize) -> Result<ModelParams> {
        let ns = self.links.len();
        if n == 0 || ns % n != 0 {
            return Err(Error::InvalidParams(format!("{ns} sites cannot host {n} wells")));
        }
        let omega = self.links.iter().map(|w| w.norm()).sum::<f64>() / ns as f64;
        if self.links.iter().any(|w| (w.norm() - omega).abs() > 1e-9 * omega) {
            return Err(Error::InvalidParams("reduced hopping magnitudes are not uniform".into()));
        }
        // V_i = c + Δ(1 − cos(n x_i)): two-parameter linear least squares.
        let basis: Vec<f64> =
            (0..ns).map(|i| 1.0 - (n as f64 * crate::model::site_position(i, ns)).cos()).collect();
        let mean_b = basis.iter().sum::<f64>() / ns as f64;
        let mean_v = self.site_energies.iter().sum::<f64>() / ns as f64;
        let sbb: f64 = basis.iter().map(|b| (b - mean_b).powi(2)).sum();
        let sbv: f64 = basis.iter().zip(&self.site_energies).map(|(b, v)| (b - mean_b) * (v - mean_v)).sum();
        let delta = sbv / sbb;
        let c = mean_v - delta * mean_b;
        let misfit = basis
            .iter()
            .zip(&self.site_energies)
            .map(|(b, v)| (v - c - delta * b).abs())
            .fold(0.0, f64::max);
        if misfit > 1e-9 * (delta.abs() + omega) {
            return Err(Error::InvalidParams(format!("site energies are not a cosine potential (misfit {misfit:e})")));
        }
        let map = map_experimental_params(omega, delta, n, ns)?;
        // The standard model's negative hopping contributes (−1)^{n_s}.
        let theta = reduce_angle(self.phase_winding - ns as f64 * PI);
        map.to_model_params(theta)
    }
}

/// RWA reduction of a driven ring.
pub fn rwa_reduce(graph: &LevelGraph, drives: &DriveSet) -> Result<RwaReduction> {
    graph.validate()?;
    drives.validate_against(graph)?;
    let ns = graph.n_sites();
    let mut frame = Vec::with_capacity(ns + 1);
    frame.push(graph.energy(&graph.ring[0]));
    let mut links = Vec::with_capacity(ns);
    for (a, b) in graph.ring_pairs() {
        let drive = drives.for_edge(a, b).ok_or_else(|| Error::MissingDrive { a: a.into(), b: b.into() })?;
        let edge = graph.edge(a, b).expect("validated ring edge");
        let step = graph.energy(b) - graph.energy(a);
        let detuning = drive.freq_ns_inv - step.abs();
        if detuning.abs() > 0.1 * step.abs() {
            return Err(Error::InvalidParams(format!(
                "drive on {a} -- {b} is detuned by {detuning} from a {} ns^-1 transition",
                step.abs()
            )));
        }
        let ascending = step > 0.0;
        let last = *frame.last().expect("seeded");
        frame.push(if ascending { last + drive.freq_ns_inv } else { last - drive.freq_ns_inv });
        let sigma = if ascending { -1.0 } else { 1.0 };
        links.push(Complex64::from_polar(drive.omega_ns_inv * edge.dipole_weight, sigma * drive.phase_rad));
    }
    let closure = frame[ns] - frame[0];
    let scale = graph.levels.iter().map(|l| l.energy_ns_inv.abs()).fold(1.0, f64::max);
    if closure.abs() > 1e-9 * scale {
        return Err(Error::AmbiguousFrame { residual: closure });
    }
    frame.truncate(ns);
    let site_energies: Vec<f64> = graph.ring.iter().zip(&frame).map(|(id, f)| graph.energy(id) - f).collect();
    let phase_winding = reduce_angle(links.iter().map(|w| w.arg()).sum());
    let hamiltonian = HermitianOperator::ring(&site_energies, &links)?;
    Ok(RwaReduction { hamiltonian, site_energies, links, frame_frequencies: frame, phase_winding })
}

/// Drives realizing `params` on `graph`: Ω = hopping/I, detunings building
/// `V_i = λ(1 − cos n x_i)/I`, and phases giving link coefficients
/// `−Ω·e^{iθ/n_s}`, i.e. `build_ring_hamiltonian(params)/I` without the
/// constant shift.
pub fn design_drives(graph: &LevelGraph, params: &ModelParams) -> Result<DriveSet> {
    graph.validate()?;
    params.validate()?;
    if graph.n_sites() != params.n_sites {
        return Err(Error::DimensionMismatch { expected: params.n_sites, found: graph.n_sites() });
    }
    let inertia = params.inertia_ns;
    let omega = params.hopping() / inertia;
    let v: Vec<f64> = (0..params.n_sites).map(|i| params.potential(i) / inertia).collect();
    let ns = params.n_sites;
    let target_phase = PI + params.theta / ns as f64;
    let drives = graph
        .ring_pairs()
        .enumerate()
        .map(|(i, (a, b))| {
            let edge = graph.edge(a, b).expect("validated");
            let step = graph.energy(b) - graph.energy(a);
            let ascending = step > 0.0;
            let dv = v[(i + 1) % ns] - v[i];
            let freq = if ascending { step - dv } else { -step + dv };
            let sign_phase = if edge.dipole_weight < 0.0 { PI } else { 0.0 };
            let sigma = if ascending { -1.0 } else { 1.0 };
            Drive {
                edge: (a.to_string(), b.to_string()),
                omega_ns_inv: omega / edge.dipole_weight.abs(),
                freq_ns_inv: freq,
                phase_rad: reduce_angle(sigma * (target_phase - sign_phase)),
            }
        })
        .collect();
    let set = DriveSet { drives };
    set.validate_against(graph)?;
    Ok(set)
}

/// Integrator settings for [`simulate_lab_frame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabIntegratorConfig {
    #[serde(default = "default_lab_tol")]
    pub rtol: f64,
    #[serde(default = "default_lab_tol")]
    pub atol: f64,
    /// Max step is `1/(steps_per_period × max transition frequency)`.
    #[serde(default = "default_steps_per_period")]
    pub steps_per_period: f64,
    /// Optional bound on the output times.
    #[serde(default)]
    pub horizon_ns: Option<f64>,
}

fn default_lab_tol() -> f64 {
    1e-10
}
fn default_steps_per_period() -> f64 {
    50.0
}

impl Default for LabIntegratorConfig {
    fn default() -> Self {
        LabIntegratorConfig {
            rtol: default_lab_tol(),
            atol: default_lab_tol(),
            steps_per_period: default_steps_per_period(),
            horizon_ns: None,
        }
    }
}

/// Result of a lab-frame integration.
#[derive(Debug, Clone)]
pub struct LabFrameRun {
    /// Ring-site amplitudes in the RWA rotating frame, with ring-site
    /// observables (`norm` is the full-space norm, `energy` the lab-frame
    /// `⟨H(t)⟩`).
    pub trajectory: Trajectory,
    /// Populations of every level, ordered as `graph.levels`.
    pub level_populations: Vec<Vec<f64>>,
    /// Largest population outside the ring.
    pub max_leakage: f64,
    pub max_norm_drift: f64,
    /// Frame frequencies used to report ring amplitudes (from the drives).
    pub frame_frequencies: Vec<f64>,
    pub stats: OdeStats,
}

/// Integrates `i ċ = H(t) c` with
/// `H(t) = Σ E_a|a⟩⟨a| + F(t)·Σ_edges w_e(|a⟩⟨b| + h.c.)`,
/// `F(t) = Σ_d 2Ω_d cos(ν_d t + φ_d)`, in the interaction picture of the
/// level energies. `psi0` lists amplitudes for `graph.levels` at `t = 0`.
pub fn simulate_lab_frame(
    graph: &LevelGraph,
    drives: &DriveSet,
    psi0: &[Complex64],
    times_ns: &[f64],
    config: &LabIntegratorConfig,
) -> Result<LabFrameRun> {
    graph.validate()?;
    drives.validate_against(graph)?;
    let n_levels = graph.levels.len();
    if psi0.len() != n_levels {
        return Err(Error::DimensionMismatch { expected: n_levels, found: psi0.len() });
    }
    if let Some(h) = config.horizon_ns {
        if times_ns.iter().any(|&t| t > h) {
            return Err(Error::InvalidParams(format!("output times exceed the {h} ns horizon")));
        }
    }
    if !(config.steps_per_period > 0.0) {
        return Err(Error::InvalidParams("steps_per_period must be positive".into()));
    }
    // Frame frequencies come from the drives; a non-closing frame is still
    // simulated, only the reporting frame needs f_i.
    let frame = rwa_frame_frequencies(graph, drives)?;

    // Energies relative to their mean keep the phases E·t small.
    let mean_e = graph.levels.iter().map(|l| l.energy_ns_inv).sum::<f64>() / n_levels as f64;
    let energies: Vec<f64> = graph.levels.iter().map(|l| l.energy_ns_inv - mean_e).collect();
    let edges: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .map(|e| (graph.level_index(&e.a).expect("valid"), graph.level_index(&e.b).expect("valid"), e.dipole_weight))
        .collect();
    let fields: Vec<(f64, f64, f64)> =
        drives.drives.iter().map(|d| (2.0 * d.omega_ns_inv, d.freq_ns_inv, d.phase_rad)).collect();
    let field = |t: f64| fields.iter().map(|(a, nu, phi)| a * (nu * t + phi).cos()).sum::<f64>();

    let max_freq = graph.max_transition_frequency().max(drives.drives.iter().map(|d| d.freq_ns_inv).fold(0.0, f64::max));
    let cfg = Dopri5Config {
        rtol: config.rtol,
        atol: config.atol,
        max_step: 1.0 / (config.steps_per_period * max_freq),
        min_step: 1e-12,
        max_steps: usize::MAX,
    };

    let mut phases = vec![Complex64::new(0.0, 0.0); n_levels];
    let mut lab = vec![Complex64::new(0.0, 0.0); n_levels];
    let mut coupled = vec![Complex64::new(0.0, 0.0); n_levels];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let f = field(t);
        for a in 0..n_levels {
            let (s, c) = (energies[a] * t).sin_cos();
            phases[a] = Complex64::new(c, -s);
            lab[a] = phases[a] * Complex64::new(y[2 * a], y[2 * a + 1]);
            coupled[a] = Complex64::new(0.0, 0.0);
        }
        for &(a, b, w) in &edges {
            coupled[a] += lab[b] * w;
            coupled[b] += lab[a] * w;
        }
        for a in 0..n_levels {
            // ḃ = −i F e^{iE t} (D c)
            let v = phases[a].conj() * coupled[a] * f;
            dy[2 * a] = v.im;
            dy[2 * a + 1] = -v.re;
        }
    };
    let y0: Vec<f64> = psi0.iter().flat_map(|c| [c.re, c.im]).collect();
    let (ys, stats) = ode::integrate(rhs, 0.0, &y0, times_ns, &cfg)?;

    let ring_idx: Vec<usize> = graph.ring.iter().map(|id| graph.level_index(id).expect("valid")).collect();
    let norm0 = psi0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut states = Vec::with_capacity(ys.len());
    let mut records = Vec::with_capacity(ys.len());
    let mut level_populations = Vec::with_capacity(ys.len());
    let mut max_leakage = 0.0_f64;
    let mut max_norm_drift = 0.0_f64;
    for (y, &t) in ys.iter().zip(times_ns) {
        let b: Vec<Complex64> = (0..n_levels).map(|a| Complex64::new(y[2 * a], y[2 * a + 1])).collect();
        let pops: Vec<f64> = b.iter().map(|c| c.norm_sqr()).collect();
        let norm = pops.iter().sum::<f64>().sqrt();
        // Ring amplitude in the drive frame: c_a e^{i f_a t} = b_a e^{−i V_a t}.
        let ring_state: Vec<Complex64> = ring_idx
            .iter()
            .zip(&frame)
            .map(|(&a, &f)| b[a] * Complex64::from_polar(1.0, -(graph.levels[a].energy_ns_inv - f) * t))
            .collect();
        let mut rec = ObservableRecord::from_state(&ring_state, None, 1.0);
        rec.norm = norm;
        let c: Vec<Complex64> = (0..n_levels)
            .map(|a| b[a] * Complex64::from_polar(1.0, -graph.levels[a].energy_ns_inv * t))
            .collect();
        let mut energy: f64 = (0..n_levels).map(|a| graph.levels[a].energy_ns_inv * pops[a]).sum();
        let f = field(t);
        for &(a, bb, w) in &edges {
            energy += 2.0 * f * w * (c[a].conj() * c[bb]).re;
        }
        rec.energy = energy;
        let ring_pop: f64 = ring_idx.iter().map(|&a| pops[a]).sum();
        max_leakage = max_leakage.max(norm * norm - ring_pop);
        max_norm_drift = max_norm_drift.max((norm - norm0).abs());
        records.push(rec);
        states.push(ring_state);
        level_populations.push(pops);
    }
    Ok(LabFrameRun {
        trajectory: Trajectory { times_ns: times_ns.to_vec(), states, records, ground_fidelity: None },
        level_populations,
        max_leakage,
        max_norm_drift,
        frame_frequencies: frame,
        stats,
    })
}

/// Frame frequencies of the ring levels implied by the drives.
fn rwa_frame_frequencies(graph: &LevelGraph, drives: &DriveSet) -> Result<Vec<f64>> {
    let mut frame = vec![graph.energy(&graph.ring[0])];
    for (a, b) in graph.ring_pairs().take(graph.n_sites() - 1) {
        let d = drives.for_edge(a, b).ok_or_else(|| Error::MissingDrive { a: a.into(), b: b.into() })?;
        let last = *frame.last().expect("seeded");
        frame.push(if graph.energy(b) > graph.energy(a) { last + d.freq_ns_inv } else { last - d.freq_ns_inv });
    }
    Ok(frame)
}

/// Drive-phase winding `Σ σ_i φ_i` (plus π per negative dipole weight),
/// reduced to `(−π, π]`.
pub fn drive_phase_winding(graph: &LevelGraph, drives: &DriveSet) -> Result<f64> {
    drives.validate_against(graph)?;
    let mut total = 0.0;
    for (a, b) in graph.ring_pairs() {
        let d = drives.for_edge(a, b).expect("validated");
        let sigma = if graph.energy(b) > graph.energy(a) { -1.0 } else { 1.0 };
        total += sigma * d.phase_rad;
        if graph.edge(a, b).expect("validated").dipole_weight < 0.0 {
            total += PI;
        }
    }
    Ok(reduce_angle(total))
}

/// Pairs each ring level id with its site index.
pub fn ring_site_map(graph: &LevelGraph) -> HashMap<String, usize> {
    graph.ring.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}
