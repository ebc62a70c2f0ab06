//! Quantum particle on a discretized circle with a topological θ-term and a
//! ℤₙ potential.
//!
//! Modules:
//! - [`model`]: parameters, ring Hamiltonian, gauge utilities.
//! - [`spectral`]: exact diagonalization, θ sweeps, diagnostics.
//! - [`dynamics`]: initial states and unitary real-time evolution.
//! - [`semiclassics`]: dilute-instanton-gas closed forms.
//! - [`detfunc`]: Gel'fand–Yaglom fluctuation determinants.
//! - [`labframe`]: driven multi-level systems and their rotating-wave reduction.
//! - [`analysis`]: oscillation fits and convergence sweeps.

pub mod analysis;
pub mod detfunc;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod labframe;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod semiclassics;
pub mod spectral;

pub use error::{Error, ErrorClass, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use model::{GaugePhases, HermitianOperator, ModelParams};

/// Caps the global rayon pool. Returns the size actually configured, or
/// `None` when a pool was already built.
pub fn init_thread_pool(threads: Option<usize>) -> Option<usize> {
    let threads = threads.filter(|&t| t > 0)?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok().map(|_| threads)
}

/// Worker threads in the pool used by sweeps.
pub fn thread_count() -> usize {
    rayon::current_num_threads()
}
