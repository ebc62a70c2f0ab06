//! `ringtheta`: batch front end for spectra, dynamics, semiclassics,
//! determinants, lab-frame runs and fits.
//!
//! Every command reads an optional JSON config (`--config`), overlays the
//! flags given on the command line, writes CSV/JSON into `--out`, and
//! finishes with `manifest.json` (resolved config, its SHA-256, versions,
//! wall time). Exit codes: 2 config, 3 numerical failure, 4 I/O.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use commands::{ConvergeKind, FitModelArg, Subtract};
use config::{flags_value, Format, RunConfig, Units};
use error::CliError;
use output::Output;

#[derive(Parser)]
#[command(name = "ringtheta", version, about = "Particle on a discretized circle with a theta term")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize)]
struct CommonArgs {
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long = "out", global = true)]
    out_dir: Option<PathBuf>,
    /// Table formats to write (repeatable).
    #[arg(long = "format", global = true, value_enum)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    formats: Vec<Format>,
    /// Frequency units: angular ns^-1 (default) or MHz (ν = ω/2π·10³).
    #[arg(long, global = true, value_enum)]
    units: Option<Units>,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest branches E_k(θ) by exact diagonalization, with diagnostics.
    Spectrum(SpectrumArgs),
    /// Convergence sweeps: gap vs n_s, ED/DIGA ratio vs ω, fuzziness vs α.
    Converge(ConvergeArgs),
    /// Real-time evolution from a prepared state, optionally with a θ ramp.
    Dynamics(DynamicsArgs),
    /// Instanton-gas quantities, branches and well probabilities.
    Diga(DigaArgs),
    /// Gel'fand–Yaglom determinant ratios with a finite-difference check.
    Gy(GyArgs),
    /// Lab-frame multi-level simulation against its rotating-wave reduction.
    Labframe(LabframeArgs),
    /// Experimental (Ω, Δ, n, n_s) to model parameters.
    MapParams(MapArgs),
    /// Fit tunneling oscillations in a series CSV.
    Fit(FitArgs),
}

#[derive(Args, Serialize)]
struct ModelArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "nsites")]
    n_sites: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Moment of inertia, ns.
    #[arg(long = "inertia")]
    inertia_ns: Option<f64>,
}

#[derive(Args, Serialize)]
struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Number of θ points.
    #[arg(long)]
    theta_grid: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    theta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta_max: Option<f64>,
    #[arg(long)]
    branches: Option<usize>,
    #[arg(long, value_enum)]
    subtract: Option<Subtract>,
}

#[derive(Args, Serialize)]
struct ConvergeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    kind: Option<ConvergeKind>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    grid: Vec<f64>,
}

#[derive(Args, Serialize)]
struct DynamicsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Start on this site (delta state).
    #[arg(long)]
    #[serde(skip)]
    site: Option<usize>,
    /// Cosine-power width; centred on `--site` (default 0).
    #[arg(long)]
    #[serde(skip)]
    alpha: Option<f64>,
    /// Start in the ground state of H(θ).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    start_in_ground_state: bool,
    #[arg(long = "t-end")]
    t_end_ns: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Ramp θ linearly to this value over the run.
    #[arg(long, allow_hyphen_values = true)]
    ramp_to: Option<f64>,
    #[arg(long)]
    ramp_steps: Option<usize>,
    /// Also write well populations.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    wells: bool,
}

#[derive(Args, Serialize)]
struct DigaArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    theta_grid: Option<usize>,
    /// Dimensionless horizon for well probabilities.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Serialize)]
struct GyArgs {
    #[arg(long)]
    half_length: Option<f64>,
    #[arg(long)]
    ode_tolerance: Option<f64>,
    /// Comma-separated, strictly decreasing zero-mode shifts.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    epsilon_grid: Vec<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    /// Finite-difference grid points; 0 skips the cross-check.
    #[arg(long)]
    fd_points: Option<usize>,
}

#[derive(Args, Serialize)]
struct LabframeArgs {
    /// Rabi frequency Ω.
    #[arg(long)]
    omega_rabi: Option<f64>,
    /// Detuning scale Δ.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "nsites")]
    n_sites: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Level graph JSON (synthetic ladder otherwise).
    #[arg(long = "graph")]
    #[serde(skip)]
    graph_file: Option<PathBuf>,
    #[arg(long = "spectators")]
    spectators_per_level: Option<usize>,
    #[arg(long)]
    delta_sep: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Drive set JSON (designed from the model otherwise).
    #[arg(long)]
    drives: Option<PathBuf>,
    #[arg(long = "t-end")]
    t_end_ns: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Serialize)]
struct MapArgs {
    #[arg(long)]
    omega_rabi: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "nsites")]
    n_sites: Option<usize>,
    /// Comma-separated n_s values for a feasibility table.
    #[arg(long = "nsites-grid", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    n_sites_grid: Vec<usize>,
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// Series CSV with a `time_ns` column.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column to fit (default `P_0`).
    #[arg(long)]
    column: Option<String>,
    #[arg(long, value_enum)]
    model: Option<FitModelArg>,
}

/// `RINGTHETA_THREADS` caps the worker pool; otherwise the config's
/// `threads`, otherwise rayon's default.
fn configure_threads(config_threads: Option<usize>) -> Result<usize, CliError> {
    let from_env = match std::env::var("RINGTHETA_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| CliError::Config(format!("RINGTHETA_THREADS must be a positive integer, got '{v}'")))?,
        ),
        Err(_) => None,
    };
    ringtheta::init_thread_pool(from_env.or(config_threads));
    Ok(ringtheta::thread_count())
}

fn execute<C, F>(command: &'static str, common: &CommonArgs, flags: Value, body: F) -> Result<Vec<String>, CliError>
where
    C: Serialize + DeserializeOwned + Default,
    F: FnOnce(&RunConfig<C>, &mut Output) -> Result<(), CliError>,
{
    let run: RunConfig<C> = RunConfig::resolve(command, common.config.as_deref(), flags_value(common), flags)?;
    let threads = configure_threads(run.common.threads)?;
    let mut out = Output::create(&run.common.out_dir, &run.common.formats)?;
    body(&run, &mut out)?;
    out.finish(&run, threads)
}

fn dispatch(cli: Cli) -> Result<Vec<String>, CliError> {
    let common = &cli.common;
    match cli.command {
        Command::Spectrum(a) => execute("spectrum", common, flags_value(&a), commands::spectrum),
        Command::Converge(a) => execute("converge", common, flags_value(&a), commands::converge),
        Command::Dynamics(a) => {
            let mut flags = flags_value(&a);
            let initial = match (a.alpha, a.site) {
                (Some(alpha), site) => {
                    Some(serde_json::json!({"kind": "cosine_power", "alpha": alpha, "center_site": site.unwrap_or(0)}))
                }
                (None, Some(site)) => Some(serde_json::json!({"kind": "delta", "site": site})),
                (None, None) => None,
            };
            if let Some(i) = initial {
                flags["initial"] = i;
            }
            execute("dynamics", common, flags, commands::dynamics)
        }
        Command::Diga(a) => execute("diga", common, flags_value(&a), commands::diga),
        Command::Gy(a) => execute("gy", common, flags_value(&a), commands::gy),
        Command::Labframe(a) => {
            let mut flags = flags_value(&a);
            if let Some(path) = &a.graph_file {
                flags["graph"] = serde_json::json!({"kind": "file", "path": path});
            }
            execute("labframe", common, flags, commands::labframe)
        }
        Command::MapParams(a) => execute("map-params", common, flags_value(&a), commands::map_params),
        Command::Fit(a) => execute("fit", common, flags_value(&a), commands::fit),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
