//! Result bundles: the deterministic file set every command writes.
//!
//! A bundle directory contains:
//!
//! - `trajectory.csv` — `uav,slot,x,y,z`, one row per antenna per slot;
//! - `rates.csv` — `ue,slot,rate`, achieved rate in bits/s/Hz per terminal
//!   per slot under per-slot MMSE beamforming;
//! - `beamformers.csv` — `ue,slot,uav,magnitude,phase_rad`, the unit-norm
//!   receive weights behind `rates.csv` (phases in radians);
//! - `trace.csv` — `stage,iter,objective`, the optimizer's objective after
//!   each accepted outer round, non-decreasing within each stage;
//! - `summary.toml` — scalar results and the scenario dimensions;
//! - `timing.toml` — wall-clock runtime. This is the only file that varies
//!   between reruns; everything else is byte-identical for identical inputs.
//!
//! Table values use 9 significant digits.

use ama_core::{AmaError, MmseRateSummary, Scenario, SwarmTrajectory};
use anyhow::{Context, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// Formats with 9 significant digits — the precision of every table column.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// One named objective-trace segment; segments are non-decreasing
/// internally but different stages may use different objective units
/// (e.g. a linear SNR stage followed by a rate stage).
#[derive(Debug, Clone)]
pub struct TraceStage {
    pub stage: &'static str,
    pub objectives: Vec<f64>,
}

/// Everything a command produces, prior to serialization.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub command: String,
    pub trajectory: SwarmTrajectory,
    /// Exact per-slot MMSE evaluation of `trajectory`.
    pub rates: MmseRateSummary,
    pub traces: Vec<TraceStage>,
    /// The optimizer's own final objective (an average rate, or a linear
    /// minimum SNR for the coverage-only command).
    pub objective: f64,
    pub solver_status: String,
    /// Accepted outer rounds (0 for closed-form constructions).
    pub iterations: usize,
    /// Squared channel correlation of the two terminals, for the
    /// interference-nulling placement command.
    pub correlation_sq: Option<f64>,
    /// True for benchmark flight plans that substitute their own closed
    /// loop for the scenario's pinned endpoints; such trajectories are
    /// validated on motion constraints only.
    pub endpoint_free: bool,
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    command: &'a str,
    /// Smallest per-terminal average rate, bits/s/Hz.
    min_average_rate: f64,
    per_ue_average_rate: Vec<f64>,
    objective: f64,
    solver_status: &'a str,
    iterations: usize,
    num_uavs: usize,
    num_slots: usize,
    num_users: usize,
    slot_s: f64,
    wavelength_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    correlation_sq: Option<f64>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Serializes the bundle under `dir` (created if missing).
pub fn write_bundle(dir: &Path, sc: &Scenario, b: &ResultBundle) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let traj = &b.trajectory;
    let mut t = String::from("uav,slot,x,y,z\n");
    for l in 0..traj.num_uavs() {
        for n in 0..traj.num_slots() {
            let q = traj.get(l, n);
            writeln!(t, "{l},{n},{},{},{}", sig9(q.x), sig9(q.y), sig9(q.z)).unwrap();
        }
    }
    write_file(dir, "trajectory.csv", &t)?;

    let mut r = String::from("ue,slot,rate\n");
    for (k, m) in b.rates.per_ue.iter().enumerate() {
        for (n, rate) in m.per_slot.iter().enumerate() {
            writeln!(r, "{k},{n},{}", sig9(*rate)).unwrap();
        }
    }
    write_file(dir, "rates.csv", &r)?;

    let mut w = String::from("ue,slot,uav,magnitude,phase_rad\n");
    for k in 0..b.rates.per_ue.len() {
        for n in 0..traj.num_slots() {
            for (l, v) in b.rates.beamformers.get(k, n).iter().enumerate() {
                writeln!(w, "{k},{n},{l},{},{}", sig9(v.norm()), sig9(v.arg())).unwrap();
            }
        }
    }
    write_file(dir, "beamformers.csv", &w)?;

    let mut tr = String::from("stage,iter,objective\n");
    for stage in &b.traces {
        for (i, obj) in stage.objectives.iter().enumerate() {
            writeln!(tr, "{},{i},{}", stage.stage, sig9(*obj)).unwrap();
        }
    }
    write_file(dir, "trace.csv", &tr)?;

    let doc = SummaryDoc {
        command: &b.command,
        min_average_rate: b.rates.min_average,
        per_ue_average_rate: b.rates.per_ue.iter().map(|m| m.average).collect(),
        objective: b.objective,
        solver_status: &b.solver_status,
        iterations: b.iterations,
        num_uavs: sc.num_uavs,
        num_slots: sc.num_slots,
        num_users: sc.users.len(),
        slot_s: sc.slot_s,
        wavelength_m: sc.rf.wavelength,
        correlation_sq: b.correlation_sq,
    };
    write_file(dir, "summary.toml", &toml::to_string_pretty(&doc).context("summary")?)
}

#[derive(Serialize)]
struct TimingDoc<'a> {
    command: &'a str,
    runtime_s: f64,
}

/// Writes the wall-clock record; kept separate so bundles stay
/// byte-identical across reruns.
pub fn write_timing(dir: &Path, command: &str, runtime_s: f64) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let doc = TimingDoc { command, runtime_s };
    write_file(dir, "timing.toml", &toml::to_string_pretty(&doc).context("timing")?)
}

/// Sanity checks the bundle invariants before anything is written;
/// violations indicate an internal error, not bad user input.
pub fn check_bundle(sc: &Scenario, b: &ResultBundle) -> Result<(), AmaError> {
    let min = b
        .rates
        .per_ue
        .iter()
        .map(|m| m.average)
        .fold(f64::INFINITY, f64::min);
    if (min - b.rates.min_average).abs() > 1e-12 * (1.0 + min.abs()) {
        return Err(AmaError::NumericalFailure(format!(
            "summary minimum {:.6e} disagrees with per-terminal averages (min {:.6e})",
            b.rates.min_average, min
        )));
    }
    if b.endpoint_free {
        b.trajectory.check_motion_feasible(sc, 1e-6)
    } else {
        b.trajectory.check_feasible(sc, 1e-6)
    }
}
