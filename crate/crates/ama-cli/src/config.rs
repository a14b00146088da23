//! Scenario files: parsing with defaults, validation, emission, and
//! deterministic terminal generation.
//!
//! A scenario file is a TOML document with sections:
//!
//! ```toml
//! [rf]                    # optional; carrier and link budget
//! beta0_db = -61.4        # reference gain at 1 m (dB); optional
//! noise_dbm = -94.0       # receiver noise power
//! wavelength_m = 0.0107   # optional; derived from beta0 when omitted
//!
//! [swarm]
//! L = 4                   # number of antennas (required)
//! N = 60                  # time slots
//! slot_s = 1.0
//! vmax_mps = 30.0
//! dmin_m = 5.0
//! H_m = 100.0             # altitude floor
//!
//! [swarm.endpoints]       # optional per-antenna mission endpoints
//! start = [[80.0, 60.0, 100.0], ...]
//! finish = [[80.0, 60.0, 100.0], ...]
//!
//! [[users]]               # explicit terminals ...
//! x = 40.0
//! y = 30.0
//! power_dbm = 30.0
//!
//! [generator]             # ... or generated ones (exactly one source)
//! K = 4
//! rect = [160.0, 120.0]   # terminals drawn uniformly in rect around origin
//! seed = 7
//! power_dbm = 30.0
//!
//! [solver]
//! eps1 = 1e-4             # outer stopping threshold (first stage)
//! eps2 = 1e-4             # stopping threshold of the alternating stage
//! feas_tol = 1e-8
//! opt_tol = 1e-6
//! max_iters = 100         # outer round cap per stage
//! ```
//!
//! Missing fields take the defaults shown above. Emission writes every
//! resolved field back out, so `parse(emit(f)) == f` exactly.

use crate::rng;
use ama_core::{
    db_to_linear, dbm_to_watts, AmaError, Endpoints, RfParams, Scenario, ScenarioConfig,
    SolveOptions, Vec3,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_BETA0_DB: f64 = -61.4;
pub const DEFAULT_NOISE_DBM: f64 = -94.0;
pub const DEFAULT_POWER_DBM: f64 = 30.0;
pub const DEFAULT_RECT: [f64; 2] = [160.0, 120.0];

fn default_noise_dbm() -> f64 {
    DEFAULT_NOISE_DBM
}
fn default_power_dbm() -> f64 {
    DEFAULT_POWER_DBM
}
fn default_rect() -> [f64; 2] {
    DEFAULT_RECT
}
fn default_num_slots() -> usize {
    60
}
fn default_slot_s() -> f64 {
    1.0
}
fn default_vmax() -> f64 {
    30.0
}
fn default_dmin() -> f64 {
    5.0
}
fn default_altitude() -> f64 {
    100.0
}

/// `[rf]` — carrier and link-budget parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfSection {
    /// Reference channel gain at 1 m, in dB. When omitted together with
    /// `wavelength_m`, defaults to −61.4 dB.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0_db: Option<f64>,
    /// Receiver noise power in dBm.
    pub noise_dbm: f64,
    /// Carrier wavelength in meters; derived from `beta0_db` when omitted,
    /// and checked for consistency when both are given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
}

impl Default for RfSection {
    fn default() -> Self {
        RfSection { beta0_db: None, noise_dbm: default_noise_dbm(), wavelength_m: None }
    }
}

/// `[swarm.endpoints]` — per-antenna mission start/finish positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsSection {
    pub start: Vec<[f64; 3]>,
    pub finish: Vec<[f64; 3]>,
}

/// `[swarm]` — fleet size, horizon, and motion constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmSection {
    /// Number of antennas.
    #[serde(rename = "L")]
    pub num_uavs: usize,
    /// Number of time slots.
    #[serde(rename = "N", default = "default_num_slots")]
    pub num_slots: usize,
    /// Slot length in seconds.
    #[serde(default = "default_slot_s")]
    pub slot_s: f64,
    /// Speed limit in m/s.
    #[serde(default = "default_vmax")]
    pub vmax_mps: f64,
    /// Minimum pairwise separation in meters.
    #[serde(default = "default_dmin")]
    pub dmin_m: f64,
    /// Altitude floor in meters.
    #[serde(rename = "H_m", default = "default_altitude")]
    pub altitude_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<EndpointsSection>,
}

/// One `[[users]]` row: a terminal on the ground plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRow {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_power_dbm")]
    pub power_dbm: f64,
}

/// `[generator]` — deterministic random terminal layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    /// Number of terminals to draw.
    #[serde(rename = "K")]
    pub count: usize,
    /// Rectangle dimensions `[width_x, width_y]`, centered at the origin.
    #[serde(default = "default_rect")]
    pub rect: [f64; 2],
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_power_dbm")]
    pub power_dbm: f64,
}

/// `[solver]` — stopping thresholds shared by all optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Outer stopping threshold of the first optimization stage (single-user
    /// SCA rate gain in bits/s/Hz, or relative min-SNR gain for the coverage
    /// stage of the multiuser optimizer).
    pub eps1: f64,
    /// Absolute min-rate gain (bits/s/Hz) below which an alternating sweep
    /// stops the multiuser optimizer.
    pub eps2: f64,
    /// Constraint-violation tolerance accepted by the subproblem solver.
    pub feas_tol: f64,
    /// Relative optimality-gap target of the subproblem solver.
    pub opt_tol: f64,
    /// Cap on outer rounds/sweeps per optimization stage.
    pub max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { eps1: 1e-4, eps2: 1e-4, feas_tol: 1e-8, opt_tol: 1e-6, max_iters: 100 }
    }
}

/// A parsed scenario file, before terminal generation and validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub rf: RfSection,
    pub swarm: SwarmSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<UserRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSection>,
    #[serde(default)]
    pub solver: SolverSection,
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
}

/// A validated scenario together with the solver settings to run it with.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub eps1: f64,
    pub eps2: f64,
    pub max_iters: usize,
    pub solve: SolveOptions,
    /// Effective seed (override, else generator seed, else 0); also seeds
    /// the random-placement benchmark.
    pub seed: u64,
}

impl ScenarioFile {
    /// Parses TOML text; errors carry the offending line/column and field.
    pub fn parse(text: &str) -> Result<Self, AmaError> {
        toml::from_str(text)
            .map_err(|e| AmaError::InvalidScenario(format!("scenario parse failed: {e}")))
    }

    /// Reads and parses a scenario file from disk.
    pub fn load(path: &Path) -> Result<Self, AmaError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AmaError::InvalidScenario(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Serializes the file; `parse(emit(f))` reproduces `f` exactly.
    pub fn emit(&self) -> String {
        toml::to_string_pretty(self).expect("scenario files always serialize")
    }

    /// Carrier parameters with the wavelength/reference-gain relation
    /// resolved (and checked, when both fields are present).
    pub fn rf_params(&self) -> Result<RfParams, AmaError> {
        let noise_w = dbm_to_watts(self.rf.noise_dbm);
        match (self.rf.beta0_db, self.rf.wavelength_m) {
            (None, None) => RfParams::from_beta0(db_to_linear(DEFAULT_BETA0_DB), noise_w),
            (Some(b), None) => RfParams::from_beta0(db_to_linear(b), noise_w),
            (None, Some(w)) => RfParams::from_wavelength(w, noise_w),
            (Some(b), Some(w)) => RfParams::new(db_to_linear(b), w, noise_w),
        }
    }

    /// Number of terminals the scenario will have once resolved.
    pub fn terminal_count(&self) -> usize {
        if self.users.is_empty() {
            self.generator.as_ref().map_or(0, |g| g.count)
        } else {
            self.users.len()
        }
    }

    /// Effective seed: the override, else the generator's, else 0.
    pub fn base_seed(&self, seed_override: Option<u64>) -> u64 {
        seed_override.unwrap_or_else(|| self.generator.as_ref().map_or(0, |g| g.seed))
    }

    /// Terminal positions and powers, drawing generated layouts with the
    /// counter-based generator (terminal `i` uses draws `2i` and `2i+1`, so
    /// layouts of different sizes share a common prefix).
    pub fn terminals(&self, seed_override: Option<u64>) -> Result<Vec<(Vec3, f64)>, AmaError> {
        match (&self.users[..], &self.generator) {
            ([], None) => Err(AmaError::InvalidScenario(
                "no terminals: provide a [[users]] list or a [generator] section".into(),
            )),
            ([_, ..], Some(_)) => Err(AmaError::InvalidScenario(
                "both [[users]] and [generator] are present; specify exactly one terminal source"
                    .into(),
            )),
            (rows, None) => Ok(rows
                .iter()
                .map(|u| (Vec3::new(u.x, u.y, 0.0), dbm_to_watts(u.power_dbm)))
                .collect()),
            ([], Some(g)) => {
                if g.count == 0 {
                    return Err(AmaError::InvalidScenario(
                        "generator terminal count K must be at least 1".into(),
                    ));
                }
                if !(g.rect[0] > 0.0) || !(g.rect[1] > 0.0) {
                    return Err(AmaError::InvalidScenario(format!(
                        "generator rectangle must have positive sides (got {:?})",
                        g.rect
                    )));
                }
                let seed = rng::stream(self.base_seed(seed_override), rng::STREAM_TERMINALS);
                let power_w = dbm_to_watts(g.power_dbm);
                Ok((0..g.count)
                    .map(|i| {
                        let x = (rng::unit(seed, 2 * i as u64) - 0.5) * g.rect[0];
                        let y = (rng::unit(seed, 2 * i as u64 + 1) - 0.5) * g.rect[1];
                        (Vec3::new(x, y, 0.0), power_w)
                    })
                    .collect())
            }
        }
    }

    /// Validates everything and builds the scenario plus solver settings.
    pub fn resolve(&self, ov: &Overrides) -> Result<Resolved, AmaError> {
        let rf = self.rf_params()?;
        let users = self.terminals(ov.seed)?;
        let endpoints = match &self.swarm.endpoints {
            None => None,
            Some(e) => Some(Endpoints {
                initial: e.start.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
                final_: e.finish.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            }),
        };
        let scenario = Scenario::new(ScenarioConfig {
            rf,
            users,
            num_uavs: self.swarm.num_uavs,
            num_slots: self.swarm.num_slots,
            slot_s: self.swarm.slot_s,
            vmax_mps: self.swarm.vmax_mps,
            dmin_m: self.swarm.dmin_m,
            min_altitude_m: self.swarm.altitude_m,
            endpoints,
            reference: None,
        })?;
        let s = &self.solver;
        for (name, v) in [
            ("eps1", ov.eps1.unwrap_or(s.eps1)),
            ("eps2", ov.eps2.unwrap_or(s.eps2)),
            ("feas_tol", s.feas_tol),
            ("opt_tol", s.opt_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AmaError::InvalidScenario(format!(
                    "solver threshold {name} must be positive and finite, got {v}"
                )));
            }
        }
        if s.max_iters == 0 {
            return Err(AmaError::InvalidScenario("solver max_iters must be at least 1".into()));
        }
        Ok(Resolved {
            scenario,
            eps1: ov.eps1.unwrap_or(s.eps1),
            eps2: ov.eps2.unwrap_or(s.eps2),
            max_iters: s.max_iters,
            solve: SolveOptions { feas_tol: s.feas_tol, opt_tol: s.opt_tol, ..Default::default() },
            seed: self.base_seed(ov.seed),
        })
    }

    /// The static view placement commands operate on: one slot, no mission
    /// endpoints. Everything else is kept.
    pub fn placement_view(&self) -> ScenarioFile {
        let mut f = self.clone();
        f.swarm.num_slots = 1;
        f.swarm.endpoints = None;
        f
    }

    /// Copy with every terminal's transmit power set to `power_dbm`.
    pub fn with_power_dbm(&self, power_dbm: f64) -> ScenarioFile {
        let mut f = self.clone();
        for u in &mut f.users {
            u.power_dbm = power_dbm;
        }
        if let Some(g) = &mut f.generator {
            g.power_dbm = power_dbm;
        }
        f
    }

    /// Copy with the terminal count set to `k`: adjusts the generator, or
    /// keeps the first `k` explicit rows (layouts stay nested either way).
    pub fn with_terminal_count(&self, k: usize) -> Result<ScenarioFile, AmaError> {
        let mut f = self.clone();
        if let Some(g) = &mut f.generator {
            g.count = k;
        } else if k <= f.users.len() {
            f.users.truncate(k);
        } else {
            return Err(AmaError::InvalidScenario(format!(
                "cannot sweep to K = {k}: the scenario lists only {} explicit users",
                f.users.len()
            )));
        }
        Ok(f)
    }
}
