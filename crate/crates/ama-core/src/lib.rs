//! Near-field spherical-wave channel evaluation, optimal receive beamforming,
//! and swarm placement/trajectory optimization for aerial movable-antenna
//! arrays.
//!
//! The crate is organized bottom-up:
//!
//! - [`vec3`], [`scenario`]: geometry and problem-description types shared by
//!   every layer.
//! - [`channel`]: spherical-wave channel vectors, MRC/MMSE beamformers, SINR
//!   and rate evaluation.
//! - [`solver`]: a small feasible-start barrier solver for the concave
//!   subproblems produced by the optimizers.
//! - [`placement`]: closed-form single/two-UAV placements and hyperbola
//!   placements that null inter-user interference for two users.
//! - [`sca`]: successive-convex-approximation trajectory/placement
//!   optimization for a single user.
//! - [`altopt`]: max-min multiuser trajectory optimization alternating
//!   between MMSE beamforming and per-UAV position updates.

pub mod altopt;
pub mod channel;
pub mod placement;
pub mod sca;
pub mod scenario;
pub mod solver;
pub mod vec3;

pub use altopt::{
    alternating_optimize, alternating_optimize_from, exact_min_rate, g_decompose,
    lipschitz_omega, maxmin_snr_trajectory, min_average_snr, AltOptOptions, AltOptResult,
    CosineGain, FixedAmplitudeChannelModel, MaxminSnrResult,
};
pub use channel::{
    channel_vector, correlation_sq, evaluate_mmse_rates, mmse_beamformer, mmse_sinr_two_ue,
    rate_metrics, sinr, snr_mrc, BeamformerSet, ChannelVector, MmseRateSummary, RateMetrics,
};
pub use placement::{
    circular_placement, circular_trajectory, hex_lattice_placement, hyperbola_pair,
    min_feasible_nu, optimal_single_uav, optimal_two_uav, optimality_residual,
    successive_hyperbola_placement, two_uav_objective, TwoUavSolution,
};
pub use sca::{
    average_rate_single_ue, default_trajectory_init, joint_placement, rate_from_sq_dists,
    rate_lower_bound, sca_trajectory_single_ue, successive_placement, ScaOptions, ScaResult,
    ScaTrace,
};
pub use scenario::{Endpoints, RfParams, Scenario, ScenarioConfig, SwarmTrajectory, UserTerminal};
pub use solver::{solve, ConvexSubproblem, SolveOptions, SolveReport, SolveStatus};
pub use vec3::Vec3;

use thiserror::Error;

/// Errors shared across the crate's modules.
#[derive(Debug, Clone, Error)]
pub enum AmaError {
    /// A UAV position coincides with a user terminal (zero propagation
    /// distance), so the spherical-wave amplitude is undefined.
    #[error("degenerate geometry: UAV {uav} is at zero distance from user {ue}")]
    DegenerateGeometry { uav: usize, ue: usize },

    /// Scenario data violates a structural invariant.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Mismatched dimensions between inputs.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A starting point violates its subproblem constraints.
    #[error("infeasible starting point: max constraint violation {violation:.3e}")]
    InfeasibleStart { violation: f64 },

    /// An optimizer initializer violates the scenario constraints.
    #[error("infeasible initializer: {0}")]
    InfeasibleInitializer(String),

    /// No interference-nulling placement order satisfies the spacing
    /// constraint below the focal-distance bound.
    #[error(
        "no feasible phase-offset order: spacing {d_min} m cannot be met with semi-axis < {x} m"
    )]
    NoFeasibleNu { d_min: f64, x: f64 },

    /// A benchmark trajectory cannot satisfy the per-slot speed limit.
    #[error("speed violation: per-slot displacement {step:.6} m exceeds limit {limit:.6} m")]
    SpeedViolation { step: f64, limit: f64 },

    /// A numerical routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// 10^(x/10), for quantities given in decibels.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts dBm to watts: 30 dBm = 1 W.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
