//! Scenario-driven command-line front end for the swarm optimization
//! library: scenario files in, deterministic result bundles out.
//!
//! - [`config`] — the TOML scenario format, defaults, and validation;
//! - [`rng`] — the documented counter-based random generator behind every
//!   "random" quantity (terminal layouts, benchmark placements);
//! - [`run`] — one function per CLI command, plus the benchmark suite and
//!   parameter sweeps;
//! - [`bundle`] — the result-bundle file set and its writers.

pub mod bundle;
pub mod config;
pub mod rng;
pub mod run;
