//! Problem-description types: RF parameters, user terminals, swarm scenario,
//! and trajectories.

use crate::vec3::Vec3;
use crate::AmaError;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Carrier and link-budget parameters.
///
/// `beta0` is the linear channel power gain at 1 m reference distance and is
/// tied to the wavelength by the free-space relation `beta0 = (λ / 4π)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfParams {
    /// Channel power gain at 1 m, linear scale.
    pub beta0: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Noise power at the receiver in watts.
    pub noise_w: f64,
}

impl RfParams {
    /// Builds parameters from a reference gain, deriving the wavelength.
    pub fn from_beta0(beta0: f64, noise_w: f64) -> Result<Self, AmaError> {
        if !(beta0 > 0.0) || !(noise_w > 0.0) {
            return Err(AmaError::InvalidScenario(format!(
                "beta0 and noise power must be positive (got {beta0}, {noise_w})"
            )));
        }
        Ok(RfParams { beta0, wavelength: 4.0 * PI * beta0.sqrt(), noise_w })
    }

    /// Builds parameters from a wavelength, deriving the reference gain.
    pub fn from_wavelength(wavelength: f64, noise_w: f64) -> Result<Self, AmaError> {
        if !(wavelength > 0.0) || !(noise_w > 0.0) {
            return Err(AmaError::InvalidScenario(format!(
                "wavelength and noise power must be positive (got {wavelength}, {noise_w})"
            )));
        }
        let ratio = wavelength / (4.0 * PI);
        Ok(RfParams { beta0: ratio * ratio, wavelength, noise_w })
    }

    /// Builds parameters from both values, enforcing their consistency to
    /// 1e-9 relative.
    pub fn new(beta0: f64, wavelength: f64, noise_w: f64) -> Result<Self, AmaError> {
        let derived = RfParams::from_wavelength(wavelength, noise_w)?;
        if !(beta0 > 0.0) {
            return Err(AmaError::InvalidScenario(format!("beta0 must be positive (got {beta0})")));
        }
        let rel = (derived.beta0 - beta0).abs() / beta0;
        if rel > 1e-9 {
            return Err(AmaError::InvalidScenario(format!(
                "beta0 {beta0:.6e} and wavelength {wavelength:.6e} disagree \
                 (relative error {rel:.3e}); beta0 must equal (wavelength/4π)²"
            )));
        }
        Ok(RfParams { beta0, wavelength, noise_w })
    }
}

/// A ground user terminal together with its reference-distance data.
///
/// `r_ref` and `alpha` depend on the scenario's reference point; every
/// channel quantity built from them is independent of that choice (the
/// reference cancels), which the channel tests verify explicitly.
#[derive(Debug, Clone, Copy)]
pub struct UserTerminal {
    /// Terminal position; on the ground plane, so `position.z == 0`.
    pub position: Vec3,
    /// Uplink transmit power in watts.
    pub power_w: f64,
    /// Distance from the scenario reference point to this terminal.
    pub r_ref: f64,
    /// Complex gain at the reference point: `(√beta0 / r_ref)·e^{-j2π r_ref/λ}`.
    pub alpha: Complex64,
}

/// Per-UAV start/end position constraints.
#[derive(Debug, Clone)]
pub struct Endpoints {
    pub initial: Vec<Vec3>,
    pub final_: Vec<Vec3>,
}

/// Plain input data for [`Scenario::new`].
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub rf: RfParams,
    /// User terminal positions (z = 0) and transmit powers in watts.
    pub users: Vec<(Vec3, f64)>,
    /// Number of UAVs carrying receive antennas.
    pub num_uavs: usize,
    /// Number of time slots in the horizon.
    pub num_slots: usize,
    /// Slot length in seconds.
    pub slot_s: f64,
    /// Maximum UAV speed in m/s.
    pub vmax_mps: f64,
    /// Minimum inter-UAV separation in meters.
    pub dmin_m: f64,
    /// Minimum flight altitude in meters.
    pub min_altitude_m: f64,
    /// Optional per-UAV start/end positions.
    pub endpoints: Option<Endpoints>,
    /// Optional reference point for the channel parametrization. Defaults to
    /// the centroid of the initial UAV positions (or of the users when no
    /// endpoints are given) lifted to the minimum altitude.
    pub reference: Option<Vec3>,
}

/// A validated swarm communication scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub rf: RfParams,
    pub users: Vec<UserTerminal>,
    pub num_uavs: usize,
    pub num_slots: usize,
    pub slot_s: f64,
    pub vmax_mps: f64,
    pub dmin_m: f64,
    pub min_altitude_m: f64,
    pub endpoints: Option<Endpoints>,
    pub reference: Vec3,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, AmaError> {
        let ScenarioConfig {
            rf,
            users,
            num_uavs,
            num_slots,
            slot_s,
            vmax_mps,
            dmin_m,
            min_altitude_m,
            endpoints,
            reference,
        } = cfg;

        if users.is_empty() {
            return Err(AmaError::InvalidScenario("at least one user is required".into()));
        }
        if num_uavs == 0 || num_slots == 0 {
            return Err(AmaError::InvalidScenario(format!(
                "need at least one UAV and one slot (got {num_uavs}, {num_slots})"
            )));
        }
        if !(slot_s > 0.0) || !(vmax_mps > 0.0) {
            return Err(AmaError::InvalidScenario(format!(
                "slot length and speed limit must be positive (got {slot_s}, {vmax_mps})"
            )));
        }
        if !(dmin_m >= 0.0) || !(min_altitude_m > 0.0) {
            return Err(AmaError::InvalidScenario(format!(
                "need dmin >= 0 and altitude floor > 0 (got {dmin_m}, {min_altitude_m})"
            )));
        }
        for (i, (w, p)) in users.iter().enumerate() {
            if !w.is_finite() || w.z != 0.0 {
                return Err(AmaError::InvalidScenario(format!(
                    "user {i} must lie on the ground plane (z = 0), got {w:?}"
                )));
            }
            if !(*p > 0.0) {
                return Err(AmaError::InvalidScenario(format!(
                    "user {i} transmit power must be positive, got {p}"
                )));
            }
        }
        if let Some(ep) = &endpoints {
            for (label, list) in [("initial", &ep.initial), ("final", &ep.final_)] {
                if list.len() != num_uavs {
                    return Err(AmaError::InvalidScenario(format!(
                        "{label} endpoint list has {} entries for {num_uavs} UAVs",
                        list.len()
                    )));
                }
                for (l, q) in list.iter().enumerate() {
                    if !q.is_finite() || q.z < min_altitude_m - 1e-9 {
                        return Err(AmaError::InvalidScenario(format!(
                            "{label} endpoint {l} below altitude floor: {q:?}"
                        )));
                    }
                }
                for a in 0..list.len() {
                    for b in (a + 1)..list.len() {
                        let d = list[a].distance(list[b]);
                        if d < dmin_m - 1e-9 {
                            return Err(AmaError::InvalidScenario(format!(
                                "{label} endpoints {a} and {b} are {d:.3} m apart, \
                                 below the {dmin_m} m separation floor"
                            )));
                        }
                    }
                }
            }
        }

        let reference = reference.unwrap_or_else(|| {
            let pts: Vec<Vec3> = match &endpoints {
                Some(ep) => ep.initial.clone(),
                None => users.iter().map(|(w, _)| *w).collect(),
            };
            let mut c = Vec3::ZERO;
            for p in &pts {
                c += *p;
            }
            c = c.scale(1.0 / pts.len() as f64);
            Vec3::new(c.x, c.y, min_altitude_m)
        });

        let two_pi_over_lambda = 2.0 * PI / rf.wavelength;
        let users = users
            .into_iter()
            .enumerate()
            .map(|(i, (position, power_w))| {
                let r_ref = reference.distance(position);
                if r_ref <= 0.0 {
                    return Err(AmaError::InvalidScenario(format!(
                        "reference point coincides with user {i}"
                    )));
                }
                let alpha = Complex64::from_polar(
                    rf.beta0.sqrt() / r_ref,
                    -two_pi_over_lambda * r_ref,
                );
                Ok(UserTerminal { position, power_w, r_ref, alpha })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Scenario {
            rf,
            users,
            num_uavs,
            num_slots,
            slot_s,
            vmax_mps,
            dmin_m,
            min_altitude_m,
            endpoints,
            reference,
        })
    }

    /// Transmit SNR `P_k / σ²` for user `k`.
    pub fn pbar(&self, k: usize) -> f64 {
        self.users[k].power_w / self.rf.noise_w
    }

    /// Transmit SNRs for all users.
    pub fn pbars(&self) -> Vec<f64> {
        (0..self.users.len()).map(|k| self.pbar(k)).collect()
    }

    /// Maximum displacement per slot in meters.
    pub fn vmax_step(&self) -> f64 {
        self.vmax_mps * self.slot_s
    }
}

/// UAV positions over the horizon, indexed by `(uav, slot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmTrajectory {
    num_uavs: usize,
    num_slots: usize,
    positions: Vec<Vec3>,
}

impl SwarmTrajectory {
    pub fn filled(num_uavs: usize, num_slots: usize, value: Vec3) -> Self {
        SwarmTrajectory { num_uavs, num_slots, positions: vec![value; num_uavs * num_slots] }
    }

    pub fn from_fn(
        num_uavs: usize,
        num_slots: usize,
        mut f: impl FnMut(usize, usize) -> Vec3,
    ) -> Self {
        let mut positions = Vec::with_capacity(num_uavs * num_slots);
        for l in 0..num_uavs {
            for n in 0..num_slots {
                positions.push(f(l, n));
            }
        }
        SwarmTrajectory { num_uavs, num_slots, positions }
    }

    /// A single-slot trajectory (a static placement).
    pub fn from_placement(positions: Vec<Vec3>) -> Self {
        SwarmTrajectory { num_uavs: positions.len(), num_slots: 1, positions }
    }

    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn get(&self, uav: usize, slot: usize) -> Vec3 {
        self.positions[uav * self.num_slots + slot]
    }

    pub fn set(&mut self, uav: usize, slot: usize, value: Vec3) {
        self.positions[uav * self.num_slots + slot] = value;
    }

    /// All UAV positions at one slot.
    pub fn slot_positions(&self, slot: usize) -> Vec<Vec3> {
        (0..self.num_uavs).map(|l| self.get(l, slot)).collect()
    }

    /// Largest violation, in meters, of the scenario's separation, speed,
    /// and altitude constraints. Zero means the motion itself is feasible;
    /// endpoint pinning is checked separately by [`Self::endpoint_violation`].
    pub fn motion_violation(&self, sc: &Scenario) -> f64 {
        let mut worst: f64 = 0.0;
        let step = sc.vmax_step();
        for n in 0..self.num_slots {
            for l in 0..self.num_uavs {
                let q = self.get(l, n);
                worst = worst.max(sc.min_altitude_m - q.z);
                for l2 in (l + 1)..self.num_uavs {
                    worst = worst.max(sc.dmin_m - q.distance(self.get(l2, n)));
                }
                if n + 1 < self.num_slots {
                    worst = worst.max(q.distance(self.get(l, n + 1)) - step);
                }
            }
        }
        worst
    }

    /// Largest distance, in meters, between the trajectory's first/last
    /// slots and the scenario's pinned endpoints (zero when unpinned).
    pub fn endpoint_violation(&self, sc: &Scenario) -> f64 {
        let mut worst: f64 = 0.0;
        if let Some(ep) = &sc.endpoints {
            for l in 0..self.num_uavs {
                worst = worst.max(self.get(l, 0).distance(ep.initial[l]));
                worst = worst.max(self.get(l, self.num_slots - 1).distance(ep.final_[l]));
            }
        }
        worst
    }

    /// Largest violation, in meters, of the scenario's separation, speed,
    /// altitude, and endpoint constraints. Zero means exactly feasible.
    pub fn max_violation(&self, sc: &Scenario) -> f64 {
        self.motion_violation(sc).max(self.endpoint_violation(sc))
    }

    fn check_shape(&self, sc: &Scenario) -> Result<(), AmaError> {
        if self.num_uavs != sc.num_uavs || self.num_slots != sc.num_slots {
            return Err(AmaError::DimensionMismatch(format!(
                "trajectory is {}x{}, scenario expects {}x{}",
                self.num_uavs, self.num_slots, sc.num_uavs, sc.num_slots
            )));
        }
        Ok(())
    }

    /// Checks feasibility against the scenario within `tol` meters.
    pub fn check_feasible(&self, sc: &Scenario, tol: f64) -> Result<(), AmaError> {
        self.check_shape(sc)?;
        let worst = self.max_violation(sc);
        if worst > tol {
            return Err(AmaError::InfeasibleInitializer(format!(
                "trajectory violates scenario constraints by {worst:.3e} m (tolerance {tol:.1e})"
            )));
        }
        Ok(())
    }

    /// Checks separation/speed/altitude feasibility within `tol` meters,
    /// ignoring endpoint pinning. Benchmark flight plans that substitute
    /// their own closed loop for the mission endpoints are validated with
    /// this variant.
    pub fn check_motion_feasible(&self, sc: &Scenario, tol: f64) -> Result<(), AmaError> {
        self.check_shape(sc)?;
        let worst = self.motion_violation(sc);
        if worst > tol {
            return Err(AmaError::InfeasibleInitializer(format!(
                "trajectory violates motion constraints by {worst:.3e} m (tolerance {tol:.1e})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_rf() -> RfParams {
        RfParams::from_beta0(crate::db_to_linear(-61.4), crate::dbm_to_watts(-94.0)).unwrap()
    }

    #[test]
    fn wavelength_beta0_consistency_enforced() {
        let rf = test_rf();
        // Derived pair passes the strict constructor.
        assert!(RfParams::new(rf.beta0, rf.wavelength, rf.noise_w).is_ok());
        // A 1% perturbation is rejected.
        assert!(RfParams::new(rf.beta0 * 1.01, rf.wavelength, rf.noise_w).is_err());
    }

    #[test]
    fn default_wavelength_near_one_centimeter() {
        // beta0 = -61.4 dB corresponds to a wavelength of about 10.7 mm.
        let rf = test_rf();
        assert!((rf.wavelength - 0.010696).abs() < 1e-5, "wavelength {}", rf.wavelength);
    }

    #[test]
    fn user_reference_data_follows_geometry() {
        let sc = Scenario::new(ScenarioConfig {
            rf: test_rf(),
            users: vec![(Vec3::ZERO, 1.0)],
            num_uavs: 1,
            num_slots: 1,
            slot_s: 1.0,
            vmax_mps: 30.0,
            dmin_m: 5.0,
            min_altitude_m: 100.0,
            endpoints: None,
            reference: Some(Vec3::new(0.0, 0.0, 100.0)),
        })
        .unwrap();
        let u = &sc.users[0];
        assert_eq!(u.r_ref, 100.0);
        let expected_mag = sc.rf.beta0.sqrt() / 100.0;
        assert!((u.alpha.norm() - expected_mag).abs() / expected_mag < 1e-14);
    }

    #[test]
    fn scenario_rejects_airborne_users_and_bad_endpoints() {
        let base = ScenarioConfig {
            rf: test_rf(),
            users: vec![(Vec3::new(0.0, 0.0, 1.0), 1.0)],
            num_uavs: 2,
            num_slots: 1,
            slot_s: 1.0,
            vmax_mps: 30.0,
            dmin_m: 5.0,
            min_altitude_m: 100.0,
            endpoints: None,
            reference: None,
        };
        assert!(Scenario::new(base.clone()).is_err());

        let mut cfg = base;
        cfg.users = vec![(Vec3::ZERO, 1.0)];
        cfg.endpoints = Some(Endpoints {
            initial: vec![Vec3::new(0.0, 0.0, 100.0), Vec3::new(1.0, 0.0, 100.0)],
            final_: vec![Vec3::new(0.0, 0.0, 100.0), Vec3::new(1.0, 0.0, 100.0)],
        });
        // Endpoints 1 m apart violate the 5 m separation floor.
        assert!(Scenario::new(cfg).is_err());
    }

    #[test]
    fn trajectory_violation_reports_worst_offense() {
        let sc = Scenario::new(ScenarioConfig {
            rf: test_rf(),
            users: vec![(Vec3::ZERO, 1.0)],
            num_uavs: 2,
            num_slots: 2,
            slot_s: 1.0,
            vmax_mps: 30.0,
            dmin_m: 5.0,
            min_altitude_m: 100.0,
            endpoints: None,
            reference: None,
        })
        .unwrap();
        let mut traj = SwarmTrajectory::from_fn(2, 2, |l, _| {
            Vec3::new(6.0 * l as f64, 0.0, 100.0)
        });
        assert_eq!(traj.max_violation(&sc), 0.0);
        // Shrink separation to 4 m at slot 1: violation 1 m.
        traj.set(1, 1, Vec3::new(4.0, 0.0, 100.0));
        assert!((traj.max_violation(&sc) - 1.0).abs() < 1e-12);
        assert!(traj.check_feasible(&sc, 1e-6).is_err());
    }
}
