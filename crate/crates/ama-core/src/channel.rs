//! Near-field spherical-wave channels and receive beamforming.
//!
//! Each UAV carries one receive antenna, so the channel from user `k` at slot
//! `n` is a length-L vector. Entry `l` follows the non-uniform spherical-wave
//! law: with `r = ‖q_l[n] − w_k‖` the propagation distance,
//!
//! ```text
//! h_l = alpha_k · (r_ref / r) · e^{-j(2π/λ)(r − r_ref)}
//! ```
//!
//! where `alpha_k` and `r_ref` come from the scenario's reference point. The
//! reference cancels: `|h_l| = √beta0 / r` and the phase is `-(2π/λ) r`, which
//! the tests check by comparing different reference choices bit-for-bit.

use crate::scenario::{Scenario, SwarmTrajectory, UserTerminal};
use crate::vec3::Vec3;
use crate::{AmaError, RfParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Complex channel vector from one user to the swarm at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    /// User index the vector belongs to.
    pub ue: usize,
    /// Slot index the vector was evaluated at.
    pub slot: usize,
    /// One complex gain per UAV antenna.
    pub entries: Vec<Complex64>,
}

impl ChannelVector {
    /// Squared Euclidean norm `‖h‖²`.
    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.norm_sqr()).sum()
    }
}

/// Receive beamformers for every (user, slot) pair.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    num_ues: usize,
    num_slots: usize,
    vectors: Vec<Vec<Complex64>>,
}

impl BeamformerSet {
    pub fn new(num_ues: usize, num_slots: usize, num_uavs: usize) -> Self {
        BeamformerSet {
            num_ues,
            num_slots,
            vectors: vec![vec![Complex64::ZERO; num_uavs]; num_ues * num_slots],
        }
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn get(&self, ue: usize, slot: usize) -> &[Complex64] {
        &self.vectors[ue * self.num_slots + slot]
    }

    pub fn set(&mut self, ue: usize, slot: usize, v: Vec<Complex64>) {
        self.vectors[ue * self.num_slots + slot] = v;
    }
}

/// Per-slot rates and their average for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMetrics {
    /// `log2(1 + SINR)` per slot, in bits/s/Hz.
    pub per_slot: Vec<f64>,
    /// Mean of `per_slot`.
    pub average: f64,
}

/// Channel entries from `user` to antennas at `positions`.
///
/// Errors with [`AmaError::DegenerateGeometry`] if any antenna sits exactly
/// on the terminal.
pub fn channel_entries(
    rf: &RfParams,
    user: &UserTerminal,
    ue_index: usize,
    positions: &[Vec3],
) -> Result<Vec<Complex64>, AmaError> {
    let two_pi_over_lambda = 2.0 * PI / rf.wavelength;
    positions
        .iter()
        .enumerate()
        .map(|(l, q)| {
            let r = q.distance(user.position);
            if r <= 0.0 {
                return Err(AmaError::DegenerateGeometry { uav: l, ue: ue_index });
            }
            let scale = user.r_ref / r;
            let phase = -two_pi_over_lambda * (r - user.r_ref);
            Ok(user.alpha * Complex64::from_polar(scale, phase))
        })
        .collect()
}

/// The spherical-wave channel vector from user `ue` at slot `slot`.
pub fn channel_vector(
    sc: &Scenario,
    traj: &SwarmTrajectory,
    ue: usize,
    slot: usize,
) -> Result<ChannelVector, AmaError> {
    let positions = traj.slot_positions(slot);
    let entries = channel_entries(&sc.rf, &sc.users[ue], ue, &positions)?;
    Ok(ChannelVector { ue, slot, entries })
}

/// Channel vectors for every user at one slot.
pub fn channel_vectors_at_slot(
    sc: &Scenario,
    traj: &SwarmTrajectory,
    slot: usize,
) -> Result<Vec<ChannelVector>, AmaError> {
    (0..sc.users.len()).map(|k| channel_vector(sc, traj, k, slot)).collect()
}

/// Receive SNR under maximum-ratio combining: `pbar · ‖h‖²`.
///
/// This is the exact single-user optimum; with `pbar = P/σ²` it equals
/// `Σ_l pbar · beta0 / r_l²`.
pub fn snr_mrc(h: &ChannelVector, pbar: f64) -> f64 {
    pbar * h.norm_sq()
}

/// SINR of user `k` under beamformer `v`, with all users' channels at the
/// same slot and `pbars[i] = P_i/σ²`.
///
/// The noise term scales with `‖v‖²` so the value is invariant to beamformer
/// scaling; for a unit-norm `v` it is
/// `pbar_k |v^H h_k|² / (Σ_{i≠k} pbar_i |v^H h_i|² + 1)`.
pub fn sinr(v: &[Complex64], channels: &[ChannelVector], pbars: &[f64], k: usize) -> f64 {
    let dot = |h: &ChannelVector| -> Complex64 {
        v.iter().zip(&h.entries).map(|(vi, hi)| vi.conj() * hi).sum()
    };
    let signal = pbars[k] * dot(&channels[k]).norm_sqr();
    let mut denom: f64 = v.iter().map(|vi| vi.norm_sqr()).sum();
    for (i, h) in channels.iter().enumerate() {
        if i != k {
            denom += pbars[i] * dot(h).norm_sqr();
        }
    }
    signal / denom
}

/// Per-slot rates `log2(1 + sinr)` and their average.
pub fn rate_metrics(per_slot_sinr: &[f64]) -> RateMetrics {
    let per_slot: Vec<f64> = per_slot_sinr.iter().map(|s| (1.0 + s).log2()).collect();
    let average = per_slot.iter().sum::<f64>() / per_slot.len().max(1) as f64;
    RateMetrics { per_slot, average }
}

/// The SINR-optimal (MMSE) unit-norm receive beamformer for user `k`:
/// `v = C_k⁻¹ h_k / ‖C_k⁻¹ h_k‖` with `C_k = I + Σ_{i≠k} pbar_i h_i h_i^H`.
pub fn mmse_beamformer(channels: &[ChannelVector], pbars: &[f64], k: usize) -> Vec<Complex64> {
    let num_uavs = channels[k].entries.len();
    let mut c = DMatrix::<Complex64>::identity(num_uavs, num_uavs);
    for (i, h) in channels.iter().enumerate() {
        if i == k {
            continue;
        }
        let hv = DVector::from_column_slice(&h.entries);
        c += (&hv * hv.adjoint()).scale(pbars[i]);
    }
    let hk = DVector::from_column_slice(&channels[k].entries);
    // C_k is Hermitian positive definite (identity plus PSD terms), so the
    // Cholesky factorization always exists.
    let chol = c.cholesky().expect("interference-plus-noise matrix must be positive definite");
    let mut v = chol.solve(&hk);
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::new(norm, 0.0);
    }
    v.as_slice().to_vec()
}

/// Squared normalized correlation `|a^H b|² / (‖a‖²‖b‖²)`, clamped to [0, 1].
pub fn correlation_sq(a: &ChannelVector, b: &ChannelVector) -> f64 {
    let dot: Complex64 = a.entries.iter().zip(&b.entries).map(|(x, y)| x.conj() * y).sum();
    let denom = a.norm_sq() * b.norm_sq();
    if denom <= 0.0 {
        return 0.0;
    }
    (dot.norm_sqr() / denom).clamp(0.0, 1.0)
}

/// Closed-form MMSE SINR for a two-user system:
/// `pbar_k ‖h_k‖² (1 − pbar_o ‖h_o‖² ρ / (pbar_o ‖h_o‖² + 1))` where `ρ` is
/// the squared normalized correlation of the two channels and `o` is the
/// other user.
pub fn mmse_sinr_two_ue(
    h_k: &ChannelVector,
    h_other: &ChannelVector,
    pbar_k: f64,
    pbar_other: f64,
) -> f64 {
    let rho = correlation_sq(h_k, h_other);
    let other_gain = pbar_other * h_other.norm_sq();
    pbar_k * h_k.norm_sq() * (1.0 - other_gain * rho / (other_gain + 1.0))
}

/// Rates for every user across the horizon under per-slot MMSE beamforming.
#[derive(Debug, Clone)]
pub struct MmseRateSummary {
    pub beamformers: BeamformerSet,
    pub per_ue: Vec<RateMetrics>,
    /// Smallest per-user average rate.
    pub min_average: f64,
}

/// Evaluates the exact channels of `traj` and applies MMSE beamforming at
/// every (user, slot) pair.
pub fn evaluate_mmse_rates(sc: &Scenario, traj: &SwarmTrajectory) -> Result<MmseRateSummary, AmaError> {
    let k_total = sc.users.len();
    let pbars = sc.pbars();
    let mut beamformers = BeamformerSet::new(k_total, traj.num_slots(), traj.num_uavs());
    let mut sinrs = vec![vec![0.0; traj.num_slots()]; k_total];
    for n in 0..traj.num_slots() {
        let channels = channel_vectors_at_slot(sc, traj, n)?;
        for k in 0..k_total {
            let v = mmse_beamformer(&channels, &pbars, k);
            sinrs[k][n] = sinr(&v, &channels, &pbars, k);
            beamformers.set(k, n, v);
        }
    }
    let per_ue: Vec<RateMetrics> = sinrs.iter().map(|s| rate_metrics(s)).collect();
    let min_average =
        per_ue.iter().map(|m| m.average).fold(f64::INFINITY, f64::min);
    Ok(MmseRateSummary { beamformers, per_ue, min_average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Endpoints, ScenarioConfig};
    use crate::{db_to_linear, dbm_to_watts};
    use approx::assert_relative_eq;

    fn rf_default() -> RfParams {
        RfParams::from_beta0(db_to_linear(-61.4), dbm_to_watts(-94.0)).unwrap()
    }

    fn single_ue_scenario(num_uavs: usize, power_dbm: f64, reference: Option<Vec3>) -> Scenario {
        Scenario::new(ScenarioConfig {
            rf: rf_default(),
            users: vec![(Vec3::ZERO, dbm_to_watts(power_dbm))],
            num_uavs,
            num_slots: 1,
            slot_s: 1.0,
            vmax_mps: 30.0,
            dmin_m: 5.0,
            min_altitude_m: 100.0,
            endpoints: None,
            reference,
        })
        .unwrap()
    }

    #[test]
    fn entry_magnitude_follows_inverse_distance() {
        let sc = single_ue_scenario(1, 30.0, None);
        let traj = SwarmTrajectory::from_placement(vec![Vec3::new(0.0, 0.0, 100.0)]);
        let h = channel_vector(&sc, &traj, 0, 0).unwrap();
        let expected = sc.rf.beta0.sqrt() / 100.0;
        assert_relative_eq!(h.entries[0].norm(), expected, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_uavs_see_identical_entries() {
        let sc = single_ue_scenario(2, 30.0, Some(Vec3::new(0.0, 0.0, 100.0)));
        let traj = SwarmTrajectory::from_placement(vec![
            Vec3::new(25.0, 0.0, 100.0),
            Vec3::new(-25.0, 0.0, 100.0),
        ]);
        let h = channel_vector(&sc, &traj, 0, 0).unwrap();
        assert!((h.entries[0] - h.entries[1]).norm() < 1e-18);
    }

    #[test]
    fn reference_point_cancels() {
        let traj = SwarmTrajectory::from_placement(vec![
            Vec3::new(10.0, -5.0, 120.0),
            Vec3::new(-3.0, 14.0, 101.0),
        ]);
        let sc_a = {
            let mut s = single_ue_scenario(2, 30.0, Some(Vec3::new(0.0, 0.0, 100.0)));
            s.num_uavs = 2;
            s
        };
        let sc_b = {
            let mut s = single_ue_scenario(2, 30.0, Some(Vec3::new(40.0, -17.0, 230.0)));
            s.num_uavs = 2;
            s
        };
        let ha = channel_vector(&sc_a, &traj, 0, 0).unwrap();
        let hb = channel_vector(&sc_b, &traj, 0, 0).unwrap();
        for (a, b) in ha.entries.iter().zip(&hb.entries) {
            // The reference distance cancels exactly in the entry law; in
            // floats the carrier phase 2π·r/λ is ~6e4 rad, so sin/cos keep
            // only ~1e-11 relative accuracy. Allow that noise and no more.
            assert!((a - b).norm() / a.norm() < 1e-9, "reference leaked: {a} vs {b}");
        }
    }

    #[test]
    fn zero_distance_is_degenerate() {
        let mut sc = single_ue_scenario(1, 30.0, None);
        // Bypass scenario validation to aim an antenna at the terminal.
        sc.min_altitude_m = 0.0;
        let traj = SwarmTrajectory::from_placement(vec![Vec3::ZERO]);
        match channel_vector(&sc, &traj, 0, 0) {
            Err(AmaError::DegenerateGeometry { uav: 0, ue: 0 }) => {}
            other => panic!("expected degenerate geometry, got {other:?}"),
        }
    }

    #[test]
    fn mrc_snr_single_overhead_uav() {
        // P = 30 dBm, σ² = -94 dBm, beta0 = -61.4 dB, r = 100 m:
        // SNR = 10^(12.4 - 6.14 - 4) = 10^2.26 ≈ 181.97.
        let sc = single_ue_scenario(1, 30.0, None);
        let traj = SwarmTrajectory::from_placement(vec![Vec3::new(0.0, 0.0, 100.0)]);
        let h = channel_vector(&sc, &traj, 0, 0).unwrap();
        let snr = snr_mrc(&h, sc.pbar(0));
        assert_relative_eq!(snr, 10f64.powf(2.26), max_relative = 1e-10);
        assert!((snr - 181.97).abs() < 0.01);
        // Average rate across identical slots: log2(1 + SNR) ≈ 7.516.
        let rates = rate_metrics(&[snr, snr]);
        assert!((rates.average - 7.516).abs() < 1e-3);
    }

    #[test]
    fn mrc_snr_hexagon_with_apex() {
        // Apex above the user plus six UAVs on a 5 m ring: the ring antennas
        // sit at distance sqrt(100² + 5²), so SNR = pbar·beta0·(1/1e4 + 6/10025).
        let sc = single_ue_scenario(7, 30.0, None);
        let mut pos = vec![Vec3::new(0.0, 0.0, 100.0)];
        for i in 0..6 {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 6.0;
            pos.push(Vec3::new(5.0 * th.cos(), 5.0 * th.sin(), 100.0));
        }
        let traj = SwarmTrajectory::from_placement(pos);
        let h = channel_vector(&sc, &traj, 0, 0).unwrap();
        let snr = snr_mrc(&h, sc.pbar(0));
        let expected = sc.pbar(0) * sc.rf.beta0 * (1.0 / 1.0e4 + 6.0 / 10025.0);
        assert_relative_eq!(snr, expected, max_relative = 1e-10);
        assert!((snr - 1271.1).abs() < 0.5);
        assert!(((1.0 + snr).log2() - 10.313).abs() < 1e-3);
    }

    #[test]
    fn zero_power_means_zero_snr() {
        let sc = single_ue_scenario(1, 30.0, None);
        let traj = SwarmTrajectory::from_placement(vec![Vec3::new(0.0, 0.0, 100.0)]);
        let h = channel_vector(&sc, &traj, 0, 0).unwrap();
        assert_eq!(snr_mrc(&h, 0.0), 0.0);
    }

    #[test]
    fn rate_metrics_examples() {
        let z = rate_metrics(&[0.0, 0.0]);
        assert_eq!(z.per_slot, vec![0.0, 0.0]);
        assert_eq!(z.average, 0.0);
        let m = rate_metrics(&[1.0, 3.0]);
        assert_eq!(m.per_slot, vec![1.0, 2.0]);
        assert_eq!(m.average, 1.5);
    }

    #[test]
    fn sinr_single_user_equals_mrc() {
        let sc = single_ue_scenario(3, 30.0, None);
        let traj = SwarmTrajectory::from_placement(vec![
            Vec3::new(0.0, 0.0, 100.0),
            Vec3::new(5.0, 0.0, 100.0),
            Vec3::new(0.0, 5.0, 100.0),
        ]);
        let channels = vec![channel_vector(&sc, &traj, 0, 0).unwrap()];
        let pbars = sc.pbars();
        let v = mmse_beamformer(&channels, &pbars, 0);
        let gamma = sinr(&v, &channels, &pbars, 0);
        assert_relative_eq!(gamma, snr_mrc(&channels[0], pbars[0]), max_relative = 1e-12);
        // Single-user MMSE reduces to MRC: v colinear with h.
        let vh = ChannelVector { ue: 0, slot: 0, entries: v };
        assert!(correlation_sq(&vh, &channels[0]) > 1.0 - 1e-12);
    }

    #[test]
    fn sinr_vanishes_orthogonal_to_signal() {
        let h = ChannelVector {
            ue: 0,
            slot: 0,
            entries: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        };
        // v ⟂ h: <v, h> = conj(1)·1 + conj(-i)·i = 1 - 1 = 0.
        let v = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)];
        let got = sinr(&v, &[h], &[7.5], 0);
        assert!(got.abs() < 1e-30);
    }

    #[test]
    fn correlation_extremes() {
        let a = ChannelVector {
            ue: 0,
            slot: 0,
            entries: vec![Complex64::new(1.0, 1.0), Complex64::new(0.5, -2.0)],
        };
        let b = ChannelVector {
            ue: 1,
            slot: 0,
            entries: a.entries.iter().map(|e| e * Complex64::new(0.0, 3.0)).collect(),
        };
        assert!((correlation_sq(&a, &b) - 1.0).abs() < 1e-14);
        // [-conj(a2), conj(a1)] is orthogonal to [a1, a2]:
        // <a, c> = -conj(a1)conj(a2) + conj(a2)conj(a1) = 0, exactly in
        // floats too since both products share the same factors.
        let c = ChannelVector {
            ue: 1,
            slot: 0,
            entries: vec![-a.entries[1].conj(), a.entries[0].conj()],
        };
        assert!(correlation_sq(&a, &c) < 1e-28);
    }

    #[test]
    fn two_ue_closed_form_limits() {
        let h1 = ChannelVector {
            ue: 0,
            slot: 0,
            entries: vec![Complex64::new(1e-3, 2e-4), Complex64::new(-3e-4, 1e-3)],
        };
        let h2 = ChannelVector {
            ue: 1,
            slot: 0,
            entries: vec![Complex64::new(1e-3, 0.0), Complex64::new(0.0, -1e-3)],
        };
        // Orthogonal channels: <h1, h2> = 1e-3(1e-3 - 2e-4 i·...) pick truly
        // orthogonal pair instead: h2 ⟂ h1 by construction below.
        let h2_orth = ChannelVector {
            ue: 1,
            slot: 0,
            entries: vec![h1.entries[1].conj(), -h1.entries[0].conj()],
        };
        let gamma = mmse_sinr_two_ue(&h1, &h2_orth, 2.0, 5.0);
        assert_relative_eq!(gamma, 2.0 * h1.norm_sq(), max_relative = 1e-12);

        // Fully correlated interferer with enormous power drives the SINR to
        // pbar‖h‖²/(pbar'‖h'‖²+1) → 0.
        let h2_colinear = ChannelVector {
            ue: 1,
            slot: 0,
            entries: h1.entries.iter().map(|e| e * 2.0).collect(),
        };
        let gamma = mmse_sinr_two_ue(&h1, &h2_colinear, 2.0, 1e18);
        assert!(gamma < 1e-10, "got {gamma}");
        let _ = h2;
    }

    #[test]
    fn evaluate_mmse_rates_reports_min_average() {
        let rf = rf_default();
        let sc = Scenario::new(ScenarioConfig {
            rf,
            users: vec![
                (Vec3::new(25.0, 0.0, 0.0), dbm_to_watts(30.0)),
                (Vec3::new(-25.0, 0.0, 0.0), dbm_to_watts(20.0)),
            ],
            num_uavs: 2,
            num_slots: 2,
            slot_s: 1.0,
            vmax_mps: 30.0,
            dmin_m: 5.0,
            min_altitude_m: 100.0,
            endpoints: Some(Endpoints {
                initial: vec![Vec3::new(0.0, 10.0, 100.0), Vec3::new(0.0, -10.0, 100.0)],
                final_: vec![Vec3::new(0.0, 10.0, 100.0), Vec3::new(0.0, -10.0, 100.0)],
            }),
            reference: None,
        })
        .unwrap();
        let traj = SwarmTrajectory::from_fn(2, 2, |l, _| {
            Vec3::new(0.0, if l == 0 { 10.0 } else { -10.0 }, 100.0)
        });
        let out = evaluate_mmse_rates(&sc, &traj).unwrap();
        assert_eq!(out.per_ue.len(), 2);
        // The weaker user sets the min average.
        assert!(out.min_average <= out.per_ue[0].average);
        assert!(out.min_average <= out.per_ue[1].average);
        assert!(out.min_average > 0.0);
    }
}
