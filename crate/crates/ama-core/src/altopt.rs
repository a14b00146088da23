//! Multiuser max–min rate optimization by alternating beamformer and
//! position updates.
//!
//! With several terminals sharing the uplink, the per-user SINR couples all
//! antenna positions through both the desired and the interfering channel
//! vectors, and the phases rotate on the carrier-wavelength scale. The driver
//! here works in two stages:
//!
//! 1. **Coverage stage.** Maximize the minimum (over users) average receive
//!    SNR of the swarm. The SNR is a sum of inverse squared distances, which
//!    admits a simple concave surrogate in the positions, so this stage moves
//!    the swarm on the meter scale toward geometry that serves every user.
//! 2. **Phase stage.** Freeze the channel amplitudes at the stage-1 geometry
//!    (they vary on the 1/r scale, negligibly over wavelength-sized moves)
//!    and alternate between per-(user, slot) MMSE beamformers and per-UAV
//!    position subproblems that refine the carrier phases. Each subproblem
//!    maximizes a common lower bound `Γ` on every user's average rate built
//!    from slack variables for the signal and interference log-terms; all
//!    surrogates are global bounds that are tight at the anchor, so the true
//!    fixed-amplitude minimum rate never decreases.
//!
//! The reported result is always re-evaluated on the exact channel model
//! with fresh MMSE beamformers.

use crate::channel::{
    evaluate_mmse_rates, mmse_beamformer, rate_metrics, sinr, BeamformerSet, ChannelVector,
};
use crate::sca::{add_swarm_motion_constraints, default_trajectory_init, sca_loop, ScaOptions, ScaTrace};
use crate::scenario::{Scenario, SwarmTrajectory};
use crate::solver::{
    solve, AffineVec3, ConcaveObjective, ConvexExpr, ConvexSubproblem, SolveOptions, SolveStatus,
    SparseLin,
};
use crate::vec3::Vec3;
use crate::AmaError;
use num_complex::Complex64;
use std::f64::consts::PI;

const LN2: f64 = std::f64::consts::LN_2;

/// Affine global lower bound on `1/r²` linearized at `anchor_r`:
/// `1/r² ≥ 1/r̃² − (2/r̃³)(r − r̃)`, with equality at the anchor.
///
/// `1/r²` is convex in `r > 0`, so its tangent line lies below it
/// everywhere; substituting the convex distance `r = ‖q − w‖` with the
/// negative slope keeps the bound concave in the position.
pub fn inv_sq_dist_lower_bound(anchor_r: f64, r: f64) -> f64 {
    let inv2 = 1.0 / (anchor_r * anchor_r);
    inv2 - 2.0 * inv2 / anchor_r * (r - anchor_r)
}

/// Affine global lower bound on `e^x` linearized at `anchor`:
/// `e^x ≥ (1 + x − x̃)·e^{x̃}`, with equality at the anchor.
pub fn exp_linearize_lb(x: f64, anchor: f64) -> f64 {
    (1.0 + x - anchor) * anchor.exp()
}

/// Channel model with amplitudes frozen at a reference trajectory while the
/// carrier phases stay exact functions of the live positions.
///
/// Entry `(k, l, n)` is `â·e^{−j·(2π/λ)·‖q_l[n] − w_k‖}` with
/// `â = √β₀ / r̂` taken from the freeze-time distance `r̂`. Relative to the
/// exact channel this drops a per-user constant phase (irrelevant to SINR)
/// and the amplitude drift `r̂/r`, which is below 1e-3 for moves within ten
/// wavelengths at hundred-meter ranges.
#[derive(Debug, Clone)]
pub struct FixedAmplitudeChannelModel {
    wavelength: f64,
    num_ues: usize,
    num_uavs: usize,
    num_slots: usize,
    users: Vec<Vec3>,
    pbars: Vec<f64>,
    /// `amps[(k·L + l)·N + n] = √β₀ / r̂_{k,l,n}`.
    amps: Vec<f64>,
}

impl FixedAmplitudeChannelModel {
    /// Freezes the amplitudes of every (user, UAV, slot) link at `anchor`.
    pub fn from_scenario(sc: &Scenario, anchor: &SwarmTrajectory) -> Result<Self, AmaError> {
        let (kc, lc, nc) = (sc.users.len(), anchor.num_uavs(), anchor.num_slots());
        let sqrt_beta0 = sc.rf.beta0.sqrt();
        let mut amps = vec![0.0; kc * lc * nc];
        for (k, ue) in sc.users.iter().enumerate() {
            for l in 0..lc {
                for n in 0..nc {
                    let r = anchor.get(l, n).distance(ue.position);
                    if r <= 0.0 {
                        return Err(AmaError::DegenerateGeometry { uav: l, ue: k });
                    }
                    amps[(k * lc + l) * nc + n] = sqrt_beta0 / r;
                }
            }
        }
        Ok(FixedAmplitudeChannelModel {
            wavelength: sc.rf.wavelength,
            num_ues: kc,
            num_uavs: lc,
            num_slots: nc,
            users: sc.users.iter().map(|u| u.position).collect(),
            pbars: sc.pbars(),
            amps,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn wave_number(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Frozen amplitude of link (user `k`, UAV `l`, slot `n`).
    pub fn amp(&self, k: usize, l: usize, n: usize) -> f64 {
        self.amps[(k * self.num_uavs + l) * self.num_slots + n]
    }

    /// Fixed-amplitude channel vector of user `k` at slot `n` for the live
    /// positions in `traj`.
    pub fn channel(&self, traj: &SwarmTrajectory, k: usize, n: usize) -> ChannelVector {
        let kw = self.wave_number();
        let entries = (0..self.num_uavs)
            .map(|l| {
                let r = traj.get(l, n).distance(self.users[k]);
                Complex64::from_polar(self.amp(k, l, n), -kw * r)
            })
            .collect();
        ChannelVector { ue: k, slot: n, entries }
    }

    /// Fixed-amplitude channel vectors of every user at slot `n`.
    pub fn channels_at_slot(&self, traj: &SwarmTrajectory, n: usize) -> Vec<ChannelVector> {
        (0..self.num_ues).map(|k| self.channel(traj, k, n)).collect()
    }

    /// Per-(user, slot) MMSE beamformers for the fixed-amplitude channels.
    pub fn mmse_update(&self, traj: &SwarmTrajectory) -> BeamformerSet {
        let mut beams = BeamformerSet::new(self.num_ues, self.num_slots, self.num_uavs);
        for n in 0..self.num_slots {
            let channels = self.channels_at_slot(traj, n);
            for k in 0..self.num_ues {
                beams.set(k, n, mmse_beamformer(&channels, &self.pbars, k));
            }
        }
        beams
    }

    /// Minimum (over users) average rate under the given beamformers, plus
    /// the per-user averages.
    pub fn min_average_rate(
        &self,
        traj: &SwarmTrajectory,
        beams: &BeamformerSet,
    ) -> (f64, Vec<f64>) {
        let mut per_ue = Vec::with_capacity(self.num_ues);
        let mut sinrs = vec![vec![0.0; self.num_slots]; self.num_ues];
        for n in 0..self.num_slots {
            let channels = self.channels_at_slot(traj, n);
            for k in 0..self.num_ues {
                sinrs[k][n] = sinr(beams.get(k, n), &channels, &self.pbars, k);
            }
        }
        for s in &sinrs {
            per_ue.push(rate_metrics(s).average);
        }
        let min = per_ue.iter().copied().fold(f64::INFINITY, f64::min);
        (min, per_ue)
    }
}

/// The beam-weighted power `|v^H ĥ_i[n]|²` as a function of one live UAV's
/// distance `r` to user `i`, with every other UAV held at its anchor:
///
/// `g(r) = offset + amp·cos(k_wave·r + phase)`.
///
/// This is exact under the fixed-amplitude model: splitting the inner
/// product into the live entry and the anchored remainder leaves the squared
/// magnitude as a constant plus one cosine of the live phase.
#[derive(Debug, Clone, Copy)]
pub struct CosineGain {
    pub offset: f64,
    pub amp: f64,
    pub phase: f64,
    pub wave_number: f64,
}

impl CosineGain {
    /// Value `g(r)`.
    pub fn value(&self, r: f64) -> f64 {
        self.offset + self.amp * (self.wave_number * r + self.phase).cos()
    }

    /// Derivative `dg/dr`.
    pub fn slope(&self, r: f64) -> f64 {
        -self.amp * self.wave_number * (self.wave_number * r + self.phase).sin()
    }
}

/// Decomposes `|v^H ĥ_i[n]|²` into a [`CosineGain`] in the live UAV's
/// distance to user `i`, anchoring every other UAV at `anchor`.
pub fn g_decompose(
    model: &FixedAmplitudeChannelModel,
    v: &[Complex64],
    anchor: &SwarmTrajectory,
    i: usize,
    n: usize,
    live: usize,
) -> CosineGain {
    let kw = model.wave_number();
    let mut rest = Complex64::ZERO;
    for l in 0..model.num_uavs() {
        if l == live {
            continue;
        }
        let r = anchor.get(l, n).distance(model.users[i]);
        rest += v[l].conj() * Complex64::from_polar(model.amp(i, l, n), -kw * r);
    }
    let own = v[live].conj() * model.amp(i, live, n);
    // |rest + own·e^{−jkr}|² = |rest|² + |own|² + 2·Re(conj(rest)·own·e^{−jkr})
    let z = rest.conj() * own;
    CosineGain {
        offset: rest.norm_sqr() + own.norm_sqr(),
        amp: 2.0 * z.norm(),
        phase: -z.arg(),
        wave_number: kw,
    }
}

/// Curvature bound for the live-UAV dependence of `|v^H ĥ_i[n]|²`:
///
/// `ω = k_wave²·Σ_{l'≠live} 2·|v_live|·â_{i,live}·|v_{l'}|·â_{i,l'}`.
///
/// The cosine amplitude in [`g_decompose`] is at most the triangle-inequality
/// sum `Σ ζ_{l'}` over the anchored entries, and the spectral norm of the
/// Hessian of `A·cos(k‖q − w‖ + φ)` splits into a radial part `≤ A·k²` and a
/// lateral part `≤ A·k/r ≤ A·k²`, so the gradient is `ω`-Lipschitz.
pub fn lipschitz_omega(
    model: &FixedAmplitudeChannelModel,
    v: &[Complex64],
    i: usize,
    n: usize,
    live: usize,
) -> f64 {
    let kw = model.wave_number();
    let own = v[live].norm() * model.amp(i, live, n);
    let mut zeta_sum = 0.0;
    for l in 0..model.num_uavs() {
        if l != live {
            zeta_sum += 2.0 * own * v[l].norm() * model.amp(i, l, n);
        }
    }
    kw * kw * zeta_sum
}

/// Exact minimum (over users) average receive SNR of the swarm under
/// maximum-ratio combining: `min_k (P̄_k β₀ / N) Σ_{n,l} 1/r²_{k,l,n}`.
pub fn min_average_snr(sc: &Scenario, traj: &SwarmTrajectory) -> Result<f64, AmaError> {
    let mut min = f64::INFINITY;
    for (k, ue) in sc.users.iter().enumerate() {
        let mut inv_sq = 0.0;
        for l in 0..traj.num_uavs() {
            for n in 0..traj.num_slots() {
                let r2 = (traj.get(l, n) - ue.position).norm_sq();
                if r2 <= 0.0 {
                    return Err(AmaError::DegenerateGeometry { uav: l, ue: k });
                }
                inv_sq += 1.0 / r2;
            }
        }
        min = min.min(sc.pbar(k) * sc.rf.beta0 * inv_sq / traj.num_slots() as f64);
    }
    Ok(min)
}

/// Options for [`alternating_optimize`] and [`maxmin_snr_trajectory`].
#[derive(Debug, Clone)]
pub struct AltOptOptions {
    /// Relative stopping threshold for the coverage (max–min SNR) stage: a
    /// round must improve the true minimum SNR by more than
    /// `eps1·(1 + |value|)` to continue.
    pub eps1: f64,
    /// Absolute stopping threshold (bits/s/Hz) on the fixed-amplitude
    /// minimum-rate gain of one alternating sweep.
    pub eps2: f64,
    /// Round cap for the coverage stage.
    pub stage1_rounds: usize,
    /// Cap on alternating sweeps of the phase stage.
    pub max_sweeps: usize,
    pub solve: SolveOptions,
}

impl Default for AltOptOptions {
    fn default() -> Self {
        AltOptOptions {
            eps1: 1e-4,
            eps2: 1e-4,
            stage1_rounds: 50,
            max_sweeps: 30,
            solve: SolveOptions::default(),
        }
    }
}

/// Result of the coverage stage.
#[derive(Debug, Clone)]
pub struct MaxminSnrResult {
    pub trajectory: SwarmTrajectory,
    /// Exact minimum average SNR (linear) at the final trajectory.
    pub min_avg_snr: f64,
    pub trace: ScaTrace,
}

/// Builds the convexified max–min SNR subproblem around `anchor`.
///
/// Decision vector: swarm positions `x[3(l·N + n) + c]` followed by the
/// common SNR floor `Ψ`. One constraint per user bounds `Ψ` by the concave
/// surrogate of that user's average SNR obtained from
/// [`inv_sq_dist_lower_bound`]; the norm terms enter with nonnegative
/// weights, keeping each constraint convex.
fn build_maxmin_subproblem(sc: &Scenario, anchor: &SwarmTrajectory) -> ConvexSubproblem {
    let lc = sc.num_uavs;
    let nc = sc.num_slots;
    let dim = 3 * lc * nc + 1;
    let psi = 3 * lc * nc;
    let idx = |l: usize, n: usize, c: usize| 3 * (l * nc + n) + c;
    let block = |l: usize, n: usize| [idx(l, n, 0), idx(l, n, 1), idx(l, n, 2)];
    let inv_n = 1.0 / nc as f64;

    let mut x0 = vec![0.0; dim];
    for l in 0..lc {
        for n in 0..nc {
            let p = anchor.get(l, n);
            x0[idx(l, n, 0)] = p.x;
            x0[idx(l, n, 1)] = p.y;
            x0[idx(l, n, 2)] = p.z;
        }
    }
    x0[psi] = min_average_snr(sc, anchor).expect("anchor must keep positive ranges");

    let objective = ConcaveObjective::linear(vec![(psi, 1.0)], 0.0);
    let mut p = ConvexSubproblem::new(dim, objective, x0);

    for (k, ue) in sc.users.iter().enumerate() {
        let s = sc.pbar(k) * sc.rf.beta0;
        // Ψ − Σ_{l,n} (s/N)·(3/r̃² − 2r/r̃³) ≤ 0
        let mut g = ConvexExpr::affine(vec![(psi, 1.0)], 0.0);
        for l in 0..lc {
            for n in 0..nc {
                let r_anchor = anchor.get(l, n).distance(ue.position);
                let inv2 = 1.0 / (r_anchor * r_anchor);
                g.constant -= s * inv_n * 3.0 * inv2;
                g.push_norm(
                    s * inv_n * 2.0 * inv2 / r_anchor,
                    AffineVec3::block_minus_point(block(l, n), ue.position.as_array()),
                );
            }
        }
        p.add_constraint(g);
    }
    add_swarm_motion_constraints(&mut p, sc, anchor);
    p
}

/// Coverage stage: successively maximizes the minimum average receive SNR
/// over users, starting from `init`.
pub fn maxmin_snr_trajectory(
    sc: &Scenario,
    init: SwarmTrajectory,
    opts: &AltOptOptions,
) -> Result<MaxminSnrResult, AmaError> {
    if init.num_uavs() != sc.num_uavs || init.num_slots() != sc.num_slots {
        return Err(AmaError::DimensionMismatch(format!(
            "initial trajectory is {}x{}, scenario needs {}x{}",
            init.num_uavs(),
            init.num_slots(),
            sc.num_uavs,
            sc.num_slots
        )));
    }
    init.check_feasible(sc, 1e-8)?;
    let snr0 = min_average_snr(sc, &init)?;
    let sca_opts = ScaOptions {
        eps: opts.eps1 * (1.0 + snr0.abs()),
        max_rounds: opts.stage1_rounds,
        solve: opts.solve.clone(),
    };
    let mut trace = ScaTrace::default();
    let (trajectory, min_avg_snr) = sca_loop(
        init,
        &sca_opts,
        &mut trace,
        |anchor| build_maxmin_subproblem(sc, anchor),
        |cand| min_average_snr(sc, cand),
    )?;
    Ok(MaxminSnrResult { trajectory, min_avg_snr, trace })
}

/// Anchored data of one (user, slot) constraint pair in the per-UAV
/// subproblem: per-user cosine gains, their gradients in the live position,
/// and the power-weighted curvature bounds.
struct SlotSurrogate {
    /// `g_i(r̂)` for every interferer/source `i`.
    values: Vec<f64>,
    /// `∇_q g_i` at the anchor.
    grads: Vec<Vec3>,
    /// `ω_i` curvature bounds (power-unweighted).
    omegas: Vec<f64>,
}

fn slot_surrogate(
    model: &FixedAmplitudeChannelModel,
    v: &[Complex64],
    anchor: &SwarmTrajectory,
    n: usize,
    live: usize,
) -> SlotSurrogate {
    let kc = model.num_ues();
    let q = anchor.get(live, n);
    let mut values = Vec::with_capacity(kc);
    let mut grads = Vec::with_capacity(kc);
    let mut omegas = Vec::with_capacity(kc);
    for i in 0..kc {
        let cg = g_decompose(model, v, anchor, i, n, live);
        let diff = q - model.users[i];
        let r = diff.norm();
        values.push(cg.value(r));
        grads.push(diff.scale(cg.slope(r) / r));
        omegas.push(lipschitz_omega(model, v, i, n, live));
    }
    SlotSurrogate { values, grads, omegas }
}

/// Builds the per-UAV phase-refinement subproblem around `anchor`.
///
/// Decision vector: the live UAV's positions `q[3n + c]`, signal slacks
/// `η_{k,n}`, interference slacks `μ_{k,n}`, and the common rate floor `Γ`
/// (maximized). Constraints per user `k`:
///
/// * `Γ ≤ Σ_n (η_{k,n} − μ_{k,n}) / (N·ln 2)` — affine;
/// * `e^{η} + (Ω/2)‖q − q̃‖² ≤ 1 + Σ_i P̄_i·[g_i(q̃) + ∇g_iᵀ(q − q̃)]`
///   — the right side is the `ω`-quadratic lower bound of the signal power,
///   so `η` under-approximates `ln(1 + S)`;
/// * `1 + Σ_{i≠k} P̄_i·[…] + (Ω'/2)‖q − q̃‖² ≤ (1 + μ − μ̃)e^{μ̃}`
///   — the left side upper-bounds the interference power and the right side
///   lower-bounds `e^{μ}` ([`exp_linearize_lb`]), so `μ` over-approximates
///   `ln(1 + I)`.
///
/// All three hold with equality at the anchor with the slacks initialized
/// from the anchored powers, so the solve starts feasible and its optimum
/// `Γ` is a certified lower bound on the true fixed-amplitude minimum rate
/// of the candidate.
fn build_per_uav_subproblem(
    sc: &Scenario,
    model: &FixedAmplitudeChannelModel,
    beams: &BeamformerSet,
    anchor: &SwarmTrajectory,
    live: usize,
) -> ConvexSubproblem {
    let kc = model.num_ues();
    let nc = model.num_slots();
    let q_idx = |n: usize, c: usize| 3 * n + c;
    let qblock = |n: usize| [q_idx(n, 0), q_idx(n, 1), q_idx(n, 2)];
    let eta_idx = |k: usize, n: usize| 3 * nc + k * nc + n;
    let mu_idx = |k: usize, n: usize| 3 * nc + kc * nc + k * nc + n;
    let gamma = 3 * nc + 2 * kc * nc;
    let dim = gamma + 1;
    let inv_nln2 = 1.0 / (nc as f64 * LN2);
    let pbars = sc.pbars();

    let mut x0 = vec![0.0; dim];
    for n in 0..nc {
        let p = anchor.get(live, n);
        x0[q_idx(n, 0)] = p.x;
        x0[q_idx(n, 1)] = p.y;
        x0[q_idx(n, 2)] = p.z;
    }

    let mut constraints: Vec<ConvexExpr> = Vec::new();
    let mut rate_sums = vec![0.0; kc];
    for k in 0..kc {
        for n in 0..nc {
            let sur = slot_surrogate(model, beams.get(k, n), anchor, n, live);
            let q_anchor = anchor.get(live, n);

            let signal: f64 = (0..kc).map(|i| pbars[i] * sur.values[i]).sum();
            let interf: f64 =
                (0..kc).filter(|&i| i != k).map(|i| pbars[i] * sur.values[i]).sum();
            let eta0 = signal.ln_1p();
            let mu0 = interf.ln_1p();
            x0[eta_idx(k, n)] = eta0;
            x0[mu_idx(k, n)] = mu0;
            rate_sums[k] += (eta0 - mu0) * inv_nln2;

            // e^η + (Ω/2)‖q − q̃‖² − Σ_i P̄_i(g_i + ∇g_iᵀ(q − q̃)) − 1 ≤ 0
            let mut grad_sum = Vec3::ZERO;
            let mut omega_sum = 0.0;
            for i in 0..kc {
                grad_sum = grad_sum + sur.grads[i].scale(pbars[i]);
                omega_sum += pbars[i] * sur.omegas[i];
            }
            let lin: SparseLin = (0..3)
                .map(|c| (q_idx(n, c), -grad_sum.as_array()[c]))
                .collect();
            let mut g = ConvexExpr::affine(
                lin,
                -1.0 - signal + grad_sum.dot(q_anchor),
            );
            g.push_exp(1.0, eta_idx(k, n));
            g.push_sq_norm(
                0.5 * omega_sum,
                AffineVec3::block_minus_point(qblock(n), q_anchor.as_array()),
            );
            constraints.push(g);

            // 1 + Σ_{i≠k} P̄_i(g_i + ∇g_iᵀ(q − q̃)) + (Ω'/2)‖q − q̃‖²
            //   − (1 + μ − μ̃)e^{μ̃} ≤ 0
            let mut grad_sum_i = Vec3::ZERO;
            let mut omega_sum_i = 0.0;
            for i in 0..kc {
                if i != k {
                    grad_sum_i = grad_sum_i + sur.grads[i].scale(pbars[i]);
                    omega_sum_i += pbars[i] * sur.omegas[i];
                }
            }
            let emu = mu0.exp();
            let mut lin: SparseLin = (0..3)
                .map(|c| (q_idx(n, c), grad_sum_i.as_array()[c]))
                .collect();
            lin.push((mu_idx(k, n), -emu));
            let mut g = ConvexExpr::affine(
                lin,
                1.0 + interf - grad_sum_i.dot(q_anchor) - (1.0 - mu0) * emu,
            );
            g.push_sq_norm(
                0.5 * omega_sum_i,
                AffineVec3::block_minus_point(qblock(n), q_anchor.as_array()),
            );
            constraints.push(g);
        }
    }
    x0[gamma] = rate_sums.iter().copied().fold(f64::INFINITY, f64::min);

    let objective = ConcaveObjective::linear(vec![(gamma, 1.0)], 0.0);
    let mut p = ConvexSubproblem::new(dim, objective, x0);
    for g in constraints {
        p.add_constraint(g);
    }
    // Γ − Σ_n (η_{k,n} − μ_{k,n})/(N ln 2) ≤ 0
    for k in 0..kc {
        let mut lin: SparseLin = Vec::with_capacity(2 * nc + 1);
        lin.push((gamma, 1.0));
        for n in 0..nc {
            lin.push((eta_idx(k, n), -inv_nln2));
            lin.push((mu_idx(k, n), inv_nln2));
        }
        p.affine_le(lin, 0.0);
    }

    let mut pinned = vec![false; 3 * nc];
    if let Some(ep) = &sc.endpoints {
        if nc > 1 {
            for (slot, pos) in [(0, ep.initial[live]), (nc - 1, ep.final_[live])] {
                for (c, v) in pos.as_array().into_iter().enumerate() {
                    p.pin(q_idx(slot, c), v);
                    pinned[q_idx(slot, c)] = true;
                }
            }
        }
    }
    let block_pinned = |b: [usize; 3]| b.iter().all(|&i| pinned[i]);

    for n in 0..nc {
        if !pinned[q_idx(n, 2)] {
            p.affine_le(vec![(q_idx(n, 2), -1.0)], -sc.min_altitude_m);
        }
    }
    // Anchored spacing against the other (fixed) UAVs:
    // d² + ‖t‖² + 2tᵀb − 2tᵀq ≤ 0 with t = q̃ − b.
    let d2 = sc.dmin_m * sc.dmin_m;
    for n in 0..nc {
        if block_pinned(qblock(n)) {
            continue;
        }
        for l in 0..model.num_uavs() {
            if l == live {
                continue;
            }
            let b = anchor.get(l, n);
            let t = anchor.get(live, n) - b;
            let lin: SparseLin =
                (0..3).map(|c| (q_idx(n, c), -2.0 * t.as_array()[c])).collect();
            p.add_constraint(ConvexExpr::affine(lin, d2 + t.norm_sq() + 2.0 * t.dot(b)));
        }
    }
    if nc > 1 {
        let step = sc.vmax_step();
        for n in 0..nc - 1 {
            if block_pinned(qblock(n)) && block_pinned(qblock(n + 1)) {
                continue;
            }
            p.norm_ball(qblock(n + 1), qblock(n), step);
        }
    }
    p
}

/// Result of the full alternating driver.
#[derive(Debug, Clone)]
pub struct AltOptResult {
    pub trajectory: SwarmTrajectory,
    /// Exact minimum average rate with per-slot MMSE beamforming.
    pub min_rate: f64,
    /// Exact per-user average rates.
    pub per_ue: Vec<f64>,
    pub beamformers: BeamformerSet,
    /// Coverage-stage trace (exact minimum SNR per accepted round).
    pub stage1_trace: ScaTrace,
    /// Exact minimum SNR after the coverage stage.
    pub stage1_min_snr: f64,
    /// Fixed-amplitude minimum rate after initialization and after each
    /// sweep (non-decreasing).
    pub sweep_objectives: Vec<f64>,
    /// Alternating sweeps performed.
    pub sweeps: usize,
}

/// Two-stage max–min rate optimization starting from the default
/// initializer (endpoint interpolation, or a circular hover when the
/// scenario has no endpoints).
pub fn alternating_optimize(sc: &Scenario, opts: &AltOptOptions) -> Result<AltOptResult, AmaError> {
    let init = default_trajectory_init(sc)?;
    alternating_optimize_from(sc, init, opts)
}

/// Two-stage max–min rate optimization from an explicit initial trajectory.
pub fn alternating_optimize_from(
    sc: &Scenario,
    init: SwarmTrajectory,
    opts: &AltOptOptions,
) -> Result<AltOptResult, AmaError> {
    let stage1 = maxmin_snr_trajectory(sc, init, opts)?;
    let mut traj = stage1.trajectory.clone();
    let model = FixedAmplitudeChannelModel::from_scenario(sc, &traj)?;

    let mut beams = model.mmse_update(&traj);
    let (mut current, _) = model.min_average_rate(&traj, &beams);
    let mut sweep_objectives = vec![current];
    let mut sweeps = 0;
    for _ in 0..opts.max_sweeps {
        let before = current;
        for live in 0..sc.num_uavs {
            let p = build_per_uav_subproblem(sc, &model, &beams, &traj, live);
            let report = solve(&p, &opts.solve);
            if report.status == SolveStatus::InfeasibleStart {
                // Anchor drifted outside tolerance for this block; keep it.
                continue;
            }
            let mut candidate = traj.clone();
            for n in 0..sc.num_slots {
                candidate.set(
                    live,
                    n,
                    Vec3::new(report.x[3 * n], report.x[3 * n + 1], report.x[3 * n + 2]),
                );
            }
            let (value, _) = model.min_average_rate(&candidate, &beams);
            // The surrogate guarantees value ≥ current up to float noise;
            // guard against the noise instead of trusting it blindly.
            if value >= current - 1e-12 * (1.0 + current.abs()) {
                traj = candidate;
                current = value;
            }
        }
        beams = model.mmse_update(&traj);
        let (value, _) = model.min_average_rate(&traj, &beams);
        current = value;
        sweeps += 1;
        sweep_objectives.push(current);
        if current - before <= opts.eps2 {
            break;
        }
    }

    let exact = evaluate_mmse_rates(sc, &traj)?;
    Ok(AltOptResult {
        trajectory: traj,
        min_rate: exact.min_average,
        per_ue: exact.per_ue.iter().map(|m| m.average).collect(),
        beamformers: exact.beamformers,
        stage1_trace: stage1.trace,
        stage1_min_snr: stage1.min_avg_snr,
        sweep_objectives,
        sweeps,
    })
}

/// Exact minimum average rate of `traj` under per-slot MMSE beamforming —
/// convenience wrapper used by benchmark baselines.
pub fn exact_min_rate(sc: &Scenario, traj: &SwarmTrajectory) -> Result<f64, AmaError> {
    Ok(evaluate_mmse_rates(sc, traj)?.min_average)
}
