//! Successive convex approximation for single-terminal swarm optimization.
//!
//! The average rate of one terminal is a non-convex function of the antenna
//! positions. Each round replaces it with a concave global lower bound that
//! touches it at the current iterate (anchor), convexifies the pairwise
//! spacing constraints the same way, and solves the resulting subproblem
//! with the barrier solver. Because the surrogate is a lower bound that is
//! tight at the anchor, the true objective never decreases across rounds.
//!
//! Three drivers share the machinery: trajectory optimization over all
//! slots, joint static placement (one slot), and successive placement that
//! introduces one antenna at a time while the previous ones stay fixed.

use crate::placement::{hex_lattice_placement as hex_init, optimal_single_uav};
use crate::scenario::{Scenario, SwarmTrajectory};
use crate::solver::{
    solve, AffineVec3, ConcaveObjective, ConvexSubproblem, SolveOptions, SolveStatus, SparseLin,
};
use crate::vec3::Vec3;
use crate::AmaError;

pub use crate::placement::hex_lattice_placement;

const LN2: f64 = std::f64::consts::LN_2;

/// Rate of one terminal given the squared distances to the live antennas
/// and a fixed `background` inverse-square sum from antennas that are not
/// being optimized: `log₂(1 + s·(background + Σ 1/x_l))`, with
/// `s = P̄·β₀` the power-scaled reference gain.
pub fn rate_from_sq_dists(s: f64, background: f64, sq_dists: &[f64]) -> f64 {
    let g: f64 = background + sq_dists.iter().map(|&x| 1.0 / x).sum::<f64>();
    (1.0 + s * g).ln() / LN2
}

/// Concave global lower bound on [`rate_from_sq_dists`] around an anchor:
/// returns `(c0, coeffs)` such that for all positive squared distances `x`,
///
/// `rate(x) ≥ c0 − Σ coeffs[l]·x[l]`,
///
/// with equality at the anchor. The rate is jointly convex in the squared
/// distances, so its tangent plane there is a global lower bound; composing
/// with the convex maps `x[l] = ‖q_l − w‖²` (entered with nonnegative
/// `coeffs`) keeps the bound concave in the positions.
pub fn rate_lower_bound(s: f64, background: f64, anchor_sq_dists: &[f64]) -> (f64, Vec<f64>) {
    let g: f64 = background + anchor_sq_dists.iter().map(|&x| 1.0 / x).sum::<f64>();
    let denom = LN2 * (1.0 + s * g);
    let coeffs: Vec<f64> = anchor_sq_dists.iter().map(|&x| s / (x * x * denom)).collect();
    let value = (1.0 + s * g).ln() / LN2;
    let c0 = value + coeffs.iter().zip(anchor_sq_dists).map(|(c, &x)| c * x).sum::<f64>();
    (c0, coeffs)
}

/// Affine global lower bound on the squared separation `‖a − b‖²`,
/// linearized at anchors `(ã, b̃)`:
///
/// `‖a − b‖² ≥ 2(ã − b̃)ᵀ(a − b) − ‖ã − b̃‖²`,
///
/// with equality at the anchor. Requiring the right side to stay above
/// `d_min²` is the convexified spacing constraint.
pub fn collision_lower_bound(anchor_a: Vec3, anchor_b: Vec3, a: Vec3, b: Vec3) -> f64 {
    let t = anchor_a - anchor_b;
    2.0 * t.dot(a - b) - t.norm_sq()
}

/// Stopping rules and solver settings for the outer SCA loop.
#[derive(Debug, Clone)]
pub struct ScaOptions {
    /// Stop when a round improves the true objective by less than this.
    pub eps: f64,
    /// Maximum SCA rounds (per antenna for the successive driver).
    pub max_rounds: usize,
    pub solve: SolveOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions { eps: 1e-4, max_rounds: 100, solve: SolveOptions::default() }
    }
}

/// Objective values recorded across an SCA run.
#[derive(Debug, Clone, Default)]
pub struct ScaTrace {
    /// True objective at the start and after every accepted round
    /// (non-decreasing).
    pub objectives: Vec<f64>,
    /// Accepted SCA rounds.
    pub rounds: usize,
    /// Subproblem solves performed.
    pub sca_runs: usize,
    /// Newton iterations summed over all subproblem solves.
    pub solver_iterations: usize,
}

/// Final iterate of an SCA run.
#[derive(Debug, Clone)]
pub struct ScaResult {
    pub trajectory: SwarmTrajectory,
    /// True average rate of the terminal at the final iterate.
    pub objective: f64,
    pub trace: ScaTrace,
}

fn single_user(sc: &Scenario) -> Result<(), AmaError> {
    if sc.users.len() != 1 {
        return Err(AmaError::InvalidScenario(format!(
            "single-terminal optimizer called with {} terminals",
            sc.users.len()
        )));
    }
    Ok(())
}

/// Average rate of the single terminal over the trajectory.
pub fn average_rate_single_ue(sc: &Scenario, traj: &SwarmTrajectory) -> Result<f64, AmaError> {
    single_user(sc)?;
    let s = sc.pbar(0) * sc.rf.beta0;
    let w = sc.users[0].position;
    let mut total = 0.0;
    for n in 0..traj.num_slots() {
        let mut sq = Vec::with_capacity(traj.num_uavs());
        for l in 0..traj.num_uavs() {
            let d2 = (traj.get(l, n) - w).norm_sq();
            if d2 <= 0.0 {
                return Err(AmaError::DegenerateGeometry { uav: l, ue: 0 });
            }
            sq.push(d2);
        }
        total += rate_from_sq_dists(s, 0.0, &sq);
    }
    Ok(total / traj.num_slots() as f64)
}

/// Commute-to-ring start: fly each antenna from its initial position to an
/// assigned slot on the minimum-spacing circular formation centered over
/// the terminals' centroid, orbit the formation, then fly to the final
/// position. Returns `None` when the construction cannot be made feasible
/// (too few slots, spacing conflicts along the straight commutes, ...);
/// the caller falls back to the straight-line start.
fn ring_commute_init(sc: &Scenario, ep: &crate::scenario::Endpoints) -> Option<SwarmTrajectory> {
    let lc = sc.num_uavs;
    let nc = sc.num_slots;
    if nc < 3 {
        return None;
    }
    // Ring over the terminals' centroid at the altitude floor.
    let mut cg = Vec3::new(0.0, 0.0, 0.0);
    for u in &sc.users {
        cg = cg + u.position;
    }
    cg = cg.scale(1.0 / sc.users.len() as f64);
    let center = Vec3::new(cg.x, cg.y, sc.min_altitude_m);
    let radius = if lc == 1 {
        0.0
    } else {
        sc.dmin_m / (2.0 * (std::f64::consts::PI / lc as f64).sin())
    };

    // Uniformly spaced ring slots, assigned in the cyclic order of each
    // antenna's bearing from the center so the straight commutes do not
    // cross; the offset keeps the first-ranked antenna on a radial path.
    let bearing = |l: usize| {
        let d = ep.initial[l] - center;
        d.y.atan2(d.x)
    };
    let mut order: Vec<usize> = (0..lc).collect();
    order.sort_by(|&a, &b| bearing(a).total_cmp(&bearing(b)));
    let offset = bearing(order[0]);
    let mut angle = vec![0.0; lc];
    for (rank, &l) in order.iter().enumerate() {
        angle[l] = offset + 2.0 * std::f64::consts::PI * rank as f64 / lc as f64;
    }
    let anchor = |l: usize| {
        center + Vec3::new(radius * angle[l].cos(), radius * angle[l].sin(), 0.0)
    };

    // Common commute length (in moves) for all antennas; mirrored on return.
    let vstep = sc.vmax_step();
    let mut t_out = 0usize;
    let mut t_back = 0usize;
    for l in 0..lc {
        t_out = t_out.max((ep.initial[l].distance(anchor(l)) / vstep).ceil() as usize);
        t_back = t_back.max((ep.final_[l].distance(anchor(l)) / vstep).ceil() as usize);
    }
    let moves = nc - 1;
    if t_out + t_back > moves {
        return None;
    }
    // One revolution across the middle segment when the chord fits the
    // speed budget; otherwise the formation holds still.
    let mid = moves - t_out - t_back;
    let spin = mid > 0
        && (lc == 1 || 2.0 * radius * (std::f64::consts::PI / mid as f64).sin() <= vstep);

    let traj = SwarmTrajectory::from_fn(lc, nc, |l, slot| {
        if slot <= t_out {
            let t = if t_out == 0 { 1.0 } else { slot as f64 / t_out as f64 };
            ep.initial[l] + (anchor(l) - ep.initial[l]).scale(t)
        } else if slot < t_out + mid {
            if !spin {
                anchor(l)
            } else {
                let swept = 2.0 * std::f64::consts::PI * (slot - t_out) as f64 / mid as f64;
                let a = angle[l] + swept;
                center + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
            }
        } else {
            let t = (moves - slot) as f64 / t_back.max(1) as f64;
            ep.final_[l] + (anchor(l) - ep.final_[l]).scale(t)
        }
    });
    traj.check_feasible(sc, 1e-9).ok()?;
    Some(traj)
}

/// Feasible starting trajectory used when the caller does not supply one.
///
/// With mission endpoints the start commutes to the minimum-spacing ring
/// over the terminals' centroid, orbits it, and returns (falling back to
/// the straight line between the endpoints when that construction is not
/// feasible). Without endpoints the start is the rotating ring of
/// [`crate::placement::circular_trajectory`].
pub fn default_trajectory_init(sc: &Scenario) -> Result<SwarmTrajectory, AmaError> {
    let traj = match &sc.endpoints {
        Some(ep) => ring_commute_init(sc, ep).unwrap_or_else(|| {
            let n = sc.num_slots;
            SwarmTrajectory::from_fn(sc.num_uavs, n, |l, slot| {
                if n == 1 {
                    ep.initial[l]
                } else {
                    let t = slot as f64 / (n - 1) as f64;
                    ep.initial[l] + (ep.final_[l] - ep.initial[l]).scale(t)
                }
            })
        }),
        None => crate::placement::circular_trajectory(
            sc.num_uavs,
            sc.num_slots,
            sc.dmin_m,
            Vec3::new(sc.reference.x, sc.reference.y, 0.0),
            sc.min_altitude_m,
            sc.vmax_step(),
        )?,
    };
    traj.check_feasible(sc, 1e-9)?;
    Ok(traj)
}

/// Builds the convexified full-swarm subproblem around `anchor`.
fn build_full_subproblem(sc: &Scenario, anchor: &SwarmTrajectory) -> ConvexSubproblem {
    let lc = sc.num_uavs;
    let nc = sc.num_slots;
    let dim = 3 * lc * nc;
    let idx = |l: usize, n: usize, c: usize| 3 * (l * nc + n) + c;
    let block = |l: usize, n: usize| [idx(l, n, 0), idx(l, n, 1), idx(l, n, 2)];

    let w = sc.users[0].position;
    let s = sc.pbar(0) * sc.rf.beta0;
    let inv_n = 1.0 / nc as f64;

    let mut objective = ConcaveObjective::linear(Vec::new(), 0.0);
    for n in 0..nc {
        let anchors: Vec<f64> =
            (0..lc).map(|l| (anchor.get(l, n) - w).norm_sq()).collect();
        let (c0, coeffs) = rate_lower_bound(s, 0.0, &anchors);
        objective.constant += c0 * inv_n;
        for (l, &cl) in coeffs.iter().enumerate() {
            objective.push_neg_sq_norm(
                cl * inv_n,
                AffineVec3::block_minus_point(block(l, n), w.as_array()),
            );
        }
    }

    let mut x0 = vec![0.0; dim];
    for l in 0..lc {
        for n in 0..nc {
            let p = anchor.get(l, n);
            x0[idx(l, n, 0)] = p.x;
            x0[idx(l, n, 1)] = p.y;
            x0[idx(l, n, 2)] = p.z;
        }
    }
    let mut p = ConvexSubproblem::new(dim, objective, x0);
    add_swarm_motion_constraints(&mut p, sc, anchor);
    p
}

/// Adds endpoint pins, altitude floors, anchored collision linearizations and
/// per-step speed balls for a full-swarm decision vector laid out as
/// `x[3(l·N + n) + c]`. Slack variables may follow the position coordinates.
pub(crate) fn add_swarm_motion_constraints(
    p: &mut ConvexSubproblem,
    sc: &Scenario,
    anchor: &SwarmTrajectory,
) {
    let lc = sc.num_uavs;
    let nc = sc.num_slots;
    let idx = |l: usize, n: usize, c: usize| 3 * (l * nc + n) + c;
    let block = |l: usize, n: usize| [idx(l, n, 0), idx(l, n, 1), idx(l, n, 2)];

    let mut pinned = vec![false; 3 * lc * nc];
    if let Some(ep) = &sc.endpoints {
        if nc > 1 {
            for l in 0..lc {
                for (slot, pos) in [(0, ep.initial[l]), (nc - 1, ep.final_[l])] {
                    for (c, v) in pos.as_array().into_iter().enumerate() {
                        p.pin(idx(l, slot, c), v);
                        pinned[idx(l, slot, c)] = true;
                    }
                }
            }
        }
    }
    let block_pinned = |b: [usize; 3]| b.iter().all(|&i| pinned[i]);

    for l in 0..lc {
        for n in 0..nc {
            if !pinned[idx(l, n, 2)] {
                p.affine_le(vec![(idx(l, n, 2), -1.0)], -sc.min_altitude_m);
            }
        }
    }
    let d2 = sc.dmin_m * sc.dmin_m;
    for n in 0..nc {
        for l in 0..lc {
            for l2 in l + 1..lc {
                if block_pinned(block(l, n)) && block_pinned(block(l2, n)) {
                    continue;
                }
                let t = anchor.get(l, n) - anchor.get(l2, n);
                let mut lin: SparseLin = Vec::with_capacity(6);
                for (c, tc) in t.as_array().into_iter().enumerate() {
                    lin.push((idx(l, n, c), -2.0 * tc));
                    lin.push((idx(l2, n, c), 2.0 * tc));
                }
                p.add_constraint(crate::solver::ConvexExpr::affine(lin, d2 + t.norm_sq()));
            }
        }
    }
    if nc > 1 {
        let step = sc.vmax_step();
        for l in 0..lc {
            for n in 0..nc - 1 {
                if block_pinned(block(l, n)) && block_pinned(block(l, n + 1)) {
                    continue;
                }
                p.norm_ball(block(l, n + 1), block(l, n), step);
            }
        }
    }
}

fn trajectory_from_x(lc: usize, nc: usize, x: &[f64]) -> SwarmTrajectory {
    SwarmTrajectory::from_fn(lc, nc, |l, n| {
        let base = 3 * (l * nc + n);
        Vec3::new(x[base], x[base + 1], x[base + 2])
    })
}

/// Shared outer loop: anchored convex subproblems until the true objective
/// stalls. `build` maps an anchor to its subproblem; `objective` evaluates
/// the true objective of a candidate. Decision vectors may carry slack
/// variables after the `3·L·N` position coordinates; only the positions are
/// read back into the anchor.
pub(crate) fn sca_loop<B, O>(
    mut anchor: SwarmTrajectory,
    opts: &ScaOptions,
    trace: &mut ScaTrace,
    mut build: B,
    mut objective: O,
) -> Result<(SwarmTrajectory, f64), AmaError>
where
    B: FnMut(&SwarmTrajectory) -> ConvexSubproblem,
    O: FnMut(&SwarmTrajectory) -> Result<f64, AmaError>,
{
    let mut best = objective(&anchor)?;
    trace.objectives.push(best);
    let mut gap_hint = None;
    for _ in 0..opts.max_rounds {
        let p = build(&anchor);
        let solve_opts = SolveOptions { gap_hint, ..opts.solve.clone() };
        let report = solve(&p, &solve_opts);
        trace.sca_runs += 1;
        trace.solver_iterations += report.iterations;
        if report.status == SolveStatus::InfeasibleStart {
            // The anchor drifted outside tolerance; keep it and stop.
            break;
        }
        let candidate = trajectory_from_x(anchor.num_uavs(), anchor.num_slots(), &report.x);
        let value = objective(&candidate)?;
        // The surrogate is a tight-at-anchor lower bound, so a genuine
        // solve cannot decrease the true objective; tolerate only float
        // noise before keeping the anchor.
        if value < best - 1e-12 * (1.0 + best.abs()) {
            break;
        }
        let gain = value - best;
        anchor = candidate;
        best = value;
        trace.objectives.push(best);
        trace.rounds += 1;
        if gain <= opts.eps {
            break;
        }
        gap_hint = Some((3.0 * gain).max(1e-3));
    }
    Ok((anchor, best))
}

/// Optimizes the full trajectory of the swarm for one terminal, starting
/// from a feasible `init` (see [`default_trajectory_init`]).
pub fn sca_trajectory_single_ue(
    sc: &Scenario,
    init: &SwarmTrajectory,
    opts: &ScaOptions,
) -> Result<ScaResult, AmaError> {
    single_user(sc)?;
    if init.num_uavs() != sc.num_uavs || init.num_slots() != sc.num_slots {
        return Err(AmaError::DimensionMismatch(format!(
            "initializer is {}x{}, scenario wants {}x{}",
            init.num_uavs(),
            init.num_slots(),
            sc.num_uavs,
            sc.num_slots
        )));
    }
    init.check_feasible(sc, 1e-8)?;
    let mut trace = ScaTrace::default();
    let (trajectory, objective) = sca_loop(
        init.clone(),
        opts,
        &mut trace,
        |anchor| build_full_subproblem(sc, anchor),
        |traj| average_rate_single_ue(sc, traj),
    )?;
    Ok(ScaResult { trajectory, objective, trace })
}

/// Optimizes a static placement (one slot) of all antennas jointly for one
/// terminal, starting from a hexagonal-lattice cluster over the terminal —
/// the densest spacing-respecting packing, which avoids the ring
/// arrangement's stationary trap where every inward move is blocked by an
/// active spacing constraint.
pub fn joint_placement(sc: &Scenario, opts: &ScaOptions) -> Result<ScaResult, AmaError> {
    single_user(sc)?;
    if sc.num_slots != 1 {
        return Err(AmaError::InvalidScenario(
            "placement requires a single-slot scenario".into(),
        ));
    }
    let init = SwarmTrajectory::from_placement(hex_init(
        sc.num_uavs,
        sc.dmin_m,
        sc.users[0].position,
        sc.min_altitude_m,
    ));
    init.check_feasible(sc, 1e-8)?;
    let mut trace = ScaTrace::default();
    let (trajectory, objective) = sca_loop(
        init,
        opts,
        &mut trace,
        |anchor| build_full_subproblem(sc, anchor),
        |traj| average_rate_single_ue(sc, traj),
    )?;
    Ok(ScaResult { trajectory, objective, trace })
}

/// Builds the one-antenna subproblem for the successive driver: optimize
/// antenna `live` with every position in `fixed` held constant.
fn build_single_subproblem(
    sc: &Scenario,
    fixed: &[Vec3],
    anchor: Vec3,
) -> ConvexSubproblem {
    let w = sc.users[0].position;
    let s = sc.pbar(0) * sc.rf.beta0;
    let background: f64 = fixed.iter().map(|p| 1.0 / (*p - w).norm_sq()).sum();

    let (c0, coeffs) = rate_lower_bound(s, background, &[(anchor - w).norm_sq()]);
    let mut objective = ConcaveObjective::linear(Vec::new(), c0);
    objective.push_neg_sq_norm(coeffs[0], AffineVec3::block_minus_point([0, 1, 2], w.as_array()));

    let mut p = ConvexSubproblem::new(3, objective, anchor.as_array().to_vec());
    p.affine_le(vec![(2, -1.0)], -sc.min_altitude_m);
    let d2 = sc.dmin_m * sc.dmin_m;
    for q in fixed {
        let t = anchor - *q;
        let lin: SparseLin = t
            .as_array()
            .into_iter()
            .enumerate()
            .map(|(c, tc)| (c, -2.0 * tc))
            .collect();
        // ‖x − q‖² ≥ 2tᵀ(x − q) − ‖t‖² ≥ d_min², with q fixed.
        p.add_constraint(crate::solver::ConvexExpr::affine(
            lin,
            d2 + t.norm_sq() + 2.0 * t.dot(*q),
        ));
    }
    p
}

/// Places antennas one at a time for one terminal: each new antenna starts
/// at the best free hexagonal-lattice spot and is then individually
/// optimized with the already-placed antennas frozen. Exactly `L − 1`
/// single-antenna SCA runs are performed (the first antenna's optimum is
/// the closed-form overhead point).
pub fn successive_placement(sc: &Scenario, opts: &ScaOptions) -> Result<ScaResult, AmaError> {
    single_user(sc)?;
    if sc.num_slots != 1 {
        return Err(AmaError::InvalidScenario(
            "placement requires a single-slot scenario".into(),
        ));
    }
    let w = sc.users[0].position;
    let s = sc.pbar(0) * sc.rf.beta0;
    let mut placed: Vec<Vec3> = vec![optimal_single_uav(w, sc.min_altitude_m)];
    let mut trace = ScaTrace::default();
    trace
        .objectives
        .push(rate_from_sq_dists(s, 0.0, &[(placed[0] - w).norm_sq()]));

    // Generous candidate pool: lattice spots are mutually spacing-feasible,
    // but refined antennas drift off-lattice, so scan until one clears.
    let candidates = hex_init(4 * sc.num_uavs + 8, sc.dmin_m, w, sc.min_altitude_m);
    for _ in 1..sc.num_uavs {
        let start = candidates
            .iter()
            .find(|c| placed.iter().all(|p| c.distance(*p) >= sc.dmin_m))
            .copied()
            .ok_or_else(|| {
                AmaError::InfeasibleInitializer(
                    "no spacing-feasible lattice spot for the next antenna".into(),
                )
            })?;
        let background: f64 = placed.iter().map(|p| 1.0 / (*p - w).norm_sq()).sum();
        let fixed = placed.clone();
        let (refined, _) = sca_loop(
            SwarmTrajectory::from_placement(vec![start]),
            opts,
            &mut trace,
            |anchor| build_single_subproblem(sc, &fixed, anchor.get(0, 0)),
            |traj| {
                let d2 = (traj.get(0, 0) - w).norm_sq();
                if d2 <= 0.0 {
                    return Err(AmaError::DegenerateGeometry { uav: fixed.len(), ue: 0 });
                }
                Ok(rate_from_sq_dists(s, background, &[d2]))
            },
        )?;
        placed.push(refined.get(0, 0));
    }

    let trajectory = SwarmTrajectory::from_placement(placed);
    let objective = average_rate_single_ue(sc, &trajectory)?;
    Ok(ScaResult { trajectory, objective, trace })
}
