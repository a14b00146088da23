//! Closed-form swarm placements for one or two user terminals.
//!
//! For a single terminal the array-gain-optimal spot for one antenna is
//! directly overhead at the altitude floor. For two antennas serving one
//! terminal at minimum spacing `d`, the optimal horizontal offset has an
//! exact closed form that switches between a symmetric and an asymmetric
//! arrangement at the height ratio `ζ = H/d = √3/2`. For two terminals,
//! spherical-wavefront phase differences allow *exactly* orthogonal channel
//! vectors: antenna pairs placed on a hyperbola whose foci are the two
//! terminals, with focal-distance difference an odd multiple of a quarter
//! wavelength, null the inter-user correlation.

use crate::scenario::RfParams;
use crate::vec3::Vec3;
use crate::AmaError;

/// Optimal single-antenna position for one terminal: directly overhead at
/// the altitude floor (channel power decays with squared distance, and the
/// distance is minimized overhead).
pub fn optimal_single_uav(user: Vec3, min_altitude: f64) -> Vec3 {
    Vec3::new(user.x, user.y, min_altitude)
}

/// Sum of inverse squared distances from a terminal at the origin to two
/// antennas at height `h` with horizontal offsets `x` and `x + d`: the
/// (path-gain-normalized) array gain of the pair.
pub fn two_uav_objective(x: f64, d: f64, h: f64) -> f64 {
    1.0 / (x * x + h * h) + 1.0 / ((x + d) * (x + d) + h * h)
}

/// Which arrangement maximizes the two-antenna array gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoUavBranch {
    /// Terminal centered under the pair (`ζ > √3/2`).
    Symmetric,
    /// Terminal pulled toward one antenna; the mirrored offset is an
    /// equally good optimum (`ζ ≤ √3/2`).
    Asymmetric,
}

/// Closed-form optimum for two antennas at fixed spacing `d` and height `h`
/// serving a terminal at the origin.
#[derive(Debug, Clone)]
pub struct TwoUavSolution {
    /// Optimal offset of the first antenna along the placement axis.
    pub x_star: f64,
    /// The mirrored, equally optimal offset when the branch is asymmetric.
    pub alt: Option<f64>,
    pub branch: TwoUavBranch,
    /// Array gain `two_uav_objective(x_star, d, h)`.
    pub objective: f64,
    /// Antenna spacing the solution was computed for.
    pub d: f64,
    /// Height above the terminal plane.
    pub h: f64,
}

impl TwoUavSolution {
    /// Places the pair in world coordinates: antennas along the `+x` axis
    /// from `user`, at offsets `x_star` and `x_star + d`, at height `h`
    /// above the terminal's plane.
    pub fn positions(&self, user: Vec3) -> [Vec3; 2] {
        [
            Vec3::new(user.x + self.x_star, user.y, user.z + self.h),
            Vec3::new(user.x + self.x_star + self.d, user.y, user.z + self.h),
        ]
    }
}

/// Closed-form two-antenna placement for one terminal (canonical frame:
/// terminal at the origin, antennas on the x-axis at height `h`, spacing
/// exactly `d`).
///
/// With `ζ = H/d` and `κ = ζ² + 1/4`, the gain-maximizing offset is
/// `x★ = −d/2` when `ζ > √3/2` and `x★ = −d/2 ± d·√(√κ − κ)` otherwise.
pub fn optimal_two_uav(d: f64, h: f64) -> TwoUavSolution {
    assert!(d > 0.0 && h > 0.0, "spacing and height must be positive");
    let zeta = h / d;
    let kappa = zeta * zeta + 0.25;
    if zeta > 3f64.sqrt() / 2.0 {
        let x_star = -d / 2.0;
        TwoUavSolution {
            x_star,
            alt: None,
            branch: TwoUavBranch::Symmetric,
            objective: two_uav_objective(x_star, d, h),
            d,
            h,
        }
    } else {
        let off = d * (kappa.sqrt() - kappa).sqrt();
        let x_star = -d / 2.0 + off;
        TwoUavSolution {
            x_star,
            alt: Some(-d / 2.0 - off),
            branch: TwoUavBranch::Asymmetric,
            objective: two_uav_objective(x_star, d, h),
            d,
            h,
        }
    }
}

/// Normalized residual of the first-order optimality condition for the
/// two-antenna placement, in the centered coordinate `y = x + d/2`:
/// stationary points satisfy `y·(y⁴ + 2d²κy² + d⁴κ(κ−1)) = 0`. The residual
/// is scaled by the sum of the term magnitudes, so an exact root reports a
/// value at rounding-noise level regardless of units.
pub fn optimality_residual(x: f64, d: f64, h: f64) -> f64 {
    let zeta = h / d;
    let kappa = zeta * zeta + 0.25;
    let y = x + d / 2.0;
    let y2 = y * y;
    let t1 = y2 * y2;
    let t2 = 2.0 * d * d * kappa * y2;
    let t3 = d.powi(4) * kappa * (kappa - 1.0);
    let raw = (y * (t1 + t2 + t3)).abs();
    let scale = y.abs() * (t1 + t2 + t3.abs()) + f64::MIN_POSITIVE;
    raw / scale
}

/// Semi-axis of the correlation-nulling hyperbola for phase order `nu`:
/// the focal-distance difference is `2a = (2ν+1)·λ/4`, an odd quarter-wave
/// multiple, which turns the pair's correlation terms into exact opposites.
fn hyperbola_semi_axis(rf: &RfParams, nu: u32) -> f64 {
    (2.0 * f64::from(nu) + 1.0) * rf.wavelength / 8.0
}

/// Horizontal footpoint `x(z)` of the hyperbola with semi-axis `a` and
/// focal half-separation `x_focus`, at height `z` above the focal plane.
fn hyperbola_x(a: f64, x_focus: f64, z: f64) -> f64 {
    a * (z * z / (x_focus * x_focus - a * a) + 1.0).sqrt()
}

/// Smallest phase order `ν ≥ 0` whose correlation-nulling pair at the
/// altitude floor satisfies the spacing constraint `2·x(ν) ≥ d_min`.
///
/// The pair half-offset `x(ν)` grows monotonically with `ν` and diverges as
/// the semi-axis approaches the focal half-separation, so large spacings can
/// remain feasible even when `d_min` exceeds the terminal separation; the
/// search only fails when the last admissible order still leaves the pair
/// too close.
pub fn min_feasible_nu(
    rf: &RfParams,
    ue_separation: f64,
    d_min: f64,
    min_altitude: f64,
) -> Result<u32, AmaError> {
    assert!(ue_separation > 0.0, "terminals must be separated");
    let x_focus = ue_separation / 2.0;
    let mut nu: u32 = 0;
    loop {
        let a = hyperbola_semi_axis(rf, nu);
        if a >= x_focus {
            return Err(AmaError::NoFeasibleNu { d_min, x: x_focus });
        }
        if 2.0 * hyperbola_x(a, x_focus, min_altitude) >= d_min {
            return Ok(nu);
        }
        nu += 1;
    }
}

/// Positions of one correlation-nulling antenna pair for terminals `ue1`
/// and `ue2` (both in the ground plane), at height `z` and phase order
/// `nu`: the two antennas sit on opposite branches of the hyperbola with
/// foci at the terminals, so their correlation contributions cancel.
pub fn hyperbola_pair(
    rf: &RfParams,
    ue1: Vec3,
    ue2: Vec3,
    z: f64,
    nu: u32,
) -> Result<[Vec3; 2], AmaError> {
    let sep = ue1.distance(ue2);
    if sep <= 0.0 {
        return Err(AmaError::InvalidScenario(
            "correlation nulling requires two distinct terminals".into(),
        ));
    }
    let x_focus = sep / 2.0;
    let a = hyperbola_semi_axis(rf, nu);
    if a >= x_focus {
        return Err(AmaError::NoFeasibleNu { d_min: 0.0, x: x_focus });
    }
    let x = hyperbola_x(a, x_focus, z);
    let mid = Vec3::new(0.5 * (ue1.x + ue2.x), 0.5 * (ue1.y + ue2.y), 0.0);
    let axis = (ue2 - ue1).scale(1.0 / sep);
    let up = Vec3::new(0.0, 0.0, z);
    Ok([mid + axis.scale(x) + up, mid + axis.scale(-x) + up])
}

/// Stacks `num_pairs` correlation-nulling pairs for two terminals, lifting
/// each successive pair just high enough to respect the spacing constraint
/// against every antenna already placed.
///
/// All pairs share the same phase order (the smallest feasible one at the
/// altitude floor), so every pair's correlation contribution cancels
/// independently and the full channel vectors stay exactly orthogonal. The
/// lift for each pair is found by bisection: the clearance to the existing
/// antennas grows monotonically with height, and a lift of `d_min` already
/// guarantees clearance vertically, so the bracket `[z_prev, z_prev+2·d_min]`
/// always contains the threshold.
pub fn successive_hyperbola_placement(
    rf: &RfParams,
    ue1: Vec3,
    ue2: Vec3,
    min_altitude: f64,
    d_min: f64,
    num_pairs: usize,
) -> Result<Vec<Vec3>, AmaError> {
    assert!(num_pairs >= 1, "at least one pair required");
    let sep = ue1.distance(ue2);
    if sep <= 0.0 {
        return Err(AmaError::InvalidScenario(
            "correlation nulling requires two distinct terminals".into(),
        ));
    }
    let nu = min_feasible_nu(rf, sep, d_min, min_altitude)?;
    let mut placed: Vec<Vec3> = Vec::with_capacity(2 * num_pairs);
    placed.extend(hyperbola_pair(rf, ue1, ue2, min_altitude, nu)?);

    let mut z_prev = min_altitude;
    for _ in 1..num_pairs {
        let clearance_ok = |z: f64| -> Result<bool, AmaError> {
            let pair = hyperbola_pair(rf, ue1, ue2, z, nu)?;
            Ok(pair
                .iter()
                .all(|p| placed.iter().all(|&q| p.distance(q) >= d_min)))
        };
        let mut lo = z_prev;
        let mut hi = z_prev + 2.0 * d_min;
        debug_assert!(clearance_ok(hi)?);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if clearance_ok(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // `hi` is on the feasible side of the bracket by construction.
        placed.extend(hyperbola_pair(rf, ue1, ue2, hi, nu)?);
        z_prev = hi;
    }
    Ok(placed)
}

/// Evenly spaced ring at the altitude floor with adjacent antennas exactly
/// `d_min` apart: radius `d_min / (2·sin(π/L))`, centered above `center`.
/// A single antenna sits at the center. Used as a geometry-only baseline.
pub fn circular_placement(
    num_uavs: usize,
    d_min: f64,
    center: Vec3,
    min_altitude: f64,
) -> Vec<Vec3> {
    assert!(num_uavs >= 1);
    if num_uavs == 1 {
        return vec![Vec3::new(center.x, center.y, min_altitude)];
    }
    let radius = d_min / (2.0 * (std::f64::consts::PI / num_uavs as f64).sin());
    (0..num_uavs)
        .map(|l| {
            let theta = 2.0 * std::f64::consts::PI * l as f64 / num_uavs as f64;
            Vec3::new(
                center.x + radius * theta.cos(),
                center.y + radius * theta.sin(),
                min_altitude,
            )
        })
        .collect()
}

/// The `num_uavs` sites of a triangular lattice with spacing `d_min`
/// closest to `center`, at the altitude floor: the densest packing that
/// respects the spacing constraint, used to initialize cluster placements.
/// Site order (and hence the selected set) is deterministic: sorted by
/// distance from the center with coordinate tie-breaking. For seven
/// antennas this is exactly a center point with its six unit-ring
/// neighbors.
pub fn hex_lattice_placement(
    num_uavs: usize,
    d_min: f64,
    center: Vec3,
    min_altitude: f64,
) -> Vec<Vec3> {
    assert!(num_uavs >= 1);
    let r = (num_uavs as f64).sqrt().ceil() as i64 + 2;
    let mut pts: Vec<Vec3> = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for i in -r..=r {
        for j in -r..=r {
            pts.push(Vec3::new(
                center.x + d_min * (i as f64 + 0.5 * j as f64),
                center.y + d_min * (3f64.sqrt() / 2.0) * j as f64,
                min_altitude,
            ));
        }
    }
    pts.sort_by(|a, b| {
        let da = (a.x - center.x).powi(2) + (a.y - center.y).powi(2);
        let db = (b.x - center.x).powi(2) + (b.y - center.y).powi(2);
        da.total_cmp(&db).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y))
    });
    pts.truncate(num_uavs);
    pts
}

/// Benchmark trajectory: the [`circular_placement`] ring rotating one full
/// revolution over the mission, so every antenna traverses the whole circle.
/// Antenna separation stays exactly `d_min` throughout. Fails when the
/// per-slot chord exceeds the speed limit.
pub fn circular_trajectory(
    num_uavs: usize,
    num_slots: usize,
    d_min: f64,
    center: Vec3,
    min_altitude: f64,
    vmax_step: f64,
) -> Result<crate::scenario::SwarmTrajectory, AmaError> {
    assert!(num_uavs >= 1 && num_slots >= 1);
    let ring = circular_placement(num_uavs, d_min, center, min_altitude);
    if num_slots == 1 || num_uavs == 1 {
        return Ok(crate::scenario::SwarmTrajectory::from_fn(num_uavs, num_slots, |l, _| ring[l]));
    }
    let radius = d_min / (2.0 * (std::f64::consts::PI / num_uavs as f64).sin());
    let step_angle = 2.0 * std::f64::consts::PI / (num_slots - 1) as f64;
    let chord = 2.0 * radius * (step_angle / 2.0).sin();
    if chord > vmax_step {
        return Err(AmaError::SpeedViolation { step: chord, limit: vmax_step });
    }
    Ok(crate::scenario::SwarmTrajectory::from_fn(num_uavs, num_slots, |l, n| {
        let theta = 2.0 * std::f64::consts::PI * l as f64 / num_uavs as f64
            + step_angle * n as f64;
        Vec3::new(
            center.x + radius * theta.cos(),
            center.y + radius * theta.sin(),
            min_altitude,
        )
    }))
}
