//! Signed distances, soft wedge indicators, and boundary strength.
//!
//! Around a junction, wedge membership is fundamentally a "which angular
//! sector" question, but a sector test is not differentiable.  The relaxation
//! used everywhere outside initialization goes through *signed line
//! distances*: each boundary ray contributes the signed distance to its
//! carrier line, pairs of rays compose into a signed distance whose sign
//! carves out one sector, and a smoothed step of width `eta` turns the sign
//! into a soft indicator.  The indicators of all M wedges sum to exactly 1 by
//! construction — the products telescope — no matter how the parameters move.
//!
//! The same distances feed the per-patch boundary map: a Lorentzian bump of
//! width `delta` centered on the wedge boundaries, equal to 1 exactly on a
//! boundary and decaying like `delta² / dist²` away from it.

use std::f64::consts::{PI, TAU};

use crate::dual::Real;
use crate::junction::JunctionParams;

/// Signed distance from `point` to the line through `vertex` at `angle`.
///
/// Positive on the counterclockwise side of the ray `(cos angle, sin angle)`.
#[inline]
pub fn line_distance(point: [f64; 2], vertex: [f64; 2], angle: f64) -> f64 {
    line_distance_g(
        point[0], point[1], vertex[0], vertex[1], angle,
    )
}

#[inline]
pub(crate) fn line_distance_g<S: Real>(px: S, py: S, vx: S, vy: S, angle: S) -> S {
    -(px - vx) * angle.sin() + (py - vy) * angle.cos()
}

/// Composed signed distances `d(1,l)` for `l = 2..=M`, in that order.
///
/// `angles` must be canonical (sorted, wrapped); [`JunctionParams`] guarantees
/// that.  The sign of the `l`-th entry separates the counterclockwise sector
/// from `angles[0]` to `angles[l]` from the rest of the plane.
pub fn junction_distances(point: [f64; 2], params: &JunctionParams) -> Vec<f64> {
    let (d, m) = junction_distances_g(
        point[0],
        point[1],
        params.vertex[0],
        params.vertex[1],
        &params.angles,
    );
    d[..m - 1].to_vec()
}

/// Generic core of [`junction_distances`]: returns up to three composed
/// distances in a fixed array plus the junction order.
///
/// The min/max composition follows the sector width: for a counterclockwise
/// span below π the sector is the intersection of two half-planes (min), at
/// or above π it is their union (max).  The branch is chosen from the angle
/// *values*, so differentiation treats it as locally constant, which is the
/// subgradient convention shared with the scalar objective.
#[inline]
pub(crate) fn junction_distances_g<S: Real>(
    px: S,
    py: S,
    vx: S,
    vy: S,
    angles: &[S],
) -> ([S; 3], usize) {
    let m = angles.len();
    debug_assert!(m == 3 || m == 4, "junction order must be 3 or 4");
    let d1 = line_distance_g(px, py, vx, vy, angles[0]);
    let mut out = [S::constant(0.0); 3];
    for l in 1..m {
        let dl = line_distance_g(px, py, vx, vy, angles[l]);
        let span = angles[l].value() - angles[0].value();
        out[l - 1] = if span < PI {
            d1.min2(-dl)
        } else {
            d1.max2(-dl)
        };
    }
    (out, m)
}

/// Smoothed unit step of half-width `eta`: 0 far below, 1 far above, ½ at 0.
#[inline]
pub(crate) fn relaxed_step<S: Real>(d: S, eta: f64) -> S {
    S::constant(0.5) + (d * S::constant(1.0 / eta)).atan() * S::constant(1.0 / PI)
}

/// Soft wedge indicators at `point`; entry `j` tends to 1 inside the sector
/// from `angles[j]` (counterclockwise) to the next angle as `eta → 0`.
///
/// The indicators always sum to exactly 1.
pub fn wedge_indicators(point: [f64; 2], params: &JunctionParams, eta: f64) -> Vec<f64> {
    let angles = &params.angles;
    let (u, m) = wedge_indicators_g(
        point[0],
        point[1],
        params.vertex[0],
        params.vertex[1],
        angles,
        eta,
    );
    u[..m].to_vec()
}

/// Generic core of [`wedge_indicators`].
#[inline]
pub(crate) fn wedge_indicators_g<S: Real>(
    px: S,
    py: S,
    vx: S,
    vy: S,
    angles: &[S],
    eta: f64,
) -> ([S; 4], usize) {
    let (d, m) = junction_distances_g(px, py, vx, vy, angles);
    let one = S::constant(1.0);
    let mut h = [one; 3];
    for a in 0..m - 1 {
        h[a] = relaxed_step(d[a], eta);
    }
    // Telescoping products: u_0 = h_0·…·h_{M-2}, u_j = (1 − h_{j-1})·h_j·…,
    // u_{M-1} = 1 − h_{M-2}.  Their sum collapses to 1 identically.
    let mut u = [S::constant(0.0); 4];
    for j in 0..m {
        let mut acc = if j == 0 { one } else { one - h[j - 1] };
        for hl in h.iter().take(m - 1).skip(j) {
            acc = acc * *hl;
        }
        u[j] = acc;
    }
    (u, m)
}

/// Boundary strength at `point`: 1 exactly on a wedge boundary, decaying as a
/// Lorentzian of width `delta` with distance to the nearest boundary.
///
/// Values lie in `(0, 1]`.
pub fn boundary_strength(point: [f64; 2], params: &JunctionParams, delta: f64) -> f64 {
    boundary_strength_g(
        point[0],
        point[1],
        params.vertex[0],
        params.vertex[1],
        &params.angles,
        delta,
    )
}

/// Generic core of [`boundary_strength`].
#[inline]
pub(crate) fn boundary_strength_g<S: Real>(
    px: S,
    py: S,
    vx: S,
    vy: S,
    angles: &[S],
    delta: f64,
) -> S {
    let (d, m) = junction_distances_g(px, py, vx, vy, angles);
    let mut nearest = d[0].abs();
    for dl in d.iter().take(m - 1).skip(1) {
        nearest = nearest.min2(dl.abs());
    }
    let d2 = S::constant(delta * delta);
    d2 / (d2 + nearest * nearest)
}

/// Polar angle of `(dx, dy)` in `[0, 2π)`; 0 for the zero vector.
#[inline]
pub(crate) fn polar_angle(dx: f64, dy: f64) -> f64 {
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    let t = dy.atan2(dx);
    if t < 0.0 {
        t + TAU
    } else {
        t
    }
}

/// Index of the wedge containing `point` under exact (hard) sector geometry.
///
/// Wedge `j` is the half-open counterclockwise sector `[angles[j],
/// angles[j+1])`, the last wedge wrapping back to `angles[0]`.  A point
/// exactly at the vertex belongs to wedge 0.  Zero-width wedges (coincident
/// angles) contain no points.
pub fn hard_wedge_index(point: [f64; 2], params: &JunctionParams) -> usize {
    let dx = point[0] - params.vertex[0];
    let dy = point[1] - params.vertex[1];
    if dx == 0.0 && dy == 0.0 {
        return 0;
    }
    let theta = polar_angle(dx, dy);
    sector_of(theta, &params.angles)
}

/// Maps a polar angle to its wedge index given canonical angles.
#[inline]
pub(crate) fn sector_of(theta: f64, angles: &[f64]) -> usize {
    // Number of angles <= theta; theta below the first angle wraps to the
    // last wedge.  With coincident angles the last of the run wins, so the
    // zero-width wedges in between stay empty.
    let k = angles.partition_point(|&a| a <= theta);
    if k == 0 {
        angles.len() - 1
    } else {
        k - 1
    }
}
