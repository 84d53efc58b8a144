//! Coordinate-descent initialization of per-patch junctions.
//!
//! Gradient refinement only polishes; it cannot jump between the many local
//! minima of the junction objective.  Initialization therefore searches
//! globally but coarsely: with the vertex fixed, one pass of coordinate
//! descent picks each angle in turn from a uniform grid of candidates (made
//! cheap by [`AngularHistogram`]); with the angles fixed, the vertex sweeps a
//! uniform grid of positions along each axis.  Rounds of angle pass → x
//! sweep → y sweep repeat until a round changes nothing.
//!
//! Every candidate set includes the incumbent, and a candidate replaces it
//! only on strict improvement, so the attained partition cost never
//! increases.  Ties keep deterministic winners: the smallest candidate angle
//! and the vertex position nearest the incumbent.

use crate::config::Config;
use crate::grid::PatchRect;
use crate::image::Image;
use crate::junction::JunctionParams;
use crate::likelihood::{partition_cost, AngularHistogram, FitData};

/// Largest junction order the fixed-size working buffers accommodate.
const MAX_ORDER: usize = 4;

/// How far the vertex may wander from the patch center, in patch widths.
pub(crate) const VERTEX_RANGE: f64 = 1.5;

/// One pass of coordinate descent over the angle bins: each slot in turn
/// scans every bin boundary and keeps the cheapest winner.  Ties go first
/// to a bin another slot already holds — a zero-width wedge spends no ray,
/// so a slot the data cannot place collapses onto an incumbent instead of
/// inventing structure — and otherwise to the smallest index.  Returns
/// whether any slot changed.
fn angle_pass(hist: &AngularHistogram, idx: &mut [usize]) -> bool {
    let m = idx.len();
    let mut sorted = [0usize; MAX_ORDER];
    let mut changed = false;
    for j in 0..m {
        let original = idx[j];
        let mut best_k = 0;
        let mut best_cost = f64::INFINITY;
        for k in 0..hist.bins() {
            idx[j] = k;
            sorted[..m].copy_from_slice(idx);
            sorted[..m].sort_unstable();
            let cost = hist.cost(&sorted[..m]);
            if cost < best_cost {
                best_cost = cost;
                best_k = k;
            }
        }
        let mut others = [0usize; MAX_ORDER];
        let mut n_others = 0;
        for o in 0..m {
            if o != j && !others[..n_others].contains(&idx[o]) {
                others[n_others] = idx[o];
                n_others += 1;
            }
        }
        others[..n_others].sort_unstable();
        let tol = 1e-9 * (1.0 + best_cost.abs());
        if !others[..n_others].contains(&best_k) {
            for &k in &others[..n_others] {
                idx[j] = k;
                sorted[..m].copy_from_slice(idx);
                sorted[..m].sort_unstable();
                if hist.cost(&sorted[..m]) <= best_cost + tol {
                    best_k = k;
                    break;
                }
            }
        }
        if best_k != original {
            changed = true;
        }
        idx[j] = best_k;
    }
    changed
}

/// Uniformly spaced sweep positions for one vertex coordinate, spanning
/// `center ± VERTEX_RANGE·patch_size` inclusive.
fn sweep_positions(center: f64, patch_size: usize, samples: usize) -> Vec<f64> {
    let half = VERTEX_RANGE * patch_size as f64;
    if samples <= 1 {
        return vec![center];
    }
    let step = 2.0 * half / (samples - 1) as f64;
    (0..samples).map(|i| center - half + i as f64 * step).collect()
}

/// Sweeps one vertex coordinate over `positions` plus the incumbent, keeping
/// the strict lexicographic best of (cost, distance to incumbent, value).
/// Returns the attained cost.
fn sweep_axis(
    fit: &FitData,
    vertex: &mut [f64; 2],
    axis: usize,
    angles: &[f64],
    positions: &[f64],
) -> f64 {
    let incumbent = vertex[axis];
    let mut best_val = incumbent;
    let mut best_cost = partition_cost(fit, *vertex, angles);
    let mut best_dist = 0.0;
    for &cand in positions {
        let mut v = *vertex;
        v[axis] = cand;
        let cost = partition_cost(fit, v, angles);
        let dist = (cand - incumbent).abs();
        let better = cost < best_cost
            || (cost == best_cost
                && (dist < best_dist || (dist == best_dist && cand < best_val)));
        if better {
            best_cost = cost;
            best_dist = dist;
            best_val = cand;
        }
    }
    vertex[axis] = best_val;
    best_cost
}

/// Step-by-step record of one initialization, for descent checks.
pub(crate) struct InitTrace {
    /// Attained cost after every angle pass and vertex sweep, in order.
    pub costs: Vec<f64>,
    /// Rounds executed before the early exit (or the round cap).
    pub rounds: usize,
}

/// Core of the initializer, shared by the public entry points: runs on
/// prepared pixel statistics and reports the final parameters and cost.
pub(crate) fn init_on_fit(
    fit: &FitData,
    rect: PatchRect,
    order: usize,
    cfg: &Config,
    mut trace: Option<&mut InitTrace>,
) -> (JunctionParams, f64) {
    assert!(
        (1..=MAX_ORDER).contains(&order),
        "junction order must be in 1..={MAX_ORDER}"
    );
    let (cx, cy) = rect.center();
    let center = [cx as f64, cy as f64];
    let xs = sweep_positions(center[0], rect.size, cfg.vertex_samples);
    let ys = sweep_positions(center[1], rect.size, cfg.vertex_samples);
    // Joint seed: one angle pass at the patch center and at every vertex of
    // a sparse subgrid of the sweep positions, keeping the cheapest start
    // (ties prefer the vertex nearest the center, then scan order).  Angles
    // and vertex are coupled — a scan at a poor vertex yields rays that no
    // later vertex sweep can recover from — so the seed search must vary
    // both together.
    let mut vertex = center;
    let mut idx = vec![0usize; order];
    let mut seed_cost = f64::INFINITY;
    let mut seed_dist = 0.0;
    let step = xs.len().div_ceil(8).max(1);
    let candidates = std::iter::once(center).chain(
        ys.iter()
            .step_by(step)
            .flat_map(|&vy| xs.iter().step_by(step).map(move |&vx| [vx, vy])),
    );
    for cand_vertex in candidates {
        let h = AngularHistogram::from_fit(fit, cand_vertex, cfg.angle_samples);
        let mut cand_idx = vec![0usize; order];
        angle_pass(&h, &mut cand_idx);
        cand_idx.sort_unstable();
        let cost = h.cost(&cand_idx);
        let dist = (cand_vertex[0] - center[0]).hypot(cand_vertex[1] - center[1]);
        if cost < seed_cost || (cost == seed_cost && dist < seed_dist) {
            seed_cost = cost;
            seed_dist = dist;
            vertex = cand_vertex;
            idx = cand_idx;
        }
    }
    let mut hist = AngularHistogram::from_fit(fit, vertex, cfg.angle_samples);
    let mut cost = f64::INFINITY;
    let mut rounds = 0;
    for _ in 0..cfg.n_init {
        rounds += 1;
        let mut changed = angle_pass(&hist, &mut idx);
        let angles: Vec<f64> = {
            let mut a: Vec<usize> = idx.clone();
            a.sort_unstable();
            a.into_iter().map(|k| hist.bin_angle(k)).collect()
        };
        if let Some(t) = trace.as_deref_mut() {
            t.costs.push(partition_cost(fit, vertex, &angles));
        }
        let before = vertex;
        let cx_cost = sweep_axis(fit, &mut vertex, 0, &angles, &xs);
        if let Some(t) = trace.as_deref_mut() {
            t.costs.push(cx_cost);
        }
        cost = sweep_axis(fit, &mut vertex, 1, &angles, &ys);
        if let Some(t) = trace.as_deref_mut() {
            t.costs.push(cost);
        }
        if vertex != before {
            changed = true;
            hist = AngularHistogram::from_fit(fit, vertex, cfg.angle_samples);
        }
        if !changed {
            break;
        }
    }
    if let Some(t) = trace {
        t.rounds = rounds;
    }
    let angles: Vec<f64> = {
        let mut a = idx;
        a.sort_unstable();
        a.into_iter().map(|k| hist.bin_angle(k)).collect()
    };
    if cost.is_infinite() {
        cost = partition_cost(fit, vertex, &angles);
    }
    (JunctionParams::new(angles, vertex), cost)
}

/// Best junction angles for a fixed vertex: one pass of coordinate descent
/// over the `n_ang` uniform candidate angles, starting from all zeros.
///
/// Returns the sorted angles and the attained partition cost at best
/// constant colors.
pub fn best_angles(
    image: &Image,
    rect: PatchRect,
    vertex: [f64; 2],
    order: usize,
    n_ang: usize,
) -> (Vec<f64>, f64) {
    assert!(
        (1..=MAX_ORDER).contains(&order),
        "junction order must be in 1..={MAX_ORDER}"
    );
    let fit = FitData::build(image, rect, None);
    let hist = AngularHistogram::from_fit(&fit, vertex, n_ang);
    let mut idx = vec![0usize; order];
    angle_pass(&hist, &mut idx);
    idx.sort_unstable();
    let cost = hist.cost(&idx);
    let angles: Vec<f64> = idx.into_iter().map(|k| hist.bin_angle(k)).collect();
    (angles, cost)
}

/// Initializes one patch: alternating angle passes and vertex sweeps from a
/// cold start at the patch center, stopping early once a round changes
/// nothing.
///
/// The result is canonical (angles sorted in `[0, 2π)`) and its vertex lies
/// within `VERTEX_RANGE·patch_size` of the patch center.
pub fn initialize_patch(image: &Image, rect: PatchRect, cfg: &Config) -> JunctionParams {
    let fit = FitData::build(image, rect, None);
    init_on_fit(&fit, rect, cfg.order, cfg, None).0
}

/// One warm re-initialization round from the current parameters: an angle
/// pass whose candidates are the uniform grid plus every incumbent angle,
/// then the two vertex sweeps.
///
/// Every comparison includes the incumbent, so the returned cost never
/// exceeds the current one beyond tie-breaking tolerance.  Ties prefer
/// joining another incumbent angle, collapsing rays the data cannot place.
/// Used to propose restarts between gradient steps; the caller decides
/// acceptance.
pub(crate) fn warm_round(
    fit: &FitData,
    rect: PatchRect,
    cfg: &Config,
    params: &JunctionParams,
) -> (JunctionParams, f64) {
    let m = params.order();
    let mut angles: Vec<f64> = params.angles.clone();
    let vertex_now = params.vertex;
    let mut vertex = params.vertex;
    let width = std::f64::consts::TAU / cfg.angle_samples as f64;
    for j in 0..m {
        let eval = |val: f64, angles: &[f64]| -> f64 {
            let mut s = [0.0f64; MAX_ORDER];
            s[..m].copy_from_slice(angles);
            s[j] = val;
            s[..m].sort_by(|a, b| a.partial_cmp(b).unwrap());
            partition_cost(fit, vertex_now, &s[..m])
        };
        let mut best_val = angles[j];
        let mut best_cost = eval(best_val, &angles);
        for k in 0..cfg.angle_samples {
            let cand = k as f64 * width;
            let cost = eval(cand, &angles);
            if cost < best_cost {
                best_cost = cost;
                best_val = cand;
            }
        }
        let mut joins: Vec<f64> = (0..m).filter(|&o| o != j).map(|o| angles[o]).collect();
        joins.sort_by(|a, b| a.partial_cmp(b).unwrap());
        joins.dedup();
        let tol = 1e-9 * (1.0 + best_cost.abs());
        if !joins.contains(&best_val) {
            for &cand in &joins {
                if eval(cand, &angles) <= best_cost + tol {
                    best_val = cand;
                    break;
                }
            }
        }
        angles[j] = best_val;
    }
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (cx, cy) = rect.center();
    let xs = sweep_positions(cx as f64, rect.size, cfg.vertex_samples);
    let ys = sweep_positions(cy as f64, rect.size, cfg.vertex_samples);
    sweep_axis(fit, &mut vertex, 0, &angles, &xs);
    let cost = sweep_axis(fit, &mut vertex, 1, &angles, &ys);
    (JunctionParams::new(angles, vertex), cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hard_wedge_index;
    use proptest::prelude::*;

    fn rect(size: usize) -> PatchRect {
        PatchRect {
            x0: 0,
            y0: 0,
            size,
        }
    }

    fn small_config(n_ang: usize, n_vtx: usize) -> Config {
        Config {
            angle_samples: n_ang,
            vertex_samples: n_vtx,
            n_init: 30,
            ..Config::default()
        }
    }

    #[test]
    fn uniform_patch_stays_at_center_with_zero_angles() {
        let img = Image::from_fn(9, 9, 1, |_, _, _| 0.5);
        let fit = FitData::build(&img, rect(9), None);
        let mut trace = InitTrace {
            costs: Vec::new(),
            rounds: 0,
        };
        let cfg = small_config(16, 19);
        let (params, cost) = init_on_fit(&fit, rect(9), 3, &cfg, Some(&mut trace));
        assert_eq!(params.angles, vec![0.0, 0.0, 0.0]);
        assert_eq!(params.vertex, [4.0, 4.0]);
        assert!(cost.abs() < 1e-12);
        assert_eq!(trace.rounds, 1, "nothing changes, so round one exits");
    }

    #[test]
    fn vertical_edge_is_recovered_exactly() {
        // Dark left half, bright right half, boundary between columns 3
        // and 4.  A perfect fit puts the vertex on the boundary line with
        // two opposite vertical rays.
        let img = Image::from_fn(9, 9, 1, |x, _, _| if x < 4 { 0.1 } else { 0.9 });
        let cfg = small_config(8, 28);
        let params = initialize_patch(&img, rect(9), &cfg);
        let fit = FitData::build(&img, rect(9), None);
        let cost = partition_cost(&fit, params.vertex, &params.angles);
        assert!(cost < 1e-9, "edge should fit exactly, cost {cost}");
        // The fitted wedges must reproduce the two sides: pixels in the
        // same column stripe share a wedge, across the edge they differ.
        let left = hard_wedge_index([0.0, 4.0], &params);
        let right = hard_wedge_index([8.0, 4.0], &params);
        assert_ne!(left, right);
    }

    #[test]
    fn cost_trace_never_increases() {
        let img = Image::from_fn(11, 11, 1, |x, y, _| {
            (((x * 37 + y * 61) % 19) as f64) / 19.0
        });
        let fit = FitData::build(&img, rect(11), None);
        let mut trace = InitTrace {
            costs: Vec::new(),
            rounds: 0,
        };
        let cfg = small_config(24, 15);
        init_on_fit(&fit, rect(11), 3, &cfg, Some(&mut trace));
        for pair in trace.costs.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "cost increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn rendered_junction_is_recovered_on_grid() {
        // Three wedges with well-separated on-grid angles around the patch
        // center, rendered with distinct shades.
        let n_ang = 24;
        let width = std::f64::consts::TAU / n_ang as f64;
        let truth = JunctionParams::new(
            vec![2.0 * width, 9.0 * width, 17.0 * width],
            [8.0, 8.0],
        );
        let shades = [0.15, 0.5, 0.85];
        let img = Image::from_fn(17, 17, 1, |x, y, _| {
            shades[hard_wedge_index([x as f64, y as f64], &truth)]
        });
        let cfg = small_config(n_ang, 35);
        let params = initialize_patch(&img, rect(17), &cfg);
        let fit = FitData::build(&img, rect(17), None);
        let cost = partition_cost(&fit, params.vertex, &params.angles);
        assert!(cost < 1e-9, "true junction is attainable, cost {cost}");
        // The recovered partition must classify every pixel like the truth
        // (up to wedge relabeling): check pairwise same-wedge structure.
        for &p in &[[1.0, 1.0], [15.0, 2.0], [2.0, 15.0], [15.0, 15.0], [8.0, 1.0]] {
            for &q in &[[1.0, 8.0], [15.0, 8.0], [8.0, 15.0]] {
                let same_truth =
                    hard_wedge_index(p, &truth) == hard_wedge_index(q, &truth);
                let same_got =
                    hard_wedge_index(p, &params) == hard_wedge_index(q, &params);
                assert_eq!(same_truth, same_got, "pixels {p:?} vs {q:?}");
            }
        }
    }

    #[test]
    fn warm_round_never_increases_cost() {
        let img = Image::from_fn(11, 11, 1, |x, y, _| {
            if (x as i32 - 5).pow(2) + (y as i32 - 5).pow(2) < 12 {
                0.8
            } else {
                0.2
            }
        });
        let fit = FitData::build(&img, rect(11), None);
        let cfg = small_config(16, 11);
        // Start from deliberately bad off-grid parameters.
        let start = JunctionParams::new(vec![0.3, 0.31, 0.32], [2.2, 8.7]);
        let before = partition_cost(&fit, start.vertex, &start.angles);
        let (after_params, after) = warm_round(&fit, rect(11), &cfg, &start);
        assert!(after <= before + 1e-12);
        let check = partition_cost(&fit, after_params.vertex, &after_params.angles);
        assert!((check - after).abs() < 1e-9);
    }

    #[test]
    fn initialization_is_deterministic() {
        let img = Image::from_fn(13, 13, 1, |x, y, _| {
            (((x * 7 + y * 11) % 13) as f64) / 13.0
        });
        let cfg = small_config(24, 21);
        let a = initialize_patch(&img, rect(13), &cfg);
        let b = initialize_patch(&img, rect(13), &cfg);
        assert_eq!(a.angles, b.angles);
        assert_eq!(a.vertex, b.vertex);
    }

    #[test]
    fn best_angles_splits_a_quadrant_patch() {
        // Four quadrants around the center with the same value along each
        // diagonal pair cannot be fit by 3 wedges exactly, but a dark/bright
        // half split is found with cost equal to the best axis split.
        let img = Image::from_fn(9, 9, 1, |x, _, _| if x < 4 { 0.0 } else { 1.0 });
        let (angles, cost) = best_angles(&img, rect(9), [3.5, 4.0], 3, 8);
        assert!(cost < 1e-9);
        assert!(angles.windows(2).all(|p| p[0] <= p[1]));
    }

    proptest! {
        /// The initializer always returns canonical parameters with the
        /// vertex inside the allowed box, whatever the patch looks like.
        #[test]
        fn initializer_output_is_canonical_and_bounded(seed in 0u64..40) {
            let img = Image::from_fn(9, 9, 1, |x, y, _| {
                (((x as u64 + 2) * (y as u64 + 5) * (seed + 1)) % 29) as f64 / 29.0
            });
            let cfg = small_config(12, 9);
            let params = initialize_patch(&img, rect(9), &cfg);
            prop_assert!(params.is_canonical());
            let half = VERTEX_RANGE * 9.0;
            prop_assert!((params.vertex[0] - 4.0).abs() <= half + 1e-12);
            prop_assert!((params.vertex[1] - 4.0).abs() <= half + 1e-12);
        }
    }
}
