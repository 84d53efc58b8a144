//! Distance-tolerant detection metrics: boundary and vertex F-scores,
//! angle error, and PSNR.
//!
//! Boundary maps and vertex lists are both scored the same way: a greedy
//! one-to-one matching pairs predicted points with ground-truth points at
//! ascending Euclidean distance (up to a tolerance), and precision, recall,
//! and their harmonic mean are computed from the match count.  The pair
//! ordering breaks ties by the coordinates of the pair's endpoints, not by
//! which side they came from, so swapping prediction and truth exactly
//! swaps precision with recall.  Because a larger tolerance only appends
//! pairs to the greedy queue, every score is monotone non-decreasing in
//! the matching distance.

use crate::eval::dataset::GroundTruth;
use crate::image::{Image, ScalarField};

/// Precision, recall, and their harmonic mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionRecall {
    /// Fraction of predictions that matched a ground-truth point.
    pub precision: f64,
    /// Fraction of ground-truth points that were matched.
    pub recall: f64,
    /// Harmonic mean `2PR/(P+R)`, or 0 when `P + R = 0`.
    pub f: f64,
}

fn score(matches: usize, n_pred: usize, n_gt: usize) -> PrecisionRecall {
    let precision = if n_pred == 0 {
        1.0
    } else {
        matches as f64 / n_pred as f64
    };
    let recall = if n_gt == 0 {
        1.0
    } else {
        matches as f64 / n_gt as f64
    };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    PrecisionRecall {
        precision,
        recall,
        f,
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Greedy one-to-one matching of two point sets: candidate pairs within
/// `max_dist` are taken at ascending distance, each point matching at most
/// once.  Returns `(pred index, gt index)` pairs.
///
/// Ties in distance order by the endpoint coordinates of the pair, treated
/// as an unordered set, so the matching is invariant under swapping the
/// two sides.
pub fn match_points(pred: &[[f64; 2]], gt: &[[f64; 2]], max_dist: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let d = dist(*p, *g);
            if d <= max_dist {
                let (lo, hi) = if (p[1], p[0]) <= (g[1], g[0]) {
                    (*p, *g)
                } else {
                    (*g, *p)
                };
                pairs.push((d, [lo[1], lo[0], hi[1], hi[0]], i, j));
            }
        }
    }
    pairs.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).expect("finite"));
    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut out = Vec::new();
    for (_, _, i, j) in pairs {
        if !pred_used[i] && !gt_used[j] {
            pred_used[i] = true;
            gt_used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Scores two point sets under greedy one-to-one matching; see
/// [`match_points`].
pub fn point_set_fscore(pred: &[[f64; 2]], gt: &[[f64; 2]], max_dist: f64) -> PrecisionRecall {
    let matches = match_points(pred, gt, max_dist).len();
    score(matches, pred.len(), gt.len())
}

/// Pixels of a scalar map at or above `threshold`, as points.
fn threshold_points(map: &ScalarField, threshold: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            if map.get(x, y) >= threshold {
                out.push([x as f64, y as f64]);
            }
        }
    }
    out
}

fn mask_points(mask: &[bool], width: usize) -> Vec<[f64; 2]> {
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| [(i % width) as f64, (i / width) as f64])
        .collect()
}

/// Boundary F-score: binarizes the predicted map at `threshold` and
/// matches the resulting pixels one-to-one against the ground-truth
/// boundary mask within `match_dist` pixels.
///
/// The predicted map must have the ground truth's dimensions.
pub fn boundary_fscore(
    pred: &ScalarField,
    threshold: f64,
    gt: &GroundTruth,
    match_dist: f64,
) -> PrecisionRecall {
    assert_eq!(
        (pred.width(), pred.height()),
        (gt.width, gt.height),
        "prediction and ground truth must share dimensions"
    );
    let pred_pts = threshold_points(pred, threshold);
    let gt_pts = mask_points(&gt.boundary_mask(), gt.width);
    point_set_fscore(&pred_pts, &gt_pts, match_dist)
}

/// Sweeps the binarization threshold over {0.1, …, 0.9} and returns the
/// threshold with the best F-score (lowest such threshold on ties).
pub fn best_boundary_fscore(
    pred: &ScalarField,
    gt: &GroundTruth,
    match_dist: f64,
) -> (f64, PrecisionRecall) {
    assert_eq!(
        (pred.width(), pred.height()),
        (gt.width, gt.height),
        "prediction and ground truth must share dimensions"
    );
    let gt_pts = mask_points(&gt.boundary_mask(), gt.width);
    let mut best = (0.1, score(0, 0, 0));
    let mut first = true;
    for k in 1..=9 {
        let threshold = k as f64 / 10.0;
        let pr = point_set_fscore(&threshold_points(pred, threshold), &gt_pts, match_dist);
        if first || pr.f > best.1.f {
            best = (threshold, pr);
            first = false;
        }
    }
    best
}

/// Vertex F-score: greedy one-to-one matching of detected points against
/// ground-truth vertices within `match_dist` pixels.
pub fn vertex_fscore(pred: &[[f64; 2]], gt: &[[f64; 2]], match_dist: f64) -> PrecisionRecall {
    point_set_fscore(pred, gt, match_dist)
}

fn circular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Mean absolute angular error, in degrees, between two direction sets in
/// radians.
///
/// The smaller set is assigned to the larger one exhaustively (at most 4
/// directions, so at most 24 orderings) and the assignment minimizing the
/// total circular difference is reported, averaged per assigned direction.
/// Empty sets give 0.
pub fn angle_error_deg(pred: &[f64], truth: &[f64]) -> f64 {
    let (small, large) = if pred.len() <= truth.len() {
        (pred, truth)
    } else {
        (truth, pred)
    };
    if small.is_empty() {
        return 0.0;
    }
    assert!(large.len() <= 4, "angle sets hold at most 4 directions");
    let mut idx: Vec<usize> = (0..large.len()).collect();
    let mut best = f64::INFINITY;
    permute(&mut idx, 0, &mut |order| {
        let total: f64 = small
            .iter()
            .zip(order)
            .map(|(&a, &j)| circular_difference(a, large[j]))
            .sum();
        best = best.min(total);
    });
    (best / small.len() as f64).to_degrees()
}

fn permute(idx: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

/// Mean of [`angle_error_deg`] over matched vertex pairs; 0 if empty.
pub fn mean_angle_error_deg(pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs
        .iter()
        .map(|(p, t)| angle_error_deg(p, t))
        .sum::<f64>()
        / pairs.len() as f64
}

/// Peak signal-to-noise ratio with peak 1: `10·log10(1 / MSE)` over all
/// pixels and channels.  Identical images give `+∞`.
pub fn psnr(test: &Image, reference: &Image) -> f64 {
    assert_eq!(
        (test.width(), test.height(), test.channels()),
        (
            reference.width(),
            reference.height(),
            reference.channels()
        ),
        "images must share dimensions"
    );
    let mse = test
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / test.data().len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}
