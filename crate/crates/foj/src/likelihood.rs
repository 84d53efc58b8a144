//! Patch negative log-likelihood and fast partition costs.
//!
//! The per-patch data term is the indicator-weighted squared error between
//! the image and the wedge colors.  Because the best constant colors are
//! closed-form, the cost of a *partition* (a vertex plus sorted angles) can
//! be evaluated without materializing colors: per wedge it is
//! `S_w − ‖T_w‖² / ((1+λ)·W_w)` where `W`, `T`, `S` are the wedge's
//! indicator-weighted pixel count, blended target sum, and blended square
//! sum.  The initializer sweeps thousands of candidate partitions per patch,
//! so this module also provides [`AngularHistogram`]: pixel statistics
//! bucketed by angle around a fixed vertex, with prefix sums that make each
//! candidate's cost O(M) instead of O(R²).

use crate::geometry::{hard_wedge_index, polar_angle, sector_of, wedge_indicators};
use crate::grid::PatchRect;
use crate::image::Image;
use crate::junction::{JunctionParams, WedgeColors};

/// Which wedge memberships to use when weighting pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Indicators {
    /// Each pixel belongs entirely to the wedge containing it.
    Hard,
    /// Smooth memberships with the given transition width η.
    Relaxed(f64),
}

/// Per-patch pixel table with optional target blending, precomputed once so
/// partition sweeps touch no image memory.
///
/// Masked-out pixels are omitted entirely.  With a blend `(Ref, λ)` the
/// stored statistics describe the objective
/// `Σ u‖c − I‖² + λ Σ u‖c − Ref‖²`.
pub(crate) struct FitData {
    /// Channel count of the source image.
    pub k: usize,
    /// `1 + λ`; divides `‖T‖²` in the attained cost.
    pub denom: f64,
    /// Pixel x positions in image coordinates.
    pub xs: Vec<f64>,
    /// Pixel y positions in image coordinates.
    pub ys: Vec<f64>,
    /// Blended target sums `I + λ·Ref`, interleaved per channel.
    pub ts: Vec<f64>,
    /// Blended square sums `‖I‖² + λ‖Ref‖²` per pixel.
    pub ss: Vec<f64>,
}

impl FitData {
    /// Gathers the observed pixels of `rect`, blending targets toward
    /// `blend`'s reference map when given.
    pub fn build(image: &Image, rect: PatchRect, blend: Option<(&Image, f64)>) -> Self {
        let k = image.channels();
        let lambda = blend.map_or(0.0, |(_, l)| l);
        let n = rect.size * rect.size;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut ts = Vec::with_capacity(n * k);
        let mut ss = Vec::with_capacity(n);
        for y in rect.y0..rect.y0 + rect.size {
            for x in rect.x0..rect.x0 + rect.size {
                if !image.is_observed(x, y) {
                    continue;
                }
                xs.push(x as f64);
                ys.push(y as f64);
                let mut sq = 0.0;
                for c in 0..k {
                    let v = image.sample(x, y, c);
                    sq += v * v;
                    let mut t = v;
                    if let Some((reference, l)) = blend {
                        let r = reference.sample(x, y, c);
                        t += l * r;
                        sq += l * r * r;
                    }
                    ts.push(t);
                }
                ss.push(sq);
            }
        }
        Self {
            k,
            denom: 1.0 + lambda,
            xs,
            ys,
            ts,
            ss,
        }
    }

    /// Number of observed pixels.
    pub fn len(&self) -> usize {
        self.xs.len()
    }
}

/// Attained cost of one partition at its best constant colors.
///
/// `angles` must be sorted ascending in `[0, 2π)`; the pixel at the vertex
/// itself (if any) counts toward wedge 0.  Empty wedges contribute nothing.
pub(crate) fn partition_cost(fit: &FitData, vertex: [f64; 2], angles: &[f64]) -> f64 {
    let m = angles.len();
    let k = fit.k;
    let mut w = [0.0f64; 4];
    let mut s = [0.0f64; 4];
    let mut t = [0.0f64; 16];
    for i in 0..fit.len() {
        let dx = fit.xs[i] - vertex[0];
        let dy = fit.ys[i] - vertex[1];
        let j = if dx == 0.0 && dy == 0.0 {
            0
        } else {
            sector_of(polar_angle(dx, dy), angles)
        };
        w[j] += 1.0;
        s[j] += fit.ss[i];
        for c in 0..k {
            t[j * k + c] += fit.ts[i * k + c];
        }
    }
    let mut cost = 0.0;
    for j in 0..m {
        if w[j] > 0.0 {
            let tt: f64 = (0..k).map(|c| t[j * k + c] * t[j * k + c]).sum();
            cost += s[j] - tt / (fit.denom * w[j]);
        }
    }
    cost
}

/// Pixel statistics bucketed by angle around a fixed vertex.
///
/// The circle is split into `n_ang` equal bins `[kΔ, (k+1)Δ)` with
/// `Δ = 2π/n_ang`; each bin stores the count, target sum, and square sum of
/// its pixels, and prefix sums over bins give any contiguous bin range in
/// O(1).  A pixel exactly at the vertex is kept in a separate bucket that is
/// always charged to wedge 0.  For junction angles that lie exactly on bin
/// boundaries, [`AngularHistogram::cost`] reproduces the direct
/// per-pixel partition cost.
pub struct AngularHistogram {
    n_ang: usize,
    k: usize,
    denom: f64,
    /// Prefix sums over bins, stride `2 + k`: count, square sum, targets.
    prefix: Vec<f64>,
    /// Count, square sum, and targets of pixels exactly at the vertex.
    vertex_bucket: Vec<f64>,
}

impl AngularHistogram {
    /// Buckets the observed pixels of `rect` around `vertex` into `n_ang`
    /// bins, without target blending.
    ///
    /// # Panics
    ///
    /// Panics if `n_ang` is zero.
    pub fn build(image: &Image, rect: PatchRect, vertex: [f64; 2], n_ang: usize) -> Self {
        Self::from_fit(&FitData::build(image, rect, None), vertex, n_ang)
    }

    /// Buckets prepared pixel statistics; shares `fit`'s blending.
    pub(crate) fn from_fit(fit: &FitData, vertex: [f64; 2], n_ang: usize) -> Self {
        assert!(n_ang > 0, "histogram needs at least one bin");
        let k = fit.k;
        let stride = 2 + k;
        let mut bins = vec![0.0f64; n_ang * stride];
        let mut vertex_bucket = vec![0.0f64; stride];
        let width = std::f64::consts::TAU / n_ang as f64;
        for i in 0..fit.len() {
            let dx = fit.xs[i] - vertex[0];
            let dy = fit.ys[i] - vertex[1];
            let slot = if dx == 0.0 && dy == 0.0 {
                &mut vertex_bucket[..]
            } else {
                let theta = polar_angle(dx, dy);
                let mut b = ((theta / width) as usize).min(n_ang - 1);
                // Align the boundary cases with the exact comparisons made
                // against candidate angles `b·Δ`.
                if theta < b as f64 * width {
                    b -= 1;
                } else if b + 1 < n_ang && theta >= (b + 1) as f64 * width {
                    b += 1;
                }
                &mut bins[b * stride..(b + 1) * stride]
            };
            slot[0] += 1.0;
            slot[1] += fit.ss[i];
            for c in 0..k {
                slot[2 + c] += fit.ts[i * k + c];
            }
        }
        let mut prefix = vec![0.0f64; (n_ang + 1) * stride];
        for b in 0..n_ang {
            for f in 0..stride {
                prefix[(b + 1) * stride + f] = prefix[b * stride + f] + bins[b * stride + f];
            }
        }
        Self {
            n_ang,
            k,
            denom: fit.denom,
            prefix,
            vertex_bucket,
        }
    }

    /// Number of bins.
    pub fn bins(&self) -> usize {
        self.n_ang
    }

    /// The angle of bin boundary `index`, i.e. candidate `index·2π/n_ang`.
    pub fn bin_angle(&self, index: usize) -> f64 {
        index as f64 * (std::f64::consts::TAU / self.n_ang as f64)
    }

    #[inline]
    fn segment(&self, field: usize, a: usize, b: usize) -> f64 {
        let stride = 2 + self.k;
        self.prefix[b * stride + field] - self.prefix[a * stride + field]
    }

    /// Attained cost of the partition whose angles are the bin boundaries
    /// `indices` (sorted ascending, each < `bins()`), at best constant
    /// colors.
    ///
    /// Wedge `j < M−1` covers bins `[indices[j], indices[j+1])`; the last
    /// wedge takes every remaining pixel, wrapping through 2π.
    ///
    /// # Panics
    ///
    /// Panics if `indices` is not sorted ascending or an index is out of
    /// range.
    pub fn cost(&self, indices: &[usize]) -> f64 {
        let m = indices.len();
        assert!(
            indices.windows(2).all(|p| p[0] <= p[1]),
            "bin indices must be sorted"
        );
        assert!(indices.iter().all(|&i| i < self.n_ang), "bin index out of range");
        let mut cost = 0.0;
        // Totals, from which the wrap-around last wedge is what remains.
        let mut rem_w = self.segment(0, 0, self.n_ang);
        let mut rem_s = self.segment(1, 0, self.n_ang);
        let mut rem_t = [0.0f64; 4];
        for c in 0..self.k {
            rem_t[c] = self.segment(2 + c, 0, self.n_ang);
        }
        for j in 0..m {
            let (mut w, mut s, mut t);
            if j + 1 < m {
                let (a, b) = (indices[j], indices[j + 1]);
                w = self.segment(0, a, b);
                s = self.segment(1, a, b);
                t = [0.0f64; 4];
                for c in 0..self.k {
                    t[c] = self.segment(2 + c, a, b);
                }
                rem_w -= w;
                rem_s -= s;
                for c in 0..self.k {
                    rem_t[c] -= t[c];
                }
            } else {
                w = rem_w;
                s = rem_s;
                t = rem_t;
            }
            if j == 0 {
                w += self.vertex_bucket[0];
                s += self.vertex_bucket[1];
                for c in 0..self.k {
                    t[c] += self.vertex_bucket[2 + c];
                }
            }
            if w > 0.0 {
                let tt: f64 = (0..self.k).map(|c| t[c] * t[c]).sum();
                cost += s - tt / (self.denom * w);
            }
        }
        cost
    }
}

/// Data term of one patch: indicator-weighted squared error between the
/// image and the given wedge colors.
///
/// Masked-out pixels are skipped.  Under [`Indicators::Hard`] the pixel at
/// the vertex (if any) belongs to wedge 0.
pub fn patch_negloglik(
    image: &Image,
    rect: PatchRect,
    params: &JunctionParams,
    colors: &WedgeColors,
    indicators: Indicators,
) -> f64 {
    let m = params.order();
    let k = image.channels();
    let (cx, cy) = rect.center();
    let mut total = 0.0;
    for y in rect.y0..rect.y0 + rect.size {
        for x in rect.x0..rect.x0 + rect.size {
            if !image.is_observed(x, y) {
                continue;
            }
            let p = [x as f64, y as f64];
            let lx = x as f64 - cx as f64;
            let ly = y as f64 - cy as f64;
            match indicators {
                Indicators::Hard => {
                    let j = hard_wedge_index(p, params);
                    let mut r = 0.0;
                    for c in 0..k {
                        let e = colors.eval(j, c, lx, ly) - image.sample(x, y, c);
                        r += e * e;
                    }
                    total += r;
                }
                Indicators::Relaxed(eta) => {
                    let u = wedge_indicators(p, params, eta);
                    for (j, &uj) in u.iter().take(m).enumerate() {
                        if uj == 0.0 {
                            continue;
                        }
                        let mut r = 0.0;
                        for c in 0..k {
                            let e = colors.eval(j, c, lx, ly) - image.sample(x, y, c);
                            r += e * e;
                        }
                        total += uj * r;
                    }
                }
            }
        }
    }
    total
}

/// Cost of the partition obtained by replacing angle `slot` with `phi`,
/// holding the vertex and the other angles fixed, at best constant colors.
///
/// This is the one-dimensional objective the coordinate-descent initializer
/// minimizes over each angle in turn.  `phi` is wrapped into `[0, 2π)` and
/// the angles re-sorted before evaluation.
///
/// # Panics
///
/// Panics if `slot >= angles.len()`.
pub fn restricted_negloglik(
    image: &Image,
    rect: PatchRect,
    vertex: [f64; 2],
    angles: &[f64],
    slot: usize,
    phi: f64,
) -> f64 {
    assert!(slot < angles.len(), "angle slot out of range");
    let mut sorted: Vec<f64> = angles.to_vec();
    sorted[slot] = crate::junction::wrap_angle(phi);
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let fit = FitData::build(image, rect, None);
    partition_cost(&fit, vertex, &sorted)
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

    /// A patch rendered exactly from a junction: each pixel takes the color
    /// of its hard wedge.
    fn render(params: &JunctionParams, colors: &[f64], size: usize) -> Image {
        Image::from_fn(size, size, 1, |x, y, _| {
            colors[hard_wedge_index([x as f64, y as f64], params)]
        })
    }

    #[test]
    fn exact_render_has_zero_negloglik() {
        let p = JunctionParams::new(vec![0.3, 2.0, 4.2], [4.0, 4.0]);
        let shades = [0.1, 0.5, 0.9];
        let img = render(&p, &shades, 9);
        let colors = WedgeColors::Constant(shades.iter().map(|&v| vec![v]).collect());
        let l = patch_negloglik(&img, rect(9), &p, &colors, Indicators::Hard);
        assert!(l.abs() < 1e-12);
        let fit = FitData::build(&img, rect(9), None);
        assert!(partition_cost(&fit, [4.0, 4.0], &[0.3, 2.0, 4.2]).abs() < 1e-9);
    }

    #[test]
    fn uniform_patch_costs_zero_for_any_partition() {
        let img = Image::from_fn(7, 7, 1, |_, _, _| 0.6);
        let fit = FitData::build(&img, rect(7), None);
        assert!(partition_cost(&fit, [3.0, 3.0], &[0.0, 0.0, 0.0]).abs() < 1e-10);
        assert!(partition_cost(&fit, [1.5, 4.5], &[0.2, 2.2, 5.1]).abs() < 1e-10);
    }

    #[test]
    fn single_wedge_cost_is_population_variance_times_count() {
        // All angles coincide, so one wedge holds the entire patch and the
        // attained cost is n·Var(values).
        let img = Image::from_fn(3, 3, 1, |x, y, _| (3 * y + x) as f64);
        let fit = FitData::build(&img, rect(3), None);
        let cost = partition_cost(&fit, [1.0, 1.0], &[0.5, 0.5, 0.5]);
        let mean = 4.0;
        let var: f64 = (0..9).map(|v| (v as f64 - mean).powi(2)).sum::<f64>() / 9.0;
        assert!((cost - 9.0 * var).abs() < 1e-9);
    }

    #[test]
    fn cost_equals_negloglik_at_fitted_colors() {
        let img = Image::from_fn(9, 9, 2, |x, y, c| {
            ((x * 7 + y * 13 + c * 3) % 19) as f64 / 19.0
        });
        let p = JunctionParams::new(vec![0.9, 2.7, 4.8], [4.3, 3.6]);
        let fitted = crate::colors::constant_colors(
            &img,
            rect(9),
            &p,
            Indicators::Hard,
            crate::colors::ColorBlend::none(),
        );
        let direct = patch_negloglik(
            &img,
            rect(9),
            &p,
            &WedgeColors::Constant(fitted),
            Indicators::Hard,
        );
        let fit = FitData::build(&img, rect(9), None);
        let closed = partition_cost(&fit, [4.3, 3.6], &[0.9, 2.7, 4.8]);
        assert!((direct - closed).abs() < 1e-9);
    }

    #[test]
    fn blended_cost_includes_reference_residual() {
        // One pixel, one wedge: cost must equal min_c (c−I)² + λ(c−Ref)².
        let img = Image::from_fn(1, 1, 1, |_, _, _| 0.2);
        let reference = Image::from_fn(1, 1, 1, |_, _, _| 0.8);
        let lambda = 0.5;
        let fit = FitData::build(&img, rect(1), Some((&reference, lambda)));
        let cost = partition_cost(&fit, [0.0, 0.0], &[0.0, 0.0, 0.0]);
        let best = (0.2 + lambda * 0.8) / (1.0 + lambda);
        let want = (best - 0.2f64).powi(2) + lambda * (best - 0.8f64).powi(2);
        assert!((cost - want).abs() < 1e-12);
    }

    #[test]
    fn masked_pixels_do_not_contribute() {
        let mut img = Image::from_fn(5, 5, 1, |x, _, _| if x == 0 { 100.0 } else { 0.5 });
        let mask: Vec<bool> = (0..25).map(|i| i % 5 != 0).collect();
        img.set_mask(mask).unwrap();
        let fit = FitData::build(&img, rect(5), None);
        assert_eq!(fit.len(), 20);
        let cost = partition_cost(&fit, [2.0, 2.0], &[0.0, 0.0, 0.0]);
        assert!(cost.abs() < 1e-12, "outliers behind the mask must vanish");
    }

    #[test]
    fn histogram_matches_direct_cost_at_bin_boundaries() {
        let img = Image::from_fn(11, 11, 1, |x, y, _| {
            ((x * 23 + y * 41) % 13) as f64 / 13.0
        });
        let fit = FitData::build(&img, rect(11), None);
        for &vertex in &[[5.0, 5.0], [3.25, 6.5], [5.6, 4.1]] {
            let hist = AngularHistogram::from_fit(&fit, vertex, 24);
            for &idx in &[[0usize, 0, 0], [0, 5, 11], [2, 2, 17], [1, 12, 23], [0, 8, 16]] {
                let angles: Vec<f64> = idx.iter().map(|&i| hist.bin_angle(i)).collect();
                let direct = partition_cost(&fit, vertex, &angles);
                let fast = hist.cost(&idx);
                let scale = direct.abs().max(1.0);
                assert!(
                    (fast - direct).abs() / scale < 1e-9,
                    "vertex {vertex:?} idx {idx:?}: {fast} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn histogram_charges_vertex_pixel_to_wedge_zero() {
        // Vertex exactly on a pixel: that pixel's value only affects wedge 0.
        let img = Image::from_fn(5, 5, 1, |x, y, _| if (x, y) == (2, 2) { 1.0 } else { 0.0 });
        let fit = FitData::build(&img, rect(5), None);
        let hist = AngularHistogram::from_fit(&fit, [2.0, 2.0], 8);
        let direct = partition_cost(&fit, [2.0, 2.0], &[0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI]);
        let fast = hist.cost(&[0, 2, 4]);
        assert!((fast - direct).abs() < 1e-12);
        assert!(fast > 0.0, "vertex pixel differs from wedge 0's other pixels");
    }

    #[test]
    fn restricted_objective_wraps_and_sorts() {
        let img = Image::from_fn(9, 9, 1, |x, y, _| ((x + 2 * y) % 5) as f64 / 5.0);
        let base = [0.5, 2.0, 4.0];
        // Replacing slot 2 with an angle that sorts first must equal the
        // direct cost of the re-sorted angle set.
        let a = restricted_negloglik(&img, rect(9), [4.0, 4.0], &base, 2, 0.1);
        let fit = FitData::build(&img, rect(9), None);
        let b = partition_cost(&fit, [4.0, 4.0], &[0.1, 0.5, 2.0]);
        assert!((a - b).abs() < 1e-12);
        // Wrapping: 2π + 0.1 is the same angle as 0.1.
        let c = restricted_negloglik(
            &img,
            rect(9),
            [4.0, 4.0],
            &base,
            2,
            std::f64::consts::TAU + 0.1,
        );
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn two_level_patch_is_best_split_at_the_true_boundary() {
        // Left half dark, right half bright, vertical boundary through the
        // center: the correct split costs ~0, any other costs more.
        let img = Image::from_fn(9, 9, 1, |x, _, _| if x < 4 { 0.0 } else { 1.0 });
        let fit = FitData::build(&img, rect(9), None);
        let true_split = partition_cost(
            &fit,
            [3.5, 4.0],
            &[std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, 3.0 * std::f64::consts::FRAC_PI_2],
        );
        let wrong_split = partition_cost(&fit, [3.5, 4.0], &[0.0, 0.0, std::f64::consts::PI]);
        assert!(true_split < 1e-9);
        assert!(wrong_split > 1.0);
    }

    proptest! {
        /// The histogram path must reproduce the direct partition cost for
        /// every sorted triple of bin boundaries, at off-grid vertices too.
        #[test]
        fn histogram_cost_matches_direct_everywhere(
            seed in 0u64..50,
            vx in 1.0f64..8.0,
            vy in 1.0f64..8.0,
            raw in proptest::array::uniform3(0usize..16),
        ) {
            let img = Image::from_fn(9, 9, 1, |x, y, _| {
                (((x as u64 + 3) * (y as u64 + 7) * (seed + 11)) % 17) as f64 / 17.0
            });
            let fit = FitData::build(&img, rect(9), None);
            let hist = AngularHistogram::from_fit(&fit, [vx, vy], 16);
            let mut idx = raw;
            idx.sort_unstable();
            let angles: Vec<f64> = idx.iter().map(|&i| hist.bin_angle(i)).collect();
            let direct = partition_cost(&fit, [vx, vy], &angles);
            let fast = hist.cost(&idx);
            let scale = direct.abs().max(1.0);
            prop_assert!((fast - direct).abs() / scale < 1e-9);
        }

        /// Attained costs are never negative and never exceed the
        /// single-wedge cost plus rounding.
        #[test]
        fn partition_cost_is_nonnegative(
            seed in 0u64..50,
            vx in 0.0f64..9.0,
            vy in 0.0f64..9.0,
            a0 in 0.0f64..std::f64::consts::TAU,
            a1 in 0.0f64..std::f64::consts::TAU,
            a2 in 0.0f64..std::f64::consts::TAU,
        ) {
            let img = Image::from_fn(9, 9, 1, |x, y, _| {
                (((x as u64 + 5) * (y as u64 + 2) * (seed + 3)) % 23) as f64 / 23.0
            });
            let fit = FitData::build(&img, rect(9), None);
            let mut angles = [a0, a1, a2];
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let cost = partition_cost(&fit, [vx, vy], &angles);
            prop_assert!(cost >= -1e-9);
        }
    }
}
