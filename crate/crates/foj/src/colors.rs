//! Closed-form per-wedge color fits.
//!
//! For fixed junction geometry the color objective is quadratic, so the best
//! colors have closed forms: an indicator-weighted mean per wedge for the
//! constant model, and a 3×3 weighted least-squares solve per wedge (on the
//! regressors x, y, 1 in patch-local coordinates) for the linear model.
//!
//! Both solvers support blending the image against a reference map: with
//! blend weight λ the fit minimizes `Σ u‖c − I‖² + λ Σ u‖c − Ref‖²`, which
//! simply replaces the target by `(I + λ·Ref) / (1 + λ)`.  The refinement
//! loop uses this to pull wedge colors toward the global color consensus.
//!
//! Degenerate wedges are kept finite by two fallbacks: a wedge whose
//! indicator mass is below `MASS_FLOOR` takes the whole-patch mean, and a
//! linear fit whose normal matrix has condition number above `COND_LIMIT`
//! degrades to the constant fit for that wedge.

use crate::config::ColorModel;
use crate::geometry::{hard_wedge_index, wedge_indicators};
use crate::grid::{PatchGrid, PatchRect};
use crate::image::Image;
use crate::junction::{JunctionParams, LinearColor, WedgeColors};
use crate::likelihood::Indicators;
use rayon::prelude::*;

/// Indicator mass below which a wedge is considered empty.
pub const MASS_FLOOR: f64 = 1e-6;

/// Condition-number limit above which a linear fit degrades to constant.
pub const COND_LIMIT: f64 = 1e8;

/// Optional pull toward a reference map (usually the global color map).
#[derive(Clone, Copy)]
pub struct ColorBlend<'a> {
    /// Reference image sampled at the same absolute pixel positions.
    pub map: Option<&'a Image>,
    /// Blend weight λ ≥ 0; ignored when `map` is `None`.
    pub lambda: f64,
}

impl<'a> ColorBlend<'a> {
    /// No blending: fit the image alone.
    pub fn none() -> Self {
        Self {
            map: None,
            lambda: 0.0,
        }
    }

    /// Blend toward `map` with weight `lambda`.
    pub fn toward(map: &'a Image, lambda: f64) -> Self {
        Self {
            map: Some(map),
            lambda,
        }
    }

    #[inline]
    fn target(&self, image: &Image, x: usize, y: usize, c: usize) -> f64 {
        match self.map {
            Some(m) if self.lambda > 0.0 => {
                (image.sample(x, y, c) + self.lambda * m.sample(x, y, c)) / (1.0 + self.lambda)
            }
            _ => image.sample(x, y, c),
        }
    }
}

/// Per-pixel wedge weights for one patch position.
#[inline]
fn weights_at(
    point: [f64; 2],
    params: &JunctionParams,
    indicators: Indicators,
    buf: &mut [f64; 4],
) -> usize {
    let m = params.order();
    match indicators {
        Indicators::Hard => {
            buf[..m].fill(0.0);
            buf[hard_wedge_index(point, params)] = 1.0;
        }
        Indicators::Relaxed(eta) => {
            let u = wedge_indicators(point, params, eta);
            buf[..m].copy_from_slice(&u);
        }
    }
    m
}

/// Mean of the observed patch pixels per channel; the empty-wedge fallback.
fn patch_mean(image: &Image, rect: PatchRect) -> Vec<f64> {
    let k = image.channels();
    let mut sum = vec![0.0; k];
    let mut n = 0.0;
    for y in rect.y0..rect.y0 + rect.size {
        for x in rect.x0..rect.x0 + rect.size {
            if !image.is_observed(x, y) {
                continue;
            }
            for (c, s) in sum.iter_mut().enumerate() {
                *s += image.sample(x, y, c);
            }
            n += 1.0;
        }
    }
    if n > 0.0 {
        for s in &mut sum {
            *s /= n;
        }
    }
    sum
}

/// Best constant color per wedge: the indicator-weighted mean of the blended
/// target.  Wedges with indicator mass below [`MASS_FLOOR`] fall back to the
/// whole-patch mean.
pub fn constant_colors(
    image: &Image,
    rect: PatchRect,
    params: &JunctionParams,
    indicators: Indicators,
    blend: ColorBlend,
) -> Vec<Vec<f64>> {
    let m = params.order();
    let k = image.channels();
    let mut mass = [0.0f64; 4];
    let mut sums = vec![0.0f64; m * k];
    let mut u = [0.0f64; 4];
    for y in rect.y0..rect.y0 + rect.size {
        for x in rect.x0..rect.x0 + rect.size {
            if !image.is_observed(x, y) {
                continue;
            }
            let p = [x as f64, y as f64];
            weights_at(p, params, indicators, &mut u);
            for j in 0..m {
                if u[j] == 0.0 {
                    continue;
                }
                mass[j] += u[j];
                for c in 0..k {
                    sums[j * k + c] += u[j] * blend.target(image, x, y, c);
                }
            }
        }
    }
    let fallback = patch_mean(image, rect);
    (0..m)
        .map(|j| {
            if mass[j] < MASS_FLOOR {
                fallback.clone()
            } else {
                (0..k).map(|c| sums[j * k + c] / mass[j]).collect()
            }
        })
        .collect()
}

/// Symmetric 3×3 solve via the adjugate, returning the solution for each
/// right-hand side along with the 1-norm condition estimate.
///
/// Returns `None` when the matrix is singular or the condition number exceeds
/// [`COND_LIMIT`]; callers degrade to the constant fit.
fn solve_3x3(a: &[[f64; 3]; 3], rhs: &[[f64; 3]]) -> Option<Vec<[f64; 3]>> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = [
        [
            (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det,
            (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det,
            (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det,
        ],
        [
            (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det,
            (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det,
            (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det,
        ],
        [
            (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det,
            (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det,
            (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det,
        ],
    ];
    let norm1 = |m: &[[f64; 3]; 3]| -> f64 {
        (0..3)
            .map(|c| (0..3).map(|r| m[r][c].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || cond > COND_LIMIT {
        return None;
    }
    Some(
        rhs.iter()
            .map(|b| {
                [
                    inv[0][0] * b[0] + inv[0][1] * b[1] + inv[0][2] * b[2],
                    inv[1][0] * b[0] + inv[1][1] * b[1] + inv[1][2] * b[2],
                    inv[2][0] * b[0] + inv[2][1] * b[1] + inv[2][2] * b[2],
                ]
            })
            .collect(),
    )
}

/// Best affine color per wedge, solving the indicator-weighted normal
/// equations on regressors `(x, y, 1)` in patch-local coordinates.
///
/// Falls back per wedge: empty wedges take the whole-patch mean and
/// ill-conditioned normal matrices degrade to the constant fit, so the
/// constant model is exactly the zero-slope special case.
pub fn linear_colors(
    image: &Image,
    rect: PatchRect,
    params: &JunctionParams,
    indicators: Indicators,
    blend: ColorBlend,
) -> Vec<LinearColor> {
    let m = params.order();
    let k = image.channels();
    let (cx, cy) = rect.center();
    // Per wedge: mass, Σux, Σuy, Σuxx, Σuxy, Σuyy, then per channel Σug,
    // Σugx, Σugy.
    let mut geo = vec![[0.0f64; 6]; m];
    let mut dat = vec![0.0f64; m * k * 3];
    let mut u = [0.0f64; 4];
    for y in rect.y0..rect.y0 + rect.size {
        for x in rect.x0..rect.x0 + rect.size {
            if !image.is_observed(x, y) {
                continue;
            }
            let p = [x as f64, y as f64];
            let lx = x as f64 - cx as f64;
            let ly = y as f64 - cy as f64;
            weights_at(p, params, indicators, &mut u);
            for j in 0..m {
                let w = u[j];
                if w == 0.0 {
                    continue;
                }
                let g = &mut geo[j];
                g[0] += w;
                g[1] += w * lx;
                g[2] += w * ly;
                g[3] += w * lx * lx;
                g[4] += w * lx * ly;
                g[5] += w * ly * ly;
                for c in 0..k {
                    let t = blend.target(image, x, y, c);
                    let d = &mut dat[(j * k + c) * 3..(j * k + c) * 3 + 3];
                    d[0] += w * t;
                    d[1] += w * t * lx;
                    d[2] += w * t * ly;
                }
            }
        }
    }
    let fallback = patch_mean(image, rect);
    (0..m)
        .map(|j| {
            let g = &geo[j];
            if g[0] < MASS_FLOOR {
                return LinearColor {
                    ax: vec![0.0; k],
                    ay: vec![0.0; k],
                    offset: fallback.clone(),
                };
            }
            let a = [
                [g[3], g[4], g[1]],
                [g[4], g[5], g[2]],
                [g[1], g[2], g[0]],
            ];
            let rhs: Vec<[f64; 3]> = (0..k)
                .map(|c| {
                    let d = &dat[(j * k + c) * 3..(j * k + c) * 3 + 3];
                    [d[1], d[2], d[0]]
                })
                .collect();
            match solve_3x3(&a, &rhs) {
                Some(sol) => LinearColor {
                    ax: sol.iter().map(|s| s[0]).collect(),
                    ay: sol.iter().map(|s| s[1]).collect(),
                    offset: sol.iter().map(|s| s[2]).collect(),
                },
                // Ill-conditioned geometry: keep the wedge but flatten it.
                None => LinearColor {
                    ax: vec![0.0; k],
                    ay: vec![0.0; k],
                    offset: (0..k)
                        .map(|c| dat[(j * k + c) * 3] / g[0])
                        .collect(),
                },
            }
        })
        .collect()
}

/// Solves colors for every patch of a grid in parallel.
///
/// Equivalent to calling [`constant_colors`] or [`linear_colors`] per patch;
/// results are positionally identical regardless of thread count.
pub fn field_colors(
    image: &Image,
    grid: &PatchGrid,
    params: &[JunctionParams],
    model: ColorModel,
    indicators: Indicators,
    blend: ColorBlend,
) -> Vec<WedgeColors> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let rect = grid.patch(i);
            match model {
                ColorModel::Constant => WedgeColors::Constant(constant_colors(
                    image, rect, &params[i], indicators, blend,
                )),
                ColorModel::Linear => WedgeColors::Linear(linear_colors(
                    image, rect, &params[i], indicators, blend,
                )),
            }
        })
        .collect()
}
