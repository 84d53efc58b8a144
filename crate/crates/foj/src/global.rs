//! Global maps assembled from a field of junctions.
//!
//! Each patch explains its own window; the global picture comes from
//! averaging those independent explanations wherever they overlap.  Three
//! maps are assembled: the boundary map (per-pixel mean of patch boundary
//! strengths), the color map (per-pixel mean of patch colors — the
//! boundary-aware smoothing of the input), and the vertex map (weighted
//! votes for junction vertices, from which discrete detections are
//! extracted by non-maximum suppression).
//!
//! All accumulation loops visit patches in ascending index order per pixel,
//! so results are bit-identical across runs and thread counts.

use crate::geometry::{boundary_strength, wedge_indicators};
use crate::image::{Image, ScalarField};
use crate::junction::{FieldOfJunctions, JunctionParams};

/// Mean patch boundary strength at every pixel, in `[0, 1]`.
///
/// Pixels covered by a single patch reproduce that patch's boundary
/// strength exactly; overlapping patches vote by simple averaging.
pub fn global_boundary_map(field: &FieldOfJunctions, delta: f64) -> ScalarField {
    let grid = field.grid();
    let params = field.params();
    let mut map = ScalarField::new(grid.image_width(), grid.image_height());
    let cols = grid.cols();
    for y in 0..grid.image_height() {
        for x in 0..grid.image_width() {
            let (cx0, cx1, cy0, cy1) = grid.cover_ranges(x, y);
            let p = [x as f64, y as f64];
            let mut sum = 0.0;
            let mut n = 0.0;
            for py in cy0..cy1 {
                for px in cx0..cx1 {
                    let i = py as usize * cols + px as usize;
                    sum += boundary_strength(p, &params[i], delta);
                    n += 1.0;
                }
            }
            map.set(x, y, if n > 0.0 { sum / n } else { 0.0 });
        }
    }
    map
}

/// Mean patch color at every pixel: the boundary-aware smoothing of the
/// input.
///
/// Each covering patch contributes its indicator-blended wedge colors
/// `Σ_j u_j(x)·c_j(x)` under relaxed indicators of width `eta`.  The output
/// has the same channel count as the fitted colors and is defined at every
/// pixel, including masked-out ones — this is what fills missing values.
pub fn global_color_map(field: &FieldOfJunctions, eta: f64) -> Image {
    let grid = field.grid();
    let params = field.params();
    let colors = field.colors();
    let k = colors[0].channels();
    let cols = grid.cols();
    let mut out = Image::new(grid.image_width(), grid.image_height(), k);
    for y in 0..grid.image_height() {
        for x in 0..grid.image_width() {
            let (cx0, cx1, cy0, cy1) = grid.cover_ranges(x, y);
            let p = [x as f64, y as f64];
            let mut acc = [0.0f64; 4];
            let mut n = 0.0;
            for py in cy0..cy1 {
                for px in cx0..cx1 {
                    let i = py as usize * cols + px as usize;
                    let u = wedge_indicators(p, &params[i], eta);
                    let (cx, cy) = grid.patch(i).center();
                    let lx = x as f64 - cx as f64;
                    let ly = y as f64 - cy as f64;
                    for (j, &uj) in u.iter().take(params[i].order()).enumerate() {
                        for (c, a) in acc.iter_mut().take(k).enumerate() {
                            *a += uj * colors[i].eval(j, c, lx, ly);
                        }
                    }
                    n += 1.0;
                }
            }
            let px = out.pixel_mut(x, y);
            for c in 0..k {
                px[c] = if n > 0.0 { acc[c] / n } else { 0.0 };
            }
        }
    }
    out
}

/// The two global maps the refinement loop freezes between iterations.
pub struct GlobalMaps {
    /// Mean boundary strength per pixel.
    pub boundary: ScalarField,
    /// Mean patch color per pixel.
    pub color: Image,
}

impl GlobalMaps {
    /// Computes both maps from the current field.
    pub fn compute(field: &FieldOfJunctions, eta: f64, delta: f64) -> Self {
        Self {
            boundary: global_boundary_map(field, delta),
            color: global_color_map(field, eta),
        }
    }
}

/// Vote weight of one junction: a locality factor of width `gamma` that
/// decays with the vertex's distance from its patch center, times an
/// angle-distinctness factor that vanishes for straight-line (or empty)
/// junctions.
///
/// The distinctness factor is the best over unordered wedge-angle pairs of
/// `min{1, [1+cos Δ]·[1−|cos Δ|]^{ν_e}}`: zero when all rays are parallel
/// or anti-parallel, one for a perpendicular pair.
pub fn junction_weight(
    params: &JunctionParams,
    patch_center: [f64; 2],
    gamma: f64,
    nu_e: f64,
) -> f64 {
    let dx = params.vertex[0] - patch_center[0];
    let dy = params.vertex[1] - patch_center[1];
    let locality = (-(dx * dx + dy * dy) / (2.0 * gamma * gamma)).exp();
    let m = params.order();
    let mut best = 0.0f64;
    for a in 0..m {
        for b in a + 1..m {
            let c = (params.angles[a] - params.angles[b]).cos();
            let factor = ((1.0 + c) * (1.0 - c.abs()).powf(nu_e)).min(1.0);
            best = best.max(factor);
        }
    }
    locality * best
}

/// Vertex likelihood map: every junction adds a Gaussian vote of width
/// `nu_d` at its vertex, scaled by [`junction_weight`] with locality width
/// `gamma`.  Unnormalized.
///
/// The vote must be narrow — comparable to the vertex-localization
/// uncertainty — for nearby junctions to remain separate maxima; the
/// locality factor is the wide one, tolerating vertices anywhere within
/// the range the optimizer itself allows (±1.5 patch sizes).
pub fn vertex_map(field: &FieldOfJunctions, gamma: f64, nu_d: f64, nu_e: f64) -> ScalarField {
    let grid = field.grid();
    let w = grid.image_width();
    let h = grid.image_height();
    let mut map = ScalarField::new(w, h);
    let inv = 1.0 / (2.0 * nu_d * nu_d);
    let mut ex = vec![0.0f64; w];
    let mut ey = vec![0.0f64; h];
    for (i, params) in field.params().iter().enumerate() {
        let (cx, cy) = grid.patch(i).center();
        let weight = junction_weight(params, [cx as f64, cy as f64], gamma, nu_e);
        if weight == 0.0 {
            continue;
        }
        // The vote is a separable outer product of 1-D Gaussians.
        let [vx, vy] = params.vertex;
        for (x, e) in ex.iter_mut().enumerate() {
            let d = x as f64 - vx;
            *e = (-d * d * inv).exp();
        }
        for (y, e) in ey.iter_mut().enumerate() {
            let d = y as f64 - vy;
            *e = (-d * d * inv).exp();
        }
        for y in 0..h {
            let row = weight * ey[y];
            let out = &mut map.data_mut()[y * w..(y + 1) * w];
            for (x, o) in out.iter_mut().enumerate() {
                *o += row * ex[x];
            }
        }
    }
    map
}

/// One detected vertex.
#[derive(Clone, Debug)]
pub struct VertexDetection {
    /// Detection position: the local-maximum pixel of the vertex map.
    pub point: [f64; 2],
    /// Normalized vertex-map score in `(0, 1]`.
    pub score: f64,
    /// Wedge angles of the strongest junction voting at this point, sorted.
    pub angles: Vec<f64>,
}

/// Extracts discrete vertices from a vertex map.
///
/// The map is normalized by its maximum, then every pixel that is at least
/// as large as its 8 neighbors and at least `threshold` becomes a
/// candidate.  Candidates are visited best-first (ties broken by row, then
/// column) and kept greedily unless within `nms_radius` of a kept detection.
/// Each kept detection reports the angles of the junction with the largest
/// vote weight at that point.
pub fn detect_vertices(
    map: &ScalarField,
    field: &FieldOfJunctions,
    gamma: f64,
    nu_d: f64,
    nu_e: f64,
    threshold: f64,
    nms_radius: f64,
) -> Vec<VertexDetection> {
    let w = map.width();
    let h = map.height();
    let peak = map.max();
    if !(peak > 0.0) {
        return Vec::new();
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = map.get(x, y);
            if v / peak < threshold {
                continue;
            }
            let mut is_max = true;
            'neigh: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if map.get(nx as usize, ny as usize) > v {
                        is_max = false;
                        break 'neigh;
                    }
                }
            }
            if is_max {
                candidates.push((v / peak, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.2.cmp(&b.2))
            .then(a.1.cmp(&b.1))
    });
    let grid = field.grid();
    let mut kept: Vec<VertexDetection> = Vec::new();
    for (score, x, y) in candidates {
        let too_close = kept.iter().any(|d| {
            let dx = d.point[0] - x as f64;
            let dy = d.point[1] - y as f64;
            (dx * dx + dy * dy).sqrt() <= nms_radius
        });
        if too_close {
            continue;
        }
        // Attribute the detection to the strongest voter here.
        let inv = 1.0 / (2.0 * nu_d * nu_d);
        let mut best_vote = f64::NEG_INFINITY;
        let mut best_angles: &[f64] = &[];
        for (i, params) in field.params().iter().enumerate() {
            let (cx, cy) = grid.patch(i).center();
            let weight = junction_weight(params, [cx as f64, cy as f64], gamma, nu_e);
            let dx = x as f64 - params.vertex[0];
            let dy = y as f64 - params.vertex[1];
            let vote = weight * (-(dx * dx + dy * dy) * inv).exp();
            if vote > best_vote {
                best_vote = vote;
                best_angles = &params.angles;
            }
        }
        kept.push(VertexDetection {
            point: [x as f64, y as f64],
            score,
            angles: best_angles.to_vec(),
        });
    }
    kept
}
