//! Synthetic benchmark image generator with analytic ground truth.
//!
//! Three scene families, 100 images each, all 64×64 grayscale with
//! intensities stored as `level / 255`:
//!
//! 1. two curved blobs (gray levels 128 and 255 on black),
//! 2. two rotated squares (same levels, never overlapping),
//! 3. four regions of levels {0, 85, 170, 255} separated by two
//!    three-way junctions joined by a shared edge.
//!
//! Every image carries its exact geometry: boundary curves as dense
//! polylines, junction/corner locations with their outgoing boundary
//! directions, and per-pixel region labels.  The boundary mask used by the
//! metrics marks pixels within half a pixel of an analytic curve.
//!
//! All shape parameters flow from one 64-bit seed through a counter-based
//! generator, one stream per image index, so any single image can be
//! regenerated without producing its predecessors and the dataset is
//! byte-identical across platforms and thread counts.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::Image;
use crate::junction::wrap_angle;
use crate::pnm;

/// Side length of every generated image, in pixels.
pub const IMAGE_SIZE: usize = 64;

/// Images per scene family.
pub const PER_TYPE: usize = 100;

/// Total dataset size (three families).
pub const DATASET_SIZE: usize = 3 * PER_TYPE;

/// A ground-truth junction or corner: sub-pixel location plus the
/// directions (degrees, counterclockwise from +x) of the boundary rays
/// leaving it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtVertex {
    /// Location in image coordinates.
    pub point: [f64; 2],
    /// Outgoing boundary directions in degrees, `[0, 360)`.
    pub angles_deg: Vec<f64>,
}

impl GtVertex {
    /// The angle set converted to radians.
    pub fn angles_rad(&self) -> Vec<f64> {
        self.angles_deg.iter().map(|a| a.to_radians()).collect()
    }
}

/// Exact scene geometry accompanying a generated image.
///
/// Serializes to JSON with the boundary polylines and vertex angle sets;
/// the per-pixel `labels` are cheap to regenerate and are not persisted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Image width in pixels.
    pub width: usize,
    /// Image height in pixels.
    pub height: usize,
    /// Boundary curves as polylines in image coordinates; curved shapes
    /// are densely sampled, straight edges are exact two-point segments.
    pub polylines: Vec<Vec<[f64; 2]>>,
    /// Junctions and corners with their outgoing boundary directions.
    pub vertices: Vec<GtVertex>,
    /// Region label per pixel, row-major; empty after deserialization.
    #[serde(skip)]
    pub labels: Vec<u8>,
}

impl GroundTruth {
    /// Rasterizes the boundary: `true` for pixels whose center lies within
    /// half a pixel of any analytic boundary curve.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                let p = [x as f64, y as f64];
                if self.distance_to_boundary(p) <= 0.5 {
                    mask[y * self.width + x] = true;
                }
            }
        }
        mask
    }

    /// Euclidean distance from a point to the nearest boundary curve.
    pub fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        let mut best = f64::INFINITY;
        for line in &self.polylines {
            for seg in line.windows(2) {
                best = best.min(segment_distance(p, seg[0], seg[1]));
            }
        }
        best
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let (px, py) = (p[0] - a[0], p[1] - a[1]);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        ((px * ex + py * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((px - t * ex).powi(2) + (py - t * ey).powi(2)).sqrt()
}

/// Scene family of a dataset index: 1 (blobs), 2 (squares), 3 (junctions).
pub fn scene_type(index: usize) -> u8 {
    assert!(index < DATASET_SIZE, "dataset index {index} out of range");
    (index / PER_TYPE) as u8 + 1
}

/// Generates the dataset image at `index` with its ground truth.
///
/// Each index draws from its own random stream, so images can be produced
/// independently and in any order.
pub fn generate_image(seed: u64, index: usize) -> (Image, GroundTruth) {
    let kind = scene_type(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    match kind {
        1 => blob_scene(&mut rng),
        2 => square_scene(&mut rng),
        _ => junction_scene(&mut rng),
    }
}

/// Generates all 300 images, in index order.
pub fn generate_dataset(seed: u64) -> Vec<(Image, GroundTruth)> {
    (0..DATASET_SIZE)
        .into_par_iter()
        .map(|i| generate_image(seed, i))
        .collect()
}

/// Adds unclipped per-pixel Gaussian noise of standard deviation `sigma`.
///
/// Values may leave `[0, 1]`; the observation model assumes an unclipped
/// Gaussian.  The mask, if any, carries over unchanged.
pub fn add_noise(image: &Image, sigma: f64, seed: u64) -> Image {
    assert!(sigma >= 0.0, "noise level must be non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    let data = image
        .data()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    let mut out = Image::from_data(image.width(), image.height(), image.channels(), data)
        .expect("shape preserved");
    if let Some(mask) = image.mask() {
        out.set_mask(mask.to_vec()).expect("same shape");
    }
    out
}

/// Writes the first `count` dataset images into `dir` as binary PGM files
/// (`img_000.pgm`, …) with one JSON ground-truth file each (`gt_000.json`).
///
/// # Errors
///
/// [`crate::Error::Io`] on any file-system failure.
pub fn write_dataset(dir: &Path, seed: u64, count: usize) -> Result<()> {
    assert!(count <= DATASET_SIZE, "dataset holds {DATASET_SIZE} images");
    fs::create_dir_all(dir)?;
    for i in 0..count {
        let (image, gt) = generate_image(seed, i);
        pnm::write(&dir.join(format!("img_{i:03}.pgm")), &image)?;
        let json = serde_json::to_vec_pretty(&gt).expect("ground truth serializes");
        fs::write(dir.join(format!("gt_{i:03}.json")), json)?;
    }
    Ok(())
}

fn level_image(width: usize, height: usize, labels: &[u8], levels: &[u8]) -> Image {
    Image::from_fn(width, height, 1, |x, y, _| {
        levels[labels[y * width + x] as usize] as f64 / 255.0
    })
}

// --- scene family 1: curved blobs ---------------------------------------

/// Star-convex blob: radius varies with polar angle via two low-order
/// cosine harmonics.
struct Blob {
    center: [f64; 2],
    r0: f64,
    amp: [f64; 2],
    phase: [f64; 2],
}

impl Blob {
    fn radius(&self, theta: f64) -> f64 {
        self.r0
            * (1.0
                + self.amp[0] * (2.0 * theta + self.phase[0]).cos()
                + self.amp[1] * (3.0 * theta + self.phase[1]).cos())
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let theta = dy.atan2(dx);
        (dx * dx + dy * dy).sqrt() < self.radius(theta)
    }

    fn polyline(&self, samples: usize) -> Vec<[f64; 2]> {
        (0..=samples)
            .map(|k| {
                let theta = k as f64 * TAU / samples as f64;
                let r = self.radius(theta);
                [
                    self.center[0] + r * theta.cos(),
                    self.center[1] + r * theta.sin(),
                ]
            })
            .collect()
    }
}

fn sample_blob(rng: &mut ChaCha8Rng, x_range: std::ops::Range<f64>) -> Blob {
    Blob {
        center: [rng.gen_range(x_range), rng.gen_range(14.0..50.0)],
        r0: rng.gen_range(6.0..9.0),
        amp: [rng.gen_range(0.0..0.15), rng.gen_range(0.0..0.15)],
        phase: [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
    }
}

fn blob_scene(rng: &mut ChaCha8Rng) -> (Image, GroundTruth) {
    // Lanes 13–19 and 45–51 keep the maximal radii (≤ 11.7) disjoint and
    // inside the frame.
    let blobs = [
        sample_blob(rng, 13.0..19.0),
        sample_blob(rng, 45.0..51.0),
    ];
    let (w, h) = (IMAGE_SIZE, IMAGE_SIZE);
    let mut labels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = [x as f64, y as f64];
            for (b, blob) in blobs.iter().enumerate() {
                if blob.contains(p) {
                    labels[y * w + x] = b as u8 + 1;
                }
            }
        }
    }
    let levels = [0u8, 128, 255];
    let image = level_image(w, h, &labels, &levels);
    let gt = GroundTruth {
        width: w,
        height: h,
        polylines: blobs.iter().map(|b| b.polyline(512)).collect(),
        vertices: Vec::new(),
        labels,
    };
    (image, gt)
}

// --- scene family 2: rotated squares ------------------------------------

/// Axis-frame square: center, side length, rotation.
pub(crate) struct Square {
    pub(crate) center: [f64; 2],
    pub(crate) side: f64,
    pub(crate) rot: f64,
}

impl Square {
    fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.rot.sin_cos();
        [[c, s], [-s, c]]
    }

    pub(crate) fn corners(&self) -> [[f64; 2]; 4] {
        let half = self.side / 2.0;
        let [u, v] = self.axes();
        let at = |a: f64, b: f64| {
            [
                self.center[0] + a * u[0] + b * v[0],
                self.center[1] + a * u[1] + b * v[1],
            ]
        };
        [
            at(half, half),
            at(-half, half),
            at(-half, -half),
            at(half, -half),
        ]
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        let half = self.side / 2.0;
        self.axes()
            .iter()
            .all(|a| (dx * a[0] + dy * a[1]).abs() < half)
    }
}

/// Separating-axis test: `true` if the squares are at least `gap` apart
/// along some edge normal of either square.
fn squares_separated(a: &Square, b: &Square, gap: f64) -> bool {
    let project = |s: &Square, axis: [f64; 2]| -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in s.corners() {
            let t = c[0] * axis[0] + c[1] * axis[1];
            lo = lo.min(t);
            hi = hi.max(t);
        }
        (lo, hi)
    };
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (alo, ahi) = project(a, axis);
        let (blo, bhi) = project(b, axis);
        if ahi + gap <= blo || bhi + gap <= alo {
            return true;
        }
    }
    false
}

pub(crate) fn render_squares(squares: [Square; 2]) -> (Image, GroundTruth) {
    let (w, h) = (IMAGE_SIZE, IMAGE_SIZE);
    let mut labels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = [x as f64, y as f64];
            for (s, sq) in squares.iter().enumerate() {
                if sq.contains(p) {
                    labels[y * w + x] = s as u8 + 1;
                }
            }
        }
    }
    let levels = [0u8, 128, 255];
    let image = level_image(w, h, &labels, &levels);
    let mut polylines = Vec::new();
    let mut vertices = Vec::new();
    for sq in &squares {
        let c = sq.corners();
        let mut loop_pts: Vec<[f64; 2]> = c.to_vec();
        loop_pts.push(c[0]);
        polylines.push(loop_pts);
        for i in 0..4 {
            let prev = c[(i + 3) % 4];
            let next = c[(i + 1) % 4];
            let to = |q: [f64; 2]| {
                wrap_angle((q[1] - c[i][1]).atan2(q[0] - c[i][0])).to_degrees()
            };
            vertices.push(GtVertex {
                point: c[i],
                angles_deg: vec![to(prev), to(next)],
            });
        }
    }
    let gt = GroundTruth {
        width: w,
        height: h,
        polylines,
        vertices,
        labels,
    };
    (image, gt)
}

fn square_scene(rng: &mut ChaCha8Rng) -> (Image, GroundTruth) {
    let mut sides = [rng.gen_range(16.0..36.0), rng.gen_range(16.0..36.0)];
    loop {
        for _ in 0..200 {
            let place = |rng: &mut ChaCha8Rng, side: f64| -> Square {
                let cr = side / 2.0 * std::f64::consts::SQRT_2;
                Square {
                    center: [
                        rng.gen_range(1.0 + cr..63.0 - cr),
                        rng.gen_range(1.0 + cr..63.0 - cr),
                    ],
                    side,
                    rot: rng.gen_range(0.0..PI / 2.0),
                }
            };
            let a = place(rng, sides[0]);
            let b = place(rng, sides[1]);
            if squares_separated(&a, &b, 2.0) {
                return render_squares([a, b]);
            }
        }
        // Crowded draw: shrink both squares and try again (16-px squares
        // always fit disjointly, so this terminates).
        sides = [(sides[0] - 2.0).max(16.0), (sides[1] - 2.0).max(16.0)];
    }
}

// --- scene family 3: paired triple junctions -----------------------------

/// Geometry of two three-way junctions joined by a shared edge.
///
/// In the frame where the shared edge points along +x, vertex `a` sends
/// rays up-left and down-left, vertex `b` up-right and down-right; the
/// four unbounded faces (top, bottom, left, right) take the four gray
/// levels.
pub(crate) struct JunctionPair {
    pub(crate) a: [f64; 2],
    pub(crate) rot: f64,
    pub(crate) len: f64,
    /// Frame-relative ray angles at `a`: up-left in (π/2, π), down-left in
    /// (π, 3π/2).
    pub(crate) rays_a: [f64; 2],
    /// Frame-relative ray angles at `b`: up-right in (0, π/2), down-right
    /// in (3π/2, 2π).
    pub(crate) rays_b: [f64; 2],
    /// Gray levels of the top, bottom, left, right faces.
    pub(crate) levels: [u8; 4],
}

impl JunctionPair {
    fn b(&self) -> [f64; 2] {
        [
            self.a[0] + self.len * self.rot.cos(),
            self.a[1] + self.len * self.rot.sin(),
        ]
    }

    /// Face of a point: 0 top, 1 bottom, 2 left, 3 right.
    fn face(&self, p: [f64; 2]) -> usize {
        let (s, c) = self.rot.sin_cos();
        let (dx, dy) = (p[0] - self.a[0], p[1] - self.a[1]);
        let fx = c * dx + s * dy;
        let fy = -s * dx + c * dy;
        let ang_a = wrap_angle(fy.atan2(fx));
        if ang_a >= self.rays_a[0] && ang_a <= self.rays_a[1] {
            return 2;
        }
        let ang_b = wrap_angle(fy.atan2(fx - self.len));
        if ang_b >= self.rays_b[1] || ang_b <= self.rays_b[0] {
            return 3;
        }
        usize::from(fy < 0.0)
    }
}

/// Clips the ray `origin + t·dir` to the image frame and returns its exit
/// point.
fn ray_exit(origin: [f64; 2], angle: f64) -> [f64; 2] {
    let hi = (IMAGE_SIZE - 1) as f64;
    let d = [angle.cos(), angle.sin()];
    let mut t = f64::INFINITY;
    for axis in 0..2 {
        if d[axis] > 1e-12 {
            t = t.min((hi - origin[axis]) / d[axis]);
        } else if d[axis] < -1e-12 {
            t = t.min(-origin[axis] / d[axis]);
        }
    }
    [origin[0] + t * d[0], origin[1] + t * d[1]]
}

pub(crate) fn render_junction_pair(pair: &JunctionPair) -> (Image, GroundTruth) {
    let (w, h) = (IMAGE_SIZE, IMAGE_SIZE);
    let mut labels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            labels[y * w + x] = pair.face([x as f64, y as f64]) as u8;
        }
    }
    let image = level_image(w, h, &labels, &pair.levels);
    let a = pair.a;
    let b = pair.b();
    let ray = |p: [f64; 2], frame_angle: f64| -> Vec<[f64; 2]> {
        let abs = wrap_angle(pair.rot + frame_angle);
        vec![p, ray_exit(p, abs)]
    };
    let polylines = vec![
        vec![a, b],
        ray(a, pair.rays_a[0]),
        ray(a, pair.rays_a[1]),
        ray(b, pair.rays_b[0]),
        ray(b, pair.rays_b[1]),
    ];
    let deg = |frame_angle: f64| wrap_angle(pair.rot + frame_angle).to_degrees();
    let vertices = vec![
        GtVertex {
            point: a,
            angles_deg: vec![deg(0.0), deg(pair.rays_a[0]), deg(pair.rays_a[1])],
        },
        GtVertex {
            point: b,
            angles_deg: vec![deg(PI), deg(pair.rays_b[0]), deg(pair.rays_b[1])],
        },
    ];
    let gt = GroundTruth {
        width: w,
        height: h,
        polylines,
        vertices,
        labels,
    };
    (image, gt)
}

fn junction_scene(rng: &mut ChaCha8Rng) -> (Image, GroundTruth) {
    // Junctions stay at least 21 px (the largest supported patch size)
    // from every border.
    let a = [rng.gen_range(21.0..43.0), rng.gen_range(21.0..43.0)];
    let (rot, len) = loop {
        let rot = rng.gen_range(0.0..TAU);
        let len = rng.gen_range(12.0..22.0);
        let b = [a[0] + len * rot.cos(), a[1] + len * rot.sin()];
        if (21.0..=43.0).contains(&b[0]) && (21.0..=43.0).contains(&b[1]) {
            break (rot, len);
        }
    };
    let m = 0.25;
    let mut levels = [0u8, 85, 170, 255];
    levels.shuffle(rng);
    let pair = JunctionPair {
        a,
        rot,
        len,
        rays_a: [
            rng.gen_range(PI / 2.0 + m..PI - m),
            rng.gen_range(PI + m..1.5 * PI - m),
        ],
        rays_b: [
            rng.gen_range(m..PI / 2.0 - m),
            rng.gen_range(1.5 * PI + m..TAU - m),
        ],
        levels,
    };
    render_junction_pair(&pair)
}
