//! Junction parameters, wedge colors, and the per-image field of junctions.
//!
//! A generalized M-junction is a vertex plus M boundary-ray angles.  Sorted
//! angles split the plane around the vertex into M wedges: wedge `j` spans the
//! counterclockwise sector from `angles[j]` to `angles[j + 1]` (wrapping back
//! to `angles[0]` for the last wedge).  Coincident angles are legal and simply
//! produce zero-width wedges, which is how the same parameterization covers
//! uniform regions, straight edges, bars, and corners.

use serde::{Deserialize, Serialize};

use crate::grid::PatchGrid;
use std::f64::consts::TAU;

/// Wraps an angle to `[0, 2π)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r < 0.0 {
        r += TAU;
    }
    r
}

/// One junction: sorted boundary-ray angles plus a free vertex.
///
/// The vertex is stored in image pixel coordinates and may lie outside the
/// patch that owns the junction: distant vertices are exactly how nearly
/// straight boundaries are represented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    /// Boundary-ray angles in radians, non-decreasing within `[0, 2π)`.
    pub angles: Vec<f64>,
    /// Vertex position `(x, y)` in image coordinates.
    pub vertex: [f64; 2],
}

impl JunctionParams {
    /// Builds a junction in canonical form (angles wrapped and sorted).
    ///
    /// # Panics
    ///
    /// Panics if any coordinate or angle is non-finite; parameters always
    /// originate from bounded searches or guarded gradient steps, so a
    /// non-finite value here is a programming error.
    pub fn new(angles: Vec<f64>, vertex: [f64; 2]) -> Self {
        assert!(
            angles.iter().all(|a| a.is_finite()) && vertex.iter().all(|v| v.is_finite()),
            "junction parameters must be finite"
        );
        let mut p = Self { angles, vertex };
        p.canonicalize();
        p
    }

    /// Re-establishes canonical form: every angle wrapped to `[0, 2π)`, then
    /// stably sorted so coincident angles keep their relative order.
    pub fn canonicalize(&mut self) {
        for a in &mut self.angles {
            *a = wrap_angle(*a);
        }
        self.angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    /// Whether the angle list is already canonical.
    pub fn is_canonical(&self) -> bool {
        self.angles.windows(2).all(|w| w[0] <= w[1])
            && self.angles.iter().all(|&a| (0.0..TAU).contains(&a))
    }

    /// Number of wedges M.
    pub fn order(&self) -> usize {
        self.angles.len()
    }
}

/// Affine color for one wedge: `value(c) = ax[c]·x + ay[c]·y + offset[c]` in
/// patch-local coordinates (origin at the patch center).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearColor {
    /// Horizontal slope per channel.
    pub ax: Vec<f64>,
    /// Vertical slope per channel.
    pub ay: Vec<f64>,
    /// Value at the patch center per channel.
    pub offset: Vec<f64>,
}

/// Per-wedge color model of one junction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WedgeColors {
    /// One constant color per wedge (outer index wedge, inner channel).
    Constant(Vec<Vec<f64>>),
    /// One affine color per wedge.
    Linear(Vec<LinearColor>),
}

impl WedgeColors {
    /// Number of wedges the model covers.
    pub fn wedges(&self) -> usize {
        match self {
            WedgeColors::Constant(c) => c.len(),
            WedgeColors::Linear(l) => l.len(),
        }
    }

    /// Number of channels per color.
    pub fn channels(&self) -> usize {
        match self {
            WedgeColors::Constant(c) => c.first().map_or(0, Vec::len),
            WedgeColors::Linear(l) => l.first().map_or(0, |lc| lc.offset.len()),
        }
    }

    /// Color of wedge `j`, channel `c`, at patch-local coordinates `(lx, ly)`.
    #[inline]
    pub fn eval(&self, j: usize, c: usize, lx: f64, ly: f64) -> f64 {
        match self {
            WedgeColors::Constant(w) => w[j][c],
            WedgeColors::Linear(w) => {
                let lc = &w[j];
                lc.ax[c] * lx + lc.ay[c] * ly + lc.offset[c]
            }
        }
    }
}

/// Every patch's junction parameters and wedge colors over one image.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldOfJunctions {
    grid: PatchGrid,
    params: Vec<JunctionParams>,
    colors: Vec<WedgeColors>,
}

impl FieldOfJunctions {
    /// Bundles a grid with per-patch parameters and colors.
    ///
    /// # Panics
    ///
    /// Panics if the vectors do not have exactly one entry per patch; the
    /// constructors in `init` and `refine` always produce matching lengths.
    pub fn new(grid: PatchGrid, params: Vec<JunctionParams>, colors: Vec<WedgeColors>) -> Self {
        assert_eq!(params.len(), grid.len(), "one junction per patch");
        assert_eq!(colors.len(), grid.len(), "one color set per patch");
        Self {
            grid,
            params,
            colors,
        }
    }

    /// The patch layout this field was fit on.
    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    /// Junction parameters of every patch, indexed like the grid.
    pub fn params(&self) -> &[JunctionParams] {
        &self.params
    }

    /// Wedge colors of every patch, indexed like the grid.
    pub fn colors(&self) -> &[WedgeColors] {
        &self.colors
    }

}
