//! Pipeline configuration.
//!
//! One `Config` drives the whole analyze pipeline.  Every knob has the
//! default the method was tuned with; the patch-size-dependent detector
//! scales (`gamma`, `nu_d`, `nms_radius`) default to `None`, meaning "derive
//! from the patch size" (`2R`, `R/2`, `R/2` respectively).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-wedge color model fitted inside each patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorModel {
    /// One constant color per wedge.
    Constant,
    /// One affine (linear-in-position) color per wedge.
    Linear,
}

/// All tunables of the analyze pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Patch side length R; odd, at least 3.
    pub patch_size: usize,
    /// Wedge count M per junction; 3 or 4.
    pub order: usize,
    /// Patch grid stride; 1 fits a patch at every pixel.
    pub stride: usize,
    /// Color model for every wedge.
    pub color_model: ColorModel,
    /// Weight of the boundary-consensus term.
    pub lambda_boundary: f64,
    /// Weight of the color-consensus term.
    pub lambda_color: f64,
    /// Wedge softness: half-width of the smoothed step used for wedge
    /// membership, in patch half-widths (see [`Config::half_width`]).
    pub eta: f64,
    /// Boundary-map width of the ridge drawn along wedge boundaries, in
    /// patch half-widths (see [`Config::half_width`]).
    pub delta: f64,
    /// Coordinate-descent rounds of the per-patch initializer.
    pub n_init: usize,
    /// Gradient-refinement iterations.
    pub n_iter: usize,
    /// Adam step size for vertex coordinates, in patch half-widths per
    /// step (see [`Config::half_width`]).
    pub lr_vertex: f64,
    /// Adam step size for angles (radians per step).
    pub lr_angle: f64,
    /// Number of candidate angles searched per coordinate update.
    pub angle_samples: usize,
    /// Number of candidate positions searched per vertex coordinate.
    pub vertex_samples: usize,
    /// Re-run one initializer round every this many refinement iterations;
    /// 0 disables the interleave.
    pub reinit_every: usize,
    /// Adam first-moment decay.
    pub adam_beta1: f64,
    /// Adam second-moment decay.
    pub adam_beta2: f64,
    /// Adam denominator floor.
    pub adam_epsilon: f64,
    /// Locality width of vertex votes: votes from junctions whose vertex
    /// sits far from its patch center are down-weighted by a Gaussian of
    /// this width.  `None` derives `2R`, spanning the whole range the
    /// optimizer allows a vertex to roam.
    pub gamma: Option<f64>,
    /// Width of the Gaussian vote each junction casts around its vertex;
    /// `None` derives `R/2`.  Keeping this near the vertex-localization
    /// uncertainty lets nearby junctions stay separate maxima.
    pub nu_d: Option<f64>,
    /// Angle-degeneracy suppression exponent of vertex votes.
    pub nu_e: f64,
    /// Keep local maxima of the vertex map at or above this fraction of the
    /// global maximum.
    pub detect_threshold: f64,
    /// Non-maximum-suppression radius between detections; `None` derives
    /// `R/2`.
    pub nms_radius: Option<f64>,
    /// Seed for every random draw (noise, dataset sampling).
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            patch_size: 21,
            order: 3,
            stride: 1,
            color_model: ColorModel::Constant,
            lambda_boundary: 0.5,
            lambda_color: 0.1,
            eta: 0.01,
            delta: 0.1,
            n_init: 30,
            n_iter: 1000,
            lr_vertex: 0.03,
            lr_angle: 0.003,
            angle_samples: 100,
            vertex_samples: 100,
            reinit_every: 50,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            gamma: None,
            nu_d: None,
            nu_e: 2.0,
            detect_threshold: 0.3,
            nms_radius: None,
            seed: 0,
            threads: 0,
        }
    }
}

impl Config {
    /// Checks every field against its documented range.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Config`] naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size % 2 == 0 {
            return Err(Error::Config(format!(
                "patch_size must be odd and at least 3, got {}",
                self.patch_size
            )));
        }
        if self.order != 3 && self.order != 4 {
            return Err(Error::Config(format!("order must be 3 or 4, got {}", self.order)));
        }
        if self.stride == 0 || self.stride > self.patch_size {
            return Err(Error::Config(format!(
                "stride must be in 1..=patch_size, got {}",
                self.stride
            )));
        }
        if !(self.lambda_boundary >= 0.0) || !(self.lambda_color >= 0.0) {
            return Err(Error::Config("consensus weights must be non-negative".into()));
        }
        if !(self.eta > 0.0) || !(self.delta > 0.0) {
            return Err(Error::Config("eta and delta must be positive".into()));
        }
        if self.angle_samples < self.order {
            return Err(Error::Config(format!(
                "angle_samples must be at least the junction order, got {}",
                self.angle_samples
            )));
        }
        if self.vertex_samples == 0 {
            return Err(Error::Config("vertex_samples must be positive".into()));
        }
        if !(self.lr_vertex > 0.0) || !(self.lr_angle > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("Adam decays must lie in [0, 1)".into()));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        for (name, v) in [("gamma", self.gamma), ("nu_d", self.nu_d), ("nms_radius", self.nms_radius)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::Config(format!("{name} must be positive when given")));
                }
            }
        }
        if !(self.nu_e >= 0.0) {
            return Err(Error::Config("nu_e must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.detect_threshold) {
            return Err(Error::Config("detect_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Vertex-vote kernel width, deriving `2R` when unset.
    pub fn gamma_value(&self) -> f64 {
        self.gamma.unwrap_or(2.0 * self.patch_size as f64)
    }

    /// Vote distance-credibility scale, deriving `R/2` when unset.
    pub fn nu_d_value(&self) -> f64 {
        self.nu_d.unwrap_or(self.patch_size as f64 / 2.0)
    }

    /// Detection suppression radius, deriving `R/2` when unset.
    pub fn nms_radius_value(&self) -> f64 {
        self.nms_radius.unwrap_or(self.patch_size as f64 / 2.0)
    }

    /// Half the patch extent, `(R − 1)/2`, in pixels.
    ///
    /// `eta`, `delta`, and `lr_vertex` are expressed in units of this
    /// length, so their effect scales with the patch: the wedge-membership
    /// blur, the boundary ridge, and the vertex step size all stay a fixed
    /// *fraction* of the patch across patch sizes.
    pub fn half_width(&self) -> f64 {
        (self.patch_size - 1) as f64 / 2.0
    }

    /// Wedge-membership smoothing half-width in pixels.
    pub fn eta_pixels(&self) -> f64 {
        self.eta * self.half_width()
    }

    /// Boundary-ridge width in pixels.
    pub fn delta_pixels(&self) -> f64 {
        self.delta * self.half_width()
    }

    /// Vertex Adam step size in pixels per step.
    pub fn lr_vertex_pixels(&self) -> f64 {
        self.lr_vertex * self.half_width()
    }
}
