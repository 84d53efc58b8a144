//! End-to-end analysis: image in, junction field and derived maps out.
//!
//! [`analyze_image`] chains the full pipeline — patch grid construction,
//! per-patch coordinate-descent initialization, closed-form colors, joint
//! gradient refinement, and global map assembly — and returns everything a
//! caller might want: the fitted field, the boundary map, the
//! boundary-aware smoothed image, the vertex-likelihood map, and the
//! discrete vertex detections.
//!
//! The worker thread count comes from the configuration (0 = all cores);
//! results are bit-identical for any thread count because every parallel
//! stage reduces in patch order.  [`FieldDump`] is the stable serialized
//! form of a fitted field.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colors::{field_colors, ColorBlend};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::global::{detect_vertices, vertex_map, GlobalMaps, VertexDetection};
use crate::grid::PatchGrid;
use crate::image::{Image, ScalarField};
use crate::init::initialize_patch;
use crate::junction::{FieldOfJunctions, JunctionParams, WedgeColors};
use crate::likelihood::Indicators;
use crate::refine::{refine_impl, Ramp};

/// Everything produced by one run of the pipeline.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// The fitted junction field.
    pub field: FieldOfJunctions,
    /// Global boundary map, in `[0, 1]`.
    pub boundary: ScalarField,
    /// Boundary-aware smoothed image.
    pub smoothed: Image,
    /// Vertex-likelihood map (unnormalized votes).
    pub vertex_map: ScalarField,
    /// Thresholded, non-maximum-suppressed vertex detections.
    pub detections: Vec<VertexDetection>,
}

fn analyze_impl(
    image: &Image,
    cfg: &Config,
    sink: Option<&mut dyn Write>,
) -> Result<Analysis> {
    cfg.validate()?;
    let grid = PatchGrid::build(image.width(), image.height(), cfg.patch_size, cfg.stride)?;
    let params: Vec<JunctionParams> = (0..grid.len())
        .into_par_iter()
        .map(|i| initialize_patch(image, grid.patch(i), cfg))
        .collect();
    let colors = field_colors(
        image,
        &grid,
        &params,
        cfg.color_model,
        Indicators::Relaxed(cfg.eta_pixels()),
        ColorBlend::none(),
    );
    let field = FieldOfJunctions::new(grid, params, colors);
    let field = refine_impl(field, image, cfg, sink, Ramp::Linear)?;
    let maps = GlobalMaps::compute(&field, cfg.eta_pixels(), cfg.delta_pixels());
    let (gamma, nu_d, rho) = (cfg.gamma_value(), cfg.nu_d_value(), cfg.nms_radius_value());
    let votes = vertex_map(&field, gamma, nu_d, cfg.nu_e);
    let detections = detect_vertices(
        &votes,
        &field,
        gamma,
        nu_d,
        cfg.nu_e,
        cfg.detect_threshold,
        rho,
    );
    Ok(Analysis {
        field,
        boundary: maps.boundary,
        smoothed: maps.color,
        vertex_map: votes,
        detections,
    })
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return job();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build {threads}-thread pool: {e}")))?
        .install(job)
}

/// Runs the full pipeline on one image.
///
/// # Errors
///
/// [`Error::Config`] or [`Error::Grid`] for invalid settings,
/// [`Error::NonFiniteGradient`] if refinement encounters non-finite values
/// (e.g. infinities in the input).
pub fn analyze_image(image: &Image, cfg: &Config) -> Result<Analysis> {
    in_pool(cfg.threads, || analyze_impl(image, cfg, None))
}

/// Like [`analyze_image`], writing one CSV row of refinement metrics per
/// iteration into `sink` (buffered until the run finishes).
///
/// # Errors
///
/// As [`analyze_image`], plus [`Error::Io`] if writing to `sink` fails.
pub fn analyze_logged(
    image: &Image,
    cfg: &Config,
    sink: &mut dyn Write,
) -> Result<Analysis> {
    let mut log = Vec::new();
    let out = in_pool(cfg.threads, || analyze_impl(image, cfg, Some(&mut log)))?;
    sink.write_all(&log)?;
    Ok(out)
}

/// Serialized form of a fitted field: grid geometry plus per-patch
/// parameters in image coordinates (angles in radians).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDump {
    /// Analyzed image width in pixels.
    pub image_width: usize,
    /// Analyzed image height in pixels.
    pub image_height: usize,
    /// Patch side length.
    pub patch_size: usize,
    /// Patch grid stride.
    pub stride: usize,
    /// One entry per patch, in grid (row-major) order.
    pub patches: Vec<PatchDump>,
}

/// One patch of a [`FieldDump`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchDump {
    /// Patch origin (left column).
    pub x0: usize,
    /// Patch origin (top row).
    pub y0: usize,
    /// Junction angles in radians, ascending in `[0, 2π)`.
    pub angles: Vec<f64>,
    /// Junction vertex in image coordinates.
    pub vertex: [f64; 2],
    /// Fitted wedge colors.
    pub colors: WedgeColors,
}

impl FieldDump {
    /// Snapshots a field into its serialized form.
    pub fn from_field(field: &FieldOfJunctions) -> Self {
        let grid = field.grid();
        let patches = (0..grid.len())
            .map(|i| {
                let rect = grid.patch(i);
                let p = &field.params()[i];
                PatchDump {
                    x0: rect.x0,
                    y0: rect.y0,
                    angles: p.angles.clone(),
                    vertex: p.vertex,
                    colors: field.colors()[i].clone(),
                }
            })
            .collect();
        FieldDump {
            image_width: grid.image_width(),
            image_height: grid.image_height(),
            patch_size: grid.patch_size(),
            stride: grid.stride(),
            patches,
        }
    }
}
