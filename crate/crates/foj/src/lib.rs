//! Boundary-structure analysis by fields of junctions.
//!
//! This crate recovers the boundary structure of an image — contours,
//! corners, and junctions — by fitting a small geometric model to *every*
//! image patch and then asking the overlapping fits to vote. The per-patch
//! model is a generalized junction: M rays leaving a movable vertex, each
//! pair of consecutive rays bounding a wedge of (near-)constant color.
//! Straight edges, corners, T- and Y-junctions are all special cases of one
//! parameterization, so a single fitting procedure handles them uniformly
//! and degrades gracefully under noise, where classical edge detectors
//! break down.
//!
//! The pipeline has three stages:
//!
//! 1. **Initialization** ([`init`]): a coordinate-descent search per patch,
//!    using an angular histogram to evaluate every candidate in time
//!    independent of patch size.
//! 2. **Refinement** ([`refine`]): joint gradient descent on all patches,
//!    coupling overlapping patches through consensus terms so their
//!    boundaries and colors agree where they overlap.
//! 3. **Aggregation** ([`global`]): averaging the per-patch fits into a
//!    global boundary map, a boundary-aware smoothed image, and a set of
//!    vertex detections with their ray angles.
//!
//! [`pipeline::analyze_image`] runs all three and is the main entry point:
//!
//! ```
//! use foj::{analyze_image, Config, Image};
//!
//! // A 24x24 image, dark on the left, bright on the right.
//! let image = Image::from_fn(24, 24, 1, |x, _, _| if x < 12 { 0.1 } else { 0.9 });
//! let cfg = Config {
//!     patch_size: 9,
//!     stride: 3,
//!     n_init: 4,
//!     n_iter: 10,
//!     angle_samples: 24,
//!     vertex_samples: 10,
//!     reinit_every: 0,
//!     ..Config::default()
//! };
//! let analysis = analyze_image(&image, &cfg)?;
//!
//! // The boundary map ridges along the contrast edge at x = 11.5, standing
//! // well above the flat interior on either side.
//! let on = analysis.boundary.get(11, 12).max(analysis.boundary.get(12, 12));
//! let off = analysis.boundary.get(4, 12);
//! assert!(on > 2.0 * off);
//!
//! // Smoothing is boundary-aware: each side keeps its plateau value instead
//! // of blurring across the edge.
//! assert!((analysis.smoothed.pixel(4, 12)[0] - 0.1).abs() < 0.05);
//! assert!((analysis.smoothed.pixel(19, 12)[0] - 0.9).abs() < 0.05);
//! # Ok::<(), foj::Error>(())
//! ```
//!
//! The [`cli`] module exposes the same pipeline as the `foj` binary, plus a
//! synthetic benchmark generator ([`eval::dataset`]) and scoring tools
//! ([`eval::metrics`]).

pub mod cli;
pub mod colors;
pub mod config;
pub mod dual;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod global;
pub mod grid;
pub mod image;
pub mod junction;
pub mod init;
pub mod likelihood;
pub mod pipeline;
pub mod pnm;
pub mod refine;

pub use config::{ColorModel, Config};
pub use error::{Error, Result};
pub use global::{GlobalMaps, VertexDetection};
pub use image::{Image, ScalarField};
pub use junction::{FieldOfJunctions, JunctionParams, LinearColor, WedgeColors};
pub use likelihood::Indicators;
pub use pipeline::{analyze_image, analyze_logged, Analysis, FieldDump};

/// Compiles every code block in the guide, keeping the book in sync with
/// the library. Each hidden module's documentation is one chapter.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(junction_model, "../../../book/src/junction-model.md");
    chapter!(patch_costs, "../../../book/src/patch-costs.md");
    chapter!(initialization, "../../../book/src/initialization.md");
    chapter!(refinement, "../../../book/src/refinement.md");
    chapter!(global_maps, "../../../book/src/global-maps.md");
    chapter!(
        dataset_and_metrics,
        "../../../book/src/dataset-and-metrics.md"
    );
    chapter!(cli_chapter, "../../../book/src/cli.md");
}
