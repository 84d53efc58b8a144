//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Configuration and shape problems are reported before any numeric work
/// starts; [`Error::NonFiniteGradient`] is the one failure that can surface
/// mid-optimization and names the offending patch so the input can be
/// inspected.
#[derive(Debug, Error)]
pub enum Error {
    /// A [`crate::Config`] field is out of its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Patch size / stride / image shape cannot form a valid grid.
    #[error("invalid patch grid: {0}")]
    Grid(String),

    /// Image buffer shape or content is inconsistent.
    #[error("invalid image: {0}")]
    Image(String),

    /// The refinement objective produced a NaN or infinite gradient.
    #[error("non-finite gradient while refining patch {patch}")]
    NonFiniteGradient {
        /// Index of the patch whose local objective misbehaved.
        patch: usize,
    },

    /// Malformed data for one of the supported file formats.
    #[error("malformed {format} data: {reason}")]
    Codec {
        /// Short format name, e.g. `"pnm"` or `"json"`.
        format: &'static str,
        /// Human-readable description of the defect.
        reason: String,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
