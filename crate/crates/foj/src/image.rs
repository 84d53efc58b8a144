//! Image and scalar-map containers.
//!
//! Everything downstream works on `f64` samples in `[0, 1]` (values outside
//! that range are legal; noisy inputs are deliberately not clipped).  Pixels
//! are addressed as `(x, y)` with `x` growing rightwards, `y` growing
//! downwards, and the sample for pixel `(x, y)` of channel `c` stored at
//! `(y * width + x) * channels + c`.
//!
//! An optional per-pixel mask marks samples as unobserved; masked pixels are
//! excluded from every data sum during fitting, while model outputs (boundary,
//! smoothed color, vertex maps) stay defined everywhere.  That asymmetry is
//! what makes missing-value filling work: the model is fit to the observed
//! pixels only and then evaluated over the full raster.

use crate::error::{Error, Result};

/// A `channels`-deep raster of `f64` samples with an optional validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl Image {
    /// Creates an all-zero image.
    ///
    /// # Panics
    ///
    /// Panics if any dimension is zero.
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(width > 0 && height > 0 && channels > 0, "empty image");
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
            mask: None,
        }
    }

    /// Wraps an existing interleaved sample buffer.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Image`] if the buffer length does not equal
    /// `width * height * channels` or any dimension is zero.
    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Image("image dimensions must be positive".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Image(format!(
                "buffer holds {} samples, expected {}x{}x{} = {}",
                data.len(),
                width,
                height,
                channels,
                width * height * channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            mask: None,
        })
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        img
    }

    /// Image width in pixels.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Image height in pixels.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of channels per pixel.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Raw interleaved samples.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// All samples of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let at = (y * self.width + x) * self.channels;
        &self.data[at..at + self.channels]
    }

    /// Mutable samples of pixel `(x, y)`.
    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let at = (y * self.width + x) * self.channels;
        &mut self.data[at..at + self.channels]
    }

    /// Single sample of channel `c` at `(x, y)`.
    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Installs a per-pixel validity mask (`true` = observed).
    ///
    /// # Errors
    ///
    /// Returns [`Error::Image`] if the mask length is not `width * height`.
    pub fn set_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.width * self.height {
            return Err(Error::Image(format!(
                "mask holds {} entries, expected {}",
                mask.len(),
                self.width * self.height
            )));
        }
        self.mask = Some(mask);
        Ok(())
    }

    /// Removes the validity mask; every pixel counts as observed again.
    pub fn clear_mask(&mut self) {
        self.mask = None;
    }

    /// Whether pixel `(x, y)` carries observed data.
    #[inline]
    pub fn is_observed(&self, x: usize, y: usize) -> bool {
        match &self.mask {
            Some(m) => m[y * self.width + x],
            None => true,
        }
    }

    /// Whether any pixel is masked out.
    pub fn has_mask(&self) -> bool {
        self.mask.is_some()
    }

    /// The validity mask, if one is installed (`true` = observed).
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }
}

/// A single-channel `f64` map, used for boundary and vertex-likelihood fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    /// Creates an all-zero field.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Field width in pixels.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Field height in pixels.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw row-major values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable raw values.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Value at `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sets the value at `(x, y)`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Largest value in the field (0 for an empty field).
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
