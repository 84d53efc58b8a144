//! Patch grid: which R×R windows are fit, and which patches cover a pixel.
//!
//! Patches are square, odd-sided windows placed every `stride` pixels.  Edge
//! patches are clamped so they stay inside the image — no padding is ever
//! synthesized — which keeps every patch a faithful view of real samples at
//! the cost of slightly denser coverage near the borders.  The grid guarantees
//! that the union of all patches is the full image for any valid
//! `(patch_size, stride)`.

use crate::error::{Error, Result};

/// Placement of all patches over an image.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    image_width: usize,
    image_height: usize,
    patch_size: usize,
    stride: usize,
    /// Distinct left edges of patch columns, ascending.
    xs: Vec<usize>,
    /// Distinct top edges of patch rows, ascending.
    ys: Vec<usize>,
    /// For every pixel column, the half-open range of `xs` indices whose
    /// patches cover it.
    cover_x: Vec<(u32, u32)>,
    /// Same per pixel row, into `ys`.
    cover_y: Vec<(u32, u32)>,
}

/// One patch's window, in image coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchRect {
    /// Leftmost pixel column of the window.
    pub x0: usize,
    /// Topmost pixel row of the window.
    pub y0: usize,
    /// Side length (odd).
    pub size: usize,
}

impl PatchRect {
    /// Center pixel of the window; well-defined because `size` is odd.
    #[inline]
    pub fn center(&self) -> (usize, usize) {
        let h = (self.size - 1) / 2;
        (self.x0 + h, self.y0 + h)
    }

    /// Whether `(x, y)` lies inside the window.
    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.size && y >= self.y0 && y < self.y0 + self.size
    }
}

/// Clamped corner positions along one axis: `0, stride, 2·stride, …` with the
/// final corner pulled back so the last patch ends exactly at the image edge.
fn corners(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let last = extent - size;
    let mut out = Vec::with_capacity(last / stride + 2);
    let mut at = 0;
    while at < last {
        out.push(at);
        at += stride;
    }
    out.push(last);
    out
}

/// For each pixel along an axis, the contiguous range of corner indices whose
/// windows contain it.
fn coverage(extent: usize, size: usize, corners: &[usize]) -> Vec<(u32, u32)> {
    (0..extent)
        .map(|p| {
            let min_corner = p.saturating_sub(size - 1);
            let lo = corners.partition_point(|&c| c < min_corner);
            let hi = corners.partition_point(|&c| c <= p);
            debug_assert!(lo < hi, "pixel {p} not covered");
            (lo as u32, hi as u32)
        })
        .collect()
}

impl PatchGrid {
    /// Lays out patches of side `patch_size` every `stride` pixels over a
    /// `width` × `height` image.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Grid`] when `patch_size` is even, below 3, or larger
    /// than the smaller image dimension, and when `stride` is zero or larger
    /// than `patch_size` (which would leave pixels uncovered).
    pub fn build(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size < 3 || patch_size % 2 == 0 {
            return Err(Error::Grid(format!(
                "patch size must be odd and at least 3, got {patch_size}"
            )));
        }
        if patch_size > width.min(height) {
            return Err(Error::Grid(format!(
                "patch size {patch_size} exceeds image extent {width}x{height}"
            )));
        }
        if stride == 0 {
            return Err(Error::Grid("stride must be positive".into()));
        }
        if stride > patch_size {
            return Err(Error::Grid(format!(
                "stride {stride} exceeds patch size {patch_size}; pixels would go uncovered"
            )));
        }
        let xs = corners(width, patch_size, stride);
        let ys = corners(height, patch_size, stride);
        let cover_x = coverage(width, patch_size, &xs);
        let cover_y = coverage(height, patch_size, &ys);
        Ok(Self {
            image_width: width,
            image_height: height,
            patch_size,
            stride,
            xs,
            ys,
            cover_x,
            cover_y,
        })
    }

    /// Number of patches.
    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    /// Whether the grid holds no patches (never true for a valid grid).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Patches per row (distinct horizontal positions).
    pub fn cols(&self) -> usize {
        self.xs.len()
    }

    /// Patches per column (distinct vertical positions).
    pub fn rows(&self) -> usize {
        self.ys.len()
    }

    /// Side length of every patch.
    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    /// Stride between patch corners.
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Width of the underlying image.
    pub fn image_width(&self) -> usize {
        self.image_width
    }

    /// Height of the underlying image.
    pub fn image_height(&self) -> usize {
        self.image_height
    }

    /// Window of patch `i`; patches are indexed row-major.
    #[inline]
    pub fn patch(&self, i: usize) -> PatchRect {
        let cols = self.xs.len();
        PatchRect {
            x0: self.xs[i % cols],
            y0: self.ys[i / cols],
            size: self.patch_size,
        }
    }

    /// Indices of all patches containing pixel `(x, y)`, ascending.
    pub fn patches_containing(&self, x: usize, y: usize) -> impl Iterator<Item = usize> + '_ {
        let (cx0, cx1) = self.cover_x[x];
        let (cy0, cy1) = self.cover_y[y];
        let cols = self.xs.len();
        (cy0..cy1).flat_map(move |ry| (cx0..cx1).map(move |rx| ry as usize * cols + rx as usize))
    }

    /// How many patches contain pixel `(x, y)`.
    #[inline]
    pub fn coverage_count(&self, x: usize, y: usize) -> usize {
        let (cx0, cx1) = self.cover_x[x];
        let (cy0, cy1) = self.cover_y[y];
        (cx1 - cx0) as usize * (cy1 - cy0) as usize
    }

    /// Per-axis coverage ranges, used by the pixel-major accumulation loops.
    #[inline]
    pub(crate) fn cover_ranges(&self, x: usize, y: usize) -> (u32, u32, u32, u32) {
        let (cx0, cx1) = self.cover_x[x];
        let (cy0, cy1) = self.cover_y[y];
        (cx0, cx1, cy0, cy1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force reference for `patches_containing`.
    fn contained_by_scan(grid: &PatchGrid, x: usize, y: usize) -> Vec<usize> {
        (0..grid.len())
            .filter(|&i| grid.patch(i).contains(x, y))
            .collect()
    }

    #[test]
    fn single_patch_grid() {
        let g = PatchGrid::build(5, 5, 5, 1).unwrap();
        assert_eq!(g.len(), 1);
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(g.patches_containing(x, y).collect::<Vec<_>>(), vec![0]);
            }
        }
    }

    #[test]
    fn seven_by_seven_unit_stride() {
        let g = PatchGrid::build(7, 7, 5, 1).unwrap();
        assert_eq!(g.len(), 9);
        // The center pixel lies in every patch.
        assert_eq!(g.coverage_count(3, 3), 9);
        assert_eq!(
            g.patches_containing(3, 3).collect::<Vec<_>>(),
            (0..9).collect::<Vec<_>>()
        );
    }

    #[test]
    fn seven_by_seven_stride_two_still_covers() {
        let g = PatchGrid::build(7, 7, 5, 2).unwrap();
        assert_eq!(g.len(), 4);
        for y in 0..7 {
            for x in 0..7 {
                assert!(g.coverage_count(x, y) >= 1, "pixel ({x},{y}) uncovered");
            }
        }
    }

    #[test]
    fn interior_coverage_at_unit_stride_is_patch_area() {
        let g = PatchGrid::build(20, 20, 7, 1).unwrap();
        // Any pixel at least patch_size-1 from every border is in R^2 patches.
        assert_eq!(g.coverage_count(9, 9), 49);
        assert_eq!(g.coverage_count(6, 10), 49);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(matches!(
            PatchGrid::build(10, 10, 4, 1),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            PatchGrid::build(10, 10, 11, 1),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            PatchGrid::build(10, 10, 5, 0),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            PatchGrid::build(10, 10, 5, 7),
            Err(Error::Grid(_))
        ));
        assert!(matches!(PatchGrid::build(10, 10, 1, 1), Err(Error::Grid(_))));
    }

    #[test]
    fn patch_centers_are_clamped_inside() {
        let g = PatchGrid::build(11, 9, 5, 4).unwrap();
        for i in 0..g.len() {
            let p = g.patch(i);
            assert!(p.x0 + p.size <= 11);
            assert!(p.y0 + p.size <= 9);
        }
    }

    proptest! {
        #[test]
        fn every_pixel_covered_and_ranges_match_scan(
            w in 5usize..40,
            h in 5usize..40,
            r_half in 1usize..8,
            s in 1usize..8,
        ) {
            let r = 2 * r_half + 1;
            prop_assume!(r <= w.min(h) && s <= r);
            let g = PatchGrid::build(w, h, r, s).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let got: Vec<usize> = g.patches_containing(x, y).collect();
                    prop_assert!(!got.is_empty());
                    prop_assert_eq!(&got, &contained_by_scan(&g, x, y));
                    prop_assert_eq!(got.len(), g.coverage_count(x, y));
                }
            }
        }
    }
}
