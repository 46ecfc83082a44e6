//! Hole masks and the region algebra around them.
//!
//! A mask labels each pixel as hole (the inpainting region `O`) or known
//! (`O^c`). The extended region `Õ` collects every pixel whose patch support
//! touches the hole; its complement `Õ^c` is where candidate patches live.

use crate::error::{Error, Result};

/// Which derived pixel set of a mask to select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    /// The whole grid Ω.
    Omega,
    /// The inpainting region O.
    Hole,
    /// The known region O^c.
    Known,
    /// The extended inpainting region Õ (hole dilated by the patch support).
    Extended,
    /// The candidate region Õ^c.
    ExtendedKnown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    hole: Vec<bool>,
    patch_radius: usize,
    extended: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize, hole: Vec<bool>, patch_radius: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("mask dimensions must be positive".into()));
        }
        if hole.len() != width * height {
            return Err(Error::Config(format!(
                "mask buffer length {} does not match {}x{}",
                hole.len(),
                width,
                height
            )));
        }
        let extended = dilate_chebyshev(&hole, width, height, patch_radius);
        Ok(Self {
            width,
            height,
            hole,
            patch_radius,
            extended,
        })
    }

    /// A mask with no hole.
    pub fn empty(width: usize, height: usize, patch_radius: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height], patch_radius)
    }

    /// An axis-aligned rectangular hole (`row0..row0+h`, `col0..col0+w`).
    pub fn rect(
        width: usize,
        height: usize,
        row0: usize,
        col0: usize,
        rect_w: usize,
        rect_h: usize,
        patch_radius: usize,
    ) -> Result<Self> {
        let mut hole = vec![false; width * height];
        for r in row0..(row0 + rect_h).min(height) {
            for c in col0..(col0 + rect_w).min(width) {
                hole[r * width + c] = true;
            }
        }
        Self::new(width, height, hole, patch_radius)
    }

    /// Re-derives Õ for a different patch radius.
    pub fn dilate(&self, patch_radius: usize) -> Self {
        // construction cannot fail: dimensions already validated
        Self::new(self.width, self.height, self.hole.clone(), patch_radius).unwrap()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.hole.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hole.is_empty()
    }

    pub fn patch_radius(&self) -> usize {
        self.patch_radius
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn is_hole(&self, row: usize, col: usize) -> bool {
        self.hole[self.idx(row, col)]
    }

    #[inline]
    pub fn is_hole_idx(&self, i: usize) -> bool {
        self.hole[i]
    }

    #[inline]
    pub fn in_extended(&self, row: usize, col: usize) -> bool {
        self.extended[self.idx(row, col)]
    }

    #[inline]
    pub fn in_extended_idx(&self, i: usize) -> bool {
        self.extended[i]
    }

    pub fn hole_is_empty(&self) -> bool {
        !self.hole.iter().any(|&h| h)
    }

    pub fn count(&self, kind: RegionKind) -> usize {
        self.pixels(kind).len()
    }

    /// Linear pixel indices of the requested set, row-major.
    pub fn pixels(&self, kind: RegionKind) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| match kind {
                RegionKind::Omega => true,
                RegionKind::Hole => self.hole[i],
                RegionKind::Known => !self.hole[i],
                RegionKind::Extended => self.extended[i],
                RegionKind::ExtendedKnown => !self.extended[i],
            })
            .collect()
    }

    /// Bounding box of the hole as (row0, col0, rows, cols), if any.
    pub fn hole_bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut r0 = usize::MAX;
        let mut r1 = 0usize;
        let mut c0 = usize::MAX;
        let mut c1 = 0usize;
        let mut any = false;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.is_hole(r, c) {
                    any = true;
                    r0 = r0.min(r);
                    r1 = r1.max(r);
                    c0 = c0.min(c);
                    c1 = c1.max(c);
                }
            }
        }
        any.then(|| (r0, c0, r1 - r0 + 1, c1 - c0 + 1))
    }
}

/// Chebyshev (square) dilation by radius `r`, separable row/column passes.
fn dilate_chebyshev(hole: &[bool], width: usize, height: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return hole.to_vec();
    }
    let mut rows = vec![false; hole.len()];
    for row in 0..height {
        for col in 0..width {
            let lo = col.saturating_sub(r);
            let hi = (col + r).min(width - 1);
            rows[row * width + col] = (lo..=hi).any(|c| hole[row * width + c]);
        }
    }
    let mut out = vec![false; hole.len()];
    for row in 0..height {
        for col in 0..width {
            let lo = row.saturating_sub(r);
            let hi = (row + r).min(height - 1);
            out[row * width + col] = (lo..=hi).any(|rr| rows[rr * width + col]);
        }
    }
    out
}

/// Standalone dilation operator: returns `mask` with Õ derived for radius `r`.
pub fn dilate_mask(mask: &RegionMask, r: usize) -> RegionMask {
    mask.dilate(r)
}
