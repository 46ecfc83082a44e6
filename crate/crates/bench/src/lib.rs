//! Shared fixtures for the criterion benches.

use patchweave_core::{ImageGrid, RegionMask};

pub fn stripes(n: usize, period: usize, amplitude: f64) -> ImageGrid {
    ImageGrid::from_fn(n, n, |_, c| {
        if (c / (period / 2)) % 2 == 0 {
            amplitude
        } else {
            0.0
        }
    })
    .unwrap()
}

pub fn centered_hole(n: usize, side: usize, patch_radius: usize) -> RegionMask {
    let o = (n - side) / 2;
    RegionMask::rect(n, n, o, o, side, side, patch_radius).unwrap()
}
