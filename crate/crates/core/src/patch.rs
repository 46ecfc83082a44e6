//! Patch supports, intra-patch weights, mollifiers, and patch distances.
//!
//! The distance between two patches is the `g`-weighted sum of squared
//! differences of the (optionally mollified) image over the square support.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// The discrete patch support: a (2r+1)x(2r+1) square of offsets with
/// normalized Gaussian weights `g(z)`, symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchKernel {
    radius: usize,
    offsets: Vec<(i32, i32)>,
    weights: Vec<f64>,
    shape_param: f64,
}

impl PatchKernel {
    /// Gaussian intra-patch weights `g(z) ∝ exp(-‖z‖²/(2a²))`, normalized.
    pub fn gaussian(radius: usize, a: f64) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::Argument("kernel shape parameter must be positive".into()));
        }
        let r = radius as i32;
        let mut offsets = Vec::with_capacity((2 * radius + 1).pow(2));
        let mut weights = Vec::with_capacity(offsets.capacity());
        for dr in -r..=r {
            for dc in -r..=r {
                offsets.push((dr, dc));
                let sq = (dr * dr + dc * dc) as f64;
                weights.push((-sq / (2.0 * a * a)).exp());
            }
        }
        let sum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= sum;
        }
        Ok(Self {
            radius,
            offsets,
            weights,
            shape_param: a,
        })
    }

    /// Default kernel width a = r/2 (floored at 0.5 so r = 0 stays valid).
    pub fn with_radius(radius: usize) -> Self {
        let a = (radius as f64 / 2.0).max(0.5);
        Self::gaussian(radius, a).unwrap()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Patch support size |B| = (2r+1)².
    pub fn support_size(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape_param(&self) -> f64 {
        self.shape_param
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i32, i32), f64)> + '_ {
        self.offsets.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Pre-comparison smoothing kernel ρ_ε. The delta kind is the identity.
#[derive(Debug, Clone, PartialEq)]
pub enum Mollifier {
    Delta,
    Gaussian { kernel: PatchKernel },
}

impl Mollifier {
    pub fn delta() -> Self {
        Mollifier::Delta
    }

    pub fn gaussian(radius: usize, width: f64) -> Result<Self> {
        Ok(Mollifier::Gaussian {
            kernel: PatchKernel::gaussian(radius, width)?,
        })
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, Mollifier::Delta)
    }
}

/// Applies the mollifier by discrete convolution with boundary extension;
/// the delta kind returns the input unchanged.
pub fn mollify(u: &ImageGrid, m: &Mollifier) -> ImageGrid {
    match m {
        Mollifier::Delta => u.clone(),
        Mollifier::Gaussian { kernel } => {
            let mut out = u.clone();
            for r in 0..u.height() {
                for c in 0..u.width() {
                    let mut acc = 0.0;
                    for ((dr, dc), w) in kernel.iter() {
                        acc += w * u.get(r as i64 + dr as i64, c as i64 + dc as i64);
                    }
                    out.set(r, c, acc);
                }
            }
            out
        }
    }
}

/// Patch error between the patches centered at `x` and `y` of the already
/// mollified image: Σ_z g(z) [u(x+z) - u(y+z)]².
pub fn patch_distance_raw(u: &ImageGrid, x: (usize, usize), y: (usize, usize), k: &PatchKernel) -> f64 {
    let (xr, xc) = (x.0 as i64, x.1 as i64);
    let (yr, yc) = (y.0 as i64, y.1 as i64);
    let mut acc = 0.0;
    for ((dr, dc), g) in k.iter() {
        let d = u.get(xr + dr as i64, xc + dc as i64) - u.get(yr + dr as i64, yc + dc as i64);
        acc += g * d * d;
    }
    acc
}

/// Patch error of §-style form with explicit mollification applied first.
pub fn patch_distance(
    u: &ImageGrid,
    x: (usize, usize),
    y: (usize, usize),
    k: &PatchKernel,
    m: &Mollifier,
) -> f64 {
    match m {
        Mollifier::Delta => patch_distance_raw(u, x, y, k),
        _ => patch_distance_raw(&mollify(u, m), x, y, k),
    }
}

/// Fast path for a fixed translation `t = y - x`: returns the patch error
/// from every pixel `x` to `x + t` as one field, via a per-offset shifted
/// squared-difference image. Matches the per-pair loop exactly, boundary
/// extension included.
pub fn translation_distance_field(u: &ImageGrid, k: &PatchKernel, t: (i32, i32)) -> Vec<f64> {
    let (w, h) = (u.width(), u.height());
    let r = k.radius() as i64;
    let pw = w + 2 * r as usize;
    let ph = h + 2 * r as usize;
    let (tr, tc) = (t.0 as i64, t.1 as i64);

    // e(q) = (u_ext(q) - u_ext(q + t))² on the padded grid
    let mut e = vec![0.0f64; pw * ph];
    for qr in 0..ph as i64 {
        for qc in 0..pw as i64 {
            let rr = qr - r;
            let cc = qc - r;
            let d = u.get(rr, cc) - u.get(rr + tr, cc + tc);
            e[(qr * pw as i64 + qc) as usize] = d * d;
        }
    }

    let mut field = vec![0.0f64; w * h];
    for xr in 0..h {
        for xc in 0..w {
            let mut acc = 0.0;
            for ((dr, dc), g) in k.iter() {
                let qr = xr as i64 + dr as i64 + r;
                let qc = xc as i64 + dc as i64 + r;
                acc += g * e[(qr * pw as i64 + qc) as usize];
            }
            field[xr * w + xc] = acc;
        }
    }
    field
}
