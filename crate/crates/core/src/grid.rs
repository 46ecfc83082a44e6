//! Real-valued 2-D intensity grids with explicit boundary extension.
//!
//! Intensities live on a 0..255 scale internally. Reads outside the grid are
//! resolved by the grid's [`BoundaryPolicy`], so patch operations never index
//! out of bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// How out-of-bounds coordinates are mapped back into the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Symmetric reflection about the image border (-1 maps to 0).
    #[default]
    Mirror,
    /// Clamp to the nearest edge pixel.
    Clamp,
}

/// Zero-mean Gaussian noise with a reproducibility seed.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    boundary: BoundaryPolicy,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument("image dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::Argument(format!(
                "value buffer length {} does not match {}x{}",
                values.len(),
                width,
                height
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("image values must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            values,
            boundary: BoundaryPolicy::default(),
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(width, height, values)
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[self.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let i = self.idx(row, col);
        self.values[i] = v;
    }

    /// Maps a possibly out-of-range coordinate into `0..n` by the policy.
    #[inline]
    pub fn fold_coord(mut i: i64, n: usize, policy: BoundaryPolicy) -> usize {
        let n = n as i64;
        match policy {
            BoundaryPolicy::Clamp => i.clamp(0, n - 1) as usize,
            BoundaryPolicy::Mirror => {
                loop {
                    if i < 0 {
                        i = -i - 1;
                    } else if i >= n {
                        i = 2 * n - 1 - i;
                    } else {
                        break;
                    }
                }
                i as usize
            }
        }
    }

    /// Maps a coordinate pair into the grid by the boundary policy.
    #[inline]
    pub fn fold(&self, row: i64, col: i64) -> (usize, usize) {
        (
            Self::fold_coord(row, self.height, self.boundary),
            Self::fold_coord(col, self.width, self.boundary),
        )
    }

    /// Boundary-extended read.
    #[inline]
    pub fn get(&self, row: i64, col: i64) -> f64 {
        let (r, c) = self.fold(row, col);
        self.values[r * self.width + c]
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Solver(format!(
                "non-finite value at pixel ({}, {})",
                i / self.width,
                i % self.width
            ))),
        }
    }
}

/// Adds i.i.d. zero-mean Gaussian noise of std `spec.sigma` on `region`
/// (linear pixel indices); pixels outside the region are untouched.
///
/// Output is a pure function of `(u, spec, region)`: the same seed yields
/// bit-identical results.
pub fn add_gaussian_noise(u: &ImageGrid, spec: NoiseSpec, region: &[usize]) -> Result<ImageGrid> {
    if spec.sigma < 0.0 {
        return Err(Error::Argument("noise sigma must be nonnegative".into()));
    }
    let mut out = u.clone();
    if spec.sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, spec.sigma)
        .map_err(|e| Error::Argument(format!("bad noise parameters: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for &i in region {
        if i >= u.len() {
            return Err(Error::Argument(format!("region index {i} out of bounds")));
        }
        out.values_mut()[i] += normal.sample(&mut rng);
    }
    out.check_finite()?;
    Ok(out)
}

/// Mean squared error over a nonempty pixel-index region.
pub fn mse(a: &ImageGrid, b: &ImageGrid, region: &[usize]) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Argument("mse: dimension mismatch".into()));
    }
    if region.is_empty() {
        return Err(Error::EmptyRegion("mse over an empty region".into()));
    }
    let mut acc = 0.0;
    for &i in region {
        if i >= a.len() {
            return Err(Error::Argument(format!("region index {i} out of bounds")));
        }
        let d = a.values()[i] - b.values()[i];
        acc += d * d;
    }
    Ok(acc / region.len() as f64)
}

/// PSNR in decibels, with identical images reported as a distinguished value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    /// MSE was exactly zero.
    Identical,
    Db(f64),
}

impl Psnr {
    pub fn db(self) -> f64 {
        match self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Identical => write!(f, "inf"),
            Psnr::Db(v) => write!(f, "{v:.4}"),
        }
    }
}

pub fn psnr(a: &ImageGrid, b: &ImageGrid, region: &[usize], peak: f64) -> Result<Psnr> {
    let m = mse(a, b, region)?;
    if m == 0.0 {
        Ok(Psnr::Identical)
    } else {
        Ok(Psnr::Db(10.0 * (peak * peak / m).log10()))
    }
}

/// All linear pixel indices of a `width x height` grid, row-major.
pub fn all_pixels(width: usize, height: usize) -> Vec<usize> {
    (0..width * height).collect()
}
