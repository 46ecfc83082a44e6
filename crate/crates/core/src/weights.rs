//! Sparse nonlocal weight distributions and the softmax E-step.
//!
//! For every pixel `x` the field stores a probability distribution `w(x, ·)`
//! over candidate patch centers in `Õ^c`. Outside the stored support the
//! weight is zero (the `w̃` extension of the image update).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::mask::RegionMask;
use crate::patch::{patch_distance_raw, translation_distance_field, PatchKernel};

/// Candidate search configuration. `search_radius: None` scans all of `Õ^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Half-width of the square candidate window; `None` means unbounded.
    pub search_radius: Option<usize>,
    /// Keep only the K largest weights per pixel, then renormalize.
    pub top_k: Option<usize>,
    /// Candidate subsampling stride, anchored at the query pixel.
    pub subsample_stride: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            search_radius: Some(15),
            top_k: Some(32),
            subsample_stride: 1,
        }
    }
}

impl SearchConfig {
    /// Exhaustive scan, no truncation: the oracle path used by tests.
    pub fn exhaustive() -> Self {
        Self {
            search_radius: None,
            top_k: None,
            subsample_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsample_stride == 0 {
            return Err(Error::Config("subsample stride must be >= 1".into()));
        }
        if self.search_radius == Some(0) {
            return Err(Error::Config("search radius must be >= 1".into()));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top_k must be >= 1 when present".into()));
        }
        Ok(())
    }
}

/// Which pixels carry weight distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightDomain {
    /// Every pixel of Ω.
    #[default]
    AllPixels,
    /// Only pixels of Õ (the pure-inpainting stage).
    ExtendedOnly,
}

/// Per-pixel sparse distributions over candidate centers (linear indices).
#[derive(Debug, Clone, Default)]
pub struct WeightField {
    width: usize,
    height: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl WeightField {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rows: vec![Vec::new(); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }

    /// The stored distribution at linear pixel index `x` (may be empty).
    pub fn row(&self, x: usize) -> &[(u32, f64)] {
        &self.rows[x]
    }

    pub fn set_row(&mut self, x: usize, row: Vec<(u32, f64)>) {
        self.rows[x] = row;
    }

    /// Number of pixels carrying a distribution.
    pub fn domain_size(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_empty()).count()
    }

    /// The zero extension `w̃(x, y)`: the stored weight when present, 0
    /// otherwise (including coordinates outside Ω).
    pub fn extended_weight(&self, x: (i64, i64), y: (i64, i64)) -> f64 {
        let (xr, xc) = x;
        let (yr, yc) = y;
        if xr < 0
            || xc < 0
            || yr < 0
            || yc < 0
            || xr >= self.height as i64
            || xc >= self.width as i64
            || yr >= self.height as i64
            || yc >= self.width as i64
        {
            return 0.0;
        }
        let xi = xr as usize * self.width + xc as usize;
        let yi = (yr as usize * self.width + yc as usize) as u32;
        self.rows[xi]
            .iter()
            .find(|(cand, _)| *cand == yi)
            .map_or(0.0, |(_, w)| *w)
    }

    /// Σ_x Σ_y w ln w with the 0·ln 0 = 0 convention.
    pub fn entropy(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|row| row.iter())
            .map(|&(_, w)| if w > 0.0 { w * w.ln() } else { 0.0 })
            .sum()
    }

    /// One pixel's distribution as CSV lines `y_row,y_col,weight`.
    pub fn dump_pixel_csv(&self, x: usize) -> String {
        let mut out = String::from("y_row,y_col,weight\n");
        for &(cand, w) in &self.rows[x] {
            let c = cand as usize;
            out.push_str(&format!("{},{},{}\n", c / self.width, c % self.width, w));
        }
        out
    }
}

/// Candidates for pixel `x`: the window (or all of Ω) intersected with
/// `Õ^c`, stride-subsampled on the grid anchored at `x`, row-major order.
pub fn candidate_set(
    x: (usize, usize),
    cfg: &SearchConfig,
    mask: &RegionMask,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let (xr, xc) = (x.0 as i64, x.1 as i64);
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let stride = cfg.subsample_stride as i64;

    let (r0, r1, c0, c1) = match cfg.search_radius {
        Some(s) => {
            let s = s as i64;
            (xr - s, xr + s, xc - s, xc + s)
        }
        None => (0, h - 1, 0, w - 1),
    };

    let mut out = Vec::new();
    let mut yr = r0 + (xr - r0).rem_euclid(stride);
    while yr <= r1 {
        if yr >= 0 && yr < h {
            let mut yc = c0 + (xc - c0).rem_euclid(stride);
            while yc <= c1 {
                if yc >= 0 && yc < w && !mask.in_extended(yr as usize, yc as usize) {
                    out.push(yr as usize * mask.width() + yc as usize);
                }
                yc += stride;
            }
        }
        yr += stride;
    }
    if out.is_empty() {
        return Err(Error::EmptyCandidates {
            row: x.0,
            col: x.1,
        });
    }
    Ok(out)
}

/// Numerically stable softmax over negative scaled distances:
/// `w_i = exp(-d_i/h) / Σ_j exp(-d_j/h)`, computed with min-subtraction.
pub fn softmax_weights(dists: &[f64], h: f64) -> Vec<f64> {
    debug_assert!(h > 0.0);
    let m = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = dists.iter().map(|d| (-(d - m) / h).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Keeps the `k` largest weights of a row (stable towards smaller candidate
/// index), renormalizes, and preserves the original candidate order.
fn truncate_top_k(row: &mut Vec<(u32, f64)>, k: usize) {
    if row.len() <= k {
        return;
    }
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        row[b].1
            .partial_cmp(&row[a].1)
            .unwrap()
            .then(row[a].0.cmp(&row[b].0))
    });
    let mut keep = vec![false; row.len()];
    for &i in order.iter().take(k) {
        keep[i] = true;
    }
    let mut kept: Vec<(u32, f64)> = row
        .iter()
        .zip(&keep)
        .filter_map(|(&e, &k)| k.then_some(e))
        .collect();
    let sum: f64 = kept.iter().map(|&(_, w)| w).sum();
    for e in kept.iter_mut() {
        e.1 /= sum;
    }
    *row = kept;
}

/// E-step weight update: per-pixel softmax of patch distances over the
/// candidate set, `w(x,y) ∝ exp(-ε(x,y)/h)`.
pub fn update_weights(
    u: &ImageGrid,
    mask: &RegionMask,
    k: &PatchKernel,
    h: f64,
    cfg: &SearchConfig,
) -> Result<WeightField> {
    update_weights_domain(u, mask, k, h, cfg, WeightDomain::AllPixels)
}

/// As [`update_weights`] but restricted to a pixel domain.
pub fn update_weights_domain(
    u: &ImageGrid,
    mask: &RegionMask,
    k: &PatchKernel,
    h: f64,
    cfg: &SearchConfig,
    domain: WeightDomain,
) -> Result<WeightField> {
    cfg.validate()?;
    if h <= 0.0 {
        return Err(Error::Argument("softmax temperature h must be positive".into()));
    }
    if u.width() != mask.width() || u.height() != mask.height() {
        return Err(Error::Config("image/mask dimension mismatch".into()));
    }

    let in_domain = |i: usize| match domain {
        WeightDomain::AllPixels => true,
        WeightDomain::ExtendedOnly => mask.in_extended_idx(i),
    };

    let mut field = WeightField::new(u.width(), u.height());
    match cfg.search_radius {
        Some(_) => {
            accumulate_windowed_distances(u, mask, k, cfg, &in_domain, &mut field)?;
        }
        None => {
            // exhaustive per-pair path (oracle scale)
            let rows: Vec<Result<Vec<(u32, f64)>>> = (0..u.len())
                .into_par_iter()
                .map(|i| {
                    if !in_domain(i) {
                        return Ok(Vec::new());
                    }
                    let x = (i / u.width(), i % u.width());
                    let cands = candidate_set(x, cfg, mask)?;
                    Ok(cands
                        .into_iter()
                        .map(|y| {
                            let yp = (y / u.width(), y % u.width());
                            (y as u32, patch_distance_raw(u, x, yp, k))
                        })
                        .collect())
                })
                .collect();
            for (i, row) in rows.into_iter().enumerate() {
                field.set_row(i, row?);
            }
        }
    }

    // distances -> softmax weights, optional truncation
    let top_k = cfg.top_k;
    field
        .rows
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(i, row)| {
            if row.is_empty() {
                if in_domain(i) {
                    return Err(Error::EmptyCandidates {
                        row: i / u.width(),
                        col: i % u.width(),
                    });
                }
                return Ok(());
            }
            let dists: Vec<f64> = row.iter().map(|&(_, d)| d).collect();
            let ws = softmax_weights(&dists, h);
            for (e, w) in row.iter_mut().zip(ws) {
                e.1 = w;
            }
            if let Some(k) = top_k {
                truncate_top_k(row, k);
            }
            Ok(())
        })?;

    Ok(field)
}

/// Windowed distances via shared translation fields: one shifted
/// squared-difference field per translation serves every pixel.
fn accumulate_windowed_distances(
    u: &ImageGrid,
    mask: &RegionMask,
    k: &PatchKernel,
    cfg: &SearchConfig,
    in_domain: &(impl Fn(usize) -> bool + Sync),
    field: &mut WeightField,
) -> Result<()> {
    let s = cfg.search_radius.unwrap() as i64;
    let stride = cfg.subsample_stride as i64;
    let (w, h) = (u.width() as i64, u.height() as i64);

    let mut m = s;
    while m % stride != 0 {
        m -= 1;
    }
    let mut translations = Vec::new();
    let mut dr = -m;
    while dr <= s {
        let mut dc = -m;
        while dc <= s {
            translations.push((dr as i32, dc as i32));
            dc += stride;
        }
        dr += stride;
    }

    for t in translations {
        let dists = translation_distance_field(u, k, t);
        field
            .rows
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, row)| {
                if !in_domain(i) {
                    return;
                }
                let xr = (i / u.width()) as i64;
                let xc = (i % u.width()) as i64;
                let yr = xr + t.0 as i64;
                let yc = xc + t.1 as i64;
                if yr >= 0
                    && yc >= 0
                    && yr < h
                    && yc < w
                    && !mask.in_extended(yr as usize, yc as usize)
                {
                    row.push(((yr * w + yc) as u32, dists[i]));
                }
            });
    }
    Ok(())
}
