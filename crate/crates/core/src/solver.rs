//! EM alternating minimization: the weight (E) step, the pointwise image
//! (M) step, energy bookkeeping, and small-instance oracles.
//!
//! The image step is a Jacobi sweep of the quadratic that the M-step
//! minimizes: each pixel solves its own stationarity equation with every
//! other pixel frozen at the previous iterate. [`MStepSystem`] assembles
//! that quadratic explicitly so the sweep and the exact minimizer can be
//! cross-checked on small instances.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::mask::{RegionKind, RegionMask};
use crate::patch::{mollify, patch_distance_raw, Mollifier, PatchKernel};
use crate::weights::{update_weights_domain, SearchConfig, WeightDomain, WeightField};

/// Where the data fidelity term is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FidelityRegion {
    /// λ on O^c (the image-update convention; default).
    #[default]
    Known,
    /// λ on Õ^c only.
    ExtendedKnown,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Fidelity weight λ.
    pub lambda: f64,
    /// Softmax temperature / entropy weight h.
    pub h: f64,
    /// Assumed noise standard deviation.
    pub sigma: f64,
    /// Relative-change stopping threshold.
    pub tol: f64,
    pub max_iters: usize,
    pub fidelity_region: FidelityRegion,
    pub weight_domain: WeightDomain,
    pub kernel: PatchKernel,
    pub mollifier: Mollifier,
    pub search: SearchConfig,
}

/// Default temperature: h = 2·σ_est²·|B|, with σ_est floored at 10 so the
/// noiseless case keeps a usable scale.
pub fn default_h(sigma: f64, support_size: usize) -> f64 {
    let s = if sigma > 0.0 { sigma } else { 10.0 };
    2.0 * s * s * support_size as f64
}

/// Default fidelity weight: λ = h/σ² (σ floored at 1 so σ = 0 yields a
/// large, fidelity-dominated λ).
pub fn default_lambda(h: f64, sigma: f64) -> f64 {
    h / sigma.max(1.0).powi(2)
}

impl SolverConfig {
    pub fn for_sigma(sigma: f64, patch_radius: usize) -> Self {
        let kernel = PatchKernel::with_radius(patch_radius);
        let h = default_h(sigma, kernel.support_size());
        Self {
            lambda: default_lambda(h, sigma),
            h,
            sigma,
            tol: 1e-5,
            max_iters: 50,
            fidelity_region: FidelityRegion::default(),
            weight_domain: WeightDomain::default(),
            kernel,
            mollifier: Mollifier::delta(),
            search: SearchConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be nonnegative".into()));
        }
        if self.h <= 0.0 {
            return Err(Error::Config("h must be positive".into()));
        }
        if self.tol <= 0.0 {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        self.search.validate()
    }

    /// The spatially switched fidelity weight λ̃ at linear pixel index `i`.
    #[inline]
    pub fn lambda_at(&self, mask: &RegionMask, i: usize) -> f64 {
        match self.fidelity_region {
            FidelityRegion::Known => {
                if mask.is_hole_idx(i) {
                    0.0
                } else {
                    self.lambda
                }
            }
            FidelityRegion::ExtendedKnown => {
                if mask.in_extended_idx(i) {
                    0.0
                } else {
                    self.lambda
                }
            }
        }
    }
}

/// The three terms of the objective J at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub fidelity: f64,
    pub entropy_term: f64,
    pub patch_term: f64,
    pub total: f64,
    pub rel_change: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: ImageGrid,
    pub w: WeightField,
    pub iter: usize,
    pub trace: Vec<EnergyBreakdown>,
    pub converged: bool,
}

impl SolverState {
    pub fn new(u0: ImageGrid) -> Self {
        let w = WeightField::new(u0.width(), u0.height());
        Self {
            u: u0,
            w,
            iter: 0,
            trace: Vec::new(),
            converged: false,
        }
    }
}

/// Energy trace as CSV, one row per iteration.
pub fn trace_csv(trace: &[EnergyBreakdown]) -> String {
    let mut out = String::from("iter,fidelity,entropy,patch,total,rel_change\n");
    for (i, e) in trace.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i + 1,
            e.fidelity,
            e.entropy_term,
            e.patch_term,
            e.total,
            e.rel_change
        ));
    }
    out
}

/// Evaluates J(u, w) = (λ/2)·Σ(u−v)² + h·Σ w ln w + Σ ε(x,y)·w(x,y).
pub fn energy(
    u: &ImageGrid,
    w: &WeightField,
    v: &ImageGrid,
    mask: &RegionMask,
    cfg: &SolverConfig,
) -> EnergyBreakdown {
    let fidelity: f64 = (0..u.len())
        .map(|i| {
            let lam = cfg.lambda_at(mask, i);
            let d = u.values()[i] - v.values()[i];
            0.5 * lam * d * d
        })
        .sum();

    let entropy_term = cfg.h * w.entropy();

    let um = if cfg.mollifier.is_delta() {
        None
    } else {
        Some(mollify(u, &cfg.mollifier))
    };
    let ud = um.as_ref().unwrap_or(u);
    let patch_term: f64 = w
        .rows()
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let x = (i / u.width(), i % u.width());
            row.iter()
                .map(|&(y, wt)| {
                    let yp = (y as usize / u.width(), y as usize % u.width());
                    wt * patch_distance_raw(ud, x, yp, &cfg.kernel)
                })
                .sum::<f64>()
        })
        .sum();

    EnergyBreakdown {
        fidelity,
        entropy_term,
        patch_term,
        total: fidelity + entropy_term + patch_term,
        rel_change: f64::NAN,
    }
}

/// The mixture negative log-likelihood −Σ_x ln Σ_y δ_h(u_B(x) − u_B(y))
/// from per-pixel distance rows, computed in log space.
pub fn mixture_nll_from_distances(rows: &[Vec<f64>], h: f64, support_size: usize) -> f64 {
    let log_norm = 0.5 * support_size as f64 * (std::f64::consts::PI * h).ln();
    rows.iter()
        .map(|dists| {
            let m = dists.iter().copied().fold(f64::INFINITY, f64::min);
            let lse = -m / h + dists.iter().map(|d| (-(d - m) / h).exp()).sum::<f64>().ln();
            log_norm - lse
        })
        .sum()
}

/// The prior part of the MAP objective (fidelity omitted), scanning all of
/// `Õ^c` for every pixel of Ω.
pub fn mixture_neg_log_likelihood(
    u: &ImageGrid,
    mask: &RegionMask,
    k: &PatchKernel,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::Argument("h must be positive".into()));
    }
    let cands = mask.pixels(RegionKind::ExtendedKnown);
    if cands.is_empty() {
        return Err(Error::Argument(
            "mixture likelihood undefined: Õ^c is empty".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let x = (i / u.width(), i % u.width());
            cands
                .iter()
                .map(|&y| patch_distance_raw(u, x, (y / u.width(), y % u.width()), k))
                .collect()
        })
        .collect();
    Ok(mixture_nll_from_distances(&rows, h, k.support_size()))
}

/// Rowwise normalization w*(x,y) = f(x,y) / Σ_y f(x,y) — the closed-form
/// minimizer of the variational form of the log-sum identity.
pub fn closed_form_weights(f: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    f.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(Error::Argument(format!(
                    "closed_form_weights: row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::Argument(format!(
                    "closed_form_weights: row {i} sums to zero"
                )));
            }
            Ok(row.iter().map(|v| v / sum).collect())
        })
        .collect()
}

/// Both sides of the log-sum identity, plus the smallest value
/// of P over random simplex probes (which must not beat the minimizer).
#[derive(Debug, Clone, Copy)]
pub struct LogsumCheck {
    /// −Σ_x ln Σ_y f(x,y)
    pub lhs: f64,
    /// P(w*) at the closed-form minimizer
    pub rhs: f64,
    /// min P(w) over the random probes
    pub probe_min: f64,
}

fn p_functional(f: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
    f.iter()
        .zip(w)
        .map(|(frow, wrow)| {
            frow.iter()
                .zip(wrow)
                .map(|(&fv, &wv)| {
                    let ent = if wv > 0.0 { wv * wv.ln() } else { 0.0 };
                    -fv.ln() * wv + ent
                })
                .sum::<f64>()
        })
        .sum()
}

/// Desk-scale verification of the log-sum identity on a strictly
/// positive matrix.
pub fn logsum_min_oracle(f: &[Vec<f64>], seed: u64, probes: usize) -> Result<LogsumCheck> {
    if f.is_empty() || f.iter().any(|r| r.is_empty()) {
        return Err(Error::Argument("logsum_min_oracle: empty matrix".into()));
    }
    if f.iter().flatten().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::Argument(
            "logsum_min_oracle: matrix must be strictly positive".into(),
        ));
    }
    let lhs: f64 = f
        .iter()
        .map(|row| -(row.iter().sum::<f64>().ln()))
        .sum();
    let wstar = closed_form_weights(f)?;
    let rhs = p_functional(f, &wstar);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_min = f64::INFINITY;
    for _ in 0..probes {
        let w: Vec<Vec<f64>> = f
            .iter()
            .map(|row| {
                // exponential draws normalized: uniform on the simplex
                let raw: Vec<f64> = row.iter().map(|_| -rng.gen::<f64>().ln()).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        probe_min = probe_min.min(p_functional(f, &w));
    }
    Ok(LogsumCheck { lhs, rhs, probe_min })
}

/// One Jacobi sweep of the M-step quadratic: every pixel's stationarity
/// equation solved with its partners frozen at `u`. Matches the pointwise
/// update formula in the grid interior; at the boundary the same folding
/// the energy uses keeps the sweep consistent with [`MStepSystem`].
pub fn update_image(
    u: &ImageGrid,
    w: &WeightField,
    v: &ImageGrid,
    mask: &RegionMask,
    cfg: &SolverConfig,
) -> Result<ImageGrid> {
    if !u.same_shape(v) || u.width() != mask.width() || u.height() != mask.height() {
        return Err(Error::Config("update_image: dimension mismatch".into()));
    }
    let n = u.len();
    let width = u.width();
    let mut num = vec![0.0f64; n];
    let mut den = vec![0.0f64; n];

    for (a, row) in w.rows().iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        let (ar, ac) = ((a / width) as i64, (a % width) as i64);
        for &(b, wt) in row {
            let (br, bc) = ((b as usize / width) as i64, (b as usize % width) as i64);
            for ((dr, dc), g) in cfg.kernel.iter() {
                let (par, pac) = u.fold(ar + dr as i64, ac + dc as i64);
                let (pbr, pbc) = u.fold(br + dr as i64, bc + dc as i64);
                let pa = par * width + pac;
                let pb = pbr * width + pbc;
                let s = 2.0 * g * wt;
                num[pa] += s * u.values()[pb];
                den[pa] += s;
                num[pb] += s * u.values()[pa];
                den[pb] += s;
            }
        }
    }

    let mut out = u.clone();
    for i in 0..n {
        let lam = cfg.lambda_at(mask, i);
        let d = den[i] + lam;
        if d <= 0.0 {
            return Err(Error::Solver(format!(
                "zero denominator in image update at pixel ({}, {}): no weight mass reaches it; widen the search window or initialize via multiscale",
                i / width,
                i % width
            )));
        }
        out.values_mut()[i] = (num[i] + lam * v.values()[i]) / d;
    }
    out.check_finite()?;
    Ok(out)
}

/// One full EM iteration: weight update, image update, energy bookkeeping.
pub fn iterate(
    state: &SolverState,
    v: &ImageGrid,
    mask: &RegionMask,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let um;
    let dist_image = if cfg.mollifier.is_delta() {
        &state.u
    } else {
        um = mollify(&state.u, &cfg.mollifier);
        &um
    };
    let w = update_weights_domain(
        dist_image,
        mask,
        &cfg.kernel,
        cfg.h,
        &cfg.search,
        cfg.weight_domain,
    )?;
    let u_new = update_image(&state.u, &w, v, mask, cfg)?;

    let mut breakdown = energy(&u_new, &w, v, mask, cfg);
    let diff: f64 = u_new
        .values()
        .iter()
        .zip(state.u.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let norm: f64 = state.u.values().iter().map(|x| x * x).sum();
    breakdown.rel_change = if norm > 0.0 { diff / norm } else { diff };

    let mut trace = state.trace.clone();
    trace.push(breakdown);
    Ok(SolverState {
        u: u_new,
        w,
        iter: state.iter + 1,
        trace,
        converged: false,
    })
}

/// Runs the alternation from `u0` until the relative-change criterion
/// ‖u^{n+1}−u^n‖²/‖u^n‖² < tol or `max_iters`.
pub fn solve(
    v: &ImageGrid,
    mask: &RegionMask,
    cfg: &SolverConfig,
    u0: ImageGrid,
) -> Result<SolverState> {
    cfg.validate()?;
    if !v.same_shape(&u0) || v.width() != mask.width() || v.height() != mask.height() {
        return Err(Error::Config("solve: dimension mismatch".into()));
    }
    u0.check_finite()
        .map_err(|_| Error::Config("solve: u0 must be fully defined and finite".into()))?;

    let mut state = SolverState::new(u0);
    loop {
        state = iterate(&state, v, mask, cfg)?;
        let last = state.trace.last().unwrap();
        if !last.total.is_finite() {
            return Err(Error::Solver(format!(
                "non-finite energy at iteration {}",
                state.iter
            )));
        }
        if last.rel_change < cfg.tol {
            state.converged = true;
            return Ok(state);
        }
        if state.iter >= cfg.max_iters {
            return Ok(state);
        }
    }
}

/// Initializes hole pixels with the mean of known pixels inside a
/// `window`×`window` neighborhood (global known mean as fallback).
pub fn init_hole_windowed_mean(v: &ImageGrid, mask: &RegionMask, window: usize) -> ImageGrid {
    let half = (window / 2) as i64;
    let known: Vec<usize> = mask.pixels(RegionKind::Known);
    let global_mean = if known.is_empty() {
        0.0
    } else {
        known.iter().map(|&i| v.values()[i]).sum::<f64>() / known.len() as f64
    };

    let mut out = v.clone();
    for r in 0..v.height() {
        for c in 0..v.width() {
            if !mask.is_hole(r, c) {
                continue;
            }
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for dr in -half..=half {
                for dc in -half..=half {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr >= 0
                        && cc >= 0
                        && (rr as usize) < v.height()
                        && (cc as usize) < v.width()
                        && !mask.is_hole(rr as usize, cc as usize)
                    {
                        acc += v.at(rr as usize, cc as usize);
                        cnt += 1;
                    }
                }
            }
            out.set(r, c, if cnt > 0 { acc / cnt as f64 } else { global_mean });
        }
    }
    out
}

/// Two-stage decoupling: patch inpainting inside O via multiscale, then
/// nonlocal denoising of the completed image, stitched on the O/O^c split.
pub fn solve_decoupled(
    v: &ImageGrid,
    mask: &RegionMask,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    cfg.validate()?;
    if mask.hole_is_empty() {
        // stage 1 is a no-op; run the denoising stage directly
        let mut cfg2 = cfg.clone();
        cfg2.weight_domain = WeightDomain::AllPixels;
        return solve(v, mask, &cfg2, v.clone());
    }

    // stage 1: pure inpainting — weights only on Õ, multiscale coarse-to-fine
    let mut cfg1 = cfg.clone();
    cfg1.weight_domain = WeightDomain::ExtendedOnly;
    let n_levels = crate::pyramid::default_levels(mask, cfg.kernel.radius());
    let stage1 = crate::pyramid::solve_multiscale(v, mask, &cfg1, n_levels)?;

    // stage 2: denoise the completed image with no hole
    let mut v2 = v.clone();
    for i in mask.pixels(RegionKind::Hole) {
        v2.values_mut()[i] = stage1.u.values()[i];
    }
    let empty = RegionMask::empty(mask.width(), mask.height(), mask.patch_radius())?;
    let mut cfg2 = cfg.clone();
    cfg2.weight_domain = WeightDomain::AllPixels;
    let stage2 = solve(&v2, &empty, &cfg2, v2.clone())?;

    // stitch: hole pixels come from stage 1 exactly
    let mut u = stage2.u.clone();
    for i in mask.pixels(RegionKind::Hole) {
        u.values_mut()[i] = stage1.u.values()[i];
    }
    let mut trace = stage1.trace.clone();
    trace.extend(stage2.trace.iter().copied());
    Ok(SolverState {
        u,
        w: stage2.w,
        iter: stage1.iter + stage2.iter,
        trace,
        converged: stage1.converged && stage2.converged,
    })
}

/// The M-step quadratic ½uᵀAu − cᵀu assembled explicitly, with the
/// splitting A = diag(D) − C whose D⁻¹(Cu + c) sweep is the pointwise
/// image update. Desk-scale only.
pub struct MStepSystem {
    pub n: usize,
    width: usize,
    /// Splitting diagonal D (weight mass + λ̃).
    pub split_diag: Vec<f64>,
    /// Splitting off-part C (symmetric, nonnegative).
    pub split_off: DMatrix<f64>,
    /// Right-hand side c = λ̃·v.
    pub rhs: Vec<f64>,
}

impl MStepSystem {
    pub fn assemble(
        w: &WeightField,
        v: &ImageGrid,
        mask: &RegionMask,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let n = v.len();
        if n > 1024 {
            return Err(Error::Config(
                "MStepSystem is restricted to small instances (<= 1024 pixels)".into(),
            ));
        }
        let width = v.width();
        let mut split_diag = vec![0.0f64; n];
        let mut split_off = DMatrix::<f64>::zeros(n, n);
        let mut rhs = vec![0.0f64; n];

        for (a, row) in w.rows().iter().enumerate() {
            let (ar, ac) = ((a / width) as i64, (a % width) as i64);
            for &(b, wt) in row {
                let (br, bc) = ((b as usize / width) as i64, (b as usize % width) as i64);
                for ((dr, dc), g) in cfg.kernel.iter() {
                    let (par, pac) = v.fold(ar + dr as i64, ac + dc as i64);
                    let (pbr, pbc) = v.fold(br + dr as i64, bc + dc as i64);
                    let pa = par * width + pac;
                    let pb = pbr * width + pbc;
                    let s = 2.0 * g * wt;
                    split_diag[pa] += s;
                    split_diag[pb] += s;
                    split_off[(pa, pb)] += s;
                    split_off[(pb, pa)] += s;
                }
            }
        }
        for i in 0..n {
            let lam = cfg.lambda_at(mask, i);
            split_diag[i] += lam;
            rhs[i] = lam * v.values()[i];
        }
        Ok(Self {
            n,
            width,
            split_diag,
            split_off,
            rhs,
        })
    }

    /// The system matrix A = diag(D) − C.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut a = -self.split_off.clone();
        for i in 0..self.n {
            a[(i, i)] += self.split_diag[i];
        }
        a
    }

    /// One Jacobi sweep u⁺ = D⁻¹(Cu + c).
    pub fn jacobi_sweep(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0f64; self.n];
        for i in 0..self.n {
            if self.split_diag[i] <= 0.0 {
                return Err(Error::Solver(format!(
                    "zero denominator in Jacobi sweep at pixel ({}, {})",
                    i / self.width,
                    i % self.width
                )));
            }
            let dot: f64 = (0..self.n).map(|j| self.split_off[(i, j)] * u[j]).sum();
            out[i] = (dot + self.rhs[i]) / self.split_diag[i];
        }
        Ok(out)
    }

    /// Exact minimizer via dense LU.
    pub fn solve_exact(&self) -> Result<Vec<f64>> {
        let a = self.matrix();
        for i in 0..self.n {
            if a[(i, i)] == 0.0 {
                return Err(Error::Solver(format!(
                    "singular M-step system: pixel ({}, {}) is unconstrained",
                    i / self.width,
                    i % self.width
                )));
            }
        }
        let b = nalgebra::DVector::from_column_slice(&self.rhs);
        let lu = a.lu();
        let x = lu
            .solve(&b)
            .ok_or_else(|| Error::Solver("singular M-step system".into()))?;
        Ok(x.as_slice().to_vec())
    }
}

/// Exact M-step minimizer for small instances; validates that the image
/// update is the Jacobi sweep of the same system.
pub fn exact_mstep_oracle(
    w: &WeightField,
    v: &ImageGrid,
    mask: &RegionMask,
    cfg: &SolverConfig,
) -> Result<ImageGrid> {
    let sys = MStepSystem::assemble(w, v, mask, cfg)?;
    let x = sys.solve_exact()?;
    let mut out = v.clone();
    out.values_mut().copy_from_slice(&x);
    out.check_finite()?;
    Ok(out)
}
