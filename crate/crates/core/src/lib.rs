//! Patch-based nonlocal image restoration: joint inpainting and Gaussian
//! denoising by alternating a softmax patch-weight update with a pointwise
//! image update, optionally driven coarse-to-fine over an image pyramid.

pub mod error;
pub mod grid;
pub mod io;
pub mod mask;
pub mod patch;
pub mod pyramid;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{
    add_gaussian_noise, all_pixels, mse, psnr, BoundaryPolicy, ImageGrid, NoiseSpec, Psnr,
};
pub use mask::{dilate_mask, RegionKind, RegionMask};
pub use patch::{mollify, patch_distance, patch_distance_raw, Mollifier, PatchKernel};
pub use pyramid::{build_pyramid, default_levels, solve_multiscale, Pyramid, PyramidLevel};
pub use solver::{
    closed_form_weights, default_h, default_lambda, energy, exact_mstep_oracle,
    init_hole_windowed_mean, iterate, logsum_min_oracle, mixture_neg_log_likelihood,
    mixture_nll_from_distances, solve, solve_decoupled, trace_csv, update_image,
    EnergyBreakdown, FidelityRegion, LogsumCheck, MStepSystem, SolverConfig, SolverState,
};
pub use weights::{update_weights, update_weights_domain, SearchConfig, WeightDomain, WeightField};
