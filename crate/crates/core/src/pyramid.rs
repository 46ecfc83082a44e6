//! Coarse-to-fine multiscale driver. Large holes have no usable candidate
//! patches near their center at full resolution; solving a decimated copy
//! first and propagating the result down gives every scale a sensible
//! initialization.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::mask::{RegionKind, RegionMask};
use crate::solver::{init_hole_windowed_mean, solve, SolverConfig, SolverState};

/// One pyramid level: the degraded image and its mask at that scale.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub v: ImageGrid,
    pub mask: RegionMask,
}

/// Image/mask pyramid, coarsest level first.
#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<PyramidLevel>,
}

impl Pyramid {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

const BINOMIAL: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];

/// Separable 5-tap binomial smoothing that only lets known pixels
/// contribute; returns the smoothed image and a per-pixel flag for
/// whether any known mass reached it.
fn masked_binomial(v: &ImageGrid, known: &[bool]) -> (Vec<f64>, Vec<bool>) {
    let (w, h) = (v.width(), v.height());
    let mut num = vec![0.0f64; w * h];
    let mut den = vec![0.0f64; w * h];
    // horizontal pass on v·known / known
    for r in 0..h {
        for c in 0..w {
            for (t, &b) in BINOMIAL.iter().enumerate() {
                let cc = c as i64 + t as i64 - 2;
                if cc < 0 || cc as usize >= w {
                    continue;
                }
                let j = r * w + cc as usize;
                if known[j] {
                    num[r * w + c] += b * v.values()[j];
                    den[r * w + c] += b;
                }
            }
        }
    }
    // vertical pass on the horizontal accumulators
    let mut num2 = vec![0.0f64; w * h];
    let mut den2 = vec![0.0f64; w * h];
    for r in 0..h {
        for c in 0..w {
            for (t, &b) in BINOMIAL.iter().enumerate() {
                let rr = r as i64 + t as i64 - 2;
                if rr < 0 || rr as usize >= h {
                    continue;
                }
                let j = rr as usize * w + c;
                num2[r * w + c] += b * num[j];
                den2[r * w + c] += b * den[j];
            }
        }
    }
    let mut out = vec![0.0f64; w * h];
    let mut covered = vec![false; w * h];
    for i in 0..w * h {
        if den2[i] > 0.0 {
            out[i] = num2[i] / den2[i];
            covered[i] = true;
        }
    }
    (out, covered)
}

/// Factor-2 decimation of image and mask. A coarse pixel becomes a hole
/// only when every fine pixel it covers is a hole.
pub fn downsample(v: &ImageGrid, mask: &RegionMask) -> Result<(ImageGrid, RegionMask)> {
    let (w, h) = (v.width(), v.height());
    let (cw, ch) = ((w + 1) / 2, (h + 1) / 2);
    let known: Vec<bool> = (0..w * h).map(|i| !mask.is_hole_idx(i)).collect();
    let (smooth, covered) = masked_binomial(v, &known);

    let mut cvals = vec![0.0f64; cw * ch];
    let mut chole = vec![false; cw * ch];
    for r in 0..ch {
        for c in 0..cw {
            let mut all_hole = true;
            for dr in 0..2usize {
                for dc in 0..2usize {
                    let (fr, fc) = (2 * r + dr, 2 * c + dc);
                    if fr < h && fc < w && !mask.is_hole(fr, fc) {
                        all_hole = false;
                    }
                }
            }
            let i = r * cw + c;
            chole[i] = all_hole;
            let j = (2 * r) * w + 2 * c;
            if covered[j] {
                cvals[i] = smooth[j];
            }
        }
    }
    Ok((
        ImageGrid::new(cw, ch, cvals)?.with_boundary(v.boundary()),
        RegionMask::new(cw, ch, chole, mask.patch_radius())?,
    ))
}

/// Bilinear upsampling of a coarse solution to fine resolution; fine pixels
/// outside the hole are overwritten with the observed `fine_v`.
pub fn upsample_init(
    coarse_u: &ImageGrid,
    fine_v: &ImageGrid,
    fine_mask: &RegionMask,
) -> Result<ImageGrid> {
    if fine_v.width() != fine_mask.width() || fine_v.height() != fine_mask.height() {
        return Err(Error::Config("upsample_init: dimension mismatch".into()));
    }
    let (cw, ch) = (coarse_u.width(), coarse_u.height());
    let mut out = fine_v.clone();
    for r in 0..fine_v.height() {
        for c in 0..fine_v.width() {
            if !fine_mask.is_hole(r, c) {
                continue;
            }
            // coarse pixel (i, j) sits at fine (2i, 2j)
            let fr = (r as f64 / 2.0).min((ch - 1) as f64);
            let fc = (c as f64 / 2.0).min((cw - 1) as f64);
            let (r0, c0) = (fr.floor() as usize, fc.floor() as usize);
            let (r1, c1) = ((r0 + 1).min(ch - 1), (c0 + 1).min(cw - 1));
            let (tr, tc) = (fr - r0 as f64, fc - c0 as f64);
            let top = coarse_u.at(r0, c0) * (1.0 - tc) + coarse_u.at(r0, c1) * tc;
            let bot = coarse_u.at(r1, c0) * (1.0 - tc) + coarse_u.at(r1, c1) * tc;
            out.set(r, c, top * (1.0 - tr) + bot * tr);
        }
    }
    Ok(out)
}

/// Builds a pyramid with at most `n_levels` levels, stopping early when a
/// coarser level would drop below twice the patch diameter or would lose
/// all of `Õ^c`.
pub fn build_pyramid(
    v: &ImageGrid,
    mask: &RegionMask,
    n_levels: usize,
    patch_radius: usize,
) -> Result<Pyramid> {
    if n_levels == 0 {
        return Err(Error::Argument("n_levels must be >= 1".into()));
    }
    let min_side = 2 * (2 * patch_radius + 1);
    let mut levels = vec![PyramidLevel {
        v: v.clone(),
        mask: mask.clone(),
    }];
    while levels.len() < n_levels {
        let last = levels.last().unwrap();
        if last.v.width() / 2 < min_side || last.v.height() / 2 < min_side {
            break;
        }
        let (cv, cm) = downsample(&last.v, &last.mask)?;
        if cm.count(RegionKind::ExtendedKnown) == 0 {
            break;
        }
        levels.push(PyramidLevel { v: cv, mask: cm });
    }
    levels.reverse();
    Ok(Pyramid { levels })
}

/// Level count heuristic: halve until the hole's smaller bounding-box side
/// fits within one patch diameter, capped at 4 levels.
pub fn default_levels(mask: &RegionMask, patch_radius: usize) -> usize {
    let Some((_, _, bh, bw)) = mask.hole_bounding_box() else {
        return 1;
    };
    let d = bh.min(bw) as f64;
    let diam = (2 * patch_radius + 1) as f64;
    if d <= diam {
        return 1;
    }
    (((d / diam).log2().floor() as usize) + 1).clamp(1, 4)
}

/// Coarse-to-fine solve: mean-initialize the coarsest hole, solve, then
/// repeatedly upsample the result as the next level's initialization.
pub fn solve_multiscale(
    v: &ImageGrid,
    mask: &RegionMask,
    cfg: &SolverConfig,
    n_levels: usize,
) -> Result<SolverState> {
    cfg.validate()?;
    let pyramid = build_pyramid(v, mask, n_levels, cfg.kernel.radius())?;

    let mut prev: Option<SolverState> = None;
    let mut trace = Vec::new();
    let mut total_iters = 0usize;
    let n = pyramid.n_levels();
    for (li, level) in pyramid.levels.iter().enumerate() {
        let u0 = match &prev {
            None => init_hole_windowed_mean(&level.v, &level.mask, 21),
            Some(p) => upsample_init(&p.u, &level.v, &level.mask)?,
        };
        let state = solve(&level.v, &level.mask, cfg, u0)?;
        if !state.converged {
            log::warn!(
                "multiscale level {}/{} stopped at max_iters without meeting tol",
                li + 1,
                n
            );
        }
        total_iters += state.iter;
        trace.extend(state.trace.iter().copied());
        prev = Some(state);
    }
    let mut final_state = prev.expect("pyramid has at least one level");
    final_state.iter = total_iters;
    final_state.trace = trace;
    Ok(final_state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::SearchConfig;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_cfg() -> SolverConfig {
        let mut cfg = SolverConfig::for_sigma(0.0, 1);
        cfg.search = SearchConfig {
            search_radius: Some(4),
            top_k: Some(16),
            subsample_stride: 1,
        };
        cfg.max_iters = 20;
        cfg
    }

    #[test]
    fn downsample_constant_stays_constant() {
        let v = ImageGrid::constant(16, 16, 42.0).unwrap();
        let mask = RegionMask::rect(16, 16, 5, 5, 4, 4, 1).unwrap();
        let (cv, cm) = downsample(&v, &mask).unwrap();
        assert_eq!((cv.width(), cv.height()), (8, 8));
        for i in 0..cv.len() {
            if !cm.is_hole_idx(i) {
                assert_relative_eq!(cv.values()[i], 42.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn downsample_checkerboard_matches_direct_filter() {
        let v = ImageGrid::from_fn(32, 32, |r, c| ((r + c) % 2) as f64 * 200.0).unwrap();
        let mask = RegionMask::rect(32, 32, 10, 10, 6, 6, 1).unwrap();
        let (cv, cm) = downsample(&v, &mask).unwrap();

        // direct full 5x5 masked filter at each even coordinate
        for r in 0..cv.height() {
            for c in 0..cv.width() {
                if cm.is_hole(r, c) {
                    continue;
                }
                let (fr, fc) = (2 * r as i64, 2 * c as i64);
                let mut num = 0.0;
                let mut den = 0.0;
                for dr in -2i64..=2 {
                    for dc in -2i64..=2 {
                        let (rr, cc) = (fr + dr, fc + dc);
                        if rr < 0 || cc < 0 || rr >= 32 || cc >= 32 {
                            continue;
                        }
                        if mask.is_hole(rr as usize, cc as usize) {
                            continue;
                        }
                        let b = BINOMIAL[(dr + 2) as usize] * BINOMIAL[(dc + 2) as usize];
                        num += b * v.at(rr as usize, cc as usize);
                        den += b;
                    }
                }
                assert!(den > 0.0);
                assert_relative_eq!(cv.at(r, c), num / den, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn coarse_hole_iff_all_children_holes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hole: Vec<bool> = (0..18 * 18).map(|_| rng.gen_bool(0.4)).collect();
        let mask = RegionMask::new(18, 18, hole, 1).unwrap();
        let v = ImageGrid::constant(18, 18, 1.0).unwrap();
        let (_, cm) = downsample(&v, &mask).unwrap();
        for r in 0..cm.height() {
            for c in 0..cm.width() {
                let mut all = true;
                for dr in 0..2 {
                    for dc in 0..2 {
                        let (fr, fc) = (2 * r + dr, 2 * c + dc);
                        if fr < 18 && fc < 18 && !mask.is_hole(fr, fc) {
                            all = false;
                        }
                    }
                }
                assert_eq!(cm.is_hole(r, c), all);
            }
        }
    }

    #[test]
    fn upsample_ramp_is_exact_at_even_sites_and_linear_between() {
        // coarse ramp u(i,j) = 10 i + j: bilinear interpolation of a linear
        // function reproduces it exactly
        let coarse = ImageGrid::from_fn(8, 8, |r, c| 10.0 * r as f64 + c as f64).unwrap();
        let fine_v = ImageGrid::constant(16, 16, 0.0).unwrap();
        let all_hole = RegionMask::new(16, 16, vec![true; 256], 1).unwrap();
        let up = upsample_init(&coarse, &fine_v, &all_hole).unwrap();
        for r in 0..15 {
            for c in 0..15 {
                let expect = 10.0 * (r as f64 / 2.0) + c as f64 / 2.0;
                assert_relative_eq!(up.at(r, c), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn upsample_keeps_observed_pixels() {
        let coarse = ImageGrid::constant(4, 4, 99.0).unwrap();
        let fine_v = ImageGrid::from_fn(8, 8, |r, c| (r * 8 + c) as f64).unwrap();
        let mask = RegionMask::rect(8, 8, 2, 2, 3, 3, 1).unwrap();
        let up = upsample_init(&coarse, &fine_v, &mask).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                if mask.is_hole(r, c) {
                    assert_eq!(up.at(r, c), 99.0);
                } else {
                    assert_eq!(up.at(r, c), fine_v.at(r, c));
                }
            }
        }
    }

    #[test]
    fn build_pyramid_respects_caps() {
        let v = ImageGrid::constant(64, 64, 5.0).unwrap();
        let mask = RegionMask::rect(64, 64, 20, 20, 10, 10, 1).unwrap();
        let p = build_pyramid(&v, &mask, 4, 1).unwrap();
        assert!(p.n_levels() >= 2 && p.n_levels() <= 4);
        // coarsest first
        assert!(p.levels[0].v.width() <= p.levels.last().unwrap().v.width());
        assert_eq!(p.levels.last().unwrap().v.width(), 64);

        // tiny image: no room to coarsen
        let v = ImageGrid::constant(10, 10, 5.0).unwrap();
        let mask = RegionMask::rect(10, 10, 4, 4, 2, 2, 1).unwrap();
        let p = build_pyramid(&v, &mask, 4, 1).unwrap();
        assert_eq!(p.n_levels(), 1);
    }

    #[test]
    fn default_levels_heuristic() {
        let m = RegionMask::empty(64, 64, 1).unwrap();
        assert_eq!(default_levels(&m, 1), 1);
        let m = RegionMask::rect(64, 64, 10, 10, 3, 3, 1).unwrap();
        assert_eq!(default_levels(&m, 1), 1);
        let m = RegionMask::rect(64, 64, 10, 10, 12, 12, 1).unwrap();
        assert_eq!(default_levels(&m, 1), 3);
        let m = RegionMask::rect(64, 64, 2, 2, 60, 60, 1).unwrap();
        assert_eq!(default_levels(&m, 1), 4);
    }

    #[test]
    fn single_level_multiscale_equals_plain_solve() {
        let v = ImageGrid::from_fn(20, 20, |r, c| ((r / 4 + c / 4) % 2) as f64 * 150.0).unwrap();
        let mask = RegionMask::rect(20, 20, 8, 8, 3, 3, 1).unwrap();
        let cfg = test_cfg();
        let ms = solve_multiscale(&v, &mask, &cfg, 1).unwrap();
        let direct = solve(&v, &mask, &cfg, init_hole_windowed_mean(&v, &mask, 21)).unwrap();
        assert_eq!(ms.iter, direct.iter);
        for (a, b) in ms.u.values().iter().zip(direct.u.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn multiscale_recovers_constant_exactly() {
        let c = 131.0;
        let v = ImageGrid::constant(32, 32, c).unwrap();
        let mask = RegionMask::rect(32, 32, 12, 12, 8, 8, 1).unwrap();
        let mut cfg = test_cfg();
        // the window must reach past Õ even at the hole center
        cfg.search.search_radius = Some(15);
        let state = solve_multiscale(&v, &mask, &cfg, 3).unwrap();
        for val in state.u.values() {
            assert!((val - c).abs() < 1e-6);
        }
    }
}
