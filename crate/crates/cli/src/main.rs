//! Command-line front end: restore (inpaint / denoise), degrade (make test
//! inputs), and metrics (MSE / PSNR per region).
//!
//! Exit codes: 0 success, 1 usage, 2 unreadable input, 3 dimension
//! mismatch, 4 solver failure, 5 empty metric region.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use patchweave_core as core;
use patchweave_core::{
    ImageGrid, Mollifier, PatchKernel, Psnr, RegionKind, RegionMask, SearchConfig, SolverConfig,
    SolverState, WeightDomain,
};

const EXIT_READ: u8 = 2;
const EXIT_DIMS: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_EMPTY_REGION: u8 = 5;

#[derive(Parser)]
#[command(name = "patchweave", version, about = "Patch-based nonlocal image inpainting and denoising")]
struct Cli {
    /// Worker thread count (also settable via PATCHWEAVE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill holes and/or denoise an image.
    Restore(RestoreArgs),
    /// Synthesize a degraded input: punch a hole, add Gaussian noise.
    Degrade(DegradeArgs),
    /// MSE / PSNR between two images, per region.
    Metrics(MetricsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Hole filling only; weights restricted to the dilated hole.
    Inpaint,
    /// Denoising only; the mask is ignored.
    Denoise,
    /// Joint hole filling and denoising in one alternation.
    Restore,
    /// Inpaint first, then denoise the completed image.
    Decoupled,
}

#[derive(Args)]
struct RestoreArgs {
    /// Degraded input image (PGM or PNG, 8-bit grayscale).
    #[arg(long, short)]
    input: PathBuf,
    /// Hole mask image; pixels >= 128 are treated as missing.
    #[arg(long, short)]
    mask: Option<PathBuf>,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "decoupled")]
    mode: Mode,
    /// TOML file with the same parameter names as the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise standard deviation (gray levels); 0 means noiseless.
    #[arg(long)]
    sigma: Option<f64>,
    /// Fidelity weight; default h/max(sigma,1)^2.
    #[arg(long)]
    lambda: Option<f64>,
    /// Softmax temperature; default 2*sigma_est^2*|B|.
    #[arg(long = "h")]
    h: Option<f64>,
    #[arg(long)]
    patch_radius: Option<usize>,
    /// Candidate search window radius; 0 means exhaustive.
    #[arg(long)]
    search_radius: Option<i64>,
    /// Keep only the k largest weights per pixel; 0 disables truncation.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Pyramid levels, or "auto" to size from the hole.
    #[arg(long, default_value = "auto")]
    levels: String,
    /// Write the per-iteration energy trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print iteration and energy statistics to stdout.
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct DegradeArgs {
    /// Clean source image.
    #[arg(long, short)]
    input: PathBuf,
    /// Degraded image output path.
    #[arg(long, short)]
    output: PathBuf,
    /// Mask image output path.
    #[arg(long)]
    mask_out: PathBuf,
    /// Hole layout: rect:x,y,w,h | blocks:n,size,seed | file:path | none
    #[arg(long, default_value = "none")]
    mask_spec: String,
    /// Gaussian noise level added outside the hole.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Optional mask splitting the report into omega / hole / known rows.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    sigma: Option<f64>,
    lambda: Option<f64>,
    h: Option<f64>,
    patch_radius: Option<usize>,
    search_radius: Option<i64>,
    top_k: Option<usize>,
    stride: Option<usize>,
    tol: Option<f64>,
    max_iters: Option<usize>,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn read_image_or_exit(path: &Path) -> Result<ImageGrid, ExitCode> {
    core::io::read_image(path).map_err(|e| fail(EXIT_READ, format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("PATCHWEAVE_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(1, format!("thread pool: {e}"));
        }
    }

    match cli.command {
        Command::Restore(args) => run_restore(args),
        Command::Degrade(args) => run_degrade(args),
        Command::Metrics(args) => run_metrics(args),
    }
}

fn build_config(args: &RestoreArgs) -> Result<SolverConfig, ExitCode> {
    let file: FileConfig = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| fail(EXIT_READ, format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| fail(EXIT_READ, format!("{}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };

    // precedence: flag > config file > builtin default
    let sigma = args.sigma.or(file.sigma).unwrap_or(0.0);
    let patch_radius = args.patch_radius.or(file.patch_radius).unwrap_or(2);
    let mut cfg = SolverConfig::for_sigma(sigma, patch_radius);
    if let Some(h) = args.h.or(file.h) {
        cfg.h = h;
        cfg.lambda = core::default_lambda(h, sigma);
    }
    if let Some(l) = args.lambda.or(file.lambda) {
        cfg.lambda = l;
    }
    if let Some(t) = args.tol.or(file.tol) {
        cfg.tol = t;
    }
    if let Some(m) = args.max_iters.or(file.max_iters) {
        cfg.max_iters = m;
    }
    let mut search = SearchConfig::default();
    if let Some(s) = args.search_radius.or(file.search_radius) {
        search.search_radius = if s <= 0 { None } else { Some(s as usize) };
    }
    if let Some(k) = args.top_k.or(file.top_k) {
        search.top_k = if k == 0 { None } else { Some(k) };
    }
    if let Some(s) = args.stride.or(file.stride) {
        search.subsample_stride = s;
    }
    cfg.search = search;
    cfg.mollifier = Mollifier::delta();
    cfg.kernel = PatchKernel::with_radius(patch_radius);
    Ok(cfg)
}

fn run_restore(args: RestoreArgs) -> ExitCode {
    let v = match read_image_or_exit(&args.input) {
        Ok(v) => v,
        Err(c) => return c,
    };
    let cfg = match build_config(&args) {
        Ok(c) => c,
        Err(c) => return c,
    };
    let mask = match &args.mask {
        Some(p) => match core::io::read_mask(p, cfg.kernel.radius()) {
            Ok(m) => m,
            Err(e) => return fail(EXIT_READ, format!("{}: {e}", p.display())),
        },
        None => RegionMask::empty(v.width(), v.height(), cfg.kernel.radius())
            .expect("image dimensions already validated"),
    };
    if mask.width() != v.width() || mask.height() != v.height() {
        return fail(
            EXIT_DIMS,
            format!(
                "mask is {}x{} but image is {}x{}",
                mask.width(),
                mask.height(),
                v.width(),
                v.height()
            ),
        );
    }

    let levels = match args.levels.as_str() {
        "auto" => core::default_levels(&mask, cfg.kernel.radius()),
        s => match s.parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => return fail(1, "--levels must be a positive integer or \"auto\""),
        },
    };

    let result: core::Result<SolverState> = match args.mode {
        Mode::Inpaint => {
            let mut c = cfg.clone();
            c.weight_domain = WeightDomain::ExtendedOnly;
            core::solve_multiscale(&v, &mask, &c, levels)
        }
        Mode::Denoise => {
            let empty = RegionMask::empty(v.width(), v.height(), cfg.kernel.radius()).unwrap();
            core::solve(&v, &empty, &cfg, v.clone())
        }
        Mode::Restore => core::solve_multiscale(&v, &mask, &cfg, levels),
        Mode::Decoupled => core::solve_decoupled(&v, &mask, &cfg),
    };
    let state = match result {
        Ok(s) => s,
        Err(e) => return fail(EXIT_SOLVER, e),
    };

    if let Some(p) = &args.trace {
        if let Err(e) = std::fs::write(p, core::trace_csv(&state.trace)) {
            return fail(EXIT_READ, format!("{}: {e}", p.display()));
        }
    }
    if args.report {
        println!("iterations={}", state.iter);
        println!("converged={}", state.converged);
        if let Some(last) = state.trace.last() {
            println!("final_energy={}", last.total);
            println!("final_rel_change={}", last.rel_change);
        }
    }
    match core::io::write_image(&args.output, &state.u) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_READ, format!("{}: {e}", args.output.display())),
    }
}

fn parse_mask_spec(spec: &str, w: usize, h: usize, r: usize) -> Result<RegionMask, String> {
    if spec == "none" {
        return RegionMask::empty(w, h, r).map_err(|e| e.to_string());
    }
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| format!("bad mask spec {spec:?}"))?;
    match kind {
        "rect" => {
            let p: Vec<usize> = rest
                .split(',')
                .map(|t| t.parse().map_err(|_| format!("bad rect spec {rest:?}")))
                .collect::<Result<_, _>>()?;
            if p.len() != 4 {
                return Err(format!("rect spec needs x,y,w,h; got {rest:?}"));
            }
            RegionMask::rect(w, h, p[1], p[0], p[2], p[3], r).map_err(|e| e.to_string())
        }
        "blocks" => {
            let p: Vec<u64> = rest
                .split(',')
                .map(|t| t.parse().map_err(|_| format!("bad blocks spec {rest:?}")))
                .collect::<Result<_, _>>()?;
            if p.len() != 3 {
                return Err(format!("blocks spec needs n,size,seed; got {rest:?}"));
            }
            let (n, size, seed) = (p[0] as usize, p[1] as usize, p[2]);
            if size == 0 || size > w.min(h) {
                return Err("block size out of range".into());
            }
            let mut hole = vec![false; w * h];
            // simple LCG: deterministic placement without extra dependencies
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 33) as usize
            };
            for _ in 0..n {
                let r0 = next() % (h - size + 1);
                let c0 = next() % (w - size + 1);
                for rr in r0..r0 + size {
                    for cc in c0..c0 + size {
                        hole[rr * w + cc] = true;
                    }
                }
            }
            RegionMask::new(w, h, hole, r).map_err(|e| e.to_string())
        }
        "file" => core::io::read_mask(Path::new(rest), r).map_err(|e| e.to_string()),
        _ => Err(format!("unknown mask spec kind {kind:?}")),
    }
}

fn run_degrade(args: DegradeArgs) -> ExitCode {
    let clean = match read_image_or_exit(&args.input) {
        Ok(v) => v,
        Err(c) => return c,
    };
    let mask = match parse_mask_spec(&args.mask_spec, clean.width(), clean.height(), 2) {
        Ok(m) => m,
        Err(e) => return fail(1, e),
    };
    if mask.width() != clean.width() || mask.height() != clean.height() {
        return fail(EXIT_DIMS, "mask dimensions do not match the image");
    }

    let known = mask.pixels(RegionKind::Known);
    let noisy = match core::add_gaussian_noise(
        &clean,
        core::NoiseSpec {
            sigma: args.sigma,
            seed: args.seed,
        },
        &known,
    ) {
        Ok(v) => v,
        Err(e) => return fail(1, e),
    };
    let mut degraded = noisy;
    for i in mask.pixels(RegionKind::Hole) {
        degraded.values_mut()[i] = 0.0;
    }

    if let Err(e) = core::io::write_image(&args.output, &degraded) {
        return fail(EXIT_READ, format!("{}: {e}", args.output.display()));
    }
    if let Err(e) = core::io::write_mask(&args.mask_out, &mask) {
        return fail(EXIT_READ, format!("{}: {e}", args.mask_out.display()));
    }
    ExitCode::SUCCESS
}

fn run_metrics(args: MetricsArgs) -> ExitCode {
    let reference = match read_image_or_exit(&args.reference) {
        Ok(v) => v,
        Err(c) => return c,
    };
    let test = match read_image_or_exit(&args.test) {
        Ok(v) => v,
        Err(c) => return c,
    };
    if !reference.same_shape(&test) {
        return fail(EXIT_DIMS, "reference and test image dimensions differ");
    }

    let mut regions: Vec<(&str, Vec<usize>)> = vec![(
        "omega",
        core::all_pixels(reference.width(), reference.height()),
    )];
    if let Some(p) = &args.mask {
        let mask = match core::io::read_mask(p, 0) {
            Ok(m) => m,
            Err(e) => return fail(EXIT_READ, format!("{}: {e}", p.display())),
        };
        if mask.width() != reference.width() || mask.height() != reference.height() {
            return fail(EXIT_DIMS, "mask dimensions do not match the images");
        }
        regions.push(("hole", mask.pixels(RegionKind::Hole)));
        regions.push(("known", mask.pixels(RegionKind::Known)));
    }

    for (name, pixels) in regions {
        if pixels.is_empty() {
            eprintln!("error: region {name} is empty");
            return ExitCode::from(EXIT_EMPTY_REGION);
        }
        let mse = core::mse(&reference, &test, &pixels).expect("regions validated above");
        let psnr = core::psnr(&reference, &test, &pixels, 255.0).expect("regions validated above");
        let psnr_str = match psnr {
            Psnr::Identical => "inf".to_string(),
            Psnr::Db(d) => format!("{d:.4}"),
        };
        println!("region={name} mse={mse:.6} psnr={psnr_str}");
    }
    ExitCode::SUCCESS
}
