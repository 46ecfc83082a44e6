//! Basic CLI behavior: argument handling, config precedence, metrics
//! output format.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchweave"))
}

fn write_pgm(path: &Path, w: usize, h: usize, f: impl Fn(usize, usize) -> u8) {
    let mut data = format!("P5\n{w} {h}\n255\n").into_bytes();
    for r in 0..h {
        for c in 0..w {
            data.push(f(r, c));
        }
    }
    std::fs::write(path, data).unwrap();
}

#[test]
fn degrade_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.pgm");
    write_pgm(&clean, 32, 32, |r, _| (r * 8) as u8);

    let out = bin()
        .args(["degrade", "-i"])
        .arg(&clean)
        .arg("-o")
        .arg(dir.path().join("bad.pgm"))
        .arg("--mask-out")
        .arg(dir.path().join("mask.pgm"))
        .args(["--mask-spec", "rect:4,4,8,8", "--sigma", "5", "--seed", "7"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .arg("metrics")
        .arg("--reference")
        .arg(&clean)
        .arg("--test")
        .arg(dir.path().join("bad.pgm"))
        .arg("--mask")
        .arg(dir.path().join("mask.pgm"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for region in ["omega", "hole", "known"] {
        let line = text
            .lines()
            .find(|l| l.starts_with(&format!("region={region} ")))
            .unwrap_or_else(|| panic!("missing region {region}: {text}"));
        assert!(line.contains("mse="));
        assert!(line.contains("psnr="));
    }
}

#[test]
fn metrics_identical_images_report_inf() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.pgm");
    write_pgm(&img, 8, 8, |r, c| (r + c) as u8);
    let out = bin()
        .arg("metrics")
        .arg("--reference")
        .arg(&img)
        .arg("--test")
        .arg(&img)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("psnr=inf"), "{text}");
    assert!(text.contains("mse=0.000000"), "{text}");
}

#[test]
fn restore_denoise_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_pgm(&input, 24, 24, |_, c| if (c / 4) % 2 == 0 { 200 } else { 40 });
    let output = dir.path().join("out.pgm");
    let trace = dir.path().join("trace.csv");

    let out = bin()
        .args(["restore", "--mode", "denoise", "-i"])
        .arg(&input)
        .arg("-o")
        .arg(&output)
        .arg("--trace")
        .arg(&trace)
        .args(["--sigma", "5", "--max-iters", "3", "--report"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(output.exists());

    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("iterations="), "{report}");

    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,fidelity,entropy,patch,total,rel_change"
    );
    assert!(lines.count() >= 1);
}

#[test]
fn config_file_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_pgm(&input, 16, 16, |r, c| ((r * c) % 251) as u8);
    let config = dir.path().join("cfg.toml");
    std::fs::write(&config, "max_iters = 1\npatch_radius = 1\n").unwrap();

    // file value applies
    let out = bin()
        .args(["restore", "--mode", "denoise", "--report", "-i"])
        .arg(&input)
        .arg("-o")
        .arg(dir.path().join("a.pgm"))
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("iterations=1"), "{report}");

    // explicit flag beats the file
    let out = bin()
        .args(["restore", "--mode", "denoise", "--report", "-i"])
        .arg(&input)
        .arg("-o")
        .arg(dir.path().join("b.pgm"))
        .arg("--config")
        .arg(&config)
        .args(["--max-iters", "2", "--tol", "1e-30"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("iterations=2"), "{report}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_pgm(&input, 8, 8, |_, _| 100);
    let config = dir.path().join("cfg.toml");
    std::fs::write(&config, "not_a_real_key = 5\n").unwrap();

    let out = bin()
        .args(["restore", "--mode", "denoise", "-i"])
        .arg(&input)
        .arg("-o")
        .arg(dir.path().join("a.pgm"))
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn blocks_mask_spec_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_pgm(&input, 32, 32, |r, _| (r * 7) as u8);

    let run = |tag: &str| {
        let mask = dir.path().join(format!("mask_{tag}.pgm"));
        let out = bin()
            .args(["degrade", "-i"])
            .arg(&input)
            .arg("-o")
            .arg(dir.path().join(format!("bad_{tag}.pgm")))
            .arg("--mask-out")
            .arg(&mask)
            .args(["--mask-spec", "blocks:3,5,42"])
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(&mask).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}
