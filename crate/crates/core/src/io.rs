//! Grayscale image I/O: portable graymaps (P2/P5) and PNG.
//!
//! 8-bit data round-trips through PGM bit-exactly; floating point values are
//! rounded to nearest and clamped to 0..255 on the way out.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::mask::RegionMask;

/// Reads a grayscale image (PGM P2/P5 or PNG) into an [`ImageGrid`].
pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else {
        let img = image::load_from_memory(&bytes)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
            .to_luma8();
        ImageGrid::new(
            img.width() as usize,
            img.height() as usize,
            img.pixels().map(|p| p.0[0] as f64).collect(),
        )
    }
}

/// Writes `grid` to `path`; the extension selects PGM (P5) or PNG.
pub fn write_image(path: &Path, grid: &ImageGrid) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "pgm" => write_pgm(path, grid),
        "png" => {
            let buf = image::GrayImage::from_fn(grid.width() as u32, grid.height() as u32, |x, y| {
                image::Luma([quantize(grid.at(y as usize, x as usize))])
            });
            buf.save(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        }
        other => Err(Error::Io(format!("unsupported image extension '{other}'"))),
    }
}

/// Reads a mask image; intensity >= 128 marks a hole pixel.
pub fn read_mask(path: &Path, patch_radius: usize) -> Result<RegionMask> {
    let img = read_image(path)?;
    let hole = img.values().iter().map(|&v| v >= 128.0).collect();
    RegionMask::new(img.width(), img.height(), hole, patch_radius)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes a mask as an 8-bit PGM/PNG with hole = 255, known = 0.
pub fn write_mask(path: &Path, mask: &RegionMask) -> Result<()> {
    let grid = ImageGrid::from_fn(mask.width(), mask.height(), |r, c| {
        if mask.is_hole(r, c) {
            255.0
        } else {
            0.0
        }
    })?;
    write_image(path, &grid)
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn write_pgm(path: &Path, grid: &ImageGrid) -> Result<()> {
    let mut out = Vec::with_capacity(grid.len() + 32);
    write!(out, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    out.extend(grid.values().iter().map(|&v| quantize(v)));
    fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let binary = bytes.starts_with(b"P5");
    let mut pos = 2usize;
    let mut header = Vec::with_capacity(3);

    // header tokens with '#' comment handling
    while header.len() < 3 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Io("truncated PGM header".into()));
        }
        let tok = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::Io("invalid PGM header".into()))?;
        header.push(
            tok.parse::<usize>()
                .map_err(|_| Error::Io(format!("invalid PGM header token '{tok}'")))?,
        );
    }
    let (width, height, maxval) = (header[0], header[1], header[2]);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Io(format!("unsupported PGM maxval {maxval}")));
    }

    let values = if binary {
        pos += 1; // single whitespace after maxval
        let need = width * height;
        if bytes.len() < pos + need {
            return Err(Error::Io("truncated PGM pixel data".into()));
        }
        bytes[pos..pos + need].iter().map(|&b| b as f64).collect()
    } else {
        let text = std::str::from_utf8(&bytes[pos..])
            .map_err(|_| Error::Io("invalid P2 pixel data".into()))?;
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Io("invalid P2 pixel value".into()))?;
        if vals.len() < width * height {
            return Err(Error::Io("truncated P2 pixel data".into()));
        }
        vals[..width * height].to_vec()
    };
    ImageGrid::new(width, height, values)
}
