//! Range-Doppler image export: 16-bit PGM, dB CSV and an axes sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::config::ImageFormat;
use crate::cubefile::FormatError;
use crate::error::{Error, Result};
use crate::imaging::RdImage;

pub const DEFAULT_DB_FLOOR: f64 = -120.0;

fn check(img: &RdImage, db_floor: f64) -> Result<()> {
    if !(db_floor.is_finite() && db_floor < 0.0) {
        return Err(Error::InvalidParam {
            name: "db_floor",
            reason: format!("must be finite and negative, got {db_floor}"),
        });
    }
    if img.pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Degenerate("image has negative or non-finite pixels".into()));
    }
    Ok(())
}

fn peak_db(img: &RdImage) -> f64 {
    10.0 * img.pixels.iter().cloned().fold(0.0, f64::max).log10()
}

/// Pixels mapped to 16-bit levels: the image peak is 65535 and everything at
/// or below `peak + db_floor` is 0. An all-zero image maps to all zeros.
pub fn pgm_levels(img: &RdImage, db_floor: f64) -> Result<Array2<u16>> {
    check(img, db_floor)?;
    let peak = peak_db(img);
    if peak == f64::NEG_INFINITY {
        return Ok(Array2::zeros(img.pixels.dim()));
    }
    let span = -db_floor;
    Ok(img.pixels.mapv(|p| {
        let rel = (10.0 * p.log10() - peak + span) / span;
        (rel.clamp(0.0, 1.0) * 65535.0).round() as u16
    }))
}

/// Binary P5 with 16-bit big-endian samples, range bins as rows.
pub fn encode_pgm(img: &RdImage, db_floor: f64) -> Result<Vec<u8>> {
    let levels = pgm_levels(img, db_floor)?;
    let (rows, cols) = levels.dim();
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    out.reserve(rows * cols * 2);
    for v in levels.iter() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    Ok(out)
}

fn malformed(what: &'static str, reason: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        what,
        reason: reason.into(),
    }
}

/// Reads back a 16-bit P5 image as written by [`encode_pgm`].
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Array2<u16>, FormatError> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("pgm", "header ends early"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| malformed("pgm", "header is not ASCII"))?);
    }
    if fields[0] != "P5" {
        return Err(malformed("pgm", "not a binary P5 file"));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| malformed("pgm", format!("bad number `{s}`")))
    };
    let (cols, rows, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 65535 {
        return Err(malformed("pgm", format!("expected 16-bit maxval 65535, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| malformed("pgm", "dimensions overflow"))?;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != expected {
        return Err(malformed(
            "pgm",
            format!("expected {expected} sample bytes, found {}", body.len()),
        ));
    }
    let data = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| malformed("pgm", e.to_string()))
}

/// dB values clamped below at `peak + db_floor` (or at `db_floor` for an
/// all-zero image), one line per range bin, 4 decimals.
pub fn encode_csv(img: &RdImage, db_floor: f64) -> Result<String> {
    check(img, db_floor)?;
    let peak = peak_db(img);
    let floor = if peak.is_finite() { peak + db_floor } else { db_floor };
    let mut out = String::with_capacity(img.pixels.len() * 10);
    for row in img.pixels.rows() {
        for (i, &p) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let db = (10.0 * p.log10()).max(floor);
            // avoid "-0.0000"
            let db = if db.abs() < 5e-5 { 0.0 } else { db };
            let _ = write!(out, "{db:.4}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn decode_csv(text: &str) -> std::result::Result<Array2<f64>, FormatError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| malformed("csv image", format!("line {}: not a list of numbers", i + 1)))?;
        match cols {
            None => cols = Some(vals.len()),
            Some(c) if c != vals.len() => {
                return Err(malformed(
                    "csv image",
                    format!("line {}: {} values, expected {c}", i + 1, vals.len()),
                ))
            }
            _ => {}
        }
        data.extend(vals);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| malformed("csv image", "no rows"))?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| malformed("csv image", e.to_string()))
}

/// `key = value` description of the image axes.
pub fn axes_sidecar(img: &RdImage, db_floor: f64) -> String {
    let (rows, cols) = img.pixels.dim();
    format!(
        "channel = {}\nframe_index = {}\nnum_range = {rows}\nnum_doppler = {cols}\n\
         range_bin_m = {}\ndoppler_bin_hz = {}\nzero_doppler_column = {}\npeak_db = {:.4}\ndb_floor = {db_floor}\n",
        img.channel,
        img.frame_index,
        img.axes.range_bin_m,
        img.axes.doppler_bin_hz,
        cols / 2,
        peak_db(img),
    )
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes `<stem>.pgm`, `<stem>.csv` (as requested) and `<stem>.axes.txt`
/// into `dir`, returning the paths written.
pub fn write_image(
    dir: &Path,
    stem: &str,
    img: &RdImage,
    formats: &[ImageFormat],
    db_floor: f64,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for f in formats {
        let path = dir.join(format!("{stem}.{}", f.id()));
        match f {
            ImageFormat::Pgm => write_file(&path, &encode_pgm(img, db_floor)?)?,
            ImageFormat::Csv => write_file(&path, encode_csv(img, db_floor)?.as_bytes())?,
        }
        written.push(path);
    }
    let path = dir.join(format!("{stem}.axes.txt"));
    write_file(&path, axes_sidecar(img, db_floor).as_bytes())?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{Axes, Channel};
    use rand::{Rng, SeedableRng};

    fn image(pixels: Array2<f64>) -> RdImage {
        RdImage {
            pixels,
            channel: Channel::Integrated,
            frame_index: 3,
            axes: Axes {
                range_bin_m: 0.134375,
                doppler_bin_hz: 10.0,
            },
        }
    }

    #[test]
    fn constant_image_is_flat() {
        let lv = pgm_levels(&image(Array2::from_elem((4, 6), 2.5)), -120.0).unwrap();
        assert!(lv.iter().all(|&v| v == 65535));
    }

    #[test]
    fn hot_pixel_extremes() {
        let mut px = Array2::zeros((5, 5));
        px[[2, 3]] = 1e6;
        px[[0, 0]] = 1e-7; // 130 dB down, below the window
        let lv = pgm_levels(&image(px), -120.0).unwrap();
        assert_eq!(lv[[2, 3]], 65535);
        assert_eq!(lv.iter().filter(|&&v| v == 0).count(), 24);
    }

    #[test]
    fn mid_window_level() {
        let mut px = Array2::from_elem((1, 2), 1.0);
        px[[0, 1]] = 1e6; // 60 dB above the other pixel, half the window
        let lv = pgm_levels(&image(px), -120.0).unwrap();
        assert_eq!(lv[[0, 0]], 32768);
    }

    #[test]
    fn pgm_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let img = image(Array2::from_shape_simple_fn((7, 9), || rng.gen_range(0.0..10.0)));
        let bytes = encode_pgm(&img, -120.0).unwrap();
        assert!(bytes.starts_with(b"P5\n9 7\n65535\n"));
        assert_eq!(decode_pgm(&bytes).unwrap(), pgm_levels(&img, -120.0).unwrap());
        assert!(decode_pgm(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn csv_round_trip_to_four_decimals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let img = image(Array2::from_shape_simple_fn((6, 8), || rng.gen_range(0.0..1e4)));
        let parsed = decode_csv(&encode_csv(&img, -120.0).unwrap()).unwrap();
        assert_eq!(parsed.dim(), (6, 8));
        for (p, &x) in parsed.iter().zip(img.pixels.iter()) {
            assert!((p - 10.0 * x.log10()).abs() <= 5e-5 + 1e-12);
        }
    }

    #[test]
    fn csv_floor_and_zero_image() {
        let mut px = Array2::zeros((2, 2));
        px[[0, 0]] = 1.0;
        let parsed = decode_csv(&encode_csv(&image(px), -120.0).unwrap()).unwrap();
        assert_eq!(parsed[[0, 0]], 0.0);
        assert_eq!(parsed[[1, 1]], -120.0);
        let zero = decode_csv(&encode_csv(&image(Array2::zeros((2, 2))), -120.0).unwrap()).unwrap();
        assert!(zero.iter().all(|&v| v == -120.0));
    }

    #[test]
    fn rejects_bad_input() {
        let mut px = Array2::zeros((2, 2));
        px[[1, 0]] = f64::NAN;
        assert!(encode_csv(&image(px), -120.0).is_err());
        assert!(encode_pgm(&image(Array2::zeros((2, 2))), 0.0).is_err());
        assert!(decode_csv("1,2\n3\n").is_err());
        assert!(decode_csv("").is_err());
        assert!(decode_pgm(b"P2\n1 1\n65535\n\0\0").is_err());
    }

    #[test]
    fn sidecar_lists_axes() {
        let s = axes_sidecar(&image(Array2::from_elem((4, 8), 1.0)), -120.0);
        assert!(s.contains("range_bin_m = 0.134375"));
        assert!(s.contains("zero_doppler_column = 4"));
    }
}
