//! Binary cube file.
//!
//! All fields little-endian:
//!
//! | offset | size | field                         |
//! |-------:|-----:|-------------------------------|
//! | 0      | 8    | magic `ISARCUBE`              |
//! | 8      | 2    | format version (u16)          |
//! | 10     | 16   | P, Q, L, N (u32 each)         |
//! | 26     | 4    | frame index (u32)             |
//! | 30     | 8    | frame start, s (f64)          |
//! | 38     | 8    | radar parameter digest (u64)  |
//! | 46     | ...  | payload, (re f32, im f32) per sample, p-major then q, l, n |
//!
//! The payload holds exactly `P·Q·L·N·8` bytes. Samples are stored as `f32`,
//! so writing a cube quantizes it once; reading and rewriting a file is
//! byte-identical.

use std::path::Path;

use num_complex::{Complex32, Complex64};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::params::RadarParams;
use crate::synth::{CubeDims, RawCube};

pub const MAGIC: [u8; 8] = *b"ISARCUBE";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 46;
/// Bytes per stored complex sample.
pub const SAMPLE_BYTES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("not a cube file (bad magic)")]
    BadMagic,
    #[error("unsupported cube format version {0}, this build reads {VERSION}")]
    UnsupportedVersion(u16),
    #[error("truncated cube file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("cube file has {actual} bytes, {expected} expected")]
    TrailingData { expected: u64, actual: u64 },
    #[error("cube dimensions {0:?} overflow the payload size")]
    DimensionOverflow([u32; 4]),
    #[error("cube dimension is zero: {0:?}")]
    ZeroDimension([u32; 4]),
    #[error("cube dimensions {file:?} differ from the radar configuration {expected:?}")]
    DimensionMismatch { file: [u32; 4], expected: [u32; 4] },
    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },
    #[error("cube was written with different radar parameters (digest {file:#018x}, expected {expected:#018x})")]
    DigestMismatch { file: u64, expected: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeHeader {
    pub version: u16,
    /// P, Q, L, N.
    pub dims: [u32; 4],
    pub frame_index: u32,
    pub frame_start_s: f64,
    pub params_digest: u64,
}

impl CubeHeader {
    /// Payload size in bytes, checked against overflow.
    pub fn payload_len(&self) -> std::result::Result<u64, FormatError> {
        let d = self.dims;
        if d.contains(&0) {
            return Err(FormatError::ZeroDimension(d));
        }
        let samples = d.iter().try_fold(1u64, |acc, &x| acc.checked_mul(x as u64));
        samples
            .and_then(|s| s.checked_mul(SAMPLE_BYTES as u64))
            .filter(|&b| b <= (isize::MAX as u64) - HEADER_LEN as u64)
            .ok_or(FormatError::DimensionOverflow(d))
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..8].copy_from_slice(&MAGIC);
        h[8..10].copy_from_slice(&self.version.to_le_bytes());
        for (i, d) in self.dims.iter().enumerate() {
            h[10 + 4 * i..14 + 4 * i].copy_from_slice(&d.to_le_bytes());
        }
        h[26..30].copy_from_slice(&self.frame_index.to_le_bytes());
        h[30..38].copy_from_slice(&self.frame_start_s.to_le_bytes());
        h[38..46].copy_from_slice(&self.params_digest.to_le_bytes());
        h
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 8 && bytes[..8] != MAGIC {
                return Err(FormatError::BadMagic);
            }
            return Err(FormatError::Truncated {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        if bytes[..8] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let header = CubeHeader {
            version,
            dims: [u32_at(10), u32_at(14), u32_at(18), u32_at(22)],
            frame_index: u32_at(26),
            frame_start_s: f64::from_le_bytes(bytes[30..38].try_into().unwrap()),
            params_digest: u64::from_le_bytes(bytes[38..46].try_into().unwrap()),
        };
        header.payload_len()?;
        Ok(header)
    }
}

/// FNV-1a over the little-endian bytes of every radar parameter.
pub fn params_digest(p: &RadarParams) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    for v in [
        p.carrier_freq_hz,
        p.bandwidth_hz,
        p.chirp_slope_hz_per_s,
        p.t_pri_s,
        p.d_tx_m,
        p.d_rx_m,
        p.sample_rate_sps,
        p.t_cpi_s,
        p.ref_range_m,
    ] {
        eat(&v.to_le_bytes());
    }
    for n in [p.num_tx, p.num_rx, p.num_slow, p.num_fast] {
        eat(&(n as u64).to_le_bytes());
    }
    h
}

fn dims_u32(d: CubeDims) -> Result<[u32; 4]> {
    let c = |x: usize| u32::try_from(x).map_err(|_| Error::DimensionOverflow);
    Ok([c(d.num_tx)?, c(d.num_rx)?, c(d.num_slow)?, c(d.num_fast)?])
}

pub fn encode_cube(cube: &RawCube) -> Result<Vec<u8>> {
    let header = CubeHeader {
        version: VERSION,
        dims: dims_u32(cube.dims())?,
        frame_index: cube.frame_index,
        frame_start_s: cube.frame_start_s,
        params_digest: params_digest(&cube.params),
    };
    let payload = header.payload_len()? as usize;
    let mut out = Vec::with_capacity(HEADER_LEN + payload);
    out.extend_from_slice(&header.encode());
    for z in cube.data() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    Ok(out)
}

/// Header and raw samples, without any knowledge of the radar parameters.
pub fn decode_samples(bytes: &[u8]) -> std::result::Result<(CubeHeader, Vec<Complex32>), FormatError> {
    let header = CubeHeader::decode(bytes)?;
    let expected = HEADER_LEN as u64 + header.payload_len()?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(FormatError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(FormatError::TrailingData { expected, actual });
    }
    let samples = bytes[HEADER_LEN..]
        .chunks_exact(SAMPLE_BYTES)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            )
        })
        .collect();
    Ok((header, samples))
}

/// Decodes a cube recorded with `params`; dimensions and digest must agree.
pub fn decode_cube(bytes: &[u8], params: &RadarParams) -> Result<RawCube> {
    let (header, samples) = decode_samples(bytes)?;
    let expected = dims_u32(CubeDims::of(params))?;
    if header.dims != expected {
        return Err(FormatError::DimensionMismatch {
            file: header.dims,
            expected,
        }
        .into());
    }
    let digest = params_digest(params);
    if header.params_digest != digest {
        return Err(FormatError::DigestMismatch {
            file: header.params_digest,
            expected: digest,
        }
        .into());
    }
    let data = samples
        .iter()
        .map(|z| Complex64::new(z.re as f64, z.im as f64))
        .collect();
    RawCube::from_data(params, header.frame_index, header.frame_start_s, data)
}

pub fn write_cube(path: &Path, cube: &RawCube) -> Result<()> {
    let bytes = encode_cube(cube)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_cube(path: &Path, params: &RadarParams) -> Result<RawCube> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_cube(&bytes, params)
}

/// Human-readable layout, printed by the `formats` subcommand.
pub fn describe_formats() -> String {
    format!(
        "cube file (.cube), little-endian, version {VERSION}\n\
         \x20 offset  size  field\n\
         \x20      0     8  magic \"ISARCUBE\"\n\
         \x20      8     2  format version, u16\n\
         \x20     10    16  P, Q, L, N, u32 each\n\
         \x20     26     4  frame index, u32\n\
         \x20     30     8  frame start time in s, f64\n\
         \x20     38     8  radar parameter digest, u64 (FNV-1a)\n\
         \x20     {HEADER_LEN}     -  payload: P*Q*L*N samples of (re f32, im f32), p-major then q, l, n\n\
         \x20 total size = {HEADER_LEN} + P*Q*L*N*{SAMPLE_BYTES} bytes\n\
         \n\
         image PGM (.pgm): binary P5, 16-bit big-endian, rows = range bins, columns = Doppler bins,\n\
         \x20 dB scaled so the image peak maps to 65535 and peak + db_floor (and below) maps to 0\n\
         image CSV (.csv): one line per range bin, comma-separated dB values with 4 decimals\n\
         axes sidecar (.axes.txt): key = value lines with bin spacings and the image shape\n"
    )
}
