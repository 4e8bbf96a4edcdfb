//! Dechirped TDM-MIMO FMCW echo synthesis.
//!
//! Each scatterer contributes, on channel `(p, q)` at slow-time index `l` and
//! fast-time sample `n`,
//!
//! ```text
//! σ_b · u_p(φ_b) · u_q(φ_b) · exp(−j4π r_b(t)/λ) · exp(−j2π K (2(r_b(t) − R_ref)/c) τ_n)
//! ```
//!
//! with `t = t_frame + l·T_CLI + p·T_PRI` and `τ_n = n/f_s`. The range is
//! re-evaluated at every chirp (stop-and-hop), so Doppler and range walk come
//! from the geometry rather than from a fixed Doppler term.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{derive_params, RadarParams, SPEED_OF_LIGHT};
use crate::scene::{RangeMode, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeDims {
    pub num_tx: usize,
    pub num_rx: usize,
    pub num_slow: usize,
    pub num_fast: usize,
}

impl CubeDims {
    pub fn of(params: &RadarParams) -> Self {
        CubeDims {
            num_tx: params.num_tx,
            num_rx: params.num_rx,
            num_slow: params.num_slow,
            num_fast: params.num_fast,
        }
    }

    /// Total number of complex samples, or `None` on overflow.
    pub fn checked_len(&self) -> Option<usize> {
        self.num_tx
            .checked_mul(self.num_rx)?
            .checked_mul(self.num_slow)?
            .checked_mul(self.num_fast)
    }

    pub fn channel_len(&self) -> usize {
        self.num_slow * self.num_fast
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub scene: String,
}

/// One CPI of dechirped samples indexed `[p][q][l][n]`, p-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCube {
    data: Vec<Complex64>,
    dims: CubeDims,
    pub frame_index: u32,
    pub frame_start_s: f64,
    pub params: RadarParams,
    pub provenance: Option<Provenance>,
}

impl RawCube {
    pub fn zeros(params: &RadarParams, frame_index: u32, frame_start_s: f64) -> Result<Self> {
        let dims = CubeDims::of(params);
        let len = dims.checked_len().ok_or(Error::DimensionOverflow)?;
        Ok(RawCube {
            data: vec![Complex64::new(0.0, 0.0); len],
            dims,
            frame_index,
            frame_start_s,
            params: params.clone(),
            provenance: None,
        })
    }

    pub fn from_data(params: &RadarParams, frame_index: u32, frame_start_s: f64, data: Vec<Complex64>) -> Result<Self> {
        let dims = CubeDims::of(params);
        let len = dims.checked_len().ok_or(Error::DimensionOverflow)?;
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "cube needs {len} samples, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Degenerate("cube contains non-finite samples".into()));
        }
        Ok(RawCube {
            data,
            dims,
            frame_index,
            frame_start_s,
            params: params.clone(),
            provenance: None,
        })
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    fn check_channel(&self, p: usize, q: usize) -> Result<()> {
        if p >= self.dims.num_tx || q >= self.dims.num_rx {
            return Err(Error::InvalidChannel {
                p,
                q,
                num_tx: self.dims.num_tx,
                num_rx: self.dims.num_rx,
            });
        }
        Ok(())
    }

    fn channel_offset(&self, p: usize, q: usize) -> usize {
        (p * self.dims.num_rx + q) * self.dims.channel_len()
    }

    /// Samples of one channel as `[l][n]`.
    pub fn channel(&self, p: usize, q: usize) -> Result<&[Complex64]> {
        self.check_channel(p, q)?;
        let start = self.channel_offset(p, q);
        Ok(&self.data[start..start + self.dims.channel_len()])
    }

    pub fn channel_mut(&mut self, p: usize, q: usize) -> Result<&mut [Complex64]> {
        self.check_channel(p, q)?;
        let start = self.channel_offset(p, q);
        let len = self.dims.channel_len();
        Ok(&mut self.data[start..start + len])
    }

    pub fn get(&self, p: usize, q: usize, l: usize, n: usize) -> Complex64 {
        self.data[self.channel_offset(p, q) + l * self.dims.num_fast + n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    /// Offset each transmitter's chirp by `p·T_PRI` inside the chirp loop.
    pub tdm_offset: bool,
    /// Keep the residual video phase `exp(−jπK δτ²)`.
    pub residual_video_phase: bool,
    pub range_mode: RangeMode,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            tdm_offset: true,
            residual_video_phase: false,
            range_mode: RangeMode::Exact,
        }
    }
}

/// Receiver noise and clutter seen by every frame of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub noise_power: f64,
    pub clutter: Vec<crate::scene::Scatterer>,
}

impl NoiseModel {
    pub fn of(scene: &Scene) -> Self {
        NoiseModel {
            noise_power: scene.noise_power,
            clutter: scene.clutter.clone(),
        }
    }
}

/// Stream id reserved for reflectivity fluctuation draws.
const JITTER_STREAM_BIT: u64 = 1 << 63;

fn channel_stream(frame_index: u32, p: usize, q: usize) -> u64 {
    ((frame_index as u64) << 24) | ((p as u64) << 12) | q as u64
}

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-frame reflectivities, perturbed by the scene's jitter if any.
fn frame_reflectivities(scene: &Scene, frame_index: u32) -> Vec<f64> {
    if scene.reflectivity_jitter == 0.0 {
        return scene.scatterers.iter().map(|s| s.reflectivity).collect();
    }
    let mut rng = frame_rng(scene.seed, JITTER_STREAM_BIT | frame_index as u64);
    scene
        .scatterers
        .iter()
        .map(|s| {
            let g: f64 = StandardNormal.sample(&mut rng);
            (s.reflectivity * (1.0 + scene.reflectivity_jitter * g)).max(0.0)
        })
        .collect()
}

/// Adds the dechirped return of one point at range `r` and azimuth `phi`.
#[allow(clippy::too_many_arguments)]
fn add_point(
    row: &mut [Complex64],
    params: &RadarParams,
    wavelength: f64,
    p: usize,
    q: usize,
    amplitude: f64,
    r: f64,
    phi: f64,
    rvp: bool,
) {
    let steering = -2.0 * PI * (params.d_tx_m * p as f64 + params.d_rx_m * q as f64) * phi.sin() / wavelength;
    let mut phase = steering - 4.0 * PI * r / wavelength;
    let delay = 2.0 * (r - params.ref_range_m) / SPEED_OF_LIGHT;
    if rvp {
        phase -= PI * params.chirp_slope_hz_per_s * delay * delay;
    }
    let beat_hz = params.chirp_slope_hz_per_s * delay;
    let step = -2.0 * PI * beat_hz / params.sample_rate_sps;
    for (n, z) in row.iter_mut().enumerate() {
        *z += Complex64::from_polar(amplitude, phase + step * n as f64);
    }
}

pub fn frame_start_s(params: &RadarParams, frame_index: u32) -> f64 {
    frame_index as f64 * params.t_cpi_s
}

pub fn synthesize_frame(scene: &Scene, params: &RadarParams, frame_index: u32, opts: &SynthOptions) -> Result<RawCube> {
    scene.validate()?;
    let derived = derive_params(params)?;
    let start = frame_start_s(params, frame_index);
    let traj = &scene.trajectory;
    for t in [start, start + params.t_cpi_s] {
        if !traj.contains(t) {
            return Err(Error::TimeOutOfRange {
                t,
                start: traj.start_s(),
                end: traj.end_s(),
            });
        }
    }

    let mut cube = RawCube::zeros(params, frame_index, start)?;
    cube.provenance = Some(Provenance {
        seed: scene.seed,
        scene: scene.name.clone(),
    });
    let dims = cube.dims();
    let reflectivities = frame_reflectivities(scene, frame_index);
    let clutter_geometry: Vec<(f64, f64, f64)> = scene
        .clutter
        .iter()
        .map(|c| {
            (
                c.reflectivity,
                c.x_m.hypot(c.y_m),
                crate::scene::azimuth_of([c.x_m, c.y_m]),
            )
        })
        .collect();
    let wavelength = derived.wavelength_m;
    let num_rx = dims.num_rx;

    cube.data_mut()
        .par_chunks_mut(dims.channel_len())
        .enumerate()
        .try_for_each(|(ch, samples)| -> Result<()> {
            let (p, q) = (ch / num_rx, ch % num_rx);
            for (l, row) in samples.chunks_mut(dims.num_fast).enumerate() {
                let mut t = start + l as f64 * derived.t_cli_s;
                if opts.tdm_offset {
                    t += p as f64 * params.t_pri_s;
                }
                if !scene.scatterers.is_empty() {
                    let pose = traj.pose_at(t)?;
                    for ((r, phi), &sigma) in scene.target_geometry(&pose, opts.range_mode).zip(&reflectivities) {
                        add_point(row, params, wavelength, p, q, sigma, r, phi, opts.residual_video_phase);
                    }
                }
                for &(sigma, r, phi) in &clutter_geometry {
                    add_point(row, params, wavelength, p, q, sigma, r, phi, opts.residual_video_phase);
                }
            }
            if scene.noise_power > 0.0 {
                let mut rng = frame_rng(scene.seed, channel_stream(frame_index, p, q));
                let sd = (scene.noise_power / 2.0).sqrt();
                for z in samples.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *z += Complex64::new(sd * re, sd * im);
                }
            }
            Ok(())
        })?;
    Ok(cube)
}

pub fn synthesize_sequence(
    scene: &Scene,
    params: &RadarParams,
    frame_indices: &[u32],
    opts: &SynthOptions,
) -> Result<Vec<RawCube>> {
    frame_indices
        .par_iter()
        .map(|&f| synthesize_frame(scene, params, f, opts))
        .collect()
}
