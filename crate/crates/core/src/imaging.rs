//! Range-Doppler image formation and non-coherent channel integration.
//!
//! Range profiles are stored `[range bin][slow time]`. The fast-time transform
//! uses the positive-exponent kernel so that a dechirped tone
//! `exp(−j2π f_b τ)` lands in bin `f_b·N/f_s`, i.e. bin index grows with
//! range. The slow-time transform is the ordinary forward DFT, shifted so zero
//! Doppler sits at index `L/2`. Neither transform is normalized, so
//! `Σ pixels = N·L·Σ|x|²`.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::params::derive_params;
use crate::synth::RawCube;

pub type Profiles = Array2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Siso { p: usize, q: usize },
    Integrated,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Channel::Siso { p, q } => write!(f, "tx{p}-rx{q}"),
            Channel::Integrated => f.write_str("integrated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axes {
    pub range_bin_m: f64,
    pub doppler_bin_hz: f64,
}

/// Linear-power range-Doppler image, `[range bin][Doppler bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdImage {
    pub pixels: Array2<f64>,
    pub channel: Channel,
    pub frame_index: u32,
    pub axes: Axes,
}

impl RdImage {
    pub fn num_range(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn num_doppler(&self) -> usize {
        self.pixels.ncols()
    }

    /// `(range bin, Doppler bin)` of the brightest pixel; first one on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        for ((r, d), &v) in self.pixels.indexed_iter() {
            if v > best_val {
                best_val = v;
                best = (r, d);
            }
        }
        best
    }

    pub fn total_power(&self) -> f64 {
        self.pixels.sum()
    }
}

pub fn axes_of(cube: &RawCube) -> Result<Axes> {
    let d = derive_params(&cube.params)?;
    Ok(Axes {
        range_bin_m: d.range_bin_m,
        doppler_bin_hz: d.doppler_bin_hz,
    })
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Fast-time transform of channel `(p, q)`.
pub fn range_profiles(cube: &RawCube, p: usize, q: usize, window: Window) -> Result<Profiles> {
    let samples = cube.channel(p, q)?;
    let dims = cube.dims();
    let taper = match window {
        Window::None => None,
        Window::Hann => Some(hann(dims.num_fast)),
    };
    let plan = fft::inverse(dims.num_fast);
    let mut out = Profiles::zeros((dims.num_fast, dims.num_slow));
    let mut buf = vec![Complex64::new(0.0, 0.0); dims.num_fast];
    for (l, row) in samples.chunks(dims.num_fast).enumerate() {
        buf.copy_from_slice(row);
        if let Some(w) = &taper {
            for (z, &g) in buf.iter_mut().zip(w) {
                *z *= g;
            }
        }
        plan.process(&mut buf);
        out.column_mut(l).iter_mut().zip(&buf).for_each(|(o, &z)| *o = z);
    }
    Ok(out)
}

/// Inverse of [`range_profiles`] without window: back to `[l][n]` fast-time rows.
pub fn profiles_to_fast_time(profiles: &Profiles) -> Vec<Complex64> {
    let (n_fast, n_slow) = profiles.dim();
    let plan = fft::forward(n_fast);
    let scale = 1.0 / n_fast as f64;
    let mut out = Vec::with_capacity(n_fast * n_slow);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fast];
    for col in profiles.columns() {
        buf.iter_mut().zip(col).for_each(|(b, &z)| *b = z);
        plan.process(&mut buf);
        out.extend(buf.iter().map(|z| z * scale));
    }
    out
}

/// Slow-time transform of every range bin, zero Doppler moved to index `L/2`.
pub fn doppler_spectrum(profiles: &Profiles) -> Profiles {
    let (n_range, n_slow) = profiles.dim();
    let plan = fft::forward(n_slow);
    let mut out = Profiles::zeros((n_range, n_slow));
    let mut buf = vec![Complex64::new(0.0, 0.0); n_slow];
    let half = n_slow / 2;
    for (row_in, mut row_out) in profiles.outer_iter().zip(out.outer_iter_mut()) {
        buf.iter_mut().zip(row_in).for_each(|(b, &z)| *b = z);
        plan.process(&mut buf);
        for (k, &z) in buf.iter().enumerate() {
            row_out[(k + half) % n_slow] = z;
        }
    }
    out
}

/// Power image `|D|²` of the Doppler spectrum of `profiles`.
pub fn power_image(profiles: &Profiles) -> Array2<f64> {
    doppler_spectrum(profiles).mapv(|z| z.norm_sqr())
}

pub fn image_from_profiles(profiles: &Profiles, channel: Channel, frame_index: u32, axes: Axes) -> RdImage {
    RdImage {
        pixels: power_image(profiles),
        channel,
        frame_index,
        axes,
    }
}

pub fn range_doppler(cube: &RawCube, p: usize, q: usize, window: Window) -> Result<RdImage> {
    let profiles = range_profiles(cube, p, q, window)?;
    Ok(image_from_profiles(
        &profiles,
        Channel::Siso { p, q },
        cube.frame_index,
        axes_of(cube)?,
    ))
}

/// Pixelwise mean of channel images, accumulated in the given order.
pub fn nci(images: &[RdImage]) -> Result<RdImage> {
    let first = images.first().ok_or(Error::Empty("no channel images to integrate"))?;
    let mut acc = Array2::<f64>::zeros(first.pixels.dim());
    for img in images {
        if img.pixels.dim() != first.pixels.dim() {
            return Err(Error::DimensionMismatch(format!(
                "image {:?} vs {:?}",
                img.pixels.dim(),
                first.pixels.dim()
            )));
        }
        if img.frame_index != first.frame_index {
            return Err(Error::DimensionMismatch(format!(
                "frames {} and {} cannot be integrated together",
                img.frame_index, first.frame_index
            )));
        }
        acc += &img.pixels;
    }
    acc /= images.len() as f64;
    Ok(RdImage {
        pixels: acc,
        channel: Channel::Integrated,
        frame_index: first.frame_index,
        axes: first.axes,
    })
}

/// Images of one configuration across frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameStack {
    frames: Vec<RdImage>,
}

impl FrameStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_images(images: Vec<RdImage>) -> Result<Self> {
        let mut stack = Self::new();
        for img in images {
            stack.push(img)?;
        }
        Ok(stack)
    }

    pub fn push(&mut self, img: RdImage) -> Result<()> {
        if let Some(first) = self.frames.first() {
            if first.pixels.dim() != img.pixels.dim() || first.axes != img.axes {
                return Err(Error::DimensionMismatch(
                    "frame stack images must share dimensions and axes".into(),
                ));
            }
        }
        self.frames.push(img);
        Ok(())
    }

    pub fn frames(&self) -> &[RdImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Mean power of each range bin over slow time.
pub(crate) fn mean_range_power(profiles: &Profiles) -> Vec<f64> {
    profiles
        .map_axis(Axis(1), |row| {
            row.iter().map(|z| z.norm_sqr()).sum::<f64>() / row.len() as f64
        })
        .to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{RadarParams, SPEED_OF_LIGHT};
    use crate::scene::{self, Scatterer};
    use crate::synth::{synthesize_frame, SynthOptions};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn small_params() -> RadarParams {
        RadarParams {
            num_slow: 32,
            num_fast: 64,
            t_pri_s: 0.1 / 96.0,
            ..RadarParams::awr1843_measurement()
        }
    }

    fn point_cube(range: f64, velocity: f64, params: &RadarParams) -> RawCube {
        let s = scene::single_point(range, velocity, 1.0, 0).unwrap();
        synthesize_frame(&s, params, 0, &SynthOptions::default()).unwrap()
    }

    fn random_cube(params: &RadarParams, seed: u64) -> RawCube {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cube = RawCube::zeros(params, 0, 0.0).unwrap();
        for z in cube.data_mut() {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        cube
    }

    #[test]
    fn reference_range_maps_to_bin_zero() {
        let mut p = small_params();
        p.ref_range_m = 5.0;
        let mut s = scene::single_point(5.0, 0.0, 1.0, 0).unwrap();
        s.scatterers.clear();
        s.clutter.push(Scatterer::new(0.0, 5.0, 1.0));
        let cube = synthesize_frame(&s, &p, 0, &SynthOptions::default()).unwrap();
        let prof = range_profiles(&cube, 0, 0, Window::None).unwrap();
        let col = prof.column(0);
        let total: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        assert!((col[0].norm_sqr() - total).abs() < 1e-9 * total);
    }

    #[test]
    fn range_bin_matches_beat_frequency() {
        let p = small_params();
        let d = derive_params(&p).unwrap();
        for k in [4usize, 21, 50] {
            let r = (k as f64 - 0.3) * d.range_bin_m;
            let beat = 2.0 * p.chirp_slope_hz_per_s * r / SPEED_OF_LIGHT;
            let expect = (beat * p.num_fast as f64 / p.sample_rate_sps).round() as usize;
            let img = range_doppler(&point_cube(r, 0.0, &p), 0, 0, Window::None).unwrap();
            assert_eq!(img.argmax(), (expect, p.num_slow / 2));
        }
    }

    #[test]
    fn doppler_bin_matches_velocity() {
        let p = small_params();
        let d = derive_params(&p).unwrap();
        for m in [-7i32, -2, 3, 9] {
            // range rate v gives f_D = −2v/λ
            let v = -(m as f64) * d.doppler_bin_hz * d.wavelength_m / 2.0;
            let img = range_doppler(&point_cube(10.0, v, &p), 1, 1, Window::None).unwrap();
            let (_, dop) = img.argmax();
            let expect = p.num_slow as i32 / 2 + (-2.0 * v / d.wavelength_m / d.doppler_bin_hz).round() as i32;
            assert_eq!(dop as i32, expect, "m={m}");
        }
    }

    #[test]
    fn zero_cube_gives_zero_profiles() {
        let p = small_params();
        let cube = RawCube::zeros(&p, 0, 0.0).unwrap();
        assert!(range_profiles(&cube, 0, 0, Window::Hann)
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn parseval() {
        let p = small_params();
        let cube = random_cube(&p, 3);
        let img = range_doppler(&cube, 2, 3, Window::None).unwrap();
        let samples = cube.channel(2, 3).unwrap();
        let energy: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
        let nl = (p.num_fast * p.num_slow) as f64;
        let mean_power = energy / nl;
        assert!((img.total_power() - nl * nl * mean_power).abs() < 1e-9 * img.total_power());
    }

    #[test]
    fn fast_time_inverse_round_trip() {
        let p = small_params();
        let cube = random_cube(&p, 9);
        let prof = range_profiles(&cube, 0, 1, Window::None).unwrap();
        let back = profiles_to_fast_time(&prof);
        for (a, b) in back.iter().zip(cube.channel(0, 1).unwrap()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn peak_identical_across_channels() {
        let p = small_params();
        let mut s = scene::single_point(9.0, 0.4, 1.0, 0).unwrap();
        s.trajectory = scene::TrajectorySpec::new(
            vec![scene::Waypoint::new(0.0, 3.0, 9.0), scene::Waypoint::new(1.0, 3.1, 9.3)],
            s.trajectory.rotation(),
        )
        .unwrap();
        let cube = synthesize_frame(&s, &p, 0, &SynthOptions::default()).unwrap();
        let first = range_doppler(&cube, 0, 0, Window::None).unwrap().argmax();
        for pp in 0..p.num_tx {
            for qq in 0..p.num_rx {
                assert_eq!(range_doppler(&cube, pp, qq, Window::None).unwrap().argmax(), first);
            }
        }
    }

    #[test]
    fn nci_of_copies_is_identity() {
        let p = small_params();
        let img = range_doppler(&random_cube(&p, 1), 0, 0, Window::None).unwrap();
        let out = nci(&vec![img.clone(); 5]).unwrap();
        for (a, b) in out.pixels.iter().zip(img.pixels.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        assert_eq!(nci(std::slice::from_ref(&img)).unwrap().pixels, img.pixels);
        assert_eq!(out.channel, Channel::Integrated);
    }

    #[test]
    fn nci_errors() {
        assert!(matches!(nci(&[]), Err(Error::Empty(_))));
        let p = small_params();
        let a = range_doppler(&random_cube(&p, 1), 0, 0, Window::None).unwrap();
        let mut b = a.clone();
        b.pixels = Array2::zeros((3, 3));
        assert!(matches!(nci(&[a, b]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn nci_permutation_invariant() {
        let p = small_params();
        let cube = random_cube(&p, 2);
        let imgs: Vec<_> = (0..4)
            .map(|q| range_doppler(&cube, 0, q, Window::None).unwrap())
            .collect();
        let a = nci(&imgs).unwrap();
        let rev: Vec<_> = imgs.iter().rev().cloned().collect();
        let b = nci(&rev).unwrap();
        for (x, y) in a.pixels.iter().zip(b.pixels.iter()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn invalid_channel() {
        let p = small_params();
        let cube = random_cube(&p, 0);
        assert!(matches!(
            range_profiles(&cube, 0, 4, Window::None),
            Err(Error::InvalidChannel { .. })
        ));
    }

    proptest! {
        #[test]
        fn power_scales_with_amplitude_squared(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let p = RadarParams { num_slow: 8, num_fast: 16, ..small_params() };
            let cube = random_cube(&p, seed);
            let mut scaled = cube.clone();
            let alpha = Complex64::new(re, im);
            for z in scaled.data_mut() { *z *= alpha; }
            let a = range_doppler(&cube, 0, 0, Window::None).unwrap();
            let b = range_doppler(&scaled, 0, 0, Window::None).unwrap();
            let k = alpha.norm_sqr();
            for (x, y) in a.pixels.iter().zip(b.pixels.iter()) {
                prop_assert!((x * k - y).abs() <= 1e-9 * (x * k).max(1e-9));
            }
        }
    }
}
