//! Motion compensation on single-channel range profiles.
//!
//! Every operation here works on one `(p, q)` channel's `[range][slow time]`
//! profiles and only applies phase rotations and circular shifts, so signal
//! energy is preserved. The MIMO image is formed afterwards by integrating the
//! separately compensated channels.

mod ccr;
mod coarse;
mod em;
mod pga;
pub(crate) mod shift;

pub use ccr::{ccr_mocomp, CcrOptions, CcrReference};
pub use coarse::coarse_mocomp;
pub use em::{em_mocomp, EmSearch};
pub use pga::{pga_mocomp, PgaOptions};

pub use crate::metrics::Algorithm;

use crate::error::{Error, Result};
use crate::imaging::{mean_range_power, power_image, Profiles};
use crate::metrics::pixel_entropy;
use crate::params::{derive_params, RadarParams};

/// Slow-time sampling and wavelength needed to turn motion into phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionContext {
    pub wavelength_m: f64,
    /// Slow-time sample spacing (T_CLI).
    pub slow_time_s: f64,
    pub range_bin_m: f64,
}

impl MotionContext {
    pub fn from_params(params: &RadarParams) -> Result<Self> {
        let d = derive_params(params)?;
        Ok(MotionContext {
            wavelength_m: d.wavelength_m,
            slow_time_s: d.t_cli_s,
            range_bin_m: d.range_bin_m,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimates {
    /// Nothing was estimated (identity or pass-through).
    None,
    Coarse {
        dominant_bin: usize,
        /// Integer range shift applied to each column.
        shifts: Vec<i64>,
        /// Phase removed from each column, rad.
        phases: Vec<f64>,
    },
    Em {
        velocity_mps: f64,
        accel_mps2: f64,
        /// Entropy of every candidate, `surface[velocity][acceleration]`.
        surface: Vec<Vec<f64>>,
    },
    Ccr {
        /// Total range shift applied to each column, bins.
        shifts: Vec<f64>,
    },
    Pga {
        /// Accumulated phase error removed from each slow-time sample, rad.
        phase_error: Vec<f64>,
    },
    /// Coarse stage followed by a fine stage.
    Chain(Box<Estimates>, Box<Estimates>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Image entropy at the start and after every iteration.
    pub entropy_trace: Vec<f64>,
    pub iterations: usize,
    pub warnings: Vec<String>,
    /// The input had no scatterer standing out of the noise floor and was
    /// passed through unchanged.
    pub no_target: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MocompResult {
    pub profiles: Profiles,
    pub algorithm: Algorithm,
    pub estimates: Estimates,
    pub diagnostics: Diagnostics,
}

impl MocompResult {
    fn passthrough(profiles: Profiles, algorithm: Algorithm) -> Self {
        MocompResult {
            profiles,
            algorithm,
            estimates: Estimates::None,
            diagnostics: Diagnostics::default(),
        }
    }
}

/// Shannon entropy of the range-Doppler power image of `profiles`.
pub fn profiles_entropy(profiles: &Profiles) -> Result<f64> {
    pixel_entropy(&power_image(profiles))
}

pub(crate) fn entropy_or_nan(profiles: &Profiles) -> f64 {
    profiles_entropy(profiles).unwrap_or(f64::NAN)
}

pub fn energy(profiles: &Profiles) -> f64 {
    profiles.iter().map(|z| z.norm_sqr()).sum()
}

/// A scatterer is present when the strongest range bin's mean power exceeds
/// the median bin by this factor (6 dB).
pub const DOMINANCE_RATIO: f64 = 3.981_071_705_534_973;

/// True when some range bin stands at least 6 dB above the median noise floor.
pub fn has_dominant_scatterer(profiles: &Profiles) -> bool {
    let mut power = mean_range_power(profiles);
    if power.is_empty() {
        return false;
    }
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let mid = power.len() / 2;
    power.select_nth_unstable_by(mid, f64::total_cmp);
    let median = power[mid];
    peak > 0.0 && peak > DOMINANCE_RATIO * median
}

/// Hyperparameters for the fine algorithms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MocompSettings {
    pub em: EmSearch,
    pub ccr: CcrOptions,
    pub pga: PgaOptions,
}

/// Full per-channel chain: nothing for [`Algorithm::None`], coarse only for
/// [`Algorithm::Coarse`], coarse then the fine stage otherwise. Inputs without
/// a dominant scatterer pass through unchanged with `no_target` set.
pub fn compensate(
    profiles: Profiles,
    algorithm: Algorithm,
    ctx: &MotionContext,
    settings: &MocompSettings,
) -> Result<MocompResult> {
    if algorithm == Algorithm::None {
        return Ok(MocompResult::passthrough(profiles, algorithm));
    }
    if !has_dominant_scatterer(&profiles) {
        let mut r = MocompResult::passthrough(profiles, algorithm);
        r.diagnostics.no_target = true;
        return Ok(r);
    }
    let coarse = coarse_mocomp(&profiles)?;
    if algorithm == Algorithm::Coarse {
        return Ok(coarse);
    }
    let fine = match algorithm {
        Algorithm::Em => em_mocomp(&coarse.profiles, ctx, &settings.em)?,
        Algorithm::Ccr => ccr_mocomp(&coarse.profiles, &settings.ccr)?,
        Algorithm::Pga => pga_mocomp(&coarse.profiles, &settings.pga)?,
        Algorithm::None | Algorithm::Coarse => unreachable!(),
    };
    let mut diagnostics = fine.diagnostics;
    let mut warnings = coarse.diagnostics.warnings;
    warnings.append(&mut diagnostics.warnings);
    diagnostics.warnings = warnings;
    Ok(MocompResult {
        profiles: fine.profiles,
        algorithm,
        estimates: Estimates::Chain(Box::new(coarse.estimates), Box::new(fine.estimates)),
        diagnostics,
    })
}

pub(crate) fn require_nonzero(profiles: &Profiles, what: &str) -> Result<()> {
    if profiles.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Degenerate(format!("{what}: all-zero input")));
    }
    Ok(())
}
