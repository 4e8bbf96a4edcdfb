//! Radar waveform and array constants, and the quantities derived from them.
//!
//! Configured values are authoritative. Derived values always come from the
//! standard FMCW relations below; a caller-declared expectation that disagrees
//! with them produces a warning from [`validate_params`], never an override.

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative slack used when comparing timing budgets.
const TIMING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RadarParams {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    /// Chirp factor K.
    pub chirp_slope_hz_per_s: f64,
    /// Duration of one chirp (T_PRI).
    pub t_pri_s: f64,
    pub num_tx: usize,
    pub num_rx: usize,
    pub d_tx_m: f64,
    pub d_rx_m: f64,
    /// Chirp loops per coherent processing interval (L).
    pub num_slow: usize,
    /// ADC samples per chirp (N).
    pub num_fast: usize,
    pub sample_rate_sps: f64,
    pub t_cpi_s: f64,
    /// Reference range whose two-way delay is removed by the dechirp.
    pub ref_range_m: f64,
}

impl RadarParams {
    /// Measurement configuration of the 77 GHz, 3 TX x 4 RX automotive radar
    /// used for the U-turn car scenario.
    ///
    /// The chirp slope is chosen so that `f_s·c/(2K)` equals the 34.4 m
    /// maximum unambiguous range, and the chirp period fills the CPI exactly
    /// (`L·P·T_PRI = T_CPI`), which gives an 18.2 % active-ramp duty cycle.
    pub fn awr1843_measurement() -> Self {
        let carrier_freq_hz = 77e9;
        let sample_rate_sps = 9.668e6;
        let num_tx = 3;
        let num_slow = 128;
        let t_cpi_s = 0.1;
        let wavelength = SPEED_OF_LIGHT / carrier_freq_hz;
        RadarParams {
            carrier_freq_hz,
            bandwidth_hz: 2e9,
            chirp_slope_hz_per_s: sample_rate_sps * SPEED_OF_LIGHT / (2.0 * 34.4),
            t_pri_s: t_cpi_s / (num_slow * num_tx) as f64,
            num_tx,
            num_rx: 4,
            d_tx_m: 2.0 * wavelength,
            d_rx_m: 0.5 * wavelength,
            num_slow,
            num_fast: 256,
            sample_rate_sps,
            t_cpi_s,
            ref_range_m: 0.0,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.num_tx * self.num_rx
    }

    /// Active ramp duration implied by the swept bandwidth, `B/K`.
    pub fn ramp_duration_s(&self) -> f64 {
        self.bandwidth_hz / self.chirp_slope_hz_per_s
    }

    fn check_positive(&self) -> Result<()> {
        let reals: [(&'static str, f64); 8] = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("chirp_slope_hz_per_s", self.chirp_slope_hz_per_s),
            ("t_pri_s", self.t_pri_s),
            ("d_tx_m", self.d_tx_m),
            ("d_rx_m", self.d_rx_m),
            ("sample_rate_sps", self.sample_rate_sps),
            ("t_cpi_s", self.t_cpi_s),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be finite and strictly positive, got {v}"),
                });
            }
        }
        if !(self.ref_range_m.is_finite() && self.ref_range_m >= 0.0) {
            return Err(Error::InvalidParam {
                name: "ref_range_m",
                reason: format!("must be finite and non-negative, got {}", self.ref_range_m),
            });
        }
        let counts: [(&'static str, usize); 4] = [
            ("num_tx", self.num_tx),
            ("num_rx", self.num_rx),
            ("num_slow", self.num_slow),
            ("num_fast", self.num_fast),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParam {
                    name,
                    reason: "must be at least 1".into(),
                });
            }
        }
        Ok(())
    }
}

impl Default for RadarParams {
    fn default() -> Self {
        Self::awr1843_measurement()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub wavelength_m: f64,
    /// Chirp loop interval, `P·T_PRI`.
    pub t_cli_s: f64,
    pub range_bin_m: f64,
    pub max_range_m: f64,
    pub max_velocity_mps: f64,
    pub doppler_res_hz: f64,
    /// Bin spacing of the L-point slow-time transform, `1/(L·T_CLI)`.
    pub doppler_bin_hz: f64,
}

pub fn derive_params(p: &RadarParams) -> Result<DerivedParams> {
    p.check_positive()?;

    let t_cli_s = p.num_tx as f64 * p.t_pri_s;
    if t_cli_s * p.num_slow as f64 > p.t_cpi_s * (1.0 + TIMING_SLACK) {
        return Err(Error::InconsistentParams(format!(
            "L·T_CLI = {} s exceeds T_CPI = {} s",
            t_cli_s * p.num_slow as f64,
            p.t_cpi_s
        )));
    }
    let sampling_window = p.num_fast as f64 / p.sample_rate_sps;
    if sampling_window > p.ramp_duration_s() * (1.0 + TIMING_SLACK) {
        return Err(Error::InconsistentParams(format!(
            "fast-time window N/f_s = {sampling_window} s exceeds active ramp B/K = {} s",
            p.ramp_duration_s()
        )));
    }

    let wavelength_m = SPEED_OF_LIGHT / p.carrier_freq_hz;
    let max_range_m = p.sample_rate_sps * SPEED_OF_LIGHT / (2.0 * p.chirp_slope_hz_per_s);
    Ok(DerivedParams {
        wavelength_m,
        t_cli_s,
        range_bin_m: max_range_m / p.num_fast as f64,
        max_range_m,
        max_velocity_mps: wavelength_m / (4.0 * t_cli_s),
        doppler_res_hz: 1.0 / p.t_cpi_s,
        doppler_bin_hz: 1.0 / (p.num_slow as f64 * t_cli_s),
    })
}

/// Values a user expects the configuration to produce. Any that disagree
/// with the derived value by more than 1 % are reported as warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamExpectations {
    pub max_range_m: Option<f64>,
    pub max_velocity_mps: Option<f64>,
    pub doppler_res_hz: Option<f64>,
    pub range_bin_m: Option<f64>,
}

impl ParamExpectations {
    /// Derived values quoted for the measurement configuration.
    pub fn measurement_table() -> Self {
        ParamExpectations {
            max_range_m: Some(34.4),
            max_velocity_mps: Some(5.0),
            doppler_res_hz: Some(10.0),
            range_bin_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamWarning {
    pub quantity: &'static str,
    pub expected: f64,
    pub derived: f64,
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: expected {} but the configured values give {:.6}",
            self.quantity, self.expected, self.derived
        )
    }
}

/// Consistency warnings for `p` against `expect`. Fails only when
/// [`derive_params`] itself fails.
pub fn validate_params(p: &RadarParams, expect: &ParamExpectations) -> Result<Vec<ParamWarning>> {
    let d = derive_params(p)?;
    let checks = [
        ("max_range_m", expect.max_range_m, d.max_range_m),
        ("max_velocity_mps", expect.max_velocity_mps, d.max_velocity_mps),
        ("doppler_res_hz", expect.doppler_res_hz, d.doppler_res_hz),
        ("range_bin_m", expect.range_bin_m, d.range_bin_m),
    ];
    Ok(checks
        .into_iter()
        .filter_map(|(quantity, expected, derived)| {
            let expected = expected?;
            let rel = (derived - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
            (rel > 0.01).then_some(ParamWarning {
                quantity,
                expected,
                derived,
            })
        })
        .collect())
}
