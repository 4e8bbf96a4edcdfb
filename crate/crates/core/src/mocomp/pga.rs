use num_complex::Complex64;

use super::{entropy_or_nan, require_nonzero, Algorithm, Diagnostics, Estimates, MocompResult};
use crate::error::{Error, Result};
use crate::fft;
use crate::imaging::Profiles;

#[derive(Debug, Clone, PartialEq)]
pub struct PgaOptions {
    pub max_iters: usize,
    /// Stop once the RMS of the phase correction drops below this, rad.
    pub rms_tol_rad: f64,
    /// Number of strongest range bins used for the phase estimate.
    pub top_k: usize,
}

impl Default for PgaOptions {
    fn default() -> Self {
        PgaOptions {
            max_iters: 20,
            rms_tol_rad: 1e-3,
            top_k: 16,
        }
    }
}

impl PgaOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.top_k == 0 {
            return Err(Error::InvalidParam {
                name: "pga options",
                reason: "max_iters and top_k must be at least 1".into(),
            });
        }
        if !(self.rms_tol_rad.is_finite() && self.rms_tol_rad > 0.0) {
            return Err(Error::InvalidParam {
                name: "pga rms_tol_rad",
                reason: format!("must be positive, got {}", self.rms_tol_rad),
            });
        }
        Ok(())
    }
}

/// Window keeps Doppler bins within this factor of the peak (−10 dB).
const WINDOW_FLOOR: f64 = 0.1;

/// Removes the least-squares line from `phi`.
fn detrend(phi: &mut [f64]) {
    let n = phi.len() as f64;
    if phi.len() < 2 {
        phi.iter_mut().for_each(|p| *p = 0.0);
        return;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = phi.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in phi.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    for (i, y) in phi.iter_mut().enumerate() {
        *y -= ym + slope * (i as f64 - xm);
    }
}

/// One phase-error estimate from the `k` strongest range bins. The window
/// is at least `min_half` bins either side of the centered peak.
///
/// Rows are zero-padded to twice their length so that windowing in Doppler
/// smooths linearly along slow time instead of wrapping the last chirps onto
/// the first ones.
fn estimate(data: &Profiles, k: usize, min_half: usize) -> Vec<f64> {
    let (n_range, n_slow) = data.dim();
    let m = 2 * n_slow;

    // Doppler spectra of every range bin, ranked by peak power
    let mut rows: Vec<(f64, usize, Vec<Complex64>)> = (0..n_range)
        .map(|r| {
            let mut s = data.row(r).to_vec();
            s.resize(m, Complex64::new(0.0, 0.0));
            fft::fft_in_place(&mut s);
            let (peak_idx, peak) = s
                .iter()
                .enumerate()
                .map(|(i, z)| (i, z.norm_sqr()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            s.rotate_left(peak_idx);
            (peak, r, s)
        })
        .collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    rows.truncate(k);

    // adaptive window from the summed centered power
    let mut summed = vec![0.0; m];
    for (_, _, s) in &rows {
        summed.iter_mut().zip(s).for_each(|(a, z)| *a += z.norm_sqr());
    }
    let floor = summed[0] * WINDOW_FLOOR;
    let mut half = (2 * min_half).min(m / 2);
    while half < m / 2 && summed[half + 1] >= floor && summed[m - 1 - half] >= floor {
        half += 1;
    }

    let mut num = vec![0.0; n_slow.saturating_sub(1)];
    let mut den = vec![0.0; n_slow.saturating_sub(1)];
    for (_, _, mut s) in rows {
        for (i, z) in s.iter_mut().enumerate() {
            if i.min(m - i) > half {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        fft::ifft_in_place(&mut s);
        for l in 0..n_slow - 1 {
            num[l] += (s[l].conj() * s[l + 1]).im;
            den[l] += s[l].norm_sqr();
        }
    }

    let mut phi = vec![0.0; n_slow];
    for l in 1..n_slow {
        let step = if den[l - 1] > 0.0 { num[l - 1] / den[l - 1] } else { 0.0 };
        phi[l] = phi[l - 1] + step;
    }
    detrend(&mut phi);
    phi
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// Phase gradient autofocus over slow time.
///
/// Each pass centers the Doppler peak of the strongest range bins, windows
/// them, estimates the sample-to-sample phase gradient, integrates and
/// detrends it, and removes the result from every range bin. The window
/// starts at the full Doppler extent and halves every pass until the −10 dB
/// width takes over. The lowest-entropy iterate is returned.
pub fn pga_mocomp(profiles: &Profiles, opts: &PgaOptions) -> Result<MocompResult> {
    opts.validate()?;
    require_nonzero(profiles, "phase gradient autofocus")?;
    let (n_range, n_slow) = profiles.dim();
    let mut warnings = Vec::new();
    let k = if opts.top_k > n_range {
        warnings.push(format!(
            "top_k {} exceeds {} range bins, using all",
            opts.top_k, n_range
        ));
        n_range
    } else {
        opts.top_k
    };

    let mut data = profiles.clone();
    let mut total = vec![0.0; n_slow];
    let entropy_in = entropy_or_nan(&data);
    let mut best = (entropy_in, data.clone(), total.clone());
    let mut trace = vec![entropy_in];
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let min_half = (n_slow / 2).checked_shr(iterations as u32).unwrap_or(0);
        iterations += 1;
        let phi = estimate(&data, k, min_half);
        for (mut col, &p) in data.columns_mut().into_iter().zip(&phi) {
            if p != 0.0 {
                let rot = Complex64::from_polar(1.0, -p);
                col.iter_mut().for_each(|z| *z *= rot);
            }
        }
        total.iter_mut().zip(&phi).for_each(|(t, p)| *t += p);
        let e = entropy_or_nan(&data);
        if e < best.0 {
            best = (e, data.clone(), total.clone());
        }
        trace.push(e);
        if rms(&phi) < opts.rms_tol_rad {
            break;
        }
    }

    let (_, data, total) = best;
    Ok(MocompResult {
        profiles: data,
        algorithm: Algorithm::Pga,
        estimates: Estimates::Pga { phase_error: total },
        diagnostics: Diagnostics {
            entropy_trace: trace,
            iterations,
            warnings,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    fn corrupt(p: &Profiles, err: &[f64]) -> Profiles {
        let mut out = p.clone();
        for (mut col, &e) in out.columns_mut().into_iter().zip(err) {
            col.iter_mut().for_each(|z| *z *= Complex64::from_polar(1.0, e));
        }
        out
    }

    fn residual_rms(est: &[f64], truth: &[f64]) -> f64 {
        let mut d: Vec<f64> = est.iter().zip(truth).map(|(a, b)| a - b).collect();
        detrend(&mut d);
        rms(&d)
    }

    fn phase_error(r: &MocompResult) -> Vec<f64> {
        match &r.estimates {
            Estimates::Pga { phase_error } => phase_error.clone(),
            _ => panic!(),
        }
    }

    fn scene() -> Profiles {
        sharp_scene(64, 64, &[(10, 0, 1.0), (22, 4, 0.8), (31, -6, 0.6), (45, 2, 0.9)])
    }

    #[test]
    fn quadratic_error_is_recovered() {
        let truth: Vec<f64> = (0..64).map(|l| 3.0 * ((l as f64 - 32.0) / 32.0).powi(2)).collect();
        let r = pga_mocomp(&corrupt(&scene(), &truth), &PgaOptions::default()).unwrap();
        let res = residual_rms(&phase_error(&r), &truth);
        assert!(res < 0.1, "residual {res}");
        let t = &r.diagnostics.entropy_trace;
        assert!(t.last().unwrap() < &t[0]);
    }

    #[test]
    fn zero_error_stays_put() {
        let r = pga_mocomp(&scene(), &PgaOptions::default()).unwrap();
        assert!(rms(&phase_error(&r)) < 1e-6);
        assert_eq!(r.diagnostics.iterations, 1);
    }

    #[test]
    fn linear_ramp_is_not_an_error() {
        // one Doppler bin per CPI
        let truth: Vec<f64> = (0..64).map(|l| 2.0 * std::f64::consts::PI * l as f64 / 64.0).collect();
        let r = pga_mocomp(&corrupt(&scene(), &truth), &PgaOptions::default()).unwrap();
        assert!(rms(&phase_error(&r)) < 1e-6);
    }

    #[test]
    fn second_pass_is_near_identity() {
        let truth: Vec<f64> = (0..64).map(|l| 1.5 * (l as f64 * 0.2).sin()).collect();
        let once = pga_mocomp(&corrupt(&scene(), &truth), &PgaOptions::default()).unwrap();
        let twice = pga_mocomp(&once.profiles, &PgaOptions::default()).unwrap();
        assert!(rms(&phase_error(&twice)) < 1e-3);
    }

    #[test]
    fn oversized_k_warns() {
        let p = sharp_scene(8, 16, &[(3, 1, 1.0)]);
        let r = pga_mocomp(&p, &PgaOptions::default()).unwrap();
        assert_eq!(r.diagnostics.warnings.len(), 1);
    }

    #[test]
    fn rejects_zero_input_and_bad_options() {
        assert!(pga_mocomp(&Profiles::zeros((8, 8)), &PgaOptions::default()).is_err());
        let p = scene();
        assert!(pga_mocomp(
            &p,
            &PgaOptions {
                top_k: 0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(pga_mocomp(
            &p,
            &PgaOptions {
                rms_tol_rad: -1.0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
