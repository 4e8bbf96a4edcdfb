use num_complex::Complex64;

use super::shift::shift_columns;
use super::{entropy_or_nan, require_nonzero, Algorithm, Diagnostics, Estimates, MocompResult};
use crate::error::{Error, Result};
use crate::fft;
use crate::imaging::Profiles;

/// What each column's magnitude profile is correlated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CcrReference {
    /// First pass against column 0, later passes against the mean of the
    /// aligned magnitudes.
    #[default]
    RunningMean,
    /// Each column against its predecessor, accumulated along slow time.
    Adjacent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcrOptions {
    pub max_iters: usize,
    /// Stop when no column's shift moved by more than this many bins.
    pub conv_tol: f64,
    pub reference: CcrReference,
}

impl Default for CcrOptions {
    fn default() -> Self {
        CcrOptions {
            max_iters: 97,
            conv_tol: 0.01,
            reference: CcrReference::RunningMean,
        }
    }
}

impl CcrOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParam {
                name: "ccr max_iters",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.conv_tol.is_finite() && self.conv_tol > 0.0) {
            return Err(Error::InvalidParam {
                name: "ccr conv_tol",
                reason: format!("must be positive, got {}", self.conv_tol),
            });
        }
        Ok(())
    }
}

fn spectrum(v: &[f64]) -> Vec<Complex64> {
    let mut s: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft::fft_in_place(&mut s);
    s
}

/// Shift (bins, positive toward higher range) that best aligns the profile
/// with transform `col` onto the reference with transform `reference`.
/// Circular cross-correlation peak refined by a three-point parabola.
fn estimate_shift(reference: &[Complex64], col: &[Complex64]) -> f64 {
    let n = reference.len();
    let mut xc: Vec<Complex64> = reference.iter().zip(col).map(|(r, c)| r * c.conj()).collect();
    fft::ifft_in_place(&mut xc);
    let re: Vec<f64> = xc.iter().map(|z| z.re).collect();
    let k = (0..n)
        .max_by(|&a, &b| re[a].total_cmp(&re[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut delta = 0.0;
    if n >= 3 {
        let (ym, y0, yp) = (re[(k + n - 1) % n], re[k], re[(k + 1) % n]);
        let denom = ym - 2.0 * y0 + yp;
        if denom < 0.0 {
            delta = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
        }
    }
    let k = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    k + delta
}

fn magnitudes(profiles: &Profiles) -> Vec<Vec<f64>> {
    profiles
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).collect())
        .collect()
}

/// Range alignment by iterated cross-correlation of magnitude profiles.
///
/// Shifts are accumulated, re-anchored so column 0 never moves, and always
/// applied to the input rather than compounded on already shifted data. The
/// iterate with the lowest image entropy is returned, and the entropy trace
/// records the running minimum.
pub fn ccr_mocomp(profiles: &Profiles, opts: &CcrOptions) -> Result<MocompResult> {
    opts.validate()?;
    require_nonzero(profiles, "cross-correlation alignment")?;
    let (n_range, n_slow) = profiles.dim();
    let entropy_in = entropy_or_nan(profiles);

    let flat = magnitudes(profiles).iter().all(|m| {
        let max = m.iter().cloned().fold(0.0, f64::max);
        let min = m.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min <= 1e-12 * max
    });
    if flat || n_range < 2 {
        return Ok(MocompResult {
            profiles: profiles.clone(),
            algorithm: Algorithm::Ccr,
            estimates: Estimates::Ccr {
                shifts: vec![0.0; n_slow],
            },
            diagnostics: Diagnostics {
                entropy_trace: vec![entropy_in],
                warnings: vec!["range profiles have no contrast, alignment skipped".into()],
                ..Default::default()
            },
        });
    }

    let mut total = vec![0.0; n_slow];
    let mut current = profiles.clone();
    let mut best = (entropy_in, profiles.clone(), total.clone());
    let mut trace = vec![entropy_in];
    let mut iterations = 0;
    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let mags = magnitudes(&current);
        let specs: Vec<Vec<Complex64>> = mags.iter().map(|m| spectrum(m)).collect();
        let increments: Vec<f64> = match opts.reference {
            CcrReference::RunningMean => {
                let reference = if iter == 0 {
                    specs[0].clone()
                } else {
                    let mut mean = vec![0.0; n_range];
                    for m in &mags {
                        mean.iter_mut().zip(m).for_each(|(a, &b)| *a += b / n_slow as f64);
                    }
                    spectrum(&mean)
                };
                specs.iter().map(|s| estimate_shift(&reference, s)).collect()
            }
            CcrReference::Adjacent => {
                let mut acc = 0.0;
                let mut out = vec![0.0; n_slow];
                for l in 1..n_slow {
                    acc += estimate_shift(&specs[l - 1], &specs[l]);
                    out[l] = acc;
                }
                out
            }
        };
        let anchor = increments[0];
        let mut moved: f64 = 0.0;
        for (t, inc) in total.iter_mut().zip(&increments) {
            let step = inc - anchor;
            moved = moved.max(step.abs());
            *t += step;
        }
        current = profiles.clone();
        shift_columns(&mut current, &total);
        let e = entropy_or_nan(&current);
        if e < best.0 {
            best = (e, current.clone(), total.clone());
        }
        trace.push(best.0);
        if moved < opts.conv_tol {
            break;
        }
    }

    let (_, out, shifts) = best;
    Ok(MocompResult {
        profiles: out,
        algorithm: Algorithm::Ccr,
        estimates: Estimates::Ccr { shifts },
        diagnostics: Diagnostics {
            entropy_trace: trace,
            iterations,
            ..Default::default()
        },
    })
}
