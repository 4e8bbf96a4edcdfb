use std::f64::consts::PI;

use num_complex::Complex64;

use super::{profiles_entropy, Algorithm, Diagnostics, Estimates, MocompResult, MotionContext};
use crate::error::{Error, Result};
use crate::fft;
use crate::imaging::Profiles;

/// Candidate residual motions for the entropy search.
#[derive(Debug, Clone, PartialEq)]
pub struct EmSearch {
    pub velocities_mps: Vec<f64>,
    pub accels_mps2: Vec<f64>,
    /// Also undo the range migration `Δr(t)/range_bin` of each candidate,
    /// not only its carrier phase.
    pub range_walk: bool,
}

impl Default for EmSearch {
    fn default() -> Self {
        EmSearch::grid(-1.0, 1.0, 0.25, -1.0, 1.0, 0.5).expect("default grid is valid")
    }
}

fn axis(min: f64, max: f64, step: f64, name: &'static str) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite() && step > 0.0 && max >= min) {
        return Err(Error::InvalidParam {
            name,
            reason: format!("need min <= max and step > 0, got {min}..{max} step {step}"),
        });
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

impl EmSearch {
    /// Inclusive uniform grid over velocity and acceleration.
    pub fn grid(v_min: f64, v_max: f64, v_step: f64, a_min: f64, a_max: f64, a_step: f64) -> Result<Self> {
        Ok(EmSearch {
            velocities_mps: axis(v_min, v_max, v_step, "em velocity grid")?,
            accels_mps2: axis(a_min, a_max, a_step, "em acceleration grid")?,
            range_walk: true,
        })
    }

    pub fn num_candidates(&self) -> usize {
        self.velocities_mps.len() * self.accels_mps2.len()
    }

    fn validate(&self) -> Result<()> {
        for (name, g) in [
            ("velocities", &self.velocities_mps),
            ("accelerations", &self.accels_mps2),
        ] {
            if g.is_empty() {
                return Err(Error::Empty("entropy search grid"));
            }
            if g.iter().any(|v| !v.is_finite()) || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParam {
                    name: "em grid",
                    reason: format!("{name} must be finite and strictly increasing"),
                });
            }
        }
        Ok(())
    }
}

/// Applies the compensation for residual motion `Δr(t) = v·t + a·t²/2`.
struct Compensator<'a> {
    profiles: &'a Profiles,
    /// Per-column transform of the range profiles, used for sub-bin shifts.
    spectra: Option<Vec<Vec<Complex64>>>,
    ctx: MotionContext,
}

impl<'a> Compensator<'a> {
    fn new(profiles: &'a Profiles, ctx: &MotionContext, range_walk: bool) -> Self {
        let spectra = range_walk.then(|| {
            profiles
                .columns()
                .into_iter()
                .map(|c| {
                    let mut v = c.to_vec();
                    fft::fft_in_place(&mut v);
                    v
                })
                .collect()
        });
        Compensator {
            profiles,
            spectra,
            ctx: *ctx,
        }
    }

    fn apply(&self, velocity: f64, accel: f64) -> Profiles {
        let mut out = self.profiles.clone();
        let n = out.nrows();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (l, mut col) in out.columns_mut().into_iter().enumerate() {
            let t = l as f64 * self.ctx.slow_time_s;
            let dr = velocity * t + 0.5 * accel * t * t;
            if dr == 0.0 {
                continue;
            }
            let carrier = Complex64::from_polar(1.0, 4.0 * PI * dr / self.ctx.wavelength_m);
            match &self.spectra {
                Some(spectra) => {
                    let shift = -dr / self.ctx.range_bin_m;
                    // same fast-time ramp as the shared column shift
                    for (k, (b, &s)) in buf.iter_mut().zip(&spectra[l]).enumerate() {
                        *b = s * Complex64::from_polar(1.0 / n as f64, -2.0 * PI * k as f64 * shift / n as f64);
                    }
                    fft::ifft_in_place(&mut buf);
                    col.iter_mut().zip(&buf).for_each(|(c, &z)| *c = z * carrier);
                }
                None => col.iter_mut().for_each(|c| *c *= carrier),
            }
        }
        out
    }
}

/// Relative entropy difference treated as a tie.
const TIE_TOL: f64 = 1e-12;

/// Grid search for the residual velocity and acceleration whose
/// compensation minimizes image entropy.
///
/// Each candidate multiplies column `l` by `exp(+j(4π/λ)(v·t_l + a·t_l²/2))`,
/// `t_l = l·T_CLI`, and with `range_walk` also shifts it back by the same
/// range. Ties go to the smallest `|v|`, then the smallest `|a|`.
pub fn em_mocomp(profiles: &Profiles, ctx: &MotionContext, search: &EmSearch) -> Result<MocompResult> {
    search.validate()?;
    let entropy_in = profiles_entropy(profiles)?;
    let comp = Compensator::new(profiles, ctx, search.range_walk);

    let mut surface = vec![vec![0.0; search.accels_mps2.len()]; search.velocities_mps.len()];
    let mut best: Option<(f64, f64, f64)> = None;
    for (iv, &v) in search.velocities_mps.iter().enumerate() {
        for (ia, &a) in search.accels_mps2.iter().enumerate() {
            let e = profiles_entropy(&comp.apply(v, a))?;
            surface[iv][ia] = e;
            let better = match best {
                None => true,
                Some((be, bv, ba)) => {
                    let tol = TIE_TOL * be.abs().max(1.0);
                    e < be - tol || ((e - be).abs() <= tol && (v.abs(), a.abs()) < (bv.abs(), ba.abs()))
                }
            };
            if better {
                best = Some((e, v, a));
            }
        }
    }
    let (entropy_best, velocity_mps, accel_mps2) = best.expect("grid is non-empty");
    Ok(MocompResult {
        profiles: comp.apply(velocity_mps, accel_mps2),
        algorithm: Algorithm::Em,
        estimates: Estimates::Em {
            velocity_mps,
            accel_mps2,
            surface,
        },
        diagnostics: Diagnostics {
            entropy_trace: vec![entropy_in, entropy_best],
            iterations: search.num_candidates(),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::mocomp::energy;

    /// 64 x 64 desk-scale geometry: 1.5625 ms slow-time step, ~4.7 cm bins.
    pub(crate) fn desk_ctx() -> MotionContext {
        MotionContext {
            wavelength_m: 299_792_458.0 / 77e9,
            slow_time_s: 0.1 / 64.0,
            range_bin_m: 0.0468,
        }
    }

    /// Injects residual motion into sharp profiles, the inverse of the
    /// compensation the search applies.
    fn inject(p: &Profiles, ctx: &MotionContext, v: f64, a: f64) -> Profiles {
        let mut out = p.clone();
        for (l, mut col) in out.columns_mut().into_iter().enumerate() {
            let t = l as f64 * ctx.slow_time_s;
            let dr = v * t + 0.5 * a * t * t;
            let mut buf = col.to_vec();
            crate::mocomp::shift::shift_column(&mut buf, dr / ctx.range_bin_m);
            let rot = Complex64::from_polar(1.0, -4.0 * PI * dr / ctx.wavelength_m);
            col.iter_mut().zip(&buf).for_each(|(c, &z)| *c = z * rot);
        }
        out
    }

    fn target() -> Profiles {
        sharp_scene(64, 64, &[(20, 0, 1.0), (28, 3, 0.7), (40, -5, 0.5)])
    }

    fn estimates(r: &MocompResult) -> (f64, f64, &Vec<Vec<f64>>) {
        match &r.estimates {
            Estimates::Em {
                velocity_mps,
                accel_mps2,
                surface,
            } => (*velocity_mps, *accel_mps2, surface),
            _ => panic!(),
        }
    }

    #[test]
    fn recovers_injected_motion() {
        let ctx = desk_ctx();
        let data = inject(&target(), &ctx, 3.0, 0.5);
        let search = EmSearch::grid(-5.0, 5.0, 0.25, -2.5, 2.5, 0.25).unwrap();
        assert_eq!(search.num_candidates(), 41 * 21);
        let r = em_mocomp(&data, &ctx, &search).unwrap();
        let (v, a, surface) = estimates(&r);
        assert!(
            (v - 3.0).abs() <= 0.25 + 1e-9 && (a - 0.5).abs() <= 0.25 + 1e-9,
            "{v} {a}"
        );
        let out = profiles_entropy(&r.profiles).unwrap();
        for row in surface {
            for &e in row {
                assert!(out <= e + 1e-9);
            }
        }
        assert!((energy(&r.profiles) - energy(&data)).abs() < 1e-9 * energy(&data));
    }

    #[test]
    fn wrong_sign_increases_entropy() {
        let ctx = desk_ctx();
        let data = inject(&target(), &ctx, 3.0, 0.0);
        let comp = Compensator::new(&data, &ctx, true);
        let right = profiles_entropy(&comp.apply(3.0, 0.0)).unwrap();
        let wrong = profiles_entropy(&comp.apply(-3.0, 0.0)).unwrap();
        assert!(wrong > right + 0.5, "{wrong} vs {right}");
    }

    #[test]
    fn compensated_data_selects_zero() {
        let ctx = desk_ctx();
        let data = target();
        let search = EmSearch::grid(-1.0, 1.0, 0.25, -1.0, 1.0, 0.25).unwrap();
        let r = em_mocomp(&data, &ctx, &search).unwrap();
        let (v, a, _) = estimates(&r);
        assert_eq!((v, a), (0.0, 0.0));
        assert!(profiles_entropy(&r.profiles).unwrap() <= profiles_entropy(&data).unwrap());
    }

    #[test]
    fn identity_grid_is_exact() {
        let data = random_profiles(16, 16, 3);
        let search = EmSearch::grid(0.0, 0.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let r = em_mocomp(&data, &desk_ctx(), &search).unwrap();
        assert_eq!(r.profiles, data);
    }

    #[test]
    fn empty_and_bad_grids() {
        let data = random_profiles(8, 8, 1);
        let mut s = EmSearch::default();
        s.velocities_mps.clear();
        assert!(matches!(em_mocomp(&data, &desk_ctx(), &s), Err(Error::Empty(_))));
        let s = EmSearch {
            accels_mps2: vec![1.0, 0.0],
            ..Default::default()
        };
        assert!(em_mocomp(&data, &desk_ctx(), &s).is_err());
        assert!(EmSearch::grid(1.0, 0.0, 0.1, 0.0, 0.0, 1.0).is_err());
    }
}
