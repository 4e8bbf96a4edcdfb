use num_complex::Complex64;

use super::{entropy_or_nan, require_nonzero, Algorithm, Diagnostics, Estimates, MocompResult};
use crate::error::Result;
use crate::imaging::{mean_range_power, Profiles};

/// Half-width of the search window, around the dominant bin, in which each
/// column's peak is looked for.
const MAX_WALK_BINS: usize = 8;

fn argmax_in_window(col: &[f64], center: usize, half_width: usize) -> usize {
    let n = col.len();
    if 2 * half_width + 1 >= n {
        return (0..n)
            .max_by(|&a, &b| col[a].total_cmp(&col[b]).then(b.cmp(&a)))
            .unwrap_or(0);
    }
    let mut best = center;
    let mut best_val = f64::NEG_INFINITY;
    for off in 0..=2 * half_width {
        let idx = (center + n + off - half_width) % n;
        if col[idx] > best_val {
            best_val = col[idx];
            best = idx;
        }
    }
    best
}

/// Signed circular distance `to − from` in `(−n/2, n/2]`.
fn circular_delta(from: usize, to: usize, n: usize) -> i64 {
    let d = (to as i64 - from as i64).rem_euclid(n as i64);
    if d > n as i64 / 2 {
        d - n as i64
    } else {
        d
    }
}

/// Locks the dominant scatterer in range and phase.
///
/// Finds the range bin with the largest mean power, tracks each column's peak
/// near it, rotates every column so its peak sits where the first column's
/// does, then removes the phase of that peak sample from the whole column.
pub fn coarse_mocomp(profiles: &Profiles) -> Result<MocompResult> {
    require_nonzero(profiles, "coarse motion compensation")?;
    let (n_range, n_slow) = profiles.dim();
    let entropy_in = entropy_or_nan(profiles);

    let mean_power = mean_range_power(profiles);
    let dominant_bin = (0..n_range)
        .max_by(|&a, &b| mean_power[a].total_cmp(&mean_power[b]).then(b.cmp(&a)))
        .unwrap_or(0);

    let peaks: Vec<usize> = profiles
        .columns()
        .into_iter()
        .map(|col| {
            let power: Vec<f64> = col.iter().map(|z| z.norm_sqr()).collect();
            argmax_in_window(&power, dominant_bin, MAX_WALK_BINS)
        })
        .collect();
    let reference = peaks[0];

    let mut out = profiles.clone();
    let mut shifts = Vec::with_capacity(n_slow);
    let mut phases = Vec::with_capacity(n_slow);
    for (mut col, &peak) in out.columns_mut().into_iter().zip(&peaks) {
        let shift = circular_delta(peak, reference, n_range);
        let mut v: Vec<Complex64> = col.to_vec();
        v.rotate_right(shift.rem_euclid(n_range as i64) as usize);
        let phase = v[reference].arg();
        if phase != 0.0 {
            let rot = Complex64::from_polar(1.0, -phase);
            v.iter_mut().for_each(|z| *z *= rot);
        }
        col.iter_mut().zip(&v).for_each(|(c, &z)| *c = z);
        shifts.push(shift);
        phases.push(phase);
    }

    let entropy_out = entropy_or_nan(&out);
    Ok(MocompResult {
        profiles: out,
        algorithm: Algorithm::Coarse,
        estimates: Estimates::Coarse {
            dominant_bin,
            shifts,
            phases,
        },
        diagnostics: Diagnostics {
            entropy_trace: vec![entropy_in, entropy_out],
            iterations: 1,
            ..Default::default()
        },
    })
}
