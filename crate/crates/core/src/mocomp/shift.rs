//! Unitary circular shifts of range-profile columns.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fft;
use crate::imaging::Profiles;

/// Shifts below this are treated as integers and applied by rotation.
const INTEGER_TOL: f64 = 1e-9;

/// Moves the content of `col` towards higher indices by `shift` bins,
/// circularly.
///
/// A profile is the transform of one fast-time record, so a fractional shift
/// is a frequency shift of that record: the ramp runs over samples
/// `0..n`, exactly what a change in target range does to the beat tone.
pub(crate) fn shift_column(col: &mut [Complex64], shift: f64) {
    let n = col.len();
    if n == 0 {
        return;
    }
    let nearest = shift.round();
    if (shift - nearest).abs() < INTEGER_TOL {
        let k = (nearest as i64).rem_euclid(n as i64) as usize;
        col.rotate_right(k);
        return;
    }
    fft::fft_in_place(col);
    let scale = 1.0 / n as f64;
    for (k, z) in col.iter_mut().enumerate() {
        let phase = -2.0 * PI * k as f64 * shift / n as f64;
        *z *= Complex64::from_polar(scale, phase);
    }
    fft::ifft_in_place(col);
}

/// Applies `shifts[l]` to column `l` of `profiles`.
pub(crate) fn shift_columns(profiles: &mut Profiles, shifts: &[f64]) {
    let mut buf = vec![Complex64::new(0.0, 0.0); profiles.nrows()];
    for (mut col, &s) in profiles.columns_mut().into_iter().zip(shifts) {
        if s == 0.0 {
            continue;
        }
        buf.iter_mut().zip(col.iter()).for_each(|(b, &z)| *b = z);
        shift_column(&mut buf, s);
        col.iter_mut().zip(&buf).for_each(|(z, &b)| *z = b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_shift_rotates() {
        let mut v: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 0.0)).collect();
        shift_column(&mut v, 3.0);
        assert_eq!(v[3].re, 0.0);
        shift_column(&mut v, -3.0);
        assert_eq!(v[0].re, 0.0);
        assert_eq!(v[7].re, 7.0);
    }

    #[test]
    fn fractional_shifts_compose_and_preserve_energy() {
        let mut v: Vec<Complex64> = (0..32)
            .map(|i| Complex64::new((-((i as f64 - 10.0) / 3.0).powi(2)).exp(), 0.1 * i as f64))
            .collect();
        let orig = v.clone();
        let e0: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        shift_column(&mut v, 0.37);
        let e1: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((e0 - e1).abs() < 1e-12 * e0);
        shift_column(&mut v, -0.37);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
