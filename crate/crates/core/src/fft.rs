//! Thread-local FFT plan cache shared by the imaging and compensation code.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Unnormalized forward transform in place.
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    forward(buf.len()).process(buf);
}

/// Unnormalized inverse transform in place (kernel `exp(+j2πkn/N)`).
pub(crate) fn ifft_in_place(buf: &mut [Complex64]) {
    inverse(buf.len()).process(buf);
}
