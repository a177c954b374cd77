//! Thin wrapper over `rustfft` with per-thread plan caching.
//!
//! Conventions used throughout the crate: the forward transform of a grid
//! function `h` of length `n` is `H(k) = (1/n) sum_j h_j exp(-i k x_j)`,
//! matching the normalized Fourier coefficient of a periodic function. The
//! inverse is the plain unnormalized synthesis sum.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized DFT, `X_k = sum_j x_j exp(-2 pi i j k / n)`.
pub fn fft_in_place(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// In-place unnormalized inverse DFT, `x_j = sum_k X_k exp(+2 pi i j k / n)`.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(buf.len());
        fft.process(buf);
    });
}

/// Normalized Fourier coefficients of a real grid function.
pub fn forward_coefficients(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Reconstruct the real grid function from normalized coefficients.
///
/// The imaginary residue of the synthesis (round-off for Hermitian inputs)
/// is dropped.
pub fn inverse_real(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    ifft_in_place(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Signed integer mode number of FFT bin `j` for transform length `n`.
///
/// Bins `0..=n/2` map to modes `0..=n/2`, the rest to negative modes.
pub fn bin_mode(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}
