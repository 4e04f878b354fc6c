//! Dense 2-D discrete Fourier transforms on row-major buffers.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2-D DFT of an `rows × cols` buffer (row-major), `e^{-j…}` kernel
/// for the forward direction. Unnormalized in both directions.
pub(crate) fn fft2(data: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::<f64>::new();

    let row_fft = planner.plan_fft(cols, direction);
    for row in data.chunks_exact_mut(cols) {
        row_fft.process(row);
    }

    let col_fft = planner.plan_fft(rows, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for (r, x) in column.iter_mut().enumerate() {
            *x = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for (r, x) in column.iter().enumerate() {
            data[r * cols + c] = *x;
        }
    }
}

/// Angular frequency of DFT bin `index` for `n` samples spaced `spacing`
/// apart, wrapped to `(-π/spacing, π/spacing]`.
pub(crate) fn bin_wavenumber(index: usize, n: usize, spacing: f64) -> f64 {
    let signed = if index <= n / 2 { index as f64 } else { index as f64 - n as f64 };
    TAU * signed / (n as f64 * spacing)
}
