//! Scalar line-of-sight Green kernel and the quadrature-weighted channel
//! matrix built from it.
//!
//! With grids `{(p_n, w_n)}` on the transmitter and `{(q_m, v_m)}` on the
//! receiver, the operator is represented by
//!
//! ```text
//! A[m, n] = sqrt(v_m) · k(q_m, p_n) · sqrt(w_n)
//! ```
//!
//! so that the plain singular values of `A` approximate those of the
//! continuous operator and the discrete inner products are ordinary complex
//! dot products on the weighted coefficient vectors.

use std::f64::consts::TAU;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{QuadratureGrid, Vec3};

/// Intrinsic impedance of vacuum in ohms.
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730313668;

/// Monochromatic wave parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveConfig {
    wavelength: f64,
    wavenumber: f64,
    impedance: f64,
}

impl WaveConfig {
    pub fn new(wavelength: f64) -> Result<Self> {
        Self::with_impedance(wavelength, FREE_SPACE_IMPEDANCE)
    }

    pub fn with_impedance(wavelength: f64, impedance: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(impedance > 0.0 && impedance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "impedance must be positive, got {impedance}"
            )));
        }
        Ok(Self {
            wavelength,
            wavenumber: TAU / wavelength,
            impedance,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `k0 = 2π/λ` in rad/m.
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn impedance(&self) -> f64 {
        self.impedance
    }

    #[inline]
    pub(crate) fn kernel_at(&self, distance: f64) -> Complex64 {
        // j·η·exp(-j k0 d) / (2 λ d)
        let amp = self.impedance / (2.0 * self.wavelength * distance);
        let (s, c) = (self.wavenumber * distance).sin_cos();
        Complex64::new(amp * s, amp * c)
    }
}

/// `k(r_rx, r_tx) = j·η·exp(-j k0 d) / (2 λ d)` with `d = |r_rx - r_tx|`.
pub fn green_kernel(r_rx: &Vec3, r_tx: &Vec3, wave: &WaveConfig) -> Result<Complex64> {
    let d = (r_rx - r_tx).norm();
    if !(d > 0.0) {
        return Err(Error::SingularKernel { distance: d });
    }
    Ok(wave.kernel_at(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    SymmetricSqrt,
}

/// Weighted kernel matrix of shape `N_rx × N_tx`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: Mat<Complex64>,
    tx_grid: QuadratureGrid,
    rx_grid: QuadratureGrid,
    wave: WaveConfig,
    weighting: Weighting,
}

/// Closest approach between any transmit and receive sample, in meters.
pub fn min_separation(tx: &QuadratureGrid, rx: &QuadratureGrid) -> f64 {
    rx.points()
        .par_iter()
        .map(|q| {
            tx.points()
                .iter()
                .map(|p| (q - p).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Assembles the weighted channel matrix.
///
/// Rejects intersecting apertures and any sample pair closer than `λ/10`.
/// Entries are computed independently, so the result does not depend on the
/// thread schedule.
pub fn assemble_operator(
    tx_grid: &QuadratureGrid,
    rx_grid: &QuadratureGrid,
    wave: &WaveConfig,
) -> Result<DiscreteOperator> {
    if tx_grid.surface().intersects(rx_grid.surface()) {
        return Err(Error::Geometry("transmit and receive surfaces intersect".into()));
    }
    let sep = min_separation(tx_grid, rx_grid);
    if !(sep >= 0.1 * wave.wavelength()) {
        return Err(Error::SingularKernel { distance: sep });
    }

    let (n_rx, n_tx) = (rx_grid.len(), tx_grid.len());
    let sw_rx: Vec<f64> = rx_grid.weights().iter().map(|w| w.sqrt()).collect();
    let mut data = vec![Complex64::new(0.0, 0.0); n_rx * n_tx];
    data.par_chunks_mut(n_rx)
        .zip(tx_grid.points().par_iter().zip(tx_grid.weights().par_iter()))
        .for_each(|(col, (p, w))| {
            let sw = w.sqrt();
            for ((entry, q), swr) in col.iter_mut().zip(rx_grid.points()).zip(&sw_rx) {
                *entry = wave.kernel_at((q - p).norm()) * (swr * sw);
            }
        });
    let matrix = Mat::from_fn(n_rx, n_tx, |m, n| data[n * n_rx + m]);

    Ok(DiscreteOperator {
        matrix,
        tx_grid: tx_grid.clone(),
        rx_grid: rx_grid.clone(),
        wave: *wave,
        weighting: Weighting::SymmetricSqrt,
    })
}

/// `Σ x_i · conj(y_i)`, linear in the first argument.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}

impl DiscreteOperator {
    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.matrix
    }

    pub fn tx_grid(&self) -> &QuadratureGrid {
        &self.tx_grid
    }

    pub fn rx_grid(&self) -> &QuadratureGrid {
        &self.rx_grid
    }

    pub fn wave(&self) -> &WaveConfig {
        &self.wave
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn n_tx(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.matrix.nrows()
    }

    /// `A x` on weighted coefficient vectors.
    pub fn apply(&self, coefficients: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n_tx(), coefficients.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_rx()];
        for (n, x) in coefficients.iter().enumerate() {
            if *x == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.col(n);
            for (m, o) in out.iter_mut().enumerate() {
                *o += col[m] * x;
            }
        }
        Ok(out)
    }

    /// `A* y` on weighted coefficient vectors.
    pub fn apply_adjoint(&self, field: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n_rx(), field.len())?;
        Ok((0..self.n_tx())
            .map(|n| {
                let col = self.matrix.col(n);
                (0..self.n_rx()).map(|m| col[m].conj() * field[m]).sum()
            })
            .collect())
    }

    /// Field samples `E(q_m) = Σ_n k(q_m, p_n) w_n J(p_n)` from physical
    /// current samples `J(p_n)`.
    pub fn apply_physical(&self, current: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n_tx(), current.len())?;
        let weighted: Vec<Complex64> = current
            .iter()
            .zip(self.tx_grid.weights())
            .map(|(j, w)| j * w.sqrt())
            .collect();
        let mut field = self.apply(&weighted)?;
        for (e, v) in field.iter_mut().zip(self.rx_grid.weights()) {
            *e /= v.sqrt();
        }
        Ok(field)
    }

    /// `|⟨A f, g⟩ − ⟨f, A* g⟩|`.
    pub fn adjoint_identity_residual(&self, f: &[Complex64], g: &[Complex64]) -> Result<f64> {
        let af = self.apply(f)?;
        let ag = self.apply_adjoint(g)?;
        Ok((inner(&af, g) - inner(f, &ag)).norm())
    }

    /// Discrete `∬ |k|² dr dr'`, i.e. the squared Frobenius norm of `A`.
    pub fn hilbert_schmidt_norm_sq(&self) -> f64 {
        (0..self.n_tx())
            .map(|n| {
                let col = self.matrix.col(n);
                (0..self.n_rx()).map(|m| col[m].norm_sqr()).sum::<f64>()
            })
            .sum()
    }
}
