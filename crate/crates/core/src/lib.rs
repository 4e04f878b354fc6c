//! Effective degrees of freedom of line-of-sight links between two planar
//! holographic apertures.
//!
//! Three independent routes are provided and meant to be cross-checked:
//!
//! - [`spectrum`]: singular values of the quadrature-discretized Green
//!   operator (the brute-force reference),
//! - [`cutset`]: the cut-set integral of the local wavenumber bandwidth,
//! - [`landau`]: Landau's eigenvalue counting applied to the wavenumber
//!   support of the receive-side autocorrelation kernel.
//!
//! Modes and spectra are indexed from zero: `values()[0]` is the strongest
//! coupling intensity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutset;
pub mod em_kernel;
pub mod error;
mod fourier;
pub mod geometry;
pub mod landau;
pub mod spectrum;

pub use num_complex::Complex64;

pub use crate::cutset::{
    cutset_edof, isotropic_bandwidth, jacobian_det, local_bandwidth, local_bandwidth_field,
    set_measure_bandwidth, wavenumber_component, JacobianMethod, LocalBandwidthField,
    SetMeasure, WavenumberSet,
};
pub use crate::em_kernel::{assemble_operator, green_kernel, DiscreteOperator, WaveConfig};
pub use crate::error::{Error, Result};
pub use crate::geometry::{discretize, PlanarSurface, QuadratureGrid, QuadratureRule, Vec2, Vec3};
pub use crate::landau::{
    autocorrelation_kernel, landau_edof, log_log_slope, polarization_study, resolve_lag_grid,
    stationarity_deviation, support_extent, support_measure, wavenumber_response, LagGrid,
    PolarizationOptions, PolarizationRow, ResponseOptions, SpectrumRoute, WavenumberResponse,
};
pub use crate::spectrum::{
    count_edof, coupling_spectrum, expand_field, extract_modes, kolmogorov_width,
    CouplingSpectrum, DiagValue, EdofReport, Method, ModeBasis, Side, Threshold, ThresholdMode,
};
