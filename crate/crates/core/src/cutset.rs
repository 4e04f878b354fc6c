//! Cut-set (spatial bandwidth) estimate of the eDoF.
//!
//! At a receive point `r` the field is a superposition of local plane waves
//! whose in-plane wavenumbers are
//!
//! ```text
//! k(r, t) = k0 · [r̂ − n (r̂·n)],   r̂ = (r − t)/|r − t|,
//! ```
//!
//! with `t` ranging over the transmitter and `n` the receive normal. The
//! local bandwidth `W(r)` is the area swept by `k(r, ·)`; the eDoF estimate
//! is `(2π)⁻² ∫ W(r) dr` over the receiver. Two evaluators of `W` are
//! provided: the Jacobian-density integral and a rasterized set measure.
//! The latter stays correct when the map folds over itself.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::em_kernel::WaveConfig;
use crate::error::{Error, Result};
use crate::fourier::{bin_wavenumber, fft2};
use crate::geometry::{PlanarSurface, QuadratureGrid, QuadratureRule, Vec2, Vec3};
use crate::spectrum::{EdofReport, Method};

const TWO_PI_SQ: f64 = 4.0 * PI * PI;

/// Largest dyadic refinement level per axis used when rasterizing.
const MAX_DYADIC_LEVEL: u32 = 11;

fn unit_direction(r_rx: &Vec3, r_tx: &Vec3) -> Result<(Vec3, f64)> {
    let rel = r_rx - r_tx;
    let d = rel.norm();
    if !(d > 0.0) {
        return Err(Error::SingularKernel { distance: d });
    }
    Ok((rel / d, d))
}

/// Wavenumber vector in 3-space; lies in the receive tangent plane.
pub fn wavenumber_vector(r_rx: &Vec3, r_tx: &Vec3, rx_surface: &PlanarSurface, wave: &WaveConfig) -> Result<Vec3> {
    let (r_hat, _) = unit_direction(r_rx, r_tx)?;
    let n = rx_surface.normal();
    Ok((r_hat - n * r_hat.dot(&n)) * wave.wavenumber())
}

/// In-plane wavenumber `(k_u, k_v)` in the receive tangent frame, rad/m.
pub fn wavenumber_component(r_rx: &Vec3, r_tx: &Vec3, rx_surface: &PlanarSurface, wave: &WaveConfig) -> Result<Vec2> {
    let (r_hat, _) = unit_direction(r_rx, r_tx)?;
    let k0 = wave.wavenumber();
    Ok(Vec2::new(
        k0 * r_hat.dot(&rx_surface.tangent_u()),
        k0 * r_hat.dot(&rx_surface.tangent_v()),
    ))
}

/// `∂(k_u, k_v)/∂(a, b)` with `(a, b)` the transmit local coordinates.
///
/// From `∂r̂/∂a = −(I − r̂ r̂ᵀ) u_tx / d` and `k_u = k0 r̂·u_rx`.
pub fn jacobian_matrix(r_rx: &Vec3, r_tx: &Vec3, tx_surface: &PlanarSurface, rx_surface: &PlanarSurface, wave: &WaveConfig) -> Result<Matrix2<f64>> {
    let (r_hat, d) = unit_direction(r_rx, r_tx)?;
    let scale = -wave.wavenumber() / d;
    let project = |x: Vec3| x - r_hat * r_hat.dot(&x);
    let du = project(tx_surface.tangent_u());
    let dv = project(tx_surface.tangent_v());
    let (ur, vr) = (rx_surface.tangent_u(), rx_surface.tangent_v());
    Ok(Matrix2::new(
        ur.dot(&du),
        ur.dot(&dv),
        vr.dot(&du),
        vr.dot(&dv),
    ) * scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JacobianMethod {
    Analytic,
    /// Central differences with step `h` meters, one-sided at the edges.
    CentralDifference(f64),
}

/// `|det ∂(k_u, k_v)/∂(a_tx, b_tx)|` at the transmit point `tx_local`.
pub fn jacobian_det(
    r_rx: &Vec3,
    tx_local: Vec2,
    tx_surface: &PlanarSurface,
    rx_surface: &PlanarSurface,
    wave: &WaveConfig,
    method: JacobianMethod,
) -> Result<f64> {
    let r_tx = tx_surface.global_point(tx_local)?;
    match method {
        JacobianMethod::Analytic => Ok(jacobian_matrix(r_rx, &r_tx, tx_surface, rx_surface, wave)?
            .determinant()
            .abs()),
        JacobianMethod::CentralDifference(h) => {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
            }
            let k_at = |a: f64, b: f64| {
                wavenumber_component(r_rx, &tx_surface.point_at(Vec2::new(a, b)), rx_surface, wave)
            };
            let (hu, hv) = (0.5 * tx_surface.length_u(), 0.5 * tx_surface.length_v());
            let (a, b) = (tx_local.x, tx_local.y);
            let (a_lo, a_hi) = ((a - h).max(-hu), (a + h).min(hu));
            let (b_lo, b_hi) = ((b - h).max(-hv), (b + h).min(hv));
            let d_da = (k_at(a_hi, b)? - k_at(a_lo, b)?) / (a_hi - a_lo);
            let d_db = (k_at(a, b_hi)? - k_at(a, b_lo)?) / (b_hi - b_lo);
            Ok((d_da.x * d_db.y - d_db.x * d_da.y).abs())
        }
    }
}

/// `W(r) = ∫_tx |det J| dt` by the transmit quadrature, rad²/m².
pub fn local_bandwidth(r_rx: &Vec3, tx_grid: &QuadratureGrid, rx_surface: &PlanarSurface, wave: &WaveConfig) -> Result<f64> {
    let tx_surface = tx_grid.surface();
    let mut total = 0.0;
    for (p, w) in tx_grid.points().iter().zip(tx_grid.weights()) {
        total += w * jacobian_matrix(r_rx, p, tx_surface, rx_surface, wave)?
            .determinant()
            .abs();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMethod {
    JacobianIntegral,
    SetMeasure,
}

/// Local bandwidth sampled at every receive quadrature point.
#[derive(Debug, Clone)]
pub struct LocalBandwidthField {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub method: BandwidthMethod,
}

impl LocalBandwidthField {
    /// `Σ_m W_m w_m`.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Jacobian-integral bandwidth at every receive point, parallel over the
/// receive grid with fixed-order sums inside each point.
pub fn local_bandwidth_field(tx_grid: &QuadratureGrid, rx_grid: &QuadratureGrid, wave: &WaveConfig) -> Result<LocalBandwidthField> {
    let rx_surface = rx_grid.surface();
    let values = rx_grid
        .points()
        .par_iter()
        .map(|q| local_bandwidth(q, tx_grid, rx_surface, wave))
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalBandwidthField {
        values,
        weights: rx_grid.weights().to_vec(),
        method: BandwidthMethod::JacobianIntegral,
    })
}

/// Outcome of rasterizing a wavenumber set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMeasure {
    /// Occupied area, rad²/m².
    pub measure: f64,
    pub occupied_cells: usize,
    pub samples: usize,
    pub resolution: f64,
    pub warning: Option<String>,
}

/// Dyadic lattice on a surface: `2^level + 1` samples per axis including
/// both edges, so refining the level only adds points.
fn dyadic_samples(surface: &PlanarSurface, levels: (u32, u32)) -> Vec<Vec3> {
    let (nu, nv) = (1usize << levels.0, 1usize << levels.1);
    let (lu, lv) = (surface.length_u(), surface.length_v());
    let mut out = Vec::with_capacity((nu + 1) * (nv + 1));
    for i in 0..=nu {
        let a = -0.5 * lu + lu * i as f64 / nu as f64;
        for j in 0..=nv {
            let b = -0.5 * lv + lv * j as f64 / nv as f64;
            out.push(surface.point_at(Vec2::new(a, b)));
        }
    }
    out
}

fn dyadic_level(length: f64, stretch: f64, resolution: f64) -> (u32, bool) {
    // Mapped sample spacing ≤ resolution/2.
    let needed = 2.0 * stretch * length / resolution;
    if !(needed > 1.0) {
        return (0, false);
    }
    let level = needed.log2().ceil() as u32;
    if level > MAX_DYADIC_LEVEL {
        (MAX_DYADIC_LEVEL, true)
    } else {
        (level, false)
    }
}

/// Largest singular value of the Jacobian over a set of observation points
/// and the transmit corners and center.
fn max_stretch(observers: &[Vec3], tx_surface: &PlanarSurface, rx_surface: &PlanarSurface, wave: &WaveConfig) -> Result<f64> {
    let mut probes = tx_surface.corners().to_vec();
    probes.push(tx_surface.center());
    let mut best: f64 = 0.0;
    for q in observers {
        for p in &probes {
            let j = jacobian_matrix(q, p, tx_surface, rx_surface, wave)?;
            best = best.max(j.norm()); // Frobenius ≥ spectral
        }
    }
    Ok(best)
}

fn cell_of(k: &Vec2, resolution: f64) -> (i64, i64) {
    ((k.x / resolution).floor() as i64, (k.y / resolution).floor() as i64)
}

fn sampling_levels(tx_surface: &PlanarSurface, stretch: f64, resolution: f64) -> ((u32, u32), bool) {
    let (lu, cu) = dyadic_level(tx_surface.length_u(), stretch, resolution);
    let (lv, cv) = dyadic_level(tx_surface.length_v(), stretch, resolution);
    ((lu, lv), cu || cv)
}

/// Rasterized measure of `{k(r_rx, t) : t ∈ S_tx}` on cells of side
/// `resolution`: an outer-measure estimate that converges from above.
///
/// The transmit aperture of `tx_grid` is sampled on a dyadic lattice fine
/// enough that neighboring images are at most half a cell apart.
pub fn set_measure_bandwidth(
    r_rx: &Vec3,
    tx_grid: &QuadratureGrid,
    rx_surface: &PlanarSurface,
    wave: &WaveConfig,
    resolution: f64,
) -> Result<SetMeasure> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidArgument(format!("resolution must be positive, got {resolution}")));
    }
    let tx_surface = tx_grid.surface();
    let stretch = max_stretch(std::slice::from_ref(r_rx), tx_surface, rx_surface, wave)?;
    let (levels, capped) = sampling_levels(tx_surface, stretch, resolution);
    let samples = dyadic_samples(tx_surface, levels);

    let mut cells = HashSet::new();
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for t in &samples {
        let k = wavenumber_component(r_rx, t, rx_surface, wave)?;
        lo = lo.inf(&k);
        hi = hi.sup(&k);
        cells.insert(cell_of(&k, resolution));
    }
    for t in tx_surface.corners() {
        let k = wavenumber_component(r_rx, &t, rx_surface, wave)?;
        lo = lo.inf(&k);
        hi = hi.sup(&k);
    }

    let span = (hi - lo).max();
    let mut warning = None;
    if cells.len() == 1 && span > 0.01 * resolution {
        warning = Some(format!(
            "resolution {resolution} rad/m too coarse: image spans {span:.3e} rad/m in a single cell"
        ));
    } else if capped {
        warning = Some(format!(
            "transmit sampling capped at 2^{MAX_DYADIC_LEVEL} per axis; holes possible at resolution {resolution}"
        ));
    }

    Ok(SetMeasure {
        measure: cells.len() as f64 * resolution * resolution,
        occupied_cells: cells.len(),
        samples: samples.len(),
        resolution,
        warning,
    })
}

/// `W_iso = π k0²`.
pub fn isotropic_bandwidth(wave: &WaveConfig) -> f64 {
    PI * wave.wavenumber().powi(2)
}

/// `N_o = (2π)⁻² Σ_m W(r_m) w_m` over the receive grid.
pub fn cutset_edof(tx_grid: &QuadratureGrid, rx_grid: &QuadratureGrid, wave: &WaveConfig) -> Result<EdofReport> {
    let field = local_bandwidth_field(tx_grid, rx_grid, wave)?;
    Ok(edof_from_field(&field, wave))
}

pub fn edof_from_field(field: &LocalBandwidthField, wave: &WaveConfig) -> EdofReport {
    let w_iso = isotropic_bandwidth(wave);
    EdofReport::new(Method::Cutset, field.integral() / TWO_PI_SQ, None)
        .with("bandwidth_min", field.min())
        .with("bandwidth_max", field.max())
        .with("isotropic_bandwidth", w_iso)
        .with("exceeds_isotropic_bound", field.max() > w_iso + 1e-9)
}

/// Descriptor of a region of the wavenumber plane.
#[derive(Debug, Clone, PartialEq)]
pub enum WavenumberSet {
    Plane,
    Empty,
    Rectangle { u: (f64, f64), v: (f64, f64) },
    Disk { radius: f64 },
    /// Union of square cells `[i·res, (i+1)·res) × [j·res, (j+1)·res)`.
    Cells { resolution: f64, cells: HashSet<(i64, i64)> },
}

impl WavenumberSet {
    pub fn contains(&self, k: &Vec2) -> bool {
        match self {
            WavenumberSet::Plane => true,
            WavenumberSet::Empty => false,
            WavenumberSet::Rectangle { u, v } => k.x >= u.0 && k.x <= u.1 && k.y >= v.0 && k.y <= v.1,
            WavenumberSet::Disk { radius } => k.norm() <= *radius,
            WavenumberSet::Cells { resolution, cells } => cells.contains(&cell_of(k, *resolution)),
        }
    }

    /// Area in rad²/m²; infinite for the whole plane.
    pub fn measure(&self) -> f64 {
        match self {
            WavenumberSet::Plane => f64::INFINITY,
            WavenumberSet::Empty => 0.0,
            WavenumberSet::Rectangle { u, v } => (u.1 - u.0).max(0.0) * (v.1 - v.0).max(0.0),
            WavenumberSet::Disk { radius } => PI * radius * radius,
            WavenumberSet::Cells { resolution, cells } => cells.len() as f64 * resolution * resolution,
        }
    }
}

/// Every wavenumber reached from any receive sample of `rx_grid` as the
/// transmit point sweeps `tx_surface`, rasterized on cells of `resolution`.
pub fn wavenumber_support(
    rx_grid: &QuadratureGrid,
    tx_surface: &PlanarSurface,
    wave: &WaveConfig,
    resolution: f64,
) -> Result<WavenumberSet> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidArgument(format!("resolution must be positive, got {resolution}")));
    }
    let rx_surface = rx_grid.surface();
    let stretch = max_stretch(&rx_surface.corners(), tx_surface, rx_surface, wave)?
        .max(max_stretch(&[rx_surface.center()], tx_surface, rx_surface, wave)?);
    let (levels, _) = sampling_levels(tx_surface, stretch, resolution);
    let samples = dyadic_samples(tx_surface, levels);

    let per_point = rx_grid
        .points()
        .par_iter()
        .map(|q| {
            samples
                .iter()
                .map(|t| wavenumber_component(q, t, rx_surface, wave).map(|k| cell_of(&k, resolution)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = per_point.into_iter().flatten().collect();
    Ok(WavenumberSet::Cells { resolution, cells })
}

/// Ideal wavenumber filter of a field sampled on a uniform receive grid:
/// inverse DFT of `1_Q · DFT(E)`, with the samples zero-padded by `padding`
/// along each axis before transforming.
pub fn filter_field(
    samples: &[Complex64],
    support: &WavenumberSet,
    rx_grid: &QuadratureGrid,
    padding: usize,
) -> Result<Vec<Complex64>> {
    if samples.len() != rx_grid.len() {
        return Err(Error::Dimension { expected: rx_grid.len(), actual: samples.len() });
    }
    if rx_grid.rule() != QuadratureRule::Midpoint {
        return Err(Error::Geometry("wavenumber filtering needs a uniform (midpoint) grid".into()));
    }
    let (hu, hv) = rx_grid.uniform_spacing().expect("midpoint grid is uniform");
    let (nu, nv) = rx_grid.counts();
    let pad = padding.max(1);
    let (pu, pv) = (nu * pad, nv * pad);

    let mut buf = vec![Complex64::new(0.0, 0.0); pu * pv];
    for i in 0..nu {
        buf[i * pv..i * pv + nv].copy_from_slice(&samples[i * nv..(i + 1) * nv]);
    }
    fft2(&mut buf, pu, pv, FftDirection::Forward);
    for i in 0..pu {
        let ku = bin_wavenumber(i, pu, hu);
        for j in 0..pv {
            let k = Vec2::new(ku, bin_wavenumber(j, pv, hv));
            if !support.contains(&k) {
                buf[i * pv + j] = Complex64::new(0.0, 0.0);
            }
        }
    }
    fft2(&mut buf, pu, pv, FftDirection::Inverse);

    let scale = 1.0 / (pu * pv) as f64;
    let mut out = Vec::with_capacity(samples.len());
    for i in 0..nu {
        out.extend(buf[i * pv..i * pv + nv].iter().map(|x| x * scale));
    }
    Ok(out)
}
