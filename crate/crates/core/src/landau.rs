//! Landau eigenvalue counting on the receive-side Gram operator.
//!
//! `G_Rx = K K*` has kernel `g(r, r') = ∫_tx k(r, t) conj(k(r', t)) dt`.
//! Treating it as a convolution around a reference point, its Fourier
//! transform `H_G` defines the wavenumber support `Q_γ = {k : H_G(k) ≥ γ}`
//! and the eDoF estimate `m(S_rx) · m(Q_γ) / (2π)²`.
//!
//! The lag samples of `g` are tapered with a Bartlett window before the
//! transform. The taper's spectrum is non-negative, so a genuine
//! autocorrelation keeps a non-negative `H_G` after truncation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::cutset::wavenumber_component;
use crate::em_kernel::{assemble_operator, WaveConfig};
use crate::error::{Error, Result};
use crate::fourier::{bin_wavenumber, fft2};
use crate::geometry::{discretize, PlanarSurface, QuadratureGrid, Vec2, Vec3};
use crate::spectrum::{
    count_edof, coupling_spectrum, coupling_spectrum_via_gram, CouplingSpectrum, EdofReport,
    Method, Threshold,
};

const TWO_PI_SQ: f64 = 4.0 * PI * PI;

/// Relative level at which an ideal pass-band response is cut to recover
/// its support after the lag taper has smoothed the edges.
pub const PASS_BAND_LEVEL: f64 = 0.5;

/// Lag decay below which the lag window is considered wide enough.
const DECAY_TARGET: f64 = 1e-3;

/// `g(δ) = Σ_t w_t k(r₀ + δ/2, t) conj(k(r₀ − δ/2, t))`, with `δ` given in
/// the receive tangent frame.
///
/// The symmetric placement makes `g(−δ) = conj(g(δ))` hold exactly.
pub fn autocorrelation_kernel(
    delta: Vec2,
    reference: &Vec3,
    rx_surface: &PlanarSurface,
    tx_grid: &QuadratureGrid,
    wave: &WaveConfig,
) -> Result<Complex64> {
    let half = rx_surface.tangent_u() * (0.5 * delta.x) + rx_surface.tangent_v() * (0.5 * delta.y);
    let (plus, minus) = (reference + half, reference - half);
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, w) in tx_grid.points().iter().zip(tx_grid.weights()) {
        let (dp, dm) = ((plus - t).norm(), (minus - t).norm());
        if !(dp > 0.0 && dm > 0.0) {
            return Err(Error::SingularKernel { distance: dp.min(dm) });
        }
        acc += wave.kernel_at(dp) * wave.kernel_at(dm).conj() * *w;
    }
    Ok(acc)
}

/// Lag-grid and transform settings; `None` fields take geometry-derived
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseOptions {
    /// Full lag extent per axis, meters.
    pub lag_extent: Option<(f64, f64)>,
    /// Lag samples per axis; forced odd so the grid is symmetric about zero.
    pub lag_counts: Option<(usize, usize)>,
    /// Zero-padding factor applied before the transform.
    pub padding: usize,
    /// Point the lags are centered on; defaults to the receive center.
    pub reference: Option<Vec3>,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        Self {
            lag_extent: None,
            lag_counts: None,
            padding: 4,
            reference: None,
        }
    }
}

/// Resolved lag lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagGrid {
    pub counts: (usize, usize),
    pub spacing: (f64, f64),
}

impl LagGrid {
    pub fn half_counts(&self) -> (usize, usize) {
        ((self.counts.0 - 1) / 2, (self.counts.1 - 1) / 2)
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.spacing.0 * (self.counts.0 - 1) as f64,
            self.spacing.1 * (self.counts.1 - 1) as f64,
        )
    }
}

fn odd(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Default lag lattice: extent `8 λ d / L_tx` per axis; spacing four times
/// finer than Nyquist for the widest transmit-induced wavenumber, but never
/// finer than `λ/4`.
pub fn resolve_lag_grid(
    rx_surface: &PlanarSurface,
    tx_grid: &QuadratureGrid,
    wave: &WaveConfig,
    options: &ResponseOptions,
) -> Result<LagGrid> {
    let reference = options.reference.unwrap_or_else(|| rx_surface.center());
    let tx = tx_grid.surface();
    let distance = (reference - tx.center()).norm();
    let extent = match options.lag_extent {
        Some(e) => e,
        None => {
            let e = 8.0 * wave.wavelength() * distance / tx.length_u().max(tx.length_v());
            (e, e)
        }
    };
    if !(extent.0 > 0.0 && extent.1 > 0.0 && extent.0.is_finite() && extent.1.is_finite()) {
        return Err(Error::InvalidArgument(format!("lag extent must be positive, got {extent:?}")));
    }

    let counts = match options.lag_counts {
        Some((a, b)) => {
            if a < 3 || b < 3 {
                return Err(Error::InvalidArgument(format!("lag grid needs at least 3 samples per axis, got {a} x {b}")));
            }
            (odd(a), odd(b))
        }
        None => {
            let mut probes = tx.corners().to_vec();
            probes.extend_from_slice(tx_grid.points());
            let mut k_max = Vec2::zeros();
            for p in &probes {
                let k = wavenumber_component(&reference, p, rx_surface, wave)?;
                k_max = k_max.sup(&k.abs());
            }
            let floor = 0.25 * wave.wavelength();
            let pick = |ext: f64, k: f64| {
                let spacing = if k > 0.0 { (PI / (4.0 * k)).max(floor) } else { ext / 16.0 };
                odd(2 * (ext / (2.0 * spacing)).ceil() as usize + 1).max(3)
            };
            (pick(extent.0, k_max.x), pick(extent.1, k_max.y))
        }
    };
    Ok(LagGrid {
        counts,
        spacing: (extent.0 / (counts.0 - 1) as f64, extent.1 / (counts.1 - 1) as f64),
    })
}

/// Sampled `H_G` on the (zero-padded) dual wavenumber lattice, ordered by
/// ascending `k_u` (slow) then `k_v`.
#[derive(Debug, Clone)]
pub struct WavenumberResponse {
    pub k_samples: Vec<Vec2>,
    pub h_values: Vec<f64>,
    pub op_norm_estimate: f64,
    pub dims: (usize, usize),
    pub dk: (f64, f64),
    pub lag_grid: LagGrid,
    /// `g(0)`, real and positive.
    pub zero_lag: f64,
    /// Most negative `H_G / max` before clamping.
    pub min_ratio: f64,
    /// Largest `|Im H_G| / max`, which vanishes for an exactly Hermitian `g`.
    pub imag_ratio: f64,
    /// Largest `|g|` on the lag boundary relative to `g(0)`.
    pub boundary_decay: f64,
    pub warnings: Vec<String>,
}

impl WavenumberResponse {
    pub fn cell_area(&self) -> f64 {
        self.dk.0 * self.dk.1
    }

    /// `Σ H_G · ΔkΔk / (2π)²`; equals `g(0)` for a consistent transform.
    pub fn total_power(&self) -> f64 {
        self.h_values.iter().sum::<f64>() * self.cell_area() / TWO_PI_SQ
    }

    pub fn value_at(&self, iu: usize, iv: usize) -> f64 {
        self.h_values[iu * self.dims.1 + iv]
    }

    pub fn is_empty(&self) -> bool {
        self.h_values.is_empty()
    }
}

/// Samples `g` on a symmetric lag lattice centered at the reference point,
/// tapers, transforms with the `e^{-j k·δ}` convention and returns `H_G`.
pub fn wavenumber_response(
    rx_surface: &PlanarSurface,
    tx_grid: &QuadratureGrid,
    wave: &WaveConfig,
    options: &ResponseOptions,
) -> Result<WavenumberResponse> {
    let reference = options.reference.unwrap_or_else(|| rx_surface.center());
    let lag_grid = resolve_lag_grid(rx_surface, tx_grid, wave, options)?;
    let (hu, hv) = lag_grid.half_counts();
    let (su, sv) = lag_grid.spacing;
    let (nu, nv) = lag_grid.counts;

    let lags: Vec<(i64, i64)> = (-(hu as i64)..=hu as i64)
        .flat_map(|i| (-(hv as i64)..=hv as i64).map(move |j| (i, j)))
        .collect();
    let g = lags
        .par_iter()
        .map(|&(i, j)| {
            autocorrelation_kernel(Vec2::new(i as f64 * su, j as f64 * sv), &reference, rx_surface, tx_grid, wave)
        })
        .collect::<Result<Vec<_>>>()?;

    let zero_lag = g[hu * nv + hv].re;
    if !(zero_lag > 0.0) {
        return Err(Error::Numerical("zero-lag autocorrelation is not positive".into()));
    }
    let boundary_decay = lags
        .iter()
        .zip(&g)
        .filter(|((i, j), _)| i.unsigned_abs() as usize == hu || j.unsigned_abs() as usize == hv)
        .map(|(_, v)| v.norm() / zero_lag)
        .fold(0.0, f64::max);

    let pad = options.padding.max(1);
    let (pu, pv) = (nu * pad, nv * pad);
    let taper = |i: i64, half: usize| 1.0 - i.unsigned_abs() as f64 / (half + 1) as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); pu * pv];
    for (&(i, j), v) in lags.iter().zip(&g) {
        let r = i.rem_euclid(pu as i64) as usize;
        let c = j.rem_euclid(pv as i64) as usize;
        buf[r * pv + c] = v * (taper(i, hu) * taper(j, hv));
    }
    fft2(&mut buf, pu, pv, FftDirection::Forward);

    let cell = su * sv;
    let order = |n: usize| (0..n).map(move |q| (q + n / 2 + 1) % n);
    let mut k_samples = Vec::with_capacity(pu * pv);
    let mut raw = Vec::with_capacity(pu * pv);
    let mut max_imag: f64 = 0.0;
    for p in order(pu) {
        let ku = bin_wavenumber(p, pu, su);
        for q in order(pv) {
            let h = buf[p * pv + q] * cell;
            k_samples.push(Vec2::new(ku, bin_wavenumber(q, pv, sv)));
            raw.push(h.re);
            max_imag = max_imag.max(h.im.abs());
        }
    }
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Numerical("wavenumber response has no positive samples".into()));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let h_values: Vec<f64> = raw.iter().map(|h| h.max(0.0)).collect();

    let mut warnings = Vec::new();
    if boundary_decay > DECAY_TARGET {
        warnings.push(format!(
            "lag window too short: |g| at the boundary is {boundary_decay:.2e} of g(0)"
        ));
    }
    if min < -1e-9 * max {
        warnings.push(format!("negative response before clamping: min/max = {:.2e}", min / max));
    }

    Ok(WavenumberResponse {
        k_samples,
        h_values,
        op_norm_estimate: max,
        dims: (pu, pv),
        dk: (2.0 * PI / (pu as f64 * su), 2.0 * PI / (pv as f64 * sv)),
        lag_grid,
        zero_lag,
        min_ratio: (min / max).min(0.0),
        imag_ratio: max_imag / max,
        boundary_decay,
        warnings,
    })
}

fn response_level(response: &WavenumberResponse, threshold: Threshold) -> Result<f64> {
    threshold.validate()?;
    if response.is_empty() {
        return Err(Error::Numerical("empty wavenumber response".into()));
    }
    Ok(threshold.level(response.op_norm_estimate))
}

/// `m(Q_γ)`: number of samples with `H_G ≥ level` times the cell area.
pub fn support_measure(response: &WavenumberResponse, threshold: Threshold) -> Result<f64> {
    let level = response_level(response, threshold)?;
    let count = response.h_values.iter().filter(|h| **h >= level).count();
    Ok(count as f64 * response.cell_area())
}

/// Side lengths of the bounding box of `Q_γ`, one cell wide per sample.
pub fn support_extent(response: &WavenumberResponse, threshold: Threshold) -> Result<(f64, f64)> {
    let level = response_level(response, threshold)?;
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for (k, h) in response.k_samples.iter().zip(&response.h_values) {
        if *h >= level {
            lo = lo.inf(k);
            hi = hi.sup(k);
        }
    }
    if lo.x > hi.x {
        return Ok((0.0, 0.0));
    }
    Ok((hi.x - lo.x + response.dk.0, hi.y - lo.y + response.dk.1))
}

/// `N = m(S_rx) · m(Q) / (2π)²`. Tagged `landau-gamma` when the support
/// was measured at an explicit accuracy level.
pub fn landau_edof(rx_surface: &PlanarSurface, support: f64, threshold: Option<Threshold>) -> Result<EdofReport> {
    if !(support >= 0.0 && support.is_finite()) {
        return Err(Error::InvalidArgument(format!("support measure must be >= 0, got {support}")));
    }
    let method = if threshold.is_some() { Method::LandauGamma } else { Method::Landau };
    Ok(EdofReport::new(method, rx_surface.area() * support / TWO_PI_SQ, threshold)
        .with("support_measure", support)
        .with("receive_area", rx_surface.area()))
}

/// Largest modulus deviation of `g` evaluated at the four receive corners
/// from `g` at the center, relative to `g(0)` at the center, over the lags
/// `0, ±s, ±2s, ±4s` along each axis.
pub fn stationarity_deviation(
    rx_surface: &PlanarSurface,
    tx_grid: &QuadratureGrid,
    wave: &WaveConfig,
    lag_grid: &LagGrid,
) -> Result<f64> {
    let (su, sv) = lag_grid.spacing;
    let mut lags = vec![Vec2::zeros()];
    for m in [1.0, 2.0, 4.0] {
        for s in [-1.0, 1.0] {
            lags.push(Vec2::new(s * m * su, 0.0));
            lags.push(Vec2::new(0.0, s * m * sv));
        }
    }
    let center = rx_surface.center();
    let base = lags
        .iter()
        .map(|d| autocorrelation_kernel(*d, &center, rx_surface, tx_grid, wave).map(|g| g.norm()))
        .collect::<Result<Vec<_>>>()?;
    let scale = base[0];
    let mut worst: f64 = 0.0;
    for corner in rx_surface.corners() {
        for (d, b) in lags.iter().zip(&base) {
            let g = autocorrelation_kernel(*d, &corner, rx_surface, tx_grid, wave)?.norm();
            worst = worst.max((g - b).abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumRoute {
    #[default]
    Svd,
    /// Hermitian eigenvalues of the smaller Gram matrix.
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationOptions {
    /// Largest allowed `max(N_tx, N_rx)`.
    pub max_unknowns: usize,
    pub route: SpectrumRoute,
}

impl Default for PolarizationOptions {
    fn default() -> Self {
        Self {
            max_unknowns: 4096,
            route: SpectrumRoute::Svd,
        }
    }
}

/// Relative levels at which each scaled spectrum is counted.
pub const POLARIZATION_LEVELS: [f64; 3] = [0.01, 0.5, 0.99];

#[derive(Debug, Clone)]
pub struct PolarizationRow {
    pub scale: f64,
    pub tx_counts: (usize, usize),
    pub rx_counts: (usize, usize),
    pub spectrum: CouplingSpectrum,
    /// Counts at the relative levels of [`POLARIZATION_LEVELS`].
    pub counts: [usize; 3],
}

impl PolarizationRow {
    /// `[n(0.01) − n(0.99)] / n(0.5)`; `None` when `n(0.5) = 0`.
    pub fn relative_spread(&self) -> Option<f64> {
        let [low, mid, high] = self.counts;
        (mid > 0).then(|| (low - high) as f64 / mid as f64)
    }

    pub fn n_mid(&self) -> usize {
        self.counts[1]
    }
}

fn scaled_counts(counts: (usize, usize), scale: f64) -> (usize, usize) {
    let f = |n: usize| ((n as f64 * scale).round() as usize).max(1);
    (f(counts.0), f(counts.1))
}

/// Scales both apertures by each `r` (grid counts scaled alike, keeping the
/// sample density fixed) and records the spectrum and its counts at the
/// three relative levels.
pub fn polarization_study(
    tx_grid: &QuadratureGrid,
    rx_grid: &QuadratureGrid,
    wave: &WaveConfig,
    scales: &[f64],
    options: &PolarizationOptions,
) -> Result<Vec<PolarizationRow>> {
    for &r in scales {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("scales must be >= 1, got {r}")));
        }
        let (t, q) = (scaled_counts(tx_grid.counts(), r), scaled_counts(rx_grid.counts(), r));
        let unknowns = (t.0 * t.1).max(q.0 * q.1);
        if unknowns > options.max_unknowns {
            return Err(Error::Resource { scale: r, unknowns, budget: options.max_unknowns });
        }
    }

    scales
        .iter()
        .map(|&r| {
            let tx_counts = scaled_counts(tx_grid.counts(), r);
            let rx_counts = scaled_counts(rx_grid.counts(), r);
            let tx = discretize(&tx_grid.surface().scaled(r)?, tx_counts.0, tx_counts.1, tx_grid.rule())?;
            let rx = discretize(&rx_grid.surface().scaled(r)?, rx_counts.0, rx_counts.1, rx_grid.rule())?;
            let op = assemble_operator(&tx, &rx, wave)?;
            let spectrum = match options.route {
                SpectrumRoute::Svd => coupling_spectrum(&op)?,
                SpectrumRoute::Gram => coupling_spectrum_via_gram(&op)?,
            };
            let mut counts = [0usize; 3];
            for (c, level) in counts.iter_mut().zip(POLARIZATION_LEVELS) {
                *c = count_edof(&spectrum, Threshold::relative(level))?.n_edof as usize;
            }
            Ok(PolarizationRow { scale: r, tx_counts, rx_counts, spectrum, counts })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; points with non-positive
/// coordinates are skipped. `None` with fewer than two usable points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
