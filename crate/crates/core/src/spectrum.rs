//! Coupling spectrum, eDoF counting, and the paired communication modes.
//!
//! The singular value decomposition of the weighted channel matrix is the
//! reference every analytical estimate is checked against. All indices are
//! zero-based.

use std::collections::BTreeMap;

use faer::{Mat, Side as FaerSide};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::em_kernel::{DiscreteOperator, WaveConfig};
use crate::error::{Error, Result};

/// Squared singular values `s_0² ≥ s_1² ≥ … ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpectrum {
    values: Vec<f64>,
    grid_sizes: (usize, usize),
    wave: WaveConfig,
}

impl CouplingSpectrum {
    /// Wraps raw values; they are sorted descending and tiny negative
    /// round-off is clamped to zero.
    pub fn from_values(mut values: Vec<f64>, grid_sizes: (usize, usize), wave: WaveConfig) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("spectrum contains non-finite values".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(min) = values.last() {
            if *min < -1e-9 * top {
                return Err(Error::Numerical(format!(
                    "negative coupling intensity {min:e} (max {top:e})"
                )));
            }
        }
        for v in &mut values {
            *v = v.max(0.0);
        }
        Ok(Self { values, grid_sizes, wave })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(N_tx, N_rx)` of the operator the spectrum came from.
    pub fn grid_sizes(&self) -> (usize, usize) {
        self.grid_sizes
    }

    pub fn wave(&self) -> &WaveConfig {
        &self.wave
    }

    /// Largest eigenvalue of the receive Gram operator, `‖G_Rx‖_op`.
    pub fn op_norm(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn normalized(&self) -> Vec<f64> {
        let top = self.op_norm();
        self.values
            .iter()
            .map(|v| if top > 0.0 { v / top } else { 0.0 })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Squared singular values of the weighted matrix.
pub fn coupling_spectrum(operator: &DiscreteOperator) -> Result<CouplingSpectrum> {
    let s = operator
        .matrix()
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    CouplingSpectrum::from_values(
        s.into_iter().map(|x| x * x).collect(),
        (operator.n_tx(), operator.n_rx()),
        *operator.wave(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Tx,
    Rx,
}

/// Eigenvalues of `A*A` (tx side) or `AA*` (rx side), descending, unclamped.
pub fn gram_eigenvalues(operator: &DiscreteOperator, side: Side) -> Result<Vec<f64>> {
    let a = operator.matrix();
    let gram: Mat<Complex64> = match side {
        Side::Tx => a.adjoint() * a,
        Side::Rx => a * a.adjoint(),
    };
    let mut ev = gram
        .self_adjoint_eigenvalues(FaerSide::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))?;
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

/// Coupling spectrum through the Hermitian eigenproblem of the smaller Gram
/// matrix. Cheaper than the SVD for large square systems.
pub fn coupling_spectrum_via_gram(operator: &DiscreteOperator) -> Result<CouplingSpectrum> {
    let side = if operator.n_tx() <= operator.n_rx() { Side::Tx } else { Side::Rx };
    let ev = gram_eigenvalues(operator, side)?;
    CouplingSpectrum::from_values(ev, (operator.n_tx(), operator.n_rx()), *operator.wave())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Absolute,
    Relative,
}

/// Accuracy level `γ`, either absolute or as a fraction of `s_0²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub mode: ThresholdMode,
    pub value: f64,
}

impl Threshold {
    pub fn absolute(value: f64) -> Self {
        Self { mode: ThresholdMode::Absolute, value }
    }

    pub fn relative(value: f64) -> Self {
        Self { mode: ThresholdMode::Relative, value }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value >= 0.0 && self.value.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold {} must be >= 0", self.value)));
        }
        if self.mode == ThresholdMode::Relative && self.value > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "relative threshold {} must be <= 1",
                self.value
            )));
        }
        Ok(())
    }

    /// Absolute level against a reference maximum.
    pub fn level(&self, max: f64) -> f64 {
        match self.mode {
            ThresholdMode::Absolute => self.value,
            ThresholdMode::Relative => self.value * max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Svd,
    Cutset,
    Landau,
    LandauGamma,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Svd => "svd",
            Method::Cutset => "cutset",
            Method::Landau => "landau",
            Method::LandauGamma => "landau-gamma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiagValue {
    Flag(bool),
    Number(f64),
    Text(String),
}

impl From<f64> for DiagValue {
    fn from(v: f64) -> Self {
        DiagValue::Number(v)
    }
}

impl From<bool> for DiagValue {
    fn from(v: bool) -> Self {
        DiagValue::Flag(v)
    }
}

impl From<&str> for DiagValue {
    fn from(v: &str) -> Self {
        DiagValue::Text(v.to_owned())
    }
}

impl From<String> for DiagValue {
    fn from(v: String) -> Self {
        DiagValue::Text(v)
    }
}

/// eDoF estimate produced by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdofReport {
    pub method: Method,
    pub n_edof: f64,
    /// `None` for the cut-set integral, which targets an arbitrarily small γ.
    pub threshold: Option<Threshold>,
    pub diagnostics: BTreeMap<String, DiagValue>,
}

impl EdofReport {
    pub fn new(method: Method, n_edof: f64, threshold: Option<Threshold>) -> Self {
        Self {
            method,
            n_edof,
            threshold,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<DiagValue>) -> Self {
        self.diagnostics.insert(key.to_owned(), value.into());
        self
    }
}

/// `min{N : s_N² ≤ γ}`: the number of intensities strictly above the level.
pub fn count_edof(spectrum: &CouplingSpectrum, threshold: Threshold) -> Result<EdofReport> {
    threshold.validate()?;
    if spectrum.is_empty() {
        return Err(Error::Numerical("empty spectrum".into()));
    }
    let level = threshold.level(spectrum.op_norm());
    let n = spectrum.values().iter().take_while(|v| **v > level).count();
    Ok(EdofReport::new(Method::Svd, n as f64, Some(threshold))
        .with("level", level)
        .with("spectrum_len", spectrum.len() as f64))
}

/// Kolmogorov `N`-width of a Hilbert–Schmidt operator, `d_N = s_N`.
pub fn kolmogorov_width(spectrum: &CouplingSpectrum, n: usize) -> f64 {
    spectrum.values().get(n).map_or(0.0, |v| v.sqrt())
}

/// The first `N` singular triplets as physical samples on both grids.
///
/// Each pair is phase-fixed so that the largest-modulus transmit sample is
/// real and positive.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    tx_modes: Mat<Complex64>,
    rx_modes: Mat<Complex64>,
    couplings: Vec<f64>,
    tx_weights: Vec<f64>,
    rx_weights: Vec<f64>,
}

pub fn extract_modes(operator: &DiscreteOperator, n: usize) -> Result<ModeBasis> {
    let limit = operator.n_tx().min(operator.n_rx());
    if n > limit {
        return Err(Error::Dimension { expected: limit, actual: n });
    }
    let svd = operator
        .matrix()
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());

    let tx_w = operator.tx_grid().weights().to_vec();
    let rx_w = operator.rx_grid().weights().to_vec();
    let mut tx_modes = Mat::<Complex64>::zeros(operator.n_tx(), n);
    let mut rx_modes = Mat::<Complex64>::zeros(operator.n_rx(), n);
    let mut couplings = Vec::with_capacity(n);

    for k in 0..n {
        let vk = v.col(k);
        let physical = |i: usize| vk[i] / tx_w[i].sqrt();
        let pivot = (0..vk.nrows())
            .map(physical)
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = if pivot.norm() > 0.0 {
            (pivot / pivot.norm()).conj()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..operator.n_tx() {
            tx_modes[(i, k)] = vk[i] * phase / tx_w[i].sqrt();
        }
        let uk = u.col(k);
        for i in 0..operator.n_rx() {
            rx_modes[(i, k)] = uk[i] * phase / rx_w[i].sqrt();
        }
        couplings.push(s[k].re);
    }

    Ok(ModeBasis {
        tx_modes,
        rx_modes,
        couplings,
        tx_weights: tx_w,
        rx_weights: rx_w,
    })
}

/// `Σ w_i x_i conj(y_i)`.
pub fn weighted_inner(x: &[Complex64], y: &[Complex64], weights: &[f64]) -> Complex64 {
    x.iter()
        .zip(y)
        .zip(weights)
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum()
}

pub fn weighted_norm(x: &[Complex64], weights: &[f64]) -> f64 {
    x.iter()
        .zip(weights)
        .map(|(a, w)| a.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

impl ModeBasis {
    pub fn len(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couplings.is_empty()
    }

    /// Singular values `s_n` (not squared).
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    fn modes(&self, side: Side) -> &Mat<Complex64> {
        match side {
            Side::Tx => &self.tx_modes,
            Side::Rx => &self.rx_modes,
        }
    }

    pub fn weights(&self, side: Side) -> &[f64] {
        match side {
            Side::Tx => &self.tx_weights,
            Side::Rx => &self.rx_weights,
        }
    }

    /// Samples of `φ_n` (tx) or `ψ_n` (rx).
    pub fn mode(&self, side: Side, n: usize) -> Vec<Complex64> {
        let m = self.modes(side);
        (0..m.nrows()).map(|i| m[(i, n)]).collect()
    }

    /// Matrix of weighted inner products `⟨mode_m, mode_n⟩`.
    pub fn gram(&self, side: Side) -> Mat<Complex64> {
        let cols: Vec<Vec<Complex64>> = (0..self.len()).map(|n| self.mode(side, n)).collect();
        let w = self.weights(side);
        Mat::from_fn(self.len(), self.len(), |i, j| weighted_inner(&cols[i], &cols[j], w))
    }

    /// `Σ_n c_n · mode_n`.
    pub fn synthesize(&self, coefficients: &[Complex64], side: Side) -> Result<Vec<Complex64>> {
        if coefficients.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), actual: coefficients.len() });
        }
        let m = self.modes(side);
        Ok((0..m.nrows())
            .map(|i| coefficients.iter().enumerate().map(|(n, c)| m[(i, n)] * c).sum())
            .collect())
    }
}

/// Expansion coefficients `⟨field, mode_n⟩` against the retained modes.
pub fn expand_field(samples: &[Complex64], basis: &ModeBasis, side: Side) -> Result<Vec<Complex64>> {
    let w = basis.weights(side);
    if samples.len() != w.len() {
        return Err(Error::Dimension { expected: w.len(), actual: samples.len() });
    }
    Ok((0..basis.len())
        .map(|n| weighted_inner(samples, &basis.mode(side, n), w))
        .collect())
}
