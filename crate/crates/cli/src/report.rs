//! Machine-readable comparison report.

use std::collections::BTreeMap;

use holodof::{EdofReport, Method};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodStatus {
    Ok,
    Failed,
    ResourceExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub method: Method,
    pub status: MethodStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EdofReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Warning,
    NotApplicable,
}

/// Outcome of one validity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn not_applicable() -> Self {
        Self { status: CheckStatus::NotApplicable, value: None, note: None }
    }

    /// Passes when `value <= limit`.
    pub fn bounded(value: f64, limit: f64, note: impl Into<String>) -> Self {
        let status = if value <= limit { CheckStatus::Pass } else { CheckStatus::Warning };
        Self { status, value: Some(value), note: Some(note.into()) }
    }
}

/// Every check the runner knows about; the ones whose method did not run
/// stay not-applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest relative `|g|` change between receive corners and center.
    pub stationarity: Check,
    /// Relative excess of the Jacobian integral over the rasterized image
    /// area at the receive center; large values mean the map folds.
    pub injectivity: Check,
    /// `|g|` on the lag-window boundary relative to `g(0)`.
    pub lag_decay: Check,
    /// Set-measure rasterization warning.
    pub resolution: Check,
    /// Largest relative adjoint-identity residual over seeded random pairs.
    pub adjoint_residual: Check,
    /// `|Σ s² − ‖A‖²_F| / ‖A‖²_F`.
    pub spectrum_vs_hilbert_schmidt: Check,
    /// Most negative `H_G / max` before clamping.
    pub response_negativity: Check,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            stationarity: Check::not_applicable(),
            injectivity: Check::not_applicable(),
            lag_decay: Check::not_applicable(),
            resolution: Check::not_applicable(),
            adjoint_residual: Check::not_applicable(),
            spectrum_vs_hilbert_schmidt: Check::not_applicable(),
            response_negativity: Check::not_applicable(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub len: usize,
    pub grid_sizes: (usize, usize),
    pub op_norm: f64,
    pub total: f64,
    /// Leading normalized values, at most ten.
    pub leading_normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSummary {
    pub points: usize,
    pub min: f64,
    pub max: f64,
    pub integral: f64,
    pub isotropic_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub dims: (usize, usize),
    pub dk: (f64, f64),
    pub lag_counts: (usize, usize),
    pub lag_spacing_m: (f64, f64),
    pub op_norm_estimate: f64,
    pub zero_lag: f64,
    /// Support measures keyed by the relative level they were cut at.
    pub support_measures: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: String,
    pub tool_version: String,
    pub generated_at: String,
    pub partial: bool,
    pub methods: Vec<MethodEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_bandwidth: Option<BandwidthSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavenumber_response: Option<ResponseSummary>,
    pub diagnostics: Diagnostics,
    pub config: ExperimentConfig,
}

impl ComparisonReport {
    pub fn entry(&self, method: Method) -> Option<&MethodEntry> {
        self.methods.iter().find(|e| e.method == method)
    }

    pub fn n_edof(&self, method: Method) -> Option<f64> {
        self.entry(method)?.report.as_ref().map(|r| r.n_edof)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
