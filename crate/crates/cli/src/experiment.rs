//! Single runs, sweeps and the files they write.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use holodof::cutset::edof_from_field;
use holodof::em_kernel::norm;
use holodof::landau::{stationarity_deviation, PASS_BAND_LEVEL, POLARIZATION_LEVELS};
use holodof::{
    count_edof, coupling_spectrum, discretize, landau_edof, local_bandwidth, local_bandwidth_field,
    polarization_study, set_measure_bandwidth, support_measure, wavenumber_response, Complex64,
    CouplingSpectrum, DiscreteOperator, EdofReport, Error, Method, PolarizationOptions,
    QuadratureGrid, ResponseOptions, Threshold, ThresholdMode, Vec3, WaveConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::config::{ConfigError, ExperimentConfig, Format};
use crate::report::{
    BandwidthSummary, Check, ComparisonReport, Diagnostics, MethodEntry, MethodStatus,
    ResponseSummary, SpectrumSummary, SCHEMA_VERSION,
};

#[derive(Debug, ThisError)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

/// Process exit code for a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    Partial = 2,
    Resource = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Report plus the full spectrum, which is too long for the JSON summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ComparisonReport,
    pub spectrum: Option<CouplingSpectrum>,
}

impl Outcome {
    pub fn status(&self) -> ExitStatus {
        status_of(&self.report.methods)
    }
}

fn status_of(entries: &[MethodEntry]) -> ExitStatus {
    if entries.iter().any(|e| e.status == MethodStatus::ResourceExceeded) {
        ExitStatus::Resource
    } else if entries.iter().any(|e| e.status == MethodStatus::Failed) {
        ExitStatus::Partial
    } else {
        ExitStatus::Success
    }
}

fn entry_from(method: Method, result: Result<EdofReport, Error>) -> MethodEntry {
    match result {
        Ok(report) => MethodEntry { method, status: MethodStatus::Ok, report: Some(report), error: None },
        Err(e) => MethodEntry {
            method,
            status: if matches!(e, Error::Resource { .. }) { MethodStatus::ResourceExceeded } else { MethodStatus::Failed },
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// Number of seeded random pairs used for the adjoint-identity check.
const ADJOINT_PAIRS: usize = 8;
const STATIONARITY_LIMIT: f64 = 0.1;
const INJECTIVITY_LIMIT: f64 = 0.05;
const LAG_DECAY_LIMIT: f64 = 1e-3;

fn grids(config: &ExperimentConfig) -> Result<(QuadratureGrid, QuadratureGrid, WaveConfig), ConfigError> {
    let (tx, rx) = config.surfaces()?;
    let wave = config.wave_config()?;
    let tg = discretize(&tx, config.tx.grid[0], config.tx.grid[1], config.tx.rule)
        .map_err(|e| ConfigError::Invalid { field: "tx.grid".into(), message: e.to_string() })?;
    let rg = discretize(&rx, config.rx.grid[0], config.rx.grid[1], config.rx.rule)
        .map_err(|e| ConfigError::Invalid { field: "rx.grid".into(), message: e.to_string() })?;
    Ok((tg, rg, wave))
}

fn check_budget(config: &ExperimentConfig) -> Result<(), Error> {
    let unknowns = config.tx.unknowns().max(config.rx.unknowns());
    if unknowns > config.limits.max_unknowns {
        return Err(Error::Resource { scale: 1.0, unknowns, budget: config.limits.max_unknowns });
    }
    Ok(())
}

fn run_svd(
    config: &ExperimentConfig,
    op: &DiscreteOperator,
    diagnostics: &mut Diagnostics,
) -> Result<(EdofReport, CouplingSpectrum), Error> {
    let spectrum = coupling_spectrum(op)?;
    let hs = op.hilbert_schmidt_norm_sq();
    let hs_gap = (spectrum.total() - hs).abs() / hs.max(f64::MIN_POSITIVE);
    diagnostics.spectrum_vs_hilbert_schmidt = Check::bounded(hs_gap, 1e-10, "relative gap");

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut random = |n: usize| -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..ADJOINT_PAIRS {
        let f = random(op.n_tx());
        let g = random(op.n_rx());
        let scale = norm(&op.apply(&f)?) * norm(&g);
        worst = worst.max(op.adjoint_identity_residual(&f, &g)? / scale.max(f64::MIN_POSITIVE));
    }
    diagnostics.adjoint_residual = Check::bounded(worst, 1e-12, format!("{ADJOINT_PAIRS} pairs, seed {}", config.seed));

    let report = count_edof(&spectrum, config.gamma.threshold())?;
    Ok((report, spectrum))
}

fn run_cutset(
    tx: &QuadratureGrid,
    rx: &QuadratureGrid,
    wave: &WaveConfig,
    diagnostics: &mut Diagnostics,
) -> Result<(EdofReport, BandwidthSummary), Error> {
    let field = local_bandwidth_field(tx, rx, wave)?;
    let report = edof_from_field(&field, wave);

    let surface = rx.surface();
    let center = surface.center();
    let by_jacobian = local_bandwidth(&center, tx, surface, wave)?;
    let resolution = (by_jacobian.sqrt() / 64.0).max(1e-9);
    let image = set_measure_bandwidth(&center, tx, surface, wave, resolution)?;
    let excess = (by_jacobian - image.measure) / by_jacobian.max(f64::MIN_POSITIVE);
    diagnostics.injectivity = Check::bounded(
        excess.max(0.0),
        INJECTIVITY_LIMIT,
        format!("jacobian {by_jacobian:.6e} vs set measure {:.6e} rad^2/m^2", image.measure),
    );
    diagnostics.resolution = match &image.warning {
        Some(w) => Check { status: crate::report::CheckStatus::Warning, value: Some(resolution), note: Some(w.clone()) },
        None => Check::bounded(0.0, 0.0, format!("cell {resolution:.3e} rad/m")),
    };

    let summary = BandwidthSummary {
        points: field.values.len(),
        min: field.min(),
        max: field.max(),
        integral: field.integral(),
        isotropic_bound: holodof::isotropic_bandwidth(wave),
    };
    Ok((report, summary))
}

fn response_options(config: &ExperimentConfig) -> ResponseOptions {
    let l = &config.landau_options;
    ResponseOptions {
        lag_extent: l.lag_extent_m.map(|e| (e[0], e[1])),
        lag_counts: l.lag_grid.map(|g| (g[0], g[1])),
        padding: l.padding,
        reference: None,
    }
}

fn run_landau(
    config: &ExperimentConfig,
    tx: &QuadratureGrid,
    rx: &QuadratureGrid,
    wave: &WaveConfig,
    diagnostics: &mut Diagnostics,
) -> Result<(EdofReport, ResponseSummary), Error> {
    let surface = rx.surface();
    let response = wavenumber_response(surface, tx, wave, &response_options(config))?;
    let pass_band = Threshold::relative(PASS_BAND_LEVEL);
    let m = support_measure(&response, pass_band)?;
    let gamma = config.gamma.threshold();
    let m_gamma = support_measure(&response, gamma)?;
    let at_gamma = landau_edof(surface, m_gamma, Some(gamma))?;
    let report = landau_edof(surface, m, None)?
        .with("support_level_relative", PASS_BAND_LEVEL)
        .with("landau_gamma_n_edof", at_gamma.n_edof)
        .with("landau_gamma_support_measure", m_gamma);

    let deviation = stationarity_deviation(surface, tx, wave, &response.lag_grid)?;
    diagnostics.stationarity = Check::bounded(deviation, STATIONARITY_LIMIT, "corners vs center");
    diagnostics.lag_decay = Check::bounded(response.boundary_decay, LAG_DECAY_LIMIT, "boundary |g| / g(0)");
    diagnostics.response_negativity = Check::bounded(-response.min_ratio, 1e-9, "clamped to zero");

    let mut support_measures = BTreeMap::new();
    support_measures.insert(format!("{PASS_BAND_LEVEL}"), m);
    if gamma.mode == ThresholdMode::Relative {
        support_measures.insert(format!("{}", gamma.value), m_gamma);
    }
    let summary = ResponseSummary {
        dims: response.dims,
        dk: response.dk,
        lag_counts: response.lag_grid.counts,
        lag_spacing_m: response.lag_grid.spacing,
        op_norm_estimate: response.op_norm_estimate,
        zero_lag: response.zero_lag,
        support_measures,
        warnings: response.warnings.clone(),
    };
    Ok((report, summary))
}

fn generated_at() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Runs every selected method in isolation; a failing method is recorded
/// and the others still run.
pub fn evaluate(config: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    config.validate()?;
    let (tx, rx, wave) = grids(config)?;
    let mut diagnostics = Diagnostics::default();
    let mut entries = Vec::new();
    let (mut spectrum, mut spectrum_summary, mut bandwidth, mut response) = (None, None, None, None);

    for method in &config.methods {
        let entry = match method {
            Method::Svd => {
                let result = check_budget(config)
                    .and_then(|_| holodof::assemble_operator(&tx, &rx, &wave))
                    .and_then(|op| run_svd(config, &op, &mut diagnostics));
                entry_from(*method, result.map(|(report, s)| {
                    spectrum_summary = Some(SpectrumSummary {
                        len: s.len(),
                        grid_sizes: s.grid_sizes(),
                        op_norm: s.op_norm(),
                        total: s.total(),
                        leading_normalized: s.normalized().into_iter().take(10).collect(),
                    });
                    spectrum = Some(s);
                    report
                }))
            }
            Method::Cutset => entry_from(*method, run_cutset(&tx, &rx, &wave, &mut diagnostics).map(|(r, b)| {
                bandwidth = Some(b);
                r
            })),
            Method::Landau => entry_from(*method, run_landau(config, &tx, &rx, &wave, &mut diagnostics).map(|(r, s)| {
                response = Some(s);
                r
            })),
            Method::LandauGamma => unreachable!("rejected by validation"),
        };
        entries.push(entry);
    }

    let partial = status_of(&entries) != ExitStatus::Success;
    Ok(Outcome {
        report: ComparisonReport {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            generated_at: generated_at(),
            partial,
            methods: entries,
            spectrum: spectrum_summary,
            local_bandwidth: bandwidth,
            wavenumber_response: response,
            diagnostics,
            config: config.clone(),
        },
        spectrum,
    })
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|e| RunError::Output { path: path.display().to_string(), message: e.to_string() })
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn spectrum_csv(spectrum: &CouplingSpectrum) -> String {
    let rows: Vec<Vec<String>> = spectrum
        .values()
        .iter()
        .zip(spectrum.normalized())
        .enumerate()
        .map(|(i, (v, n))| vec![i.to_string(), format_float(*v), format_float(n)])
        .collect();
    csv_text(&["index", "s_squared", "s_squared_normalized"], &rows)
}

fn gamma_fields(t: Option<Threshold>) -> (String, String) {
    match t {
        Some(t) => (
            match t.mode {
                ThresholdMode::Absolute => "absolute".into(),
                ThresholdMode::Relative => "relative".into(),
            },
            format_float(t.value),
        ),
        None => ("none".into(), String::new()),
    }
}

pub fn edof_csv(report: &ComparisonReport) -> String {
    let rows: Vec<Vec<String>> = report
        .methods
        .iter()
        .filter_map(|e| e.report.as_ref())
        .map(|r| {
            let (mode, value) = gamma_fields(r.threshold);
            vec![r.method.as_str().into(), format_float(r.n_edof), mode, value]
        })
        .collect();
    csv_text(&["method", "n_edof", "gamma_mode", "gamma_value"], &rows)
}

fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Output { path: dir.display().to_string(), message: e.to_string() })
}

/// Writes `spectrum.csv` (svd only), `edof.csv` and `report.json` per the
/// configured formats; returns the paths written.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    ensure_dir(dir)?;
    let formats = &outcome.report.config.output.formats;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        if let Some(s) = &outcome.spectrum {
            let p = dir.join("spectrum.csv");
            write_file(&p, &spectrum_csv(s))?;
            written.push(p);
        }
        let p = dir.join("edof.csv");
        write_file(&p, &edof_csv(&outcome.report))?;
        written.push(p);
    }
    if formats.contains(&Format::Json) {
        let p = dir.join("report.json");
        write_file(&p, &outcome.report.to_json())?;
        written.push(p);
    }
    Ok(written)
}

pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<Outcome, RunError> {
    let outcome = evaluate(config)?;
    write_outputs(&outcome, dir)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Distance,
    TxSize,
    RxSize,
    Wavelength,
    ScaleR,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "distance" => SweepAxis::Distance,
            "tx_size" => SweepAxis::TxSize,
            "rx_size" => SweepAxis::RxSize,
            "wavelength" => SweepAxis::Wavelength,
            "scale_r" => SweepAxis::ScaleR,
            _ => return None,
        })
    }
}

/// Copy of `base` with one axis set to `value`.
///
/// `distance` moves the receiver along the center-to-center direction;
/// the size axes set both side lengths.
pub fn apply_axis(base: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig, ConfigError> {
    let mut c = base.clone();
    match axis {
        SweepAxis::Distance => {
            let (t, r) = (Vec3::from(base.tx.center_m), Vec3::from(base.rx.center_m));
            let dir = r - t;
            if !(dir.norm() > 0.0) {
                return Err(ConfigError::Invalid { field: "rx.center_m".into(), message: "coincides with tx.center_m".into() });
            }
            let moved = t + dir.normalize() * value;
            c.rx.center_m = [moved.x, moved.y, moved.z];
        }
        SweepAxis::TxSize => c.tx.size_m = [value, value],
        SweepAxis::RxSize => c.rx.size_m = [value, value],
        SweepAxis::Wavelength => c.wave.wavelength_m = value,
        SweepAxis::ScaleR => {}
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_edof: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// One report per value for the geometric axes.
    pub reports: Vec<ComparisonReport>,
    pub status: ExitStatus,
}

fn failed_row(value: f64, method: &str, error: String) -> SweepRow {
    SweepRow { axis_value: value, method: method.into(), n_edof: None, error: Some(error) }
}

fn scale_rows(config: &ExperimentConfig, value: f64) -> (Vec<SweepRow>, ExitStatus) {
    let names: Vec<String> = POLARIZATION_LEVELS.iter().map(|g| format!("svd-rel-{g}")).collect();
    let fail = |e: String, status| (names.iter().map(|n| failed_row(value, n, e.clone())).collect(), status);
    let (tx, rx, wave) = match grids(config) {
        Ok(g) => g,
        Err(e) => return fail(e.to_string(), ExitStatus::Validation),
    };
    let options = PolarizationOptions { max_unknowns: config.limits.max_unknowns, ..Default::default() };
    match polarization_study(&tx, &rx, &wave, &[value], &options) {
        Ok(rows) => {
            let row = &rows[0];
            let out = names
                .iter()
                .zip(row.counts)
                .map(|(n, c)| SweepRow { axis_value: value, method: n.clone(), n_edof: Some(c as f64), error: None })
                .collect();
            (out, ExitStatus::Success)
        }
        Err(e) => {
            let status = if matches!(e, Error::Resource { .. }) { ExitStatus::Resource } else { ExitStatus::Partial };
            fail(e.to_string(), status)
        }
    }
}

/// One row per (value, method), in input order; a failing value is
/// recorded and the sweep moves on.
pub fn run_sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepOutcome, ConfigError> {
    config.validate()?;
    if values.is_empty() {
        return Err(ConfigError::Invalid { field: "values".into(), message: "sweep needs at least one value".into() });
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut worst = ExitStatus::Success;
    let mut note = |s: ExitStatus| {
        if s != ExitStatus::Success && (worst == ExitStatus::Success || s == ExitStatus::Resource) {
            worst = s;
        }
    };
    for &v in values {
        if axis == SweepAxis::ScaleR {
            let (r, s) = scale_rows(config, v);
            rows.extend(r);
            note(s);
            continue;
        }
        let outcome = apply_axis(config, axis, v).and_then(|c| evaluate(&c));
        match outcome {
            Ok(o) => {
                for e in &o.report.methods {
                    rows.push(SweepRow {
                        axis_value: v,
                        method: e.method.as_str().into(),
                        n_edof: e.report.as_ref().map(|r| r.n_edof),
                        error: e.error.clone(),
                    });
                }
                note(o.status());
                reports.push(o.report);
            }
            Err(e) => {
                for m in &config.methods {
                    rows.push(failed_row(v, m.as_str(), e.to_string()));
                }
                note(ExitStatus::Partial);
            }
        }
    }
    Ok(SweepOutcome { axis, rows, reports, status: worst })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![format_float(r.axis_value), r.method.clone(), r.n_edof.map(format_float).unwrap_or_default()])
        .collect();
    csv_text(&["axis_value", "method", "n_edof"], &rows)
}

pub fn write_sweep(outcome: &SweepOutcome, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    if config.output.formats.contains(&Format::Csv) {
        let p = dir.join("sweep.csv");
        write_file(&p, &sweep_csv(&outcome.rows))?;
        written.push(p);
    }
    if config.output.formats.contains(&Format::Json) {
        let p = dir.join("sweep.json");
        let body = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "axis": outcome.axis,
            "rows": outcome.rows,
            "reports": outcome.reports,
        });
        write_file(&p, &serde_json::to_string_pretty(&body).expect("sweep serializes"))?;
        written.push(p);
    }
    Ok(written)
}
