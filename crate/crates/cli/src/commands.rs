//! Subcommand implementations. Each returns its result and writes files;
//! argument handling lives in the binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use capa_core::landau::normalized_eigenvalues;
use capa_core::{
    analyze_polarization, compute_spectrum, dof_closed_form, refine_until_converged, water_fill,
    DofReport, KernelKind, RefineOptions, SingularSpectrum, WaterfillResult,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ScenarioConfig, SweepParameter, SweepSpec};
use crate::error::{CliError, Result};

pub const SPECTRUM_HEADER: [&str; 4] = ["index", "sigma", "sigma_norm", "eps_norm"];
pub const SWEEP_HEADER: [&str; 6] = [
    "param_value",
    "D_over_lambda",
    "det_eprime",
    "dof_formula",
    "edof_count",
    "plateau_sv",
];

/// Grid refinement starts from this many nodes per side.
pub const REFINE_N_START: usize = 8;

/// Singular spectrum for a scenario, either on the configured grid or by
/// doubling the grid from [`REFINE_N_START`] until the leading
/// `max(2 round(DOF), 10)` values settle.
pub fn run_spectrum(scn: &ScenarioConfig, refine: bool) -> Result<SingularSpectrum> {
    let kind = scn.kernel_kind;
    let spectrum = if refine {
        let dof = dof_closed_form(&scn.medium, &scn.geometry);
        let opts = RefineOptions {
            n_start: REFINE_N_START,
            tol: scn.numerics.tol,
            k_track: (2.0 * dof.round()).max(10.0) as usize,
            n_cap: scn.numerics.n_cap.max(REFINE_N_START),
        };
        refine_until_converged(kind, &scn.medium, &scn.geometry, &opts)?
    } else {
        compute_spectrum(kind, &scn.medium, &scn.geometry, scn.numerics.n_per_dim, false)?
    };
    log::info!(
        "{kind} spectrum: {} values on {n}x{n} grids",
        spectrum.len(),
        n = spectrum.n_per_dim()
    );
    Ok(spectrum)
}

pub fn analyze(scn: &ScenarioConfig, spectrum: &SingularSpectrum) -> Result<DofReport> {
    Ok(analyze_polarization(
        spectrum,
        &scn.medium,
        &scn.geometry,
        scn.numerics.threshold,
    )?)
}

/// CSV body for a spectrum: 1-based index, raw value, value over the
/// largest, and squared ratio.
pub fn spectrum_csv(values: &[f64]) -> Result<String> {
    let eps = normalized_eigenvalues(values)?;
    let lead = values[0];
    let mut out = SPECTRUM_HEADER.join(",");
    out.push('\n');
    for (i, (s, e)) in values.iter().zip(&eps).enumerate() {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", i + 1, s, s / lead, e);
    }
    Ok(out)
}

/// Path of the JSON report written next to a CSV output.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Computes the spectrum, writes it to `out` as CSV and the report to the
/// `.json` sidecar.
pub fn cmd_spectrum(scn: &ScenarioConfig, out: &Path, refine: bool) -> Result<DofReport> {
    let spectrum = run_spectrum(scn, refine)?;
    let report = analyze(scn, &spectrum)?;
    write_file(out, &spectrum_csv(spectrum.values())?)?;
    write_file(&sidecar_path(out), &to_json(&report))?;
    Ok(report)
}

pub fn cmd_dof(scn: &ScenarioConfig, refine: bool) -> Result<DofReport> {
    let spectrum = run_spectrum(scn, refine)?;
    analyze(scn, &spectrum)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    #[serde(rename = "D_over_lambda")]
    pub d_over_lambda: f64,
    pub det_eprime: f64,
    pub dof_formula: f64,
    pub edof_count: usize,
    pub plateau_sv: Option<f64>,
}

/// Parameter value as reported in the CSV: wavelengths for lengths,
/// radians for angles.
fn reported_param(spec: &SweepSpec, value: f64) -> f64 {
    match spec.parameter {
        SweepParameter::Distance | SweepParameter::SideLength => value / spec.fixed.medium.lambda,
        SweepParameter::AlphaGamma => value,
    }
}

/// Runs every sweep point (in parallel) and returns rows in input order.
pub fn run_sweep(spec: &SweepSpec, refine: bool) -> Result<Vec<SweepRow>> {
    spec.values
        .par_iter()
        .map(|&value| {
            let scn = spec.scenario_at(value)?;
            let spectrum = run_spectrum(&scn, refine)?;
            let report = analyze(&scn, &spectrum)?;
            Ok(SweepRow {
                param_value: reported_param(spec, value),
                d_over_lambda: scn.geometry.distance() / scn.medium.lambda,
                det_eprime: report.det_eprime,
                dof_formula: report.dof_formula,
                edof_count: report.edof_count,
                plateau_sv: report.plateau_sv,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_HEADER.join(",");
    out.push('\n');
    for r in rows {
        let plateau = r.plateau_sv.map(|p| format!("{p:.16e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.param_value, r.d_over_lambda, r.det_eprime, r.dof_formula, r.edof_count, plateau
        );
    }
    out
}

pub fn cmd_sweep(spec: &SweepSpec, out: &Path, refine: bool) -> Result<Vec<SweepRow>> {
    let rows = run_sweep(spec, refine)?;
    write_file(out, &sweep_csv(&rows))?;
    Ok(rows)
}

/// Reads the `sigma` column of a spectrum CSV.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_spectrum_csv(&text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_spectrum_csv(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("header: {e}")))?
        .clone();
    if header.iter().collect::<Vec<_>>() != SPECTRUM_HEADER {
        return Err(CliError::Parse(format!(
            "expected header `{}`, found `{}`",
            SPECTRUM_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut sigmas = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Parse(format!("row {row}: {e}")))?;
        let field = record.get(1).unwrap_or("");
        let sigma: f64 = field
            .trim()
            .parse()
            .map_err(|_| CliError::Parse(format!("row {row}: invalid sigma `{field}`")))?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(CliError::Parse(format!(
                "row {row}: sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        sigmas.push(sigma);
    }
    if sigmas.is_empty() {
        return Err(CliError::Parse("spectrum has no rows".into()));
    }
    Ok(sigmas)
}

/// Water-filling over channel gains `sigma^2 / noise`.
pub fn waterfill_sigmas(sigmas: &[f64], noise: f64, power: f64) -> Result<WaterfillResult> {
    if !(noise.is_finite() && noise > 0.0) {
        return Err(CliError::Config(format!("noise must be positive, got {noise}")));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(CliError::Config(format!("power must be positive, got {power}")));
    }
    let gains: Vec<f64> = sigmas.iter().map(|s| s * s / noise).collect();
    Ok(water_fill(&gains, power)?)
}

pub fn cmd_waterfill(spectrum: &Path, noise: f64, power: f64) -> Result<WaterfillResult> {
    waterfill_sigmas(&read_spectrum_csv(spectrum)?, noise, power)
}

/// Applies command-line overrides to a loaded scenario.
pub fn apply_overrides(
    scn: &mut ScenarioConfig,
    kernel: Option<KernelKind>,
    n_per_dim: Option<usize>,
    threshold: Option<f64>,
) -> Result<()> {
    if let Some(k) = kernel {
        scn.kernel_kind = k;
    }
    if let Some(n) = n_per_dim {
        scn.numerics.n_per_dim = n;
    }
    if let Some(t) = threshold {
        scn.numerics.threshold = t;
    }
    crate::config::validate_numerics(&scn.numerics)
}
