//! Closed-form degrees of freedom and eigenvalue polarization.
//!
//! For apertures `L_tx x L_tz` and `L_rx x L_rz` at distance `D`, the number
//! of dominant singular values of the Fresnel channel is predicted as
//!
//! ```text
//! DOF = L_tx L_tz L_rx L_rz |det E'| / (lambda D)^2
//! ```
//!
//! The normalized eigenvalues `eps_i = (sigma_i / sigma_1)^2` polarize
//! towards one for `i <= DOF` and towards zero beyond it, and the leading
//! singular values sit on a plateau near `(eta0 / 2) / sqrt(|det E'|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LinkGeometry;
use crate::kernels::Medium;
use crate::nystrom::SingularSpectrum;

/// Default threshold on normalized squared singular values.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Summary of the degrees-of-freedom analysis of one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofReport {
    pub dof_formula: f64,
    pub det_eprime: f64,
    pub edof_count: usize,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_sv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_predicted: Option<f64>,
}

/// `DOF` from raw side lengths, wavelength, distance and `|det E'|`.
///
/// Lengths are converted to wavelengths before multiplying, so that
/// dimensions given as whole multiples of the wavelength give exact results.
pub fn dof_from_dimensions(tx: [f64; 2], rx: [f64; 2], lambda: f64, distance: f64, det_eprime: f64) -> f64 {
    let wl = |x: f64| x / lambda;
    let d = wl(distance);
    wl(tx[0]) * wl(tx[1]) * wl(rx[0]) * wl(rx[1]) / (d * d) * det_eprime
}

/// Closed-form number of degrees of freedom of a link.
pub fn dof_closed_form(med: &Medium, geom: &LinkGeometry) -> f64 {
    dof_from_dimensions(
        [geom.tx().lx, geom.tx().lz],
        [geom.rx().lx, geom.rx().lz],
        med.lambda,
        geom.distance(),
        geom.det_eprime(),
    )
}

/// Predicted plateau `(eta0 / 2) / sqrt(|det E'|)` of the leading singular
/// values, or `None` when the projected determinant vanishes.
pub fn plateau_prediction(med: &Medium, det_eprime: f64) -> Option<f64> {
    (det_eprime > 0.0).then(|| 0.5 * med.eta0 / det_eprime.sqrt())
}

/// `eps_i = (sigma_i / sigma_1)^2`, each in `[0, 1]`.
pub fn normalized_eigenvalues(values: &[f64]) -> Result<Vec<f64>> {
    let lead = leading_value(values)?;
    Ok(values
        .iter()
        .map(|v| ((v / lead) * (v / lead)).clamp(0.0, 1.0))
        .collect())
}

fn leading_value(values: &[f64]) -> Result<f64> {
    let lead = values.iter().copied().fold(0.0, f64::max);
    if values.is_empty() {
        Err(Error::domain("spectrum is empty"))
    } else if !(lead > 0.0 && lead.is_finite()) {
        Err(Error::domain("spectrum has no positive singular value"))
    } else {
        Ok(lead)
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("threshold must lie in (0, 1], got {threshold}")))
    }
}

/// Number of normalized squared singular values strictly above `threshold`.
pub fn count_edof(values: &[f64], threshold: f64) -> Result<usize> {
    check_threshold(threshold)?;
    Ok(normalized_eigenvalues(values)?
        .into_iter()
        .filter(|&e| e > threshold)
        .count())
}

/// Slack `max(2, 0.3 DOF)` allowed between the counted and predicted number
/// of degrees of freedom at finite aperture sizes.
pub fn landau_tolerance(dof: f64) -> f64 {
    (0.3 * dof).max(2.0)
}

/// Fills a [`DofReport`] for a computed spectrum.
///
/// Plateau fields are only filled for unit-bearing kernels (exact or
/// Fresnel). The measured plateau is the mean of the first
/// `max(1, floor(DOF / 2))` singular values.
pub fn analyze_polarization(
    spectrum: &SingularSpectrum,
    med: &Medium,
    geom: &LinkGeometry,
    threshold: f64,
) -> Result<DofReport> {
    let values = spectrum.values();
    let edof_count = count_edof(values, threshold)?;
    let dof_formula = dof_closed_form(med, geom);
    let det_eprime = geom.det_eprime();
    let unit_bearing = spectrum.kind().is_some_and(|k| k.has_units());
    let (plateau_sv, plateau_predicted) = if unit_bearing {
        let take = ((dof_formula / 2.0).floor() as usize).clamp(1, values.len());
        let mean = values[..take].iter().sum::<f64>() / take as f64;
        (Some(mean), plateau_prediction(med, det_eprime))
    } else {
        (None, None)
    };
    Ok(DofReport {
        dof_formula,
        det_eprime,
        edof_count,
        threshold,
        plateau_sv,
        plateau_predicted,
    })
}
