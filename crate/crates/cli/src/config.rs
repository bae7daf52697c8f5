//! Scenario configuration.
//!
//! Configurations are TOML files with the flat sections `[medium]`, `[tx]`,
//! `[rx]`, `[numerics]` and optionally `[sweep]`, plus a top-level
//! `kernel_kind`. Every key is optional and defaults to the reference
//! scenario (2.4 GHz, 10λ square apertures, broadside at 50λ). Unknown keys
//! are rejected. Lengths are either numbers in meters or strings of the form
//! `"<x>lambda"`; angles are numbers in radians.
//!
//! ```toml
//! kernel_kind = "fresnel"
//!
//! [medium]
//! fc_hz = 2.4e9
//!
//! [tx]
//! lx = "10lambda"
//! lz = "10lambda"
//!
//! [rx]
//! lx = "10lambda"
//! lz = "10lambda"
//! center = [0, "50lambda", 0]
//! euler_rad = [0.0, 0.0, 0.0]
//!
//! [numerics]
//! n_per_dim = 32
//! tol = 1e-6
//! n_cap = 128
//! threshold = 0.5
//!
//! [sweep]
//! parameter = "distance"
//! values = ["25lambda", "50lambda", "100lambda"]
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use capa_core::landau::DEFAULT_THRESHOLD;
use capa_core::nystrom::{DEFAULT_N_CAP, DEFAULT_N_PER_DIM, DEFAULT_TOL};
use capa_core::{ApertureSpec, EulerAngles, KernelKind, LinkGeometry, Medium};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const DEFAULT_FC_HZ: f64 = 2.4e9;
pub const DEFAULT_SIDE_WAVELENGTHS: f64 = 10.0;
pub const DEFAULT_DISTANCE_WAVELENGTHS: f64 = 50.0;

/// A length as written in the configuration file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Length {
    Meters(f64),
    Wavelengths(f64),
}

impl Length {
    pub fn resolve(self, lambda: f64, field: &str) -> f64 {
        match self {
            Length::Meters(m) => m,
            Length::Wavelengths(w) => {
                let m = w * lambda;
                log::info!("{field}: {w}lambda resolved to {m:e} m (lambda = {lambda:e} m)");
                m
            }
        }
    }
}

impl FromStr for Length {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        if let Some(num) = t.strip_suffix("lambda") {
            let v: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("invalid wavelength multiple `{s}`"))?;
            return Ok(Length::Wavelengths(v));
        }
        t.parse::<f64>()
            .map(Length::Meters)
            .map_err(|_| format!("invalid length `{s}` (expected meters or `<x>lambda`)"))
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = Length;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a length in meters or a string like \"50lambda\"")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Length, E> {
                Ok(Length::Meters(v))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Length, E> {
                Ok(Length::Meters(v as f64))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Length, E> {
                Ok(Length::Meters(v as f64))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Length, E> {
                v.parse().map_err(E::custom)
            }
        }
        de.deserialize_any(Visitor)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kernel_kind: Option<KernelKind>,
    #[serde(default)]
    medium: RawMedium,
    #[serde(default)]
    tx: RawAperture,
    #[serde(default)]
    rx: RawRx,
    #[serde(default)]
    numerics: RawNumerics,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMedium {
    fc_hz: Option<f64>,
    lambda_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAperture {
    lx: Option<Length>,
    lz: Option<Length>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRx {
    lx: Option<Length>,
    lz: Option<Length>,
    center: Option<[Length; 3]>,
    euler_rad: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    n_per_dim: Option<usize>,
    tol: Option<f64>,
    n_cap: Option<usize>,
    threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: SweepParameter,
    values: Vec<SweepValue>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum SweepValue {
    Number(f64),
    Length(Length),
}

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Center-to-center distance; the receive center keeps its direction.
    Distance,
    /// All four aperture sides set to the same length.
    SideLength,
    /// `alpha = gamma = value`, `beta` unchanged.
    AlphaGamma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub n_per_dim: usize,
    pub tol: f64,
    pub n_cap: usize,
    pub threshold: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n_per_dim: DEFAULT_N_PER_DIM,
            tol: DEFAULT_TOL,
            n_cap: DEFAULT_N_CAP,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// A fully resolved scenario: all lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub medium: Medium,
    pub geometry: LinkGeometry,
    pub numerics: Numerics,
    pub kernel_kind: KernelKind,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::from_toml_str("").expect("default scenario is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// Meters for lengths, radians for angles.
    pub values: Vec<f64>,
    pub fixed: ScenarioConfig,
}

/// Parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub scenario: ScenarioConfig,
    pub sweep: Option<SweepSpec>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive_len(len: Option<Length>, lambda: f64, field: &str, default_wl: f64) -> Result<f64> {
    let v = len.unwrap_or(Length::Wavelengths(default_wl)).resolve(lambda, field);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(format!("{field}: length must be positive, got {v}")))
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let scenario = resolve_scenario(&raw)?;
        let sweep = raw
            .sweep
            .as_ref()
            .map(|s| resolve_sweep(s, &scenario))
            .transpose()?;
        Ok(ConfigFile { scenario, sweep })
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(ConfigFile::parse(text)?.scenario)
    }
}

fn resolve_scenario(raw: &RawConfig) -> Result<ScenarioConfig> {
    let medium = match (raw.medium.fc_hz, raw.medium.lambda_m) {
        (Some(_), Some(_)) => {
            return Err(config_err("medium: give exactly one of fc_hz and lambda_m"));
        }
        (Some(fc), None) => Medium::from_frequency(fc),
        (None, Some(lambda)) => Medium::from_wavelength(lambda),
        (None, None) => Medium::from_frequency(DEFAULT_FC_HZ),
    }
    .map_err(|e| config_err(format!("medium: {e}")))?;
    let lambda = medium.lambda;

    let side = DEFAULT_SIDE_WAVELENGTHS;
    let tx = ApertureSpec::new(
        positive_len(raw.tx.lx, lambda, "tx.lx", side)?,
        positive_len(raw.tx.lz, lambda, "tx.lz", side)?,
    )
    .map_err(|e| config_err(format!("tx: {e}")))?;
    let rx = ApertureSpec::new(
        positive_len(raw.rx.lx, lambda, "rx.lx", side)?,
        positive_len(raw.rx.lz, lambda, "rx.lz", side)?,
    )
    .map_err(|e| config_err(format!("rx: {e}")))?;

    let center = match raw.rx.center {
        Some(c) => [
            c[0].resolve(lambda, "rx.center[0]"),
            c[1].resolve(lambda, "rx.center[1]"),
            c[2].resolve(lambda, "rx.center[2]"),
        ],
        None => [0.0, DEFAULT_DISTANCE_WAVELENGTHS * lambda, 0.0],
    };
    let [alpha, beta, gamma] = raw.rx.euler_rad.unwrap_or([0.0; 3]);
    let angles =
        EulerAngles::new(alpha, beta, gamma).map_err(|e| config_err(format!("rx.euler_rad: {e}")))?;
    let geometry =
        LinkGeometry::new(tx, rx, center, angles).map_err(|e| config_err(format!("rx.center: {e}")))?;

    let defaults = Numerics::default();
    let numerics = Numerics {
        n_per_dim: raw.numerics.n_per_dim.unwrap_or(defaults.n_per_dim),
        tol: raw.numerics.tol.unwrap_or(defaults.tol),
        n_cap: raw.numerics.n_cap.unwrap_or(defaults.n_cap),
        threshold: raw.numerics.threshold.unwrap_or(defaults.threshold),
    };
    validate_numerics(&numerics)?;

    Ok(ScenarioConfig {
        medium,
        geometry,
        numerics,
        kernel_kind: raw.kernel_kind.unwrap_or(KernelKind::Fresnel),
    })
}

pub fn validate_numerics(n: &Numerics) -> Result<()> {
    if n.n_per_dim == 0 {
        return Err(config_err("numerics.n_per_dim must be at least 1"));
    }
    if !(n.tol.is_finite() && n.tol > 0.0) {
        return Err(config_err(format!("numerics.tol must be positive, got {}", n.tol)));
    }
    if n.n_cap < 4 {
        return Err(config_err(format!("numerics.n_cap must be at least 4, got {}", n.n_cap)));
    }
    if !(n.threshold > 0.0 && n.threshold <= 1.0) {
        return Err(config_err(format!(
            "numerics.threshold must lie in (0, 1], got {}",
            n.threshold
        )));
    }
    Ok(())
}

fn resolve_sweep(raw: &RawSweep, fixed: &ScenarioConfig) -> Result<SweepSpec> {
    if raw.values.is_empty() {
        return Err(config_err("sweep.values must not be empty"));
    }
    let lambda = fixed.medium.lambda;
    let values: Vec<f64> = raw
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| match (raw.parameter, v) {
            (SweepParameter::AlphaGamma, SweepValue::Number(x)) => Ok(*x),
            (SweepParameter::AlphaGamma, SweepValue::Length(_)) => Err(config_err(format!(
                "sweep.values[{i}]: alpha_gamma values are plain numbers in radians"
            ))),
            (_, SweepValue::Number(x)) => Ok(*x),
            (_, SweepValue::Length(l)) => Ok(l.resolve(lambda, &format!("sweep.values[{i}]"))),
        })
        .collect::<Result<_>>()?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(config_err(format!("sweep.values[{i}] is not finite")));
    }
    if raw.parameter != SweepParameter::AlphaGamma {
        if let Some(i) = values.iter().position(|v| *v <= 0.0) {
            return Err(config_err(format!("sweep.values[{i}] must be positive")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(config_err(format!(
                "sweep.values must be strictly increasing (entry {} <= entry {i})",
                i + 1
            )));
        }
    }
    Ok(SweepSpec {
        parameter: raw.parameter,
        values,
        fixed: fixed.clone(),
    })
}

impl SweepSpec {
    /// Scenario for one sweep value.
    pub fn scenario_at(&self, value: f64) -> Result<ScenarioConfig> {
        let base = &self.fixed.geometry;
        let geometry = match self.parameter {
            SweepParameter::Distance => {
                let c = base.rx_center();
                let scale = value / base.distance();
                base.with_rx_center([c[0] * scale, c[1] * scale, c[2] * scale])
            }
            SweepParameter::SideLength => ApertureSpec::square(value)
                .and_then(|ap| base.with_apertures(ap, ap)),
            SweepParameter::AlphaGamma => {
                let beta = base.rx_orientation().beta;
                EulerAngles::new(value, beta, value).and_then(|a| base.with_orientation(a))
            }
        }
        .map_err(|e| config_err(format!("sweep value {value}: {e}")))?;
        Ok(ScenarioConfig {
            geometry,
            ..self.fixed.clone()
        })
    }
}
