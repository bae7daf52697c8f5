//! Channel kernels between a transmit point `t` and a receive point `r`.
//!
//! Three models are provided:
//!
//! - [`KernelKind::Exact`]: the scalar spherical wave
//!   `-j eta0 k0 exp(-j k0 |p_r - p_t|) / (4 pi |p_r - p_t|)`.
//! - [`KernelKind::Fresnel`]: constant amplitude `eta0 k0 / (4 pi D)` with the
//!   second-order phase expansion of the distance.
//! - [`KernelKind::Reduced`]: the unimodular bilinear-phase kernel
//!   `exp(+j (k0/D) [t_x, t_z] E' [r_x, r_z]^T)`, which has the same singular
//!   values as the Fresnel kernel up to the constant amplitude.
//!
//! The Fresnel distance is the expansion
//! `D (1 + o^T d / D^2 + |d|^2 / (2 D^2) - o^T d / (2 D^3))` with
//! `d = E [r_x, 0, r_z]^T - [t_x, 0, t_z]^T`. Every term is either linear in
//! `d` or separable-quadratic, so the Fresnel kernel factors exactly as
//! `const * u(r) * reduced(r, t) * v(t)` with unimodular `u` and `v`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot3, norm3, sub3, tx_point_to_global, LinkGeometry, PlanePoint, Point3};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Impedance of free space, ohms.
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730313668;

/// Propagation medium at a single carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub fc: f64,
    pub lambda: f64,
    pub k0: f64,
    pub eta0: f64,
}

impl Medium {
    pub fn from_frequency(fc: f64) -> Result<Self> {
        if !(fc.is_finite() && fc > 0.0) {
            return Err(Error::domain(format!("carrier frequency must be positive, got {fc}")));
        }
        let lambda = SPEED_OF_LIGHT / fc;
        Ok(Medium {
            fc,
            lambda,
            k0: 2.0 * PI / lambda,
            eta0: FREE_SPACE_IMPEDANCE,
        })
    }

    pub fn from_wavelength(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain(format!("wavelength must be positive, got {lambda}")));
        }
        Ok(Medium {
            fc: SPEED_OF_LIGHT / lambda,
            lambda,
            k0: 2.0 * PI / lambda,
            eta0: FREE_SPACE_IMPEDANCE,
        })
    }
}

/// Kernel model used to build a discretized operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Exact,
    Fresnel,
    Reduced,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Exact, KernelKind::Fresnel, KernelKind::Reduced];

    /// Whether kernel values carry ohms (`Exact`, `Fresnel`) or are
    /// dimensionless (`Reduced`).
    pub fn has_units(self) -> bool {
        !matches!(self, KernelKind::Reduced)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Exact => "exact",
            KernelKind::Fresnel => "fresnel",
            KernelKind::Reduced => "reduced",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(KernelKind::Exact),
            "fresnel" => Ok(KernelKind::Fresnel),
            "reduced" => Ok(KernelKind::Reduced),
            other => Err(Error::domain(format!(
                "unknown kernel kind `{other}` (expected exact, fresnel or reduced)"
            ))),
        }
    }
}

/// Displacement `E [r_x, 0, r_z]^T - [t_x, 0, t_z]^T` relative to the receive
/// center.
#[inline]
fn offset_difference(geom: &LinkGeometry, r: PlanePoint, t: PlanePoint) -> Point3 {
    sub3(geom.rx_offset(r), tx_point_to_global(t))
}

/// Euclidean distance between a receive and a transmit point.
pub fn exact_distance(geom: &LinkGeometry, r: PlanePoint, t: PlanePoint) -> Result<f64> {
    let p = sub3(geom.rx_to_global_unchecked(r), tx_point_to_global(t));
    let dist = norm3(p);
    if dist > 0.0 {
        Ok(dist)
    } else {
        Err(Error::domain(format!(
            "receive point {r:?} coincides with transmit point {t:?}"
        )))
    }
}

/// Second-order (Fresnel) expansion of the receive-transmit distance.
pub fn fresnel_distance(geom: &LinkGeometry, r: PlanePoint, t: PlanePoint) -> f64 {
    let dist = geom.distance();
    let o = geom.rx_center();
    let d = offset_difference(geom, r, t);
    let proj = dot3(o, d);
    let d2 = dist * dist;
    dist * (1.0 + proj / d2 + dot3(d, d) / (2.0 * d2) - proj / (2.0 * d2 * dist))
}

/// Constant amplitude `eta0 k0 / (4 pi D)` of the Fresnel kernel.
pub fn fresnel_amplitude(med: &Medium, geom: &LinkGeometry) -> f64 {
    med.eta0 * med.k0 / (4.0 * PI * geom.distance())
}

/// Global constant `-j eta0 k0 exp(-j k0 D) / (4 pi D)` separating the Fresnel
/// kernel from the reduced kernel.
pub fn fresnel_constant(med: &Medium, geom: &LinkGeometry) -> Complex64 {
    let amp = fresnel_amplitude(med, geom);
    -Complex64::i() * amp * Complex64::cis(-med.k0 * geom.distance())
}

/// Phase `(k0/D) [t_x, t_z] E' [r_x, r_z]^T` of the reduced kernel.
#[inline]
pub fn reduced_phase(med: &Medium, geom: &LinkGeometry, r: PlanePoint, t: PlanePoint) -> f64 {
    let ep = geom.rotation().projected_submatrix();
    let er = [
        ep[0][0] * r[0] + ep[0][1] * r[1],
        ep[1][0] * r[0] + ep[1][1] * r[1],
    ];
    med.k0 / geom.distance() * (t[0] * er[0] + t[1] * er[1])
}

/// Evaluates the channel kernel of the given kind.
pub fn kernel_value(
    kind: KernelKind,
    med: &Medium,
    geom: &LinkGeometry,
    r: PlanePoint,
    t: PlanePoint,
) -> Result<Complex64> {
    let neg_j = -Complex64::i();
    Ok(match kind {
        KernelKind::Exact => {
            let dist = exact_distance(geom, r, t)?;
            neg_j * (med.eta0 * med.k0 / (4.0 * PI * dist)) * Complex64::cis(-med.k0 * dist)
        }
        KernelKind::Fresnel => {
            let dist = fresnel_distance(geom, r, t);
            neg_j * fresnel_amplitude(med, geom) * Complex64::cis(-med.k0 * dist)
        }
        KernelKind::Reduced => Complex64::cis(reduced_phase(med, geom, r, t)),
    })
}

/// Unimodular receive and transmit factors `(u(r), v(t))` with
/// `fresnel(r, t) = fresnel_constant * u(r) * reduced(r, t) * v(t)`.
pub fn unimodular_factors(
    med: &Medium,
    geom: &LinkGeometry,
    r: PlanePoint,
    t: PlanePoint,
) -> (Complex64, Complex64) {
    (rx_factor(med, geom, r), tx_factor(med, geom, t))
}

/// `u(r) = exp(-j k0 (o^T x / D + |x|^2 / (2D) - o^T x / (2 D^2)))`, `x = E [r_x, 0, r_z]^T`.
pub fn rx_factor(med: &Medium, geom: &LinkGeometry, r: PlanePoint) -> Complex64 {
    let dist = geom.distance();
    let x = geom.rx_offset(r);
    let proj = dot3(geom.rx_center(), x);
    let phase = proj / dist + dot3(x, x) / (2.0 * dist) - proj / (2.0 * dist * dist);
    Complex64::cis(-med.k0 * phase)
}

/// `v(t) = exp(-j k0 (-o^T t / D + |t|^2 / (2D) + o^T t / (2 D^2)))` for the
/// transmit point `t = [t_x, 0, t_z]^T`.
pub fn tx_factor(med: &Medium, geom: &LinkGeometry, t: PlanePoint) -> Complex64 {
    let dist = geom.distance();
    let t3 = tx_point_to_global(t);
    let proj = dot3(geom.rx_center(), t3);
    let phase = -proj / dist + dot3(t3, t3) / (2.0 * dist) + proj / (2.0 * dist * dist);
    Complex64::cis(-med.k0 * phase)
}
