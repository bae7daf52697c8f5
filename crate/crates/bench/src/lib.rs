//! Scenario builders shared by the benchmarks.

use capa_core::{ApertureSpec, EulerAngles, LinkGeometry, Medium};

/// 2.4 GHz link between `side_wl`-wavelength square apertures at
/// `dist_wl` wavelengths, receiver rotated by `angles`.
pub fn scenario(side_wl: f64, dist_wl: f64, angles: EulerAngles) -> (Medium, LinkGeometry) {
    let med = Medium::from_frequency(2.4e9).expect("valid frequency");
    let ap = ApertureSpec::square(side_wl * med.lambda).expect("positive side");
    let geom = LinkGeometry::new(ap, ap, [0.0, dist_wl * med.lambda, 0.0], angles)
        .expect("valid geometry");
    (med, geom)
}

/// Reference broadside link: 10λ apertures at 50λ.
pub fn reference() -> (Medium, LinkGeometry) {
    scenario(10.0, 50.0, EulerAngles::ZERO)
}

/// Geometric gain profile `g_i = r^i` for water-filling benches.
pub fn geometric_gains(len: usize, ratio: f64) -> Vec<f64> {
    (0..len).map(|i| ratio.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_broadside() {
        let (med, geom) = reference();
        assert!((geom.distance() - 50.0 * med.lambda).abs() < 1e-12);
        assert_eq!(geom.det_eprime(), 1.0);
    }

    #[test]
    fn gains_decay() {
        assert_eq!(geometric_gains(3, 0.5), vec![1.0, 0.5, 0.25]);
    }
}
