//! Aperture and orientation geometry.
//!
//! The transmit aperture lies in the global `x`-`z` plane centered at the
//! origin. The receive aperture lies in the `x'`-`z'` plane of a local frame
//! centered at `rx_center` whose axes are the columns of the rotation matrix
//! `E`. A receive point with plane coordinates `(r_x, r_z)` sits at
//! `rx_center + E [r_x, 0, r_z]^T` in global coordinates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates inside an aperture plane, `[x, z]` in meters.
pub type PlanePoint = [f64; 2];
/// Global Cartesian coordinates, `[x, y, z]` in meters.
pub type Point3 = [f64; 3];

/// Aperture-diagonal to distance ratio above which the Fresnel model is
/// flagged as questionable.
pub const FRESNEL_WARN_RATIO: f64 = 0.5;

/// Relative slack allowed when checking that a point lies inside an aperture.
const APERTURE_SLACK: f64 = 1e-12;

/// Counterclockwise rotation angles about the `z`, `y` and `x` axes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub const ZERO: EulerAngles = EulerAngles {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let angles = EulerAngles { alpha, beta, gamma };
        angles.check_finite()?;
        Ok(angles)
    }

    fn check_finite(&self) -> Result<()> {
        if self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("non-finite Euler angles {self:?}")))
        }
    }

    /// Wraps every angle into `(-pi, pi]`.
    pub fn normalized(&self) -> Self {
        EulerAngles {
            alpha: wrap_angle(self.alpha),
            beta: wrap_angle(self.beta),
            gamma: wrap_angle(self.gamma),
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Orthonormal receive-frame basis `E = [e_x', e_y', e_z']`, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix([[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Builds `E` from Z-Y-X Euler angles.
    ///
    /// `E^T` is the standard `R_z(alpha) R_y(beta) R_x(gamma)` product, so `E`
    /// maps receive-frame coordinates into the global frame.
    pub fn from_euler(angles: &EulerAngles) -> Result<Self> {
        angles.check_finite()?;
        let (sa, ca) = angles.alpha.sin_cos();
        let (sb, cb) = angles.beta.sin_cos();
        let (sg, cg) = angles.gamma.sin_cos();
        let et = [
            [ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg],
            [sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg],
            [-sb, cb * sg, cb * cg],
        ];
        Ok(RotationMatrix(et).transpose())
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        RotationMatrix(rows)
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.0
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotationMatrix([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    #[inline]
    pub fn apply(&self, v: Point3) -> Point3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn mul(&self, other: &RotationMatrix) -> RotationMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        RotationMatrix(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// The 2x2 block `E' = [[e_xx, e_xz], [e_zx, e_zz]]` coupling the two
    /// aperture planes.
    pub fn projected_submatrix(&self) -> [[f64; 2]; 2] {
        let m = &self.0;
        [[m[0][0], m[0][2]], [m[2][0], m[2][2]]]
    }
}

/// Builds the receive-frame rotation matrix from Euler angles.
pub fn rotation_from_euler(angles: &EulerAngles) -> Result<RotationMatrix> {
    RotationMatrix::from_euler(angles)
}

/// `|det E'| = |e_xx e_zz - e_xz e_zx|`, at most one for any rotation.
pub fn projected_submatrix_det(e: &RotationMatrix) -> f64 {
    let p = e.projected_submatrix();
    (p[0][0] * p[1][1] - p[0][1] * p[1][0]).abs()
}

/// Rectangular aperture with side lengths along the local `x` and `z` axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureSpec {
    pub lx: f64,
    pub lz: f64,
}

impl ApertureSpec {
    pub fn new(lx: f64, lz: f64) -> Result<Self> {
        if !(lx.is_finite() && lz.is_finite() && lx > 0.0 && lz > 0.0) {
            return Err(Error::domain(format!(
                "aperture sides must be positive and finite, got {lx} x {lz}"
            )));
        }
        Ok(ApertureSpec { lx, lz })
    }

    pub fn square(side: f64) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn area(&self) -> f64 {
        self.lx * self.lz
    }

    pub fn diagonal(&self) -> f64 {
        self.lx.hypot(self.lz)
    }

    /// Same aperture with both sides multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.lx * factor, self.lz * factor)
    }

    pub fn contains(&self, p: PlanePoint) -> bool {
        let hx = 0.5 * self.lx * (1.0 + APERTURE_SLACK);
        let hz = 0.5 * self.lz * (1.0 + APERTURE_SLACK);
        p[0].abs() <= hx && p[1].abs() <= hz
    }
}

/// Complete transmit/receive link geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    tx: ApertureSpec,
    rx: ApertureSpec,
    rx_center: Point3,
    rx_orientation: EulerAngles,
    rotation: RotationMatrix,
    distance: f64,
}

impl LinkGeometry {
    pub fn new(
        tx: ApertureSpec,
        rx: ApertureSpec,
        rx_center: Point3,
        rx_orientation: EulerAngles,
    ) -> Result<Self> {
        let rotation = RotationMatrix::from_euler(&rx_orientation)?;
        let distance = norm3(rx_center);
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::domain(format!(
                "receive center must be a finite nonzero offset, got {rx_center:?}"
            )));
        }
        let geom = LinkGeometry {
            tx,
            rx,
            rx_center,
            rx_orientation,
            rotation,
            distance,
        };
        let ratio = geom.fresnel_ratio();
        if ratio > FRESNEL_WARN_RATIO {
            log::warn!(
                "aperture diagonal / distance = {ratio:.3} exceeds {FRESNEL_WARN_RATIO}; \
                 the Fresnel model may be inaccurate"
            );
        }
        Ok(geom)
    }

    /// Parallel apertures facing each other at broadside distance `distance`.
    pub fn broadside(tx: ApertureSpec, rx: ApertureSpec, distance: f64) -> Result<Self> {
        Self::new(tx, rx, [0.0, distance, 0.0], EulerAngles::ZERO)
    }

    pub fn tx(&self) -> &ApertureSpec {
        &self.tx
    }

    pub fn rx(&self) -> &ApertureSpec {
        &self.rx
    }

    pub fn rx_center(&self) -> Point3 {
        self.rx_center
    }

    pub fn rx_orientation(&self) -> &EulerAngles {
        &self.rx_orientation
    }

    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    /// Center-to-center distance `D = |o_r|`.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn det_eprime(&self) -> f64 {
        projected_submatrix_det(&self.rotation)
    }

    /// `max(diag(tx), diag(rx)) / D`.
    pub fn fresnel_ratio(&self) -> f64 {
        self.tx.diagonal().max(self.rx.diagonal()) / self.distance
    }

    pub fn with_rx_center(&self, rx_center: Point3) -> Result<Self> {
        Self::new(self.tx, self.rx, rx_center, self.rx_orientation)
    }

    pub fn with_apertures(&self, tx: ApertureSpec, rx: ApertureSpec) -> Result<Self> {
        Self::new(tx, rx, self.rx_center, self.rx_orientation)
    }

    pub fn with_orientation(&self, rx_orientation: EulerAngles) -> Result<Self> {
        Self::new(self.tx, self.rx, self.rx_center, rx_orientation)
    }

    /// Maps receive-plane coordinates to global coordinates.
    pub fn rx_point_to_global(&self, r: PlanePoint) -> Result<Point3> {
        if !self.rx.contains(r) {
            return Err(Error::domain(format!(
                "point {r:?} lies outside the {} x {} receive aperture",
                self.rx.lx, self.rx.lz
            )));
        }
        Ok(self.rx_to_global_unchecked(r))
    }

    /// Inverse of [`rx_point_to_global`](Self::rx_point_to_global). The
    /// out-of-plane component of the local frame is dropped.
    pub fn global_to_rx_point(&self, p: Point3) -> PlanePoint {
        let rel = sub3(p, self.rx_center);
        let local = self.rotation.transpose().apply(rel);
        [local[0], local[2]]
    }

    /// `E [r_x, 0, r_z]^T`, the receive point relative to the receive center.
    #[inline]
    pub(crate) fn rx_offset(&self, r: PlanePoint) -> Point3 {
        self.rotation.apply([r[0], 0.0, r[1]])
    }

    #[inline]
    pub(crate) fn rx_to_global_unchecked(&self, r: PlanePoint) -> Point3 {
        add3(self.rx_center, self.rx_offset(r))
    }
}

/// Transmit-plane coordinates as a global point.
#[inline]
pub fn tx_point_to_global(t: PlanePoint) -> Point3 {
    [t[0], 0.0, t[1]]
}

#[inline]
pub(crate) fn add3(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm3(a: Point3) -> f64 {
    dot3(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn max_abs_diff(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
        let (a, b) = (a.rows(), b.rows());
        (0..3)
            .flat_map(|i| (0..3).map(move |j| (a[i][j] - b[i][j]).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_angles_give_identity() {
        let e = rotation_from_euler(&EulerAngles::ZERO).unwrap();
        assert_eq!(e, RotationMatrix::IDENTITY);
    }

    #[test]
    fn quarter_turn_about_z() {
        let e = rotation_from_euler(&EulerAngles::new(FRAC_PI_2, 0.0, 0.0).unwrap()).unwrap();
        let expected_t =
            RotationMatrix::from_rows([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(max_abs_diff(&e.transpose(), &expected_t) < 1e-15);
    }

    #[test]
    fn orthonormal_for_mixed_angles() {
        let e = rotation_from_euler(&EulerAngles::new(FRAC_PI_4, 0.0, FRAC_PI_4).unwrap()).unwrap();
        // explicit triple loop rather than RotationMatrix::mul
        let m = e.rows();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-14, "({i},{j}) = {s}");
            }
        }
    }

    #[test]
    fn non_finite_angles_rejected() {
        assert!(EulerAngles::new(f64::NAN, 0.0, 0.0).is_err());
        let bad = EulerAngles {
            alpha: 0.0,
            beta: f64::INFINITY,
            gamma: 0.0,
        };
        assert!(matches!(rotation_from_euler(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn normalization_wraps_into_half_open_interval() {
        let a = EulerAngles::new(3.0 * PI, -PI, 2.0 * PI + 0.25)
            .unwrap()
            .normalized();
        assert!((a.alpha - PI).abs() < 1e-12);
        assert!((a.beta - PI).abs() < 1e-12);
        assert!((a.gamma - 0.25).abs() < 1e-12);
    }

    #[test]
    fn projected_det_examples() {
        assert_eq!(projected_submatrix_det(&RotationMatrix::IDENTITY), 1.0);
        let e = rotation_from_euler(&EulerAngles::new(FRAC_PI_4, 0.0, FRAC_PI_4).unwrap()).unwrap();
        assert!((projected_submatrix_det(&e) - 0.5).abs() < 1e-15);
        let e = rotation_from_euler(&EulerAngles::new(FRAC_PI_2, 0.0, FRAC_PI_2).unwrap()).unwrap();
        assert!(projected_submatrix_det(&e) < 1e-15);
    }

    #[test]
    fn rx_mapping_examples() {
        let ap = ApertureSpec::square(10.0).unwrap();
        let geom = LinkGeometry::broadside(ap, ap, 50.0).unwrap();
        assert_eq!(geom.rx_point_to_global([0.0, 0.0]).unwrap(), [0.0, 50.0, 0.0]);
        assert_eq!(geom.rx_point_to_global([1.5, -2.0]).unwrap(), [1.5, 50.0, -2.0]);

        // E = (E^T)^T for alpha = pi/2: [a, 0, b] -> [0, -a, b]
        let rotated = geom
            .with_orientation(EulerAngles::new(FRAC_PI_2, 0.0, 0.0).unwrap())
            .unwrap();
        let p = rotated.rx_point_to_global([2.0, 3.0]).unwrap();
        assert!((p[0] - 0.0).abs() < 1e-15);
        assert!((p[1] - 48.0).abs() < 1e-14);
        assert!((p[2] - 3.0).abs() < 1e-15);
        let back = rotated.global_to_rx_point(p);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rx_mapping_rejects_points_outside_aperture() {
        let ap = ApertureSpec::new(2.0, 4.0).unwrap();
        let geom = LinkGeometry::broadside(ap, ap, 50.0).unwrap();
        assert!(geom.rx_point_to_global([1.0, 2.0]).is_ok());
        assert!(geom.rx_point_to_global([1.01, 0.0]).is_err());
        assert!(geom.rx_point_to_global([0.0, -2.01]).is_err());
    }

    #[test]
    fn invalid_apertures_and_centers() {
        assert!(ApertureSpec::new(0.0, 1.0).is_err());
        assert!(ApertureSpec::new(1.0, -1.0).is_err());
        assert!(ApertureSpec::new(f64::NAN, 1.0).is_err());
        let ap = ApertureSpec::square(1.0).unwrap();
        assert!(LinkGeometry::new(ap, ap, [0.0; 3], EulerAngles::ZERO).is_err());
    }

    #[test]
    fn fresnel_ratio_recorded() {
        let ap = ApertureSpec::square(10.0).unwrap();
        let geom = LinkGeometry::broadside(ap, ap, 50.0).unwrap();
        assert!((geom.fresnel_ratio() - 200f64.sqrt() / 50.0).abs() < 1e-15);
        // close range still constructs; only a warning is emitted
        let close = LinkGeometry::broadside(ap, ap, 5.0).unwrap();
        assert!(close.fresnel_ratio() > FRESNEL_WARN_RATIO);
    }

    fn angle() -> impl Strategy<Value = f64> {
        -2.0 * PI..2.0 * PI
    }

    proptest! {
        #[test]
        fn rotation_is_special_orthogonal(a in angle(), b in angle(), g in angle()) {
            let e = rotation_from_euler(&EulerAngles::new(a, b, g).unwrap()).unwrap();
            let gram = e.transpose().mul(&e);
            prop_assert!(max_abs_diff(&gram, &RotationMatrix::IDENTITY) < 1e-12);
            let gram = e.mul(&e.transpose());
            prop_assert!(max_abs_diff(&gram, &RotationMatrix::IDENTITY) < 1e-12);
            prop_assert!((e.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn projected_det_bounded_and_matches_closed_form(a in angle(), b in angle(), g in angle()) {
            let e = rotation_from_euler(&EulerAngles::new(a, b, g).unwrap()).unwrap();
            let det = projected_submatrix_det(&e);
            let closed = (a.cos() * g.cos() + a.sin() * g.sin() * b.sin()).abs();
            prop_assert!(det <= 1.0 + 1e-12);
            prop_assert!((det - closed).abs() < 1e-12);
        }

        #[test]
        fn tilt_about_y_keeps_apertures_parallel(b in angle()) {
            let e = rotation_from_euler(&EulerAngles::new(0.0, b, 0.0).unwrap()).unwrap();
            prop_assert!((projected_submatrix_det(&e) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rx_mapping_preserves_distances(
            a in angle(), b in angle(), g in angle(),
            p in prop::array::uniform4(-0.5f64..0.5),
        ) {
            let ap = ApertureSpec::new(1.0, 1.0).unwrap();
            let geom = LinkGeometry::new(ap, ap, [0.3, 20.0, -1.0], EulerAngles::new(a, b, g).unwrap()).unwrap();
            let (r1, r2) = ([p[0], p[1]], [p[2], p[3]]);
            let g1 = geom.rx_point_to_global(r1).unwrap();
            let g2 = geom.rx_point_to_global(r2).unwrap();
            let local = (r1[0] - r2[0]).hypot(r1[1] - r2[1]);
            prop_assert!((norm3(sub3(g1, g2)) - local).abs() < 1e-12);
        }
    }
}
