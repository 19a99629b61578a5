//! Quaternion and rotation algebra.
//!
//! Quaternions are stored scalar-first and multiplied with the Hamilton
//! convention (`i ⊗ j = k`). A [`UnitQuaternion`] represents the orientation
//! of the body frame relative to the inertial frame, so its rotation matrix
//! maps body coordinates into inertial coordinates.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|‖q‖² - 1|` accepted for unit quaternions and unit axes.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Norms below this cannot be normalized.
pub const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const E1: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E2: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Component-wise product, i.e. multiplication by `diag(o)`.
    #[inline]
    pub fn component_mul(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::from_array(a)
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// General (not necessarily unit) quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub v: Vec3,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self {
            w,
            v: Vec3::new(x, y, z),
        }
    }

    /// Pure quaternion `(0, v)`.
    #[inline]
    pub fn pure(v: Vec3) -> Self {
        Self { w: 0.0, v }
    }

    #[inline]
    pub fn from_parts(w: f64, v: Vec3) -> Self {
        Self { w, v }
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.v.x, self.v.y, self.v.z]
    }

    #[inline]
    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            v: -self.v,
        }
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.w * self.w + self.v.norm_squared()
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self {
            w: self.w * s,
            v: self.v * s,
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.v.is_finite()
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(self, o: Quaternion) -> f64 {
        (self.w - o.w).abs().max((self.v - o.v).max_abs())
    }
}

impl From<[f64; 4]> for Quaternion {
    fn from(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product.
    #[inline]
    fn mul(self, b: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * b.w - self.v.dot(b.v),
            v: b.v * self.w + self.v * b.w + self.v.cross(b.v),
        }
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn add(self, b: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w + b.w,
            v: self.v + b.v,
        }
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn sub(self, b: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w - b.w,
            v: self.v - b.v,
        }
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// Quaternion of unit norm. The only ways to build one go through
/// normalization or the axis–angle form, so the norm invariant always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "Quaternion")]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::IDENTITY);

    #[inline]
    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Normalizes `q`. Fails if its norm is below [`MIN_NORM`] or not finite.
    pub fn normalize(q: Quaternion) -> Result<Self> {
        let n = q.norm();
        if !(n > MIN_NORM) || !n.is_finite() {
            return Err(Error::DegenerateQuaternion { norm: n });
        }
        Ok(Self(q.scale(1.0 / n)))
    }

    /// Builds `(cos(phi/2), axis sin(phi/2))`. The axis must be unit length.
    pub fn from_axis_angle(axis: Vec3, phi: f64) -> Result<Self> {
        if (axis.norm_squared() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "rotation axis must be unit length, got norm {}",
                axis.norm()
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite angle {phi}")));
        }
        let (s, c) = (0.5 * phi).sin_cos();
        Ok(Self(Quaternion::from_parts(c, axis * s)))
    }

    /// Rotation by the vector `rv` (axis `rv/|rv|`, angle `|rv|`).
    pub fn from_rotation_vector(rv: Vec3) -> Self {
        let angle = rv.norm();
        if angle < MIN_NORM {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self(Quaternion::from_parts(c, rv * (s / angle)))
    }

    /// Yaw rotation about the inertial `z` axis.
    pub fn from_yaw(psi: f64) -> Self {
        let (s, c) = (0.5 * psi).sin_cos();
        Self(Quaternion::new(c, 0.0, 0.0, s))
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.0.w
    }

    #[inline]
    pub fn v(&self) -> Vec3 {
        self.0.v
    }

    #[inline]
    pub fn as_quaternion(&self) -> Quaternion {
        self.0
    }

    /// Conjugate, which is the inverse for unit quaternions.
    #[inline]
    pub fn inverse(&self) -> Self {
        Self(self.0.conjugate())
    }

    /// Antipodal quaternion `-q` (same physical rotation).
    #[inline]
    pub fn negate(&self) -> Self {
        Self(-self.0)
    }

    pub fn to_rotation_matrix(&self) -> RotMatrix {
        let Quaternion {
            w,
            v: Vec3 { x, y, z },
        } = self.0;
        RotMatrix([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    /// Rotates `v` by this quaternion: vector part of `q ⊗ (0, v) ⊗ q⁻¹`.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        (self.0 * Quaternion::pure(v) * self.0.conjugate()).v
    }

    /// Axis–angle view `(u, phi)` with `phi ∈ [0, 2π]`. At the identity the
    /// axis is undefined and `(0, 0, 1)` is returned.
    pub fn axis_angle(&self) -> (Vec3, f64) {
        let s = self.0.v.norm();
        let phi = 2.0 * s.atan2(self.0.w);
        if s < MIN_NORM {
            (Vec3::E3, phi)
        } else {
            (self.0.v / s, phi)
        }
    }

    /// Yaw angle of the ZYX Euler decomposition, in `(-π, π]`.
    pub fn yaw(&self) -> f64 {
        let Quaternion {
            w,
            v: Vec3 { x, y, z },
        } = self.0;
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }

    /// Deviation of the norm from one; bounded by [`UNIT_TOLERANCE`].
    pub fn norm_error(&self) -> f64 {
        (self.0.norm_squared() - 1.0).abs()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    #[inline]
    fn mul(self, b: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion(self.0 * b.0)
    }
}

impl From<UnitQuaternion> for Quaternion {
    fn from(q: UnitQuaternion) -> Quaternion {
        q.0
    }
}

impl TryFrom<Quaternion> for UnitQuaternion {
    type Error = Error;
    fn try_from(q: Quaternion) -> Result<Self> {
        UnitQuaternion::normalize(q)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = Quaternion::deserialize(d)?;
        // already-unit input is kept bit for bit
        if q.is_finite() && (q.norm_squared() - 1.0).abs() <= UNIT_TOLERANCE {
            return Ok(UnitQuaternion(q));
        }
        UnitQuaternion::normalize(q).map_err(serde::de::Error::custom)
    }
}

/// Attitude-error quaternion `q⁻¹ ⊗ qd`: the desired body frame expressed
/// relative to the measured one. Renormalized to keep drift out.
pub fn attitude_error(q: &UnitQuaternion, qd: &UnitQuaternion) -> UnitQuaternion {
    let e = q.inverse().0 * qd.0;
    // a product of two unit quaternions never degenerates
    UnitQuaternion(e.scale(1.0 / e.norm()))
}

/// Row-major 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMatrix(pub [[f64; 3]; 3]);

impl RotMatrix {
    pub const IDENTITY: RotMatrix = RotMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn transpose(&self) -> RotMatrix {
        let m = &self.0;
        RotMatrix([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn max_abs_diff(&self, o: &RotMatrix) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.0[i][j] - o.0[i][j]).abs());
            }
        }
        d
    }
}

impl Mul for RotMatrix {
    type Output = RotMatrix;
    fn mul(self, b: RotMatrix) -> RotMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * b.0[k][j]).sum();
            }
        }
        RotMatrix(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const S60: f64 = 0.866_025_403_784_438_6;

    fn unit() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| {
                w * w + x * x + y * y + z * z > 1e-3
            })
            .prop_map(|(w, x, y, z)| {
                UnitQuaternion::normalize(Quaternion::new(w, x, y, z)).unwrap()
            })
    }

    #[test]
    fn hamilton_units() {
        let i = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        let j = Quaternion::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(i * j, Quaternion::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(j * i, Quaternion::new(0.0, 0.0, 0.0, -1.0));
        let q = Quaternion::new(0.3, -1.2, 2.0, 0.7);
        assert_eq!(q * Quaternion::IDENTITY, q);
        assert_eq!(Quaternion::IDENTITY * q, q);
    }

    #[test]
    fn inverse_is_conjugate() {
        assert_eq!(UnitQuaternion::IDENTITY.inverse(), UnitQuaternion::IDENTITY);
        let q = UnitQuaternion::from_axis_angle(Vec3::E3, 2.0 * PI / 3.0).unwrap();
        let qi = q.inverse();
        assert!((qi.w() - 0.5).abs() < 1e-15);
        assert!((qi.v().z + S60).abs() < 1e-15);
    }

    #[test]
    fn axis_angle_examples() {
        assert_eq!(
            UnitQuaternion::from_axis_angle(Vec3::E3, 0.0).unwrap(),
            UnitQuaternion::IDENTITY
        );
        let half_turn = UnitQuaternion::from_axis_angle(Vec3::E3, PI).unwrap();
        assert!(half_turn.w().abs() < 1e-16);
        assert!((half_turn.v().z - 1.0).abs() < 1e-16);
        let q = UnitQuaternion::from_axis_angle(Vec3::E3, 2.0 * PI / 3.0).unwrap();
        assert!((q.w() - 0.5).abs() < 1e-15);
        assert!((q.v().z - S60).abs() < 1e-15);

        let err = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 2.0), 1.0);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn identity_axis_convention() {
        let (u, phi) = UnitQuaternion::IDENTITY.axis_angle();
        assert_eq!(u, Vec3::E3);
        assert_eq!(phi, 0.0);
    }

    #[test]
    fn rotation_matrix_examples() {
        assert_eq!(
            UnitQuaternion::IDENTITY.to_rotation_matrix(),
            RotMatrix::IDENTITY
        );
        let q = UnitQuaternion::from_yaw(2.0 * PI / 3.0);
        let r = q.to_rotation_matrix();
        // oracle: sandwich product
        for e in [Vec3::E1, Vec3::E2, Vec3::E3] {
            let via_q = (q.as_quaternion() * Quaternion::pure(e) * q.inverse().as_quaternion()).v;
            assert!((r.mul_vec(e) - via_q).max_abs() < 1e-15);
        }
        let e1 = r.mul_vec(Vec3::E1);
        assert!((e1.x + 0.5).abs() < 1e-15 && (e1.y - S60).abs() < 1e-15);
    }

    #[test]
    fn attitude_error_examples() {
        let yaw120 = UnitQuaternion::from_axis_angle(Vec3::E3, 2.0 * PI / 3.0).unwrap();
        assert_eq!(attitude_error(&yaw120, &yaw120), UnitQuaternion::IDENTITY);

        let e = attitude_error(&yaw120, &UnitQuaternion::IDENTITY);
        assert!((e.w() - 0.5).abs() < 1e-15);
        assert!((e.v().z + S60).abs() < 1e-15);

        let yaw90 = UnitQuaternion::from_axis_angle(Vec3::E3, PI / 2.0).unwrap();
        let e = attitude_error(&UnitQuaternion::IDENTITY, &yaw90);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.w() - h).abs() < 1e-15 && (e.v().z - h).abs() < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        let q = UnitQuaternion::normalize(Quaternion::new(2.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, UnitQuaternion::IDENTITY);
        let q = UnitQuaternion::normalize(Quaternion::new(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(q.as_quaternion(), Quaternion::new(0.5, 0.5, 0.5, 0.5));
        assert!(matches!(
            UnitQuaternion::normalize(Quaternion::ZERO),
            Err(Error::DegenerateQuaternion { .. })
        ));
        assert!(UnitQuaternion::normalize(Quaternion::new(f64::NAN, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn yaw_extraction() {
        for psi in [-3.0, -1.0, 0.0, 0.5, 2.0, 3.1] {
            assert!((UnitQuaternion::from_yaw(psi).yaw() - psi).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn product_norm_is_multiplicative(a in unit(), b in unit()) {
            let p = a.as_quaternion() * b.as_quaternion();
            prop_assert!((p.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn general_product_norm(w in -3.0..3.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64,
                                a in unit()) {
            let q = Quaternion::new(w, x, y, z);
            let p = q * a.as_quaternion();
            prop_assert!((p.norm() - q.norm()).abs() < 1e-12 * (1.0 + q.norm()));
        }

        #[test]
        fn inverse_composes_to_identity(q in unit()) {
            let p = (q * q.inverse()).as_quaternion();
            prop_assert!(p.max_abs_diff(Quaternion::IDENTITY) < 1e-12);
        }

        #[test]
        fn rotation_matrix_is_orthonormal(q in unit()) {
            let r = q.to_rotation_matrix();
            prop_assert!((r.transpose() * r).max_abs_diff(&RotMatrix::IDENTITY) < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotation_matrix_is_homomorphism(a in unit(), b in unit()) {
            let lhs = (a * b).to_rotation_matrix();
            let rhs = a.to_rotation_matrix() * b.to_rotation_matrix();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }

        #[test]
        fn matrix_matches_sandwich(q in unit(), x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64) {
            let v = Vec3::new(x, y, z);
            prop_assert!((q.to_rotation_matrix().mul_vec(v) - q.rotate(v)).max_abs() < 1e-12);
        }

        #[test]
        fn self_error_is_identity(q in unit()) {
            let e = attitude_error(&q, &q);
            prop_assert!(e.as_quaternion().max_abs_diff(Quaternion::IDENTITY) < 1e-15);
        }

        #[test]
        fn axis_angle_round_trip(theta in 0.0..PI, lon in -PI..PI, phi in 1e-6..(PI - 1e-6)) {
            let u = Vec3::new(theta.sin() * lon.cos(), theta.sin() * lon.sin(), theta.cos());
            let q = UnitQuaternion::from_axis_angle(u, phi).unwrap();
            let (u2, phi2) = q.axis_angle();
            prop_assert!((phi2 - phi).abs() < 1e-9);
            prop_assert!((u2 - u).max_abs() < 1e-9);
        }
    }
}
