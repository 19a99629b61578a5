//! Diagonal 3×3 matrices, used for inertia and gain matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 3]")]
pub struct Diag3(pub [f64; 3]);

impl Diag3 {
    pub const IDENTITY: Diag3 = Diag3([1.0, 1.0, 1.0]);

    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Diag3([a, b, c])
    }

    /// Accepts a full matrix but rejects anything with a non-zero off-diagonal entry.
    pub fn from_full(m: [[f64; 3]; 3]) -> Result<Self> {
        for (i, row) in m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i != j && x != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "matrix must be diagonal, entry ({i},{j}) = {x}"
                    )));
                }
            }
        }
        Ok(Diag3([m[0][0], m[1][1], m[2][2]]))
    }

    pub fn diagonal(&self) -> Vec3 {
        Vec3::from_array(self.0)
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.0[0] * v.x, self.0[1] * v.y, self.0[2] * v.z)
    }

    pub fn scale(&self, s: f64) -> Diag3 {
        Diag3(self.0.map(|x| x * s))
    }

    /// Matrix product; diagonal matrices commute.
    pub fn mul(&self, o: &Diag3) -> Diag3 {
        Diag3([self.0[0] * o.0[0], self.0[1] * o.0[1], self.0[2] * o.0[2]])
    }

    pub fn inverse(&self) -> Diag3 {
        Diag3(self.0.map(|x| 1.0 / x))
    }

    pub fn min_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.iter().all(|&x| x.is_finite() && x > 0.0)
    }

    /// Quadratic form `vᵀ D v`.
    pub fn quad_form(&self, v: Vec3) -> f64 {
        self.0[0] * v.x * v.x + self.0[1] * v.y * v.y + self.0[2] * v.z * v.z
    }
}

impl From<Diag3> for [f64; 3] {
    fn from(d: Diag3) -> [f64; 3] {
        d.0
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DiagRepr {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl<'de> Deserialize<'de> for Diag3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match DiagRepr::deserialize(d)? {
            DiagRepr::Diagonal(a) => Ok(Diag3(a)),
            DiagRepr::Full(m) => Diag3::from_full(m).map_err(serde::de::Error::custom),
        }
    }
}
