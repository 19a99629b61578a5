//! Torque laws: the continuous quaternion PD law, the sign-of-`m_e`
//! benchmark and the σ-switching law.
//!
//! All laws share the same feedforward `J ω̇_d + ω × Jω`. The reference
//! passed in must already carry `ω_d` in body coordinates
//! (see [`crate::reference::map_desired_rate`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diag::Diag3;
use crate::dynamics::BodyState;
use crate::error::{Error, Result};
use crate::quat::{attitude_error, UnitQuaternion, Vec3};
use crate::reference::ReferenceSample;

/// Selector between the two antipodal error equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Sigma {
    /// Stabilizes `q_e = (+1, 0, 0, 0)`.
    #[default]
    Plus,
    /// Stabilizes `q_e = (-1, 0, 0, 0)`.
    Minus,
}

impl Sigma {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sigma::Plus => 1.0,
            Sigma::Minus => -1.0,
        }
    }

    /// Sign of `x`, with zero mapped to `Plus`.
    pub fn of(x: f64) -> Sigma {
        if x < 0.0 {
            Sigma::Minus
        } else {
            Sigma::Plus
        }
    }

    pub fn flipped(self) -> Sigma {
        match self {
            Sigma::Plus => Sigma::Minus,
            Sigma::Minus => Sigma::Plus,
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sigma::Plus => "+1",
            Sigma::Minus => "-1",
        })
    }
}

impl Serialize for Sigma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value() as i8)
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Sigma::Plus),
            -1 => Ok(Sigma::Minus),
            other => Err(serde::de::Error::custom(format!(
                "sigma must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// Controller parameters. `kq`, `kw` are diagonal and positive definite,
/// `kn > 0` rad/s, and `delta > 0` is the hysteresis half-width on Λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GainsRepr", into = "GainsRepr")]
pub struct Gains {
    kq: Diag3,
    kw: Diag3,
    kn: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsRepr {
    kq: Diag3,
    kw: Diag3,
    kn: f64,
    delta: f64,
}

impl TryFrom<GainsRepr> for Gains {
    type Error = Error;
    fn try_from(r: GainsRepr) -> Result<Self> {
        Gains::new(r.kq, r.kw, r.kn, r.delta)
    }
}

impl From<Gains> for GainsRepr {
    fn from(g: Gains) -> Self {
        GainsRepr {
            kq: g.kq,
            kw: g.kw,
            kn: g.kn,
            delta: g.delta,
        }
    }
}

/// Hysteresis half-width used when none is given.
pub const DEFAULT_DELTA: f64 = 0.5;

impl Gains {
    pub fn new(kq: Diag3, kw: Diag3, kn: f64, delta: f64) -> Result<Self> {
        if !kq.is_positive_definite() {
            return Err(Error::InvalidGains(format!(
                "kq must be positive definite, got {:?}",
                kq.0
            )));
        }
        if !kw.is_positive_definite() {
            return Err(Error::InvalidGains(format!(
                "kw must be positive definite, got {:?}",
                kw.0
            )));
        }
        if !(kn > 0.0) || !kn.is_finite() {
            return Err(Error::InvalidGains(format!("kn must be > 0, got {kn}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidGains(format!(
                "delta must be > 0, got {delta}"
            )));
        }
        Ok(Self { kq, kw, kn, delta })
    }

    /// Full 3×3 gain matrices; off-diagonal entries are rejected.
    pub fn from_matrices(
        kq: [[f64; 3]; 3],
        kw: [[f64; 3]; 3],
        kn: f64,
        delta: f64,
    ) -> Result<Self> {
        let kq = Diag3::from_full(kq).map_err(|e| Error::InvalidGains(format!("kq: {e}")))?;
        let kw = Diag3::from_full(kw).map_err(|e| Error::InvalidGains(format!("kw: {e}")))?;
        Self::new(kq, kw, kn, delta)
    }

    /// Benchmark gains from the flight tests: `Kq = 10³ J`, `Kw = 10² J`.
    /// `kn` is unused by the benchmark law but kept valid.
    pub fn benchmark_default(j: &Diag3) -> Self {
        Self {
            kq: j.scale(1e3),
            kw: j.scale(1e2),
            kn: 10.0,
            delta: DEFAULT_DELTA,
        }
    }

    /// Switching gains from the flight tests: `Kq = 10 J`, `Kw = 10² J`, `kn = 10`.
    pub fn switching_default(j: &Diag3) -> Self {
        Self {
            kq: j.scale(10.0),
            kw: j.scale(1e2),
            kn: 10.0,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn kq(&self) -> &Diag3 {
        &self.kq
    }

    pub fn kw(&self) -> &Diag3 {
        &self.kw
    }

    pub fn kn(&self) -> f64 {
        self.kn
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Self::new(self.kq, self.kw, self.kn, delta)
    }

    pub fn with_kn(self, kn: f64) -> Result<Self> {
        Self::new(self.kq, self.kw, kn, self.delta)
    }
}

/// Attitude-error quaternion, rate error `ω_d - ω`, and the composite
/// error `ν_σ = ω_e + σ k_n n_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorState {
    pub qe: UnitQuaternion,
    pub we: Vec3,
    pub nu: Vec3,
}

impl ErrorState {
    /// Scalar part `m_e`.
    #[inline]
    pub fn m_e(&self) -> f64 {
        self.qe.w()
    }

    /// Vector part `n_e`.
    #[inline]
    pub fn n_e(&self) -> Vec3 {
        self.qe.v()
    }
}

pub fn error_state(s: &BodyState, r: &ReferenceSample, sigma: Sigma, kn: f64) -> ErrorState {
    let qe = attitude_error(&s.q, &r.qd);
    let we = r.wd - s.w;
    ErrorState {
        qe,
        we,
        nu: we + qe.v() * (sigma.value() * kn),
    }
}

/// `ṅ_e`, the vector part of `½ (0, ω_e) ⊗ q_e`.
#[inline]
pub fn n_e_dot(qe: &UnitQuaternion, we: Vec3) -> Vec3 {
    (we * qe.w() + we.cross(qe.v())) * 0.5
}

fn feedforward(s: &BodyState, r: &ReferenceSample, j: &Diag3) -> Vec3 {
    j.mul_vec(r.wd_dot) + s.w.cross(j.mul_vec(s.w))
}

pub fn torque_continuous(
    es: &ErrorState,
    s: &BodyState,
    r: &ReferenceSample,
    g: &Gains,
    j: &Diag3,
) -> Vec3 {
    g.kq.mul_vec(es.n_e()) + g.kw.mul_vec(es.we) + feedforward(s, r, j)
}

/// Continuous law with the proportional term multiplied by `sgn(m_e)`,
/// where `sgn(0) = +1`.
pub fn torque_benchmark(
    es: &ErrorState,
    s: &BodyState,
    r: &ReferenceSample,
    g: &Gains,
    j: &Diag3,
) -> Vec3 {
    let sgn = Sigma::of(es.m_e()).value();
    g.kq.mul_vec(es.n_e()) * sgn + g.kw.mul_vec(es.we) + feedforward(s, r, j)
}

/// `σ Kq n_e + Kw ν_σ + J (ω̇_d + σ k_n ṅ_e) + ω × Jω`. `es` must have been
/// built with the same `sigma`.
pub fn torque_switching(
    es: &ErrorState,
    s: &BodyState,
    r: &ReferenceSample,
    g: &Gains,
    j: &Diag3,
    sigma: Sigma,
) -> Vec3 {
    let sv = sigma.value();
    let ndot = n_e_dot(&es.qe, es.we);
    g.kq.mul_vec(es.n_e()) * sv
        + g.kw.mul_vec(es.nu)
        + j.mul_vec(r.wd_dot + ndot * (sv * g.kn))
        + s.w.cross(j.mul_vec(s.w))
}

/// Which torque law closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlLaw {
    Continuous,
    Benchmark,
    Switching,
}

impl ControlLaw {
    pub fn name(self) -> &'static str {
        match self {
            ControlLaw::Continuous => "continuous",
            ControlLaw::Benchmark => "benchmark",
            ControlLaw::Switching => "switching",
        }
    }

    /// Torque for the given law. For `Switching`, `sigma` is the active
    /// sign; the other laws ignore it.
    pub fn torque(
        self,
        s: &BodyState,
        r: &ReferenceSample,
        g: &Gains,
        j: &Diag3,
        sigma: Sigma,
    ) -> Vec3 {
        match self {
            ControlLaw::Continuous => {
                torque_continuous(&error_state(s, r, Sigma::Plus, g.kn), s, r, g, j)
            }
            ControlLaw::Benchmark => {
                torque_benchmark(&error_state(s, r, Sigma::Plus, g.kn), s, r, g, j)
            }
            ControlLaw::Switching => {
                torque_switching(&error_state(s, r, sigma, g.kn), s, r, g, j, sigma)
            }
        }
    }
}

impl fmt::Display for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControlLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(ControlLaw::Continuous),
            "benchmark" => Ok(ControlLaw::Benchmark),
            "switching" => Ok(ControlLaw::Switching),
            other => Err(Error::InvalidArgument(format!(
                "unknown controller '{other}'"
            ))),
        }
    }
}
