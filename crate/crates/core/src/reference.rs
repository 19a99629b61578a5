//! Attitude references: the three-stage yaw maneuver and the frame
//! mappings for desired body rates.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{Quaternion, UnitQuaternion, Vec3};

/// Desired attitude, body rate and body acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub qd: UnitQuaternion,
    /// rad/s
    pub wd: Vec3,
    /// rad/s²
    pub wd_dot: Vec3,
}

impl ReferenceSample {
    pub const HOLD_LEVEL: ReferenceSample = ReferenceSample {
        qd: UnitQuaternion::IDENTITY,
        wd: Vec3::ZERO,
        wd_dot: Vec3::ZERO,
    };
}

/// Anything that produces a reference as a function of time.
pub trait Reference {
    /// Right-continuous: at a stage boundary this is the new stage.
    fn sample(&self, t: f64) -> ReferenceSample;

    /// Left limit at `t`, for integrator stages that end a step on a jump.
    fn sample_left(&self, t: f64) -> ReferenceSample {
        self.sample(t)
    }
}

/// A reference that never changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantReference(pub ReferenceSample);

impl Reference for ConstantReference {
    fn sample(&self, _t: f64) -> ReferenceSample {
        self.0
    }
}

/// Hover, spin about `b₃` at a constant rate, then snap the yaw reference
/// back to zero once the reference yaw reaches `psi0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct YawManeuverProfile {
    t_hover: f64,
    w0: Vec3,
    psi0: f64,
    t_final: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRepr {
    t_hover: f64,
    w0: Vec3,
    psi0: f64,
    t_final: f64,
}

impl TryFrom<ProfileRepr> for YawManeuverProfile {
    type Error = Error;
    fn try_from(r: ProfileRepr) -> Result<Self> {
        YawManeuverProfile::new(r.t_hover, r.w0, r.psi0, r.t_final)
    }
}

impl From<YawManeuverProfile> for ProfileRepr {
    fn from(p: YawManeuverProfile) -> Self {
        ProfileRepr {
            t_hover: p.t_hover,
            w0: p.w0,
            psi0: p.psi0,
            t_final: p.t_final,
        }
    }
}

impl YawManeuverProfile {
    pub fn new(t_hover: f64, w0: Vec3, psi0: f64, t_final: f64) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        if !(t_hover >= 0.0) || !t_hover.is_finite() {
            return bad(format!("t_hover must be >= 0, got {t_hover}"));
        }
        if !w0.is_finite() {
            return bad("w0 must be finite".into());
        }
        if !(psi0 > -PI && psi0 <= PI) {
            return bad(format!("psi0 must lie in (-pi, pi], got {psi0}"));
        }
        let rate = w0.norm();
        if w0.x.abs().max(w0.y.abs()) > 1e-12 * rate.max(1.0) {
            return bad(format!("w0 must be aligned with b3, got {w0:?}"));
        }
        if rate == 0.0 && psi0 != 0.0 {
            return bad(format!(
                "psi0 = {psi0} is unreachable with a zero spin rate"
            ));
        }
        let p = Self {
            t_hover,
            w0,
            psi0,
            t_final,
        };
        if !(t_final > t_hover) || !t_final.is_finite() {
            return bad(format!(
                "t_final ({t_final}) must exceed t_hover ({t_hover})"
            ));
        }
        Ok(p)
    }

    /// Builds a profile that ends `window` seconds after the yaw snap.
    pub fn with_window(t_hover: f64, w0: Vec3, psi0: f64, window: f64) -> Result<Self> {
        if !(window > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "window must be > 0, got {window}"
            )));
        }
        // t_final is a placeholder until the trigger time is known
        let p = Self::new(t_hover, w0, psi0, t_hover + 1.0)?;
        Self::new(t_hover, w0, psi0, p.stage3_start() + window)
    }

    pub fn t_hover(&self) -> f64 {
        self.t_hover
    }

    pub fn w0(&self) -> Vec3 {
        self.w0
    }

    pub fn psi0(&self) -> f64 {
        self.psi0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    fn spin_sign(&self) -> f64 {
        if self.w0.z < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Time at which the yaw reference snaps back to zero.
    pub fn stage3_start(&self) -> f64 {
        let rate = self.w0.norm();
        if rate == 0.0 {
            return self.t_hover;
        }
        // yaw angle still to travel in the spin direction, in [0, 2π)
        let travel = (self.spin_sign() * self.psi0).rem_euclid(TAU);
        self.t_hover + travel / rate
    }
}

impl YawManeuverProfile {
    fn spin(&self, t: f64) -> ReferenceSample {
        let angle = self.spin_sign() * self.w0.norm() * (t - self.t_hover);
        ReferenceSample {
            qd: UnitQuaternion::from_yaw(angle),
            wd: self.w0,
            wd_dot: Vec3::ZERO,
        }
    }
}

impl Reference for YawManeuverProfile {
    fn sample(&self, t: f64) -> ReferenceSample {
        if t < self.t_hover || t >= self.stage3_start() {
            return ReferenceSample::HOLD_LEVEL;
        }
        self.spin(t)
    }

    fn sample_left(&self, t: f64) -> ReferenceSample {
        if t <= self.t_hover || t > self.stage3_start() {
            return ReferenceSample::HOLD_LEVEL;
        }
        self.spin(t)
    }
}

/// Desired rate in desired-body coordinates from `2 qd⁻¹ ⊗ q̇d`.
pub fn desired_rate_tilde(qd: &UnitQuaternion, qd_dot: &Quaternion) -> Result<Vec3> {
    let p = (qd.inverse().as_quaternion() * *qd_dot).scale(2.0);
    if p.w.abs() > 1e-6 {
        return Err(Error::InconsistentReference { scalar: p.w });
    }
    Ok(p.v)
}

/// Expresses a desired rate given in desired-body coordinates in the
/// measured body frame: `Rᵀ R_d ω̃_d`.
pub fn map_desired_rate(q: &UnitQuaternion, qd: &UnitQuaternion, wtilde: Vec3) -> Vec3 {
    let r = q.to_rotation_matrix();
    let rd = qd.to_rotation_matrix();
    r.transpose().mul_vec(rd.mul_vec(wtilde))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn unwinding_case() -> YawManeuverProfile {
        YawManeuverProfile::new(1.0, Vec3::new(0.0, 0.0, 3.0), 2.0 * PI / 3.0, 5.0).unwrap()
    }

    #[test]
    fn left_limit_at_stage_boundaries() {
        let p = unwinding_case();
        let t0 = p.stage3_start();
        assert_eq!(p.sample_left(1.0), ReferenceSample::HOLD_LEVEL);
        assert_eq!(p.sample(1.0).wd, Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(p.sample_left(t0).wd, Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(p.sample(t0), ReferenceSample::HOLD_LEVEL);
        assert_eq!(p.sample_left(1.5), p.sample(1.5));
    }

    #[test]
    fn rate_tilde_examples() {
        let q = UnitQuaternion::IDENTITY;
        assert_eq!(
            desired_rate_tilde(&q, &Quaternion::ZERO).unwrap(),
            Vec3::ZERO
        );
        let w = desired_rate_tilde(&q, &Quaternion::new(0.0, 0.0, 0.0, 0.5 * 2.5)).unwrap();
        assert_eq!(w, Vec3::new(0.0, 0.0, 2.5));
        // q̇ with a radial component is not tangent to the unit sphere
        assert!(matches!(
            desired_rate_tilde(&q, &Quaternion::new(0.1, 0.0, 0.0, 0.0)),
            Err(Error::InconsistentReference { .. })
        ));
    }

    #[test]
    fn rate_tilde_finite_difference() {
        let omega = 1.7;
        let h = 1e-5;
        let qd_at = |t: f64| UnitQuaternion::from_axis_angle(Vec3::E3, omega * t).unwrap();
        for t in [0.0, 0.4, 2.2] {
            let dq = (qd_at(t + h).as_quaternion() - qd_at(t - h).as_quaternion()).scale(0.5 / h);
            let w = desired_rate_tilde(&qd_at(t), &dq).unwrap();
            assert!((w - Vec3::new(0.0, 0.0, omega)).max_abs() < 1e-6);
        }
    }

    #[test]
    fn map_rate_examples() {
        let yaw90 = UnitQuaternion::from_yaw(FRAC_PI_2);
        let w = Vec3::new(0.3, -0.2, 1.1);
        assert!((map_desired_rate(&yaw90, &yaw90, w) - w).max_abs() < 1e-15);
        assert_eq!(
            map_desired_rate(&UnitQuaternion::IDENTITY, &yaw90, Vec3::ZERO),
            Vec3::ZERO
        );
        let m = map_desired_rate(&UnitQuaternion::IDENTITY, &yaw90, Vec3::E1);
        assert!((m - Vec3::E2).max_abs() < 1e-15);
    }

    #[test]
    fn three_stages() {
        let p = unwinding_case();
        let t0 = p.stage3_start();
        assert!((t0 - (1.0 + (2.0 * PI / 3.0) / 3.0)).abs() < 1e-15);
        assert_eq!(p.sample(0.0), ReferenceSample::HOLD_LEVEL);
        assert_eq!(p.sample(0.999), ReferenceSample::HOLD_LEVEL);

        let before = p.sample(t0 - 1e-9);
        assert!((before.qd.yaw() - 2.0 * PI / 3.0).abs() < 1e-8);
        assert_eq!(before.wd, Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(before.wd_dot, Vec3::ZERO);

        assert_eq!(p.sample(t0 + 1e-9), ReferenceSample::HOLD_LEVEL);
        for t in [t0, t0 + 0.5, 4.9, 100.0] {
            assert_eq!(p.sample(t), ReferenceSample::HOLD_LEVEL);
        }
    }

    #[test]
    fn negative_spin_and_wrapped_targets() {
        let p = YawManeuverProfile::new(0.5, Vec3::new(0.0, 0.0, -2.0), -FRAC_PI_2, 9.0).unwrap();
        assert!((p.stage3_start() - (0.5 + FRAC_PI_2 / 2.0)).abs() < 1e-15);
        assert!((p.sample(p.stage3_start() - 1e-9).qd.yaw() + FRAC_PI_2).abs() < 1e-8);

        // positive spin to a negative yaw travels the long way round
        let p = YawManeuverProfile::new(0.0, Vec3::new(0.0, 0.0, 2.0), -FRAC_PI_2, 9.0).unwrap();
        assert!((p.stage3_start() - 1.5 * PI / 2.0).abs() < 1e-15);
        assert!((p.sample(p.stage3_start() - 1e-9).qd.yaw() + FRAC_PI_2).abs() < 1e-8);
    }

    #[test]
    fn stage_two_is_self_consistent() {
        let p = unwinding_case();
        let h = 1e-6;
        for t in [1.05, 1.2, 1.5, 1.65] {
            let s = p.sample(t);
            let dq = (p.sample(t + h).qd.as_quaternion() - p.sample(t - h).qd.as_quaternion())
                .scale(0.5 / h);
            let wt = desired_rate_tilde(&s.qd, &dq).unwrap();
            assert!((wt - s.wd).max_abs() < 1e-5);
        }
    }

    #[test]
    fn invalid_profiles() {
        assert!(YawManeuverProfile::new(1.0, Vec3::ZERO, 1.0, 5.0).is_err());
        assert!(YawManeuverProfile::new(1.0, Vec3::ZERO, 0.0, 5.0).is_ok());
        assert!(YawManeuverProfile::new(-1.0, Vec3::E3, 0.0, 5.0).is_err());
        assert!(YawManeuverProfile::new(1.0, Vec3::E3, 4.0, 5.0).is_err());
        assert!(YawManeuverProfile::new(1.0, Vec3::E3, -PI, 5.0).is_err());
        assert!(YawManeuverProfile::new(1.0, Vec3::E3, 0.0, 1.0).is_err());
        assert!(YawManeuverProfile::new(1.0, Vec3::E1, 0.5, 5.0).is_err());
    }

    #[test]
    fn hover_only_profile() {
        let p = YawManeuverProfile::with_window(1.0, Vec3::ZERO, 0.0, 3.0).unwrap();
        assert_eq!(p.stage3_start(), 1.0);
        assert_eq!(p.t_final(), 4.0);
    }

    #[test]
    fn serde_validates() {
        let p = unwinding_case();
        let json = serde_json::to_string(&p).unwrap();
        let back: YawManeuverProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"t_hover":1.0,"w0":[0,0,0],"psi0":1.0,"t_final":5.0}"#;
        assert!(serde_json::from_str::<YawManeuverProfile>(bad).is_err());
    }
}
