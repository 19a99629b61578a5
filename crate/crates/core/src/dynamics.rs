//! Rigid-body equations of motion and a fixed-step RK4 integrator.

use serde::{Deserialize, Serialize};

use crate::diag::Diag3;
use crate::error::{Error, Result};
use crate::quat::{Quaternion, UnitQuaternion, Vec3};

/// Mass properties and gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBodyParams {
    /// kg
    pub mass: f64,
    /// Principal inertia, kg·m²
    pub inertia: Diag3,
    /// m/s²
    pub gravity: f64,
}

impl RigidBodyParams {
    /// Crazyflie 2.1 with motion-capture markers (31 g).
    pub const fn crazyflie() -> Self {
        Self {
            mass: 0.031,
            inertia: Diag3::new(16.6e-6, 16.7e-6, 29.3e-6),
            gravity: 9.81,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mass must be > 0, got {}",
                self.mass
            )));
        }
        if !self.inertia.is_positive_definite() {
            return Err(Error::InvalidConfig(format!(
                "inertia entries must be > 0, got {:?}",
                self.inertia.0
            )));
        }
        if !(self.gravity >= 0.0) || !self.gravity.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gravity must be >= 0, got {}",
                self.gravity
            )));
        }
        Ok(())
    }

    /// Rotational kinetic energy `½ ωᵀJω`.
    pub fn rotational_energy(&self, w: Vec3) -> f64 {
        0.5 * self.inertia.quad_form(w)
    }
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        Self::crazyflie()
    }
}

/// Position, velocity (inertial), attitude and body rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub r: Vec3,
    pub v: Vec3,
    pub q: UnitQuaternion,
    /// Body-frame angular velocity, rad/s.
    pub w: Vec3,
}

impl BodyState {
    /// At rest, level, at the given position.
    pub fn at_rest(r: Vec3) -> Self {
        Self {
            r,
            v: Vec3::ZERO,
            q: UnitQuaternion::IDENTITY,
            w: Vec3::ZERO,
        }
    }

    pub fn with_attitude(q: UnitQuaternion, w: Vec3) -> Self {
        Self {
            r: Vec3::ZERO,
            v: Vec3::ZERO,
            q,
            w,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite()
            && self.v.is_finite()
            && self.q.as_quaternion().is_finite()
            && self.w.is_finite()
    }
}

/// Collective thrust along `b₃` and body torque.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Inputs {
    /// N
    pub fa: f64,
    /// N·m
    pub tau: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dr: Vec3,
    pub dv: Vec3,
    pub dq: Quaternion,
    pub dw: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SimMode {
    /// Translation is frozen; only attitude and body rate evolve.
    #[default]
    #[serde(rename = "attitude")]
    AttitudeOnly,
    #[serde(rename = "6dof")]
    SixDof,
}

impl std::str::FromStr for SimMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attitude" => Ok(SimMode::AttitudeOnly),
            "6dof" => Ok(SimMode::SixDof),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}', expected 'attitude' or '6dof'"
            ))),
        }
    }
}

/// State with an unconstrained quaternion, used between RK4 stages.
#[derive(Debug, Clone, Copy)]
struct RawState {
    r: Vec3,
    v: Vec3,
    q: Quaternion,
    w: Vec3,
}

impl RawState {
    fn from_state(s: &BodyState) -> Self {
        Self {
            r: s.r,
            v: s.v,
            q: s.q.as_quaternion(),
            w: s.w,
        }
    }

    fn advanced(&self, d: &StateDerivative, h: f64) -> Self {
        Self {
            r: self.r + d.dr * h,
            v: self.v + d.dv * h,
            q: self.q + d.dq.scale(h),
            w: self.w + d.dw * h,
        }
    }

    fn to_state(self) -> Result<BodyState> {
        Ok(BodyState {
            r: self.r,
            v: self.v,
            q: UnitQuaternion::normalize(self.q)?,
            w: self.w,
        })
    }

    fn derivative(&self, u: &Inputs, p: &RigidBodyParams) -> StateDerivative {
        let j = &p.inertia;
        let dw = j.inverse().mul_vec(u.tau - self.w.cross(j.mul_vec(self.w)));
        let dq = (self.q * Quaternion::pure(self.w)).scale(0.5);
        let b3 = match UnitQuaternion::normalize(self.q) {
            Ok(q) => q.to_rotation_matrix().column(2),
            Err(_) => Vec3::E3 * f64::NAN,
        };
        let dv = b3 * (u.fa / p.mass) - Vec3::E3 * p.gravity;
        StateDerivative {
            dr: self.v,
            dv,
            dq,
            dw,
        }
    }
}

/// Right-hand side of the rigid-body equations of motion.
pub fn derivatives(s: &BodyState, u: &Inputs, p: &RigidBodyParams) -> StateDerivative {
    RawState::from_state(s).derivative(u, p)
}

fn freeze_translation(mut d: StateDerivative, mode: SimMode) -> StateDerivative {
    if mode == SimMode::AttitudeOnly {
        d.dr = Vec3::ZERO;
        d.dv = Vec3::ZERO;
    }
    d
}

/// One classical RK4 step of length `dt` starting at time `t`.
///
/// `inputs` is called with the stage time and the stage state (quaternion
/// normalized). A caller wanting a zero-order hold simply ignores both
/// arguments and returns a value computed before the step.
pub fn step_rk4<F>(
    s: &BodyState,
    mut inputs: F,
    p: &RigidBodyParams,
    t: f64,
    dt: f64,
    mode: SimMode,
) -> Result<BodyState>
where
    F: FnMut(f64, &BodyState) -> Inputs,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let blowup = |_| Error::NumericalBlowup { t: t + dt };

    let x0 = RawState::from_state(s);
    let mut eval = |x: &RawState, tt: f64| -> Result<StateDerivative> {
        let st = x.to_state().map_err(blowup)?;
        let u = inputs(tt, &st);
        Ok(freeze_translation(x.derivative(&u, p), mode))
    };

    let k1 = eval(&x0, t)?;
    let k2 = eval(&x0.advanced(&k1, 0.5 * dt), t + 0.5 * dt)?;
    let k3 = eval(&x0.advanced(&k2, 0.5 * dt), t + 0.5 * dt)?;
    let k4 = eval(&x0.advanced(&k3, dt), t + dt)?;

    let h6 = dt / 6.0;
    let x1 = RawState {
        r: x0.r + (k1.dr + k2.dr * 2.0 + k3.dr * 2.0 + k4.dr) * h6,
        v: x0.v + (k1.dv + k2.dv * 2.0 + k3.dv * 2.0 + k4.dv) * h6,
        q: x0.q + (k1.dq + k2.dq.scale(2.0) + k3.dq.scale(2.0) + k4.dq).scale(h6),
        w: x0.w + (k1.dw + k2.dw * 2.0 + k3.dw * 2.0 + k4.dw) * h6,
    };
    let next = x1.to_state().map_err(blowup)?;
    if !next.is_finite() {
        return Err(Error::NumericalBlowup { t: t + dt });
    }
    Ok(next)
}

/// Altitude-hold thrust for 6-DOF runs. Lateral position is not controlled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoverController {
    /// s⁻²
    pub kp: f64,
    /// s⁻¹
    pub kd: f64,
    /// m
    pub z_ref: f64,
}

impl Default for HoverController {
    fn default() -> Self {
        Self {
            kp: 40.0,
            kd: 8.0,
            z_ref: 1.0,
        }
    }
}

impl HoverController {
    pub fn thrust(&self, s: &BodyState, p: &RigidBodyParams) -> f64 {
        let r33 = s.q.to_rotation_matrix().0[2][2];
        let accel = p.gravity + self.kp * (self.z_ref - s.r.z) - self.kd * s.v.z;
        (p.mass * accel / r33.max(0.1)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> RigidBodyParams {
        RigidBodyParams::crazyflie()
    }

    #[test]
    fn hover_is_equilibrium() {
        let p = params();
        let s = BodyState::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let u = Inputs {
            fa: p.mass * p.gravity,
            tau: Vec3::ZERO,
        };
        let d = derivatives(&s, &u, &p);
        assert_eq!(d.dr, Vec3::ZERO);
        assert!(d.dv.max_abs() < 1e-15);
        assert_eq!(d.dq, Quaternion::ZERO);
        assert_eq!(d.dw, Vec3::ZERO);

        let next = step_rk4(&s, |_, _| u, &p, 0.0, 0.002, SimMode::SixDof).unwrap();
        assert!((next.r - s.r).max_abs() < 1e-12);
        assert!((next.v - s.v).max_abs() < 1e-12);
        assert_eq!(next.q, s.q);
    }

    #[test]
    fn principal_spin_has_no_gyroscopic_torque() {
        let s = BodyState::with_attitude(UnitQuaternion::IDENTITY, Vec3::new(0.0, 0.0, 1.0));
        let d = derivatives(&s, &Inputs::default(), &params());
        assert_eq!(d.dw, Vec3::ZERO);
    }

    #[test]
    fn gyroscopic_term_matches_hand_expansion() {
        let p = params();
        let w = Vec3::new(1.0, 2.0, 3.0);
        let s = BodyState::with_attitude(UnitQuaternion::IDENTITY, w);
        let d = derivatives(&s, &Inputs::default(), &p);
        // Euler's equations written out per axis
        let [j1, j2, j3] = p.inertia.0;
        let expected = Vec3::new(
            (j2 - j3) * w.y * w.z / j1,
            (j3 - j1) * w.z * w.x / j2,
            (j1 - j2) * w.x * w.y / j3,
        );
        assert!((d.dw - expected).max_abs() < 1e-12);
    }

    #[test]
    fn free_spin_about_yaw() {
        let p = params();
        let mut s = BodyState::with_attitude(UnitQuaternion::IDENTITY, Vec3::new(0.0, 0.0, 3.0));
        let dt = 0.002;
        for k in 0..500 {
            s = step_rk4(
                &s,
                |_, _| Inputs::default(),
                &p,
                k as f64 * dt,
                dt,
                SimMode::AttitudeOnly,
            )
            .unwrap();
        }
        assert!((s.w - Vec3::new(0.0, 0.0, 3.0)).max_abs() < 1e-9);
        assert!((s.q.yaw() - 3.0).abs() < 1e-6);
        assert!(s.q.norm_error() < 1e-9);
    }

    #[test]
    fn attitude_mode_freezes_translation() {
        let p = params();
        let s = BodyState {
            r: Vec3::new(1.0, 2.0, 3.0),
            v: Vec3::new(0.5, 0.0, -0.5),
            q: UnitQuaternion::IDENTITY,
            w: Vec3::new(0.1, 0.2, 0.3),
        };
        let next = step_rk4(
            &s,
            |_, _| Inputs::default(),
            &p,
            0.0,
            0.01,
            SimMode::AttitudeOnly,
        )
        .unwrap();
        assert_eq!(next.r, s.r);
        assert_eq!(next.v, s.v);
        let free = step_rk4(&s, |_, _| Inputs::default(), &p, 0.0, 0.01, SimMode::SixDof).unwrap();
        assert!(free.v.z < s.v.z);
    }

    #[test]
    fn blowup_reports_time() {
        let p = params();
        let s = BodyState::with_attitude(UnitQuaternion::IDENTITY, Vec3::ZERO);
        let bad = Inputs {
            fa: 0.0,
            tau: Vec3::new(f64::INFINITY, 0.0, 0.0),
        };
        match step_rk4(&s, |_, _| bad, &p, 1.5, 0.002, SimMode::AttitudeOnly) {
            Err(Error::NumericalBlowup { t }) => assert!((t - 1.502).abs() < 1e-12),
            other => panic!("expected blowup, got {other:?}"),
        }
        assert!(step_rk4(&s, |_, _| bad, &p, 0.0, 0.0, SimMode::AttitudeOnly).is_err());
    }

    #[test]
    fn hover_controller_holds_altitude() {
        let p = params();
        let hc = HoverController::default();
        let mut s = BodyState::at_rest(Vec3::new(0.0, 0.0, 0.8));
        let dt = 0.002;
        for k in 0..3000 {
            let u = Inputs {
                fa: hc.thrust(&s, &p),
                tau: Vec3::ZERO,
            };
            s = step_rk4(&s, |_, _| u, &p, k as f64 * dt, dt, SimMode::SixDof).unwrap();
        }
        assert!((s.r.z - 1.0).abs() < 1e-3);
    }

    #[test]
    fn params_validation() {
        assert!(params().validate().is_ok());
        let mut p = params();
        p.mass = 0.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.inertia = Diag3::new(1.0, -1.0, 1.0);
        assert!(p.validate().is_err());
        let mut p = params();
        p.gravity = -9.81;
        assert!(p.validate().is_err());
    }
}
