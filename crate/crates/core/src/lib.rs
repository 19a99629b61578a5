//! Quaternion attitude control with a Lyapunov-based switching law.
//!
//! The crate simulates a rigid body (a Crazyflie-class quadrotor by
//! default) under three torque laws:
//!
//! - the continuous quaternion PD law with rate feedforward,
//! - a benchmark that multiplies the proportional term by `sgn(m_e)`,
//! - a switching law whose sign σ is chosen by hysteresis on the difference
//!   of two Lyapunov functions, so that it picks the cheaper of the two
//!   antipodal error equilibria instead of always the shortest rotation.
//!
//! The [`harness`] module runs yaw-maneuver experiments, computes
//! torque and power figures of merit, sweeps initial conditions and
//! numerically checks the stability claims.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod diag;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod quat;
pub mod reference;
pub mod swlyap;

pub use control::{ControlLaw, ErrorState, Gains, Sigma};
pub use diag::Diag3;
pub use dynamics::{BodyState, Inputs, RigidBodyParams, SimMode};
pub use error::{Error, Result};
pub use quat::{attitude_error, Quaternion, RotMatrix, UnitQuaternion, Vec3};
pub use reference::{Reference, ReferenceSample, YawManeuverProfile};
pub use swlyap::{LyapunovSample, SwitchState};
