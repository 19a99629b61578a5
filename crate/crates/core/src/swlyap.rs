//! Lyapunov functions of the two switching subsystems, the switching
//! function Λ, and the hysteretic σ update.
//!
//! With `M = Kq⁻¹ J` (symmetric because every matrix here is diagonal):
//!
//! ```text
//! V_σ  = ½ ν_σᵀ M ν_σ + 2 (1 - σ m_e)
//! V̇_σ  = -ν_σᵀ Kq⁻¹ Kw ν_σ - k_n n_eᵀ n_e
//! Λ    = V₋₁ - V₊₁ = -2 k_n ω_eᵀ M n_e + 4 m_e
//! ```

use serde::{Deserialize, Serialize};

use crate::control::{Gains, Sigma};
use crate::diag::Diag3;
use crate::error::{Error, Result};
use crate::quat::{UnitQuaternion, Vec3};

/// Upper level of the sublevel set used as region-of-attraction estimate.
pub const REGION_LEVEL: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovSample {
    pub v_plus: f64,
    pub v_minus: f64,
    pub lambda: f64,
    pub vdot_active: f64,
}

pub fn lyapunov_v(sigma: Sigma, qe: &UnitQuaternion, nu: Vec3, kq: &Diag3, j: &Diag3) -> f64 {
    let m = kq.inverse().mul(j);
    0.5 * m.quad_form(nu) + 2.0 * (1.0 - sigma.value() * qe.w())
}

/// `(W_lo, W_hi)` using the extreme eigenvalues of `Kq⁻¹ J`.
///
/// The quadratic term carries no ½ here, so `W_lo` is not a lower bound
/// of `V_σ` in general; only `W_lo ≤ W_hi` and positive definiteness hold.
pub fn lyapunov_bounds(
    sigma: Sigma,
    qe: &UnitQuaternion,
    nu: Vec3,
    kq: &Diag3,
    j: &Diag3,
) -> (f64, f64) {
    let m = kq.inverse().mul(j);
    let attitude = 2.0 * (1.0 - sigma.value() * qe.w());
    let nn = nu.norm_squared();
    (m.min_entry() * nn + attitude, m.max_entry() * nn + attitude)
}

/// Closed-form time derivative of `V_σ` along the subsystem σ.
pub fn lyapunov_vdot(
    _sigma: Sigma,
    qe: &UnitQuaternion,
    nu: Vec3,
    kq: &Diag3,
    kw: &Diag3,
    kn: f64,
) -> f64 {
    let n = qe.v();
    -kq.inverse().mul(kw).quad_form(nu) - kn * n.norm_squared()
}

/// Switching function in closed form; takes the rate error `ω_e`, not `ν`.
pub fn lambda_fn(qe: &UnitQuaternion, we: Vec3, kq: &Diag3, j: &Diag3, kn: f64) -> f64 {
    let m = kq.inverse().mul(j);
    -2.0 * kn * we.dot(m.mul_vec(qe.v())) + 4.0 * qe.w()
}

/// `ν_σ = ω_e + σ k_n n_e`.
#[inline]
pub fn nu_for(sigma: Sigma, qe: &UnitQuaternion, we: Vec3, kn: f64) -> Vec3 {
    we + qe.v() * (sigma.value() * kn)
}

/// Both Lyapunov values, Λ, and V̇ of the active subsystem.
pub fn lyapunov_sample(
    qe: &UnitQuaternion,
    we: Vec3,
    active: Sigma,
    g: &Gains,
    j: &Diag3,
) -> LyapunovSample {
    let v_plus = lyapunov_v(
        Sigma::Plus,
        qe,
        nu_for(Sigma::Plus, qe, we, g.kn()),
        g.kq(),
        j,
    );
    let v_minus = lyapunov_v(
        Sigma::Minus,
        qe,
        nu_for(Sigma::Minus, qe, we, g.kn()),
        g.kq(),
        j,
    );
    let nu = nu_for(active, qe, we, g.kn());
    LyapunovSample {
        v_plus,
        v_minus,
        lambda: lambda_fn(qe, we, g.kq(), j, g.kn()),
        vdot_active: lyapunov_vdot(active, qe, nu, g.kq(), g.kw(), g.kn()),
    }
}

/// Membership in `{V_σ < 4}`.
pub fn in_region_of_attraction(v_sigma: f64) -> bool {
    v_sigma < REGION_LEVEL
}

/// Left-hand sides of the equilibrium conditions of subsystem σ: the
/// scalar and vector parts of `q̇_e`, then `ν̇`. All vanish at a fixed point.
pub fn fixed_point_residuals(
    sigma: Sigma,
    qe: &UnitQuaternion,
    nu: Vec3,
    g: &Gains,
    j: &Diag3,
) -> (f64, Vec3, Vec3) {
    let s = sigma.value();
    let (m, n) = (qe.w(), qe.v());
    let kn = g.kn();
    let scalar = -0.5 * n.dot(nu) + 0.5 * s * kn * n.norm_squared();
    let vector = (n.cross(nu) - (nu - n * (s * kn)) * m) * -0.5;
    let rate = j
        .inverse()
        .mul_vec(g.kq().mul_vec(n) * s + g.kw().mul_vec(nu))
        * -1.0;
    (scalar, vector, rate)
}

/// Hysteretic update: keep σ inside `(-δ, δ)`, else take the sign of Λ.
pub fn next_sigma(sigma: Sigma, lambda: f64, delta: f64) -> Sigma {
    if lambda >= delta {
        Sigma::Plus
    } else if lambda <= -delta {
        Sigma::Minus
    } else {
        sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t: f64,
    pub from: Sigma,
    pub to: Sigma,
    /// `V_to` evaluated right after the switch.
    pub v: f64,
}

/// σ together with the log of every switch. Starts at `σ = +1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SwitchState {
    pub sigma: Sigma,
    pub events: Vec<SwitchEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eq30Violation {
    /// Index of the earlier switch into σ in the event log.
    pub first: usize,
    /// Index of the next switch back into the same σ.
    pub second: usize,
    /// `V(t_l) - V(t_j)`; must be at most `-δ`.
    pub change: f64,
}

impl SwitchState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn switch_count(&self) -> usize {
        self.events.len()
    }

    /// Applies the hysteresis rule at time `t`. `v_of` gives the Lyapunov
    /// value of a subsystem at the current state; it is only evaluated for
    /// the incoming σ when a switch happens. Returns whether σ changed.
    pub fn update(
        &mut self,
        lambda: f64,
        delta: f64,
        t: f64,
        v_of: impl FnOnce(Sigma) -> f64,
    ) -> Result<bool> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must be > 0, got {delta}"
            )));
        }
        let next = next_sigma(self.sigma, lambda, delta);
        if next == self.sigma {
            return Ok(false);
        }
        if let Some(last) = self.events.last() {
            if !(t > last.t) {
                return Err(Error::InvalidArgument(format!(
                    "switch at t = {t} does not follow the previous one at {}",
                    last.t
                )));
            }
        }
        self.events.push(SwitchEvent {
            t,
            from: self.sigma,
            to: next,
            v: v_of(next),
        });
        self.sigma = next;
        Ok(true)
    }

    /// Checks that every return to a subsystem happens at a Lyapunov value
    /// at least `delta` below the one it had on the previous entry.
    pub fn check_eq30(&self, delta: f64) -> Vec<Eq30Violation> {
        self.events
            .windows(3)
            .enumerate()
            .filter_map(|(i, w)| {
                debug_assert_eq!(w[0].to, w[2].to);
                let change = w[2].v - w[0].v;
                (change > -delta + 1e-9).then_some(Eq30Violation {
                    first: i,
                    second: i + 2,
                    change,
                })
            })
            .collect()
    }
}
