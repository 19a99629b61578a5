use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::sim::RunLog;

/// RMS torque and RMS rotational power over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfmResult {
    /// N·m
    pub gamma_tau: f64,
    /// N·m·rad/s
    pub gamma_p: f64,
    pub t0: f64,
    pub tf: f64,
}

/// Time average of `f` over `[t0, tf]` by the trapezoidal rule on the
/// sample grid, with linear interpolation where the window cuts a segment.
pub fn window_mean(t: &[f64], f: &[f64], t0: f64, tf: f64) -> Result<f64> {
    assert_eq!(t.len(), f.len());
    let (start, end) = match (t.first(), t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (f64::NAN, f64::NAN),
    };
    let eps = 1e-9;
    if !(t0 < tf) || !(t0 >= start - eps) || !(tf <= end + eps) {
        return Err(Error::InvalidWindow { t0, tf, start, end });
    }
    if t.len() == 1 {
        return Ok(f[0]);
    }
    let mut integral = 0.0;
    for i in 0..t.len() - 1 {
        let (ta, tb) = (t[i], t[i + 1]);
        let a = ta.max(t0);
        let b = tb.min(tf);
        if b <= a {
            continue;
        }
        let h = tb - ta;
        let lerp = |x: f64| f[i] + (f[i + 1] - f[i]) * ((x - ta) / h);
        integral += 0.5 * (lerp(a) + lerp(b)) * (b - a);
    }
    Ok(integral / (tf - t0))
}

/// RMS of `‖τ‖` over `[t0, tf]`.
pub fn gamma_tau(log: &RunLog, t0: f64, tf: f64) -> Result<f64> {
    let t = log.times();
    let f: Vec<f64> = log.rows.iter().map(|r| r.tau.norm_squared()).collect();
    Ok(window_mean(&t, &f, t0, tf)?.max(0.0).sqrt())
}

/// RMS of the rotational power `τᵀω` over `[t0, tf]`.
pub fn gamma_p(log: &RunLog, t0: f64, tf: f64) -> Result<f64> {
    let t = log.times();
    let f: Vec<f64> = log
        .rows
        .iter()
        .map(|r| r.tau.dot(r.state.w).powi(2))
        .collect();
    Ok(window_mean(&t, &f, t0, tf)?.max(0.0).sqrt())
}

pub fn pfm(log: &RunLog, t0: f64, tf: f64) -> Result<PfmResult> {
    Ok(PfmResult {
        gamma_tau: gamma_tau(log, t0, tf)?,
        gamma_p: gamma_p(log, t0, tf)?,
        t0,
        tf,
    })
}

/// PFMs over the configured window, starting at the log's `t0`.
pub fn pfm_for(log: &RunLog, cfg: &ExperimentConfig) -> Result<PfmResult> {
    pfm(log, log.t0, log.t0 + cfg.window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlLaw, Sigma};
    use crate::dynamics::BodyState;
    use crate::harness::sim::LogRow;
    use crate::quat::Vec3;
    use crate::reference::ReferenceSample;

    fn synthetic(dt: f64, n: usize, f: impl Fn(f64) -> (Vec3, Vec3)) -> RunLog {
        let rows = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let (tau, w) = f(t);
                let mut state = BodyState::at_rest(Vec3::ZERO);
                state.w = w;
                LogRow {
                    t,
                    state,
                    reference: ReferenceSample::HOLD_LEVEL,
                    tau,
                    sigma: Sigma::Plus,
                    lambda: 0.0,
                    v_plus: 0.0,
                    v_minus: 0.0,
                    psi: 0.0,
                    psi_d: 0.0,
                    fa: 0.0,
                }
            })
            .collect();
        RunLog {
            controller: ControlLaw::Benchmark,
            dt,
            t0: 0.0,
            rows,
            switches: vec![],
        }
    }

    #[test]
    fn zero_torque() {
        let log = synthetic(0.002, 1000, |_| (Vec3::ZERO, Vec3::new(1.0, 2.0, 3.0)));
        assert_eq!(gamma_tau(&log, 0.0, 2.0).unwrap(), 0.0);
        assert_eq!(gamma_p(&log, 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_torque() {
        let log = synthetic(0.002, 1000, |_| (Vec3::new(0.7, 0.0, 0.0), Vec3::ZERO));
        assert!((gamma_tau(&log, 0.3, 1.7).unwrap() - 0.7).abs() < 1e-14);
        assert_eq!(gamma_p(&log, 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn sinusoid_rms() {
        let om = 2.0 * std::f64::consts::PI;
        let log = synthetic(0.002, 1500, |t| {
            (Vec3::new((om * t).sin(), 0.0, 0.0), Vec3::ZERO)
        });
        let g = gamma_tau(&log, 0.0, 3.0).unwrap();
        assert!((g - 0.5_f64.sqrt()).abs() < 1e-6, "{g}");
    }

    #[test]
    fn aligned_power() {
        let log = synthetic(0.002, 500, |_| {
            (Vec3::new(0.0, 0.0, 0.2), Vec3::new(0.0, 0.0, 3.0))
        });
        assert!((gamma_p(&log, 0.0, 1.0).unwrap() - 0.6).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_power() {
        let log = synthetic(0.002, 500, |t| {
            (Vec3::new(t, 0.0, 0.0), Vec3::new(0.0, 1.0 + t, 0.0))
        });
        assert_eq!(gamma_p(&log, 0.0, 1.0).unwrap(), 0.0);
        assert!(gamma_tau(&log, 0.0, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn off_grid_window_interpolates() {
        // f(t) = t, mean over [0.0013, 0.9977] equals the midpoint exactly
        let t: Vec<f64> = (0..=500).map(|k| k as f64 * 0.002).collect();
        let m = window_mean(&t, &t, 0.0013, 0.9977).unwrap();
        assert!((m - 0.4995).abs() < 1e-14);
    }

    #[test]
    fn window_errors() {
        let log = synthetic(0.002, 500, |_| (Vec3::E1, Vec3::ZERO));
        for (a, b) in [(-0.1, 0.5), (0.5, 1.1), (0.5, 0.5), (0.6, 0.5)] {
            assert!(matches!(
                gamma_tau(&log, a, b),
                Err(Error::InvalidWindow { .. })
            ));
        }
        let empty = synthetic(0.002, 0, |_| (Vec3::E1, Vec3::ZERO));
        let empty = RunLog {
            rows: vec![],
            ..empty
        };
        assert!(gamma_tau(&empty, 0.0, 1.0).is_err());
    }
}
