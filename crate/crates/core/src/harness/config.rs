use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::Gains;
use crate::dynamics::{HoverController, RigidBodyParams, SimMode};
use crate::error::{Error, Result};
use crate::quat::Vec3;
use crate::reference::YawManeuverProfile;

/// Spin rate about `b₃` (rad/s) and snap-back yaw (degrees) for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcPair {
    pub wz: f64,
    pub psi0_deg: f64,
}

impl IcPair {
    pub const fn new(wz: f64, psi0_deg: f64) -> Self {
        Self { wz, psi0_deg }
    }

    /// Five default pairs: the two disagreeing cases first, then three
    /// milder ones. The last two keep both controllers on the same sign.
    pub fn defaults() -> Vec<IcPair> {
        vec![
            IcPair::new(3.0, 120.0),
            IcPair::new(4.0, 90.0),
            IcPair::new(2.0, 150.0),
            IcPair::new(1.0, 60.0),
            IcPair::new(0.5, 45.0),
        ]
    }

    pub fn label(&self) -> String {
        format!("{}rad/s@{}deg", self.wz, self.psi0_deg)
    }
}

impl std::str::FromStr for IcPair {
    type Err = Error;

    /// Parses `"<wz>,<psi0_deg>"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected '<wz>,<psi0_deg>', got '{s}'"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let wz: f64 = a.trim().parse().map_err(|_| bad())?;
        let psi: f64 = b.trim().parse().map_err(|_| bad())?;
        Ok(IcPair::new(wz, psi))
    }
}

/// Maneuver timing. Angles are in degrees; `t_final` defaults to the end of
/// the metric window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub t_hover: f64,
    pub w0: Vec3,
    pub psi0_deg: f64,
    pub t_final: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            t_hover: 1.0,
            w0: Vec3::new(0.0, 0.0, 3.0),
            psi0_deg: 120.0,
            t_final: None,
        }
    }
}

/// Measurement noise on the controller inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Per-axis std. dev. on the measured body rate, rad/s.
    pub omega_sigma: f64,
    /// Per-axis std. dev. of the rotation vector perturbing the measured attitude, rad.
    pub attitude_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            omega_sigma: 0.02,
            attitude_sigma: 0.2_f64.to_radians(),
        }
    }
}

impl NoiseConfig {
    pub fn is_zero(&self) -> bool {
        self.omega_sigma == 0.0 && self.attitude_sigma == 0.0
    }
}

/// When the controller is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlUpdate {
    /// Once per sample, held over the step.
    #[default]
    ZeroOrderHold,
    /// At every integrator stage.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: RigidBodyParams,
    pub gains_benchmark: Gains,
    pub gains_switching: Gains,
    pub profile: ProfileConfig,
    /// s
    pub dt: f64,
    /// Metric start relative to the yaw snap, s.
    pub t0_offset: f64,
    /// Metric window length, s.
    pub window: f64,
    pub mode: SimMode,
    pub control_update: ControlUpdate,
    pub hover: HoverController,
    pub noise: Option<NoiseConfig>,
    pub repeats: usize,
    pub rng_seed: u64,
    pub ic_pairs: Vec<IcPair>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let params = RigidBodyParams::crazyflie();
        Self {
            gains_benchmark: Gains::benchmark_default(&params.inertia),
            gains_switching: Gains::switching_default(&params.inertia),
            params,
            profile: ProfileConfig::default(),
            dt: 0.002,
            t0_offset: 0.0,
            window: 3.0,
            mode: SimMode::AttitudeOnly,
            control_update: ControlUpdate::ZeroOrderHold,
            hover: HoverController::default(),
            noise: None,
            repeats: 10,
            rng_seed: 0,
            ic_pairs: IcPair::defaults(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the spin rate and snap-back yaw. `t_final` is reset so the
    /// run covers the metric window of the new maneuver.
    pub fn with_ic(&self, ic: IcPair) -> Self {
        let mut c = self.clone();
        c.profile.w0 = Vec3::new(0.0, 0.0, ic.wz);
        c.profile.psi0_deg = ic.psi0_deg;
        c.profile.t_final = None;
        c
    }

    /// The yaw profile, with `t_final` defaulting to the end of the metric window.
    pub fn yaw_profile(&self) -> Result<YawManeuverProfile> {
        let p = &self.profile;
        let mut psi0 = p.psi0_deg.to_radians();
        // 180° lands a hair above π after the conversion
        if (psi0 - PI).abs() < 1e-12 {
            psi0 = PI;
        }
        let end = self.t0_offset + self.window;
        match p.t_final {
            Some(tf) => YawManeuverProfile::new(p.t_hover, p.w0, psi0, tf),
            None => YawManeuverProfile::with_window(p.t_hover, p.w0, psi0, end),
        }
    }

    /// `(t0, tf)` of the metric window.
    pub fn metric_window(&self) -> Result<(f64, f64)> {
        let t0 = self.yaw_profile()?.stage3_start() + self.t0_offset;
        Ok((t0, t0 + self.window))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.params.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.window > 0.0) || !self.window.is_finite() {
            return bad(format!("window must be > 0, got {}", self.window));
        }
        if !(self.t0_offset >= 0.0) || !self.t0_offset.is_finite() {
            return bad(format!("t0_offset must be >= 0, got {}", self.t0_offset));
        }
        if self.repeats < 1 {
            return bad("repeats must be >= 1".into());
        }
        if let Some(n) = &self.noise {
            if !(n.omega_sigma >= 0.0 && n.attitude_sigma >= 0.0)
                || !n.omega_sigma.is_finite()
                || !n.attitude_sigma.is_finite()
            {
                return bad(format!("noise sigmas must be finite and >= 0, got {n:?}"));
            }
        }
        let profile = self.yaw_profile()?;
        let (_, tf) = self.metric_window()?;
        if profile.t_final() + 1e-9 < tf {
            return bad(format!(
                "t_final = {} ends before the metric window ({tf})",
                profile.t_final()
            ));
        }
        for ic in &self.ic_pairs {
            self.with_ic(*ic).yaw_profile().map_err(|e| {
                Error::InvalidConfig(format!("initial-condition pair {}: {e}", ic.label()))
            })?;
        }
        Ok(())
    }
}
