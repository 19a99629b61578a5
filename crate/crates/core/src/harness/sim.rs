use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{error_state, ControlLaw, ErrorState, Gains, Sigma};
use crate::dynamics::{step_rk4, BodyState, HoverController, Inputs, RigidBodyParams, SimMode};
use crate::error::{Error, Result};
use crate::harness::config::{ControlUpdate, ExperimentConfig, NoiseConfig};
use crate::quat::{UnitQuaternion, Vec3};
use crate::reference::{map_desired_rate, Reference, ReferenceSample};
use crate::swlyap::{lyapunov_sample, lyapunov_v, nu_for, SwitchEvent, SwitchState};

/// One logged sample. `reference` holds the desired rate already expressed
/// in the measured body frame, i.e. what the controller used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub state: BodyState,
    pub reference: ReferenceSample,
    pub tau: Vec3,
    pub sigma: Sigma,
    pub lambda: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub psi: f64,
    pub psi_d: f64,
    pub fa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub controller: ControlLaw,
    pub dt: f64,
    /// Start of the metric window (the yaw snap time plus any offset).
    pub t0: f64,
    pub rows: Vec<LogRow>,
    pub switches: Vec<SwitchEvent>,
}

impl RunLog {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Index of the first row with `t >= time`.
    pub fn index_at(&self, time: f64) -> Option<usize> {
        let i = self.rows.partition_point(|r| r.t < time - 1e-12);
        (i < self.rows.len()).then_some(i)
    }

    /// Continuous (unwrapped) yaw angle series.
    pub fn psi_unwrapped(&self) -> Vec<f64> {
        unwrap_angles(self.rows.iter().map(|r| r.psi))
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }
}

/// Removes 2π jumps from a sequence of wrapped angles.
pub fn unwrap_angles(angles: impl IntoIterator<Item = f64>) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out: Vec<f64> = Vec::new();
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for a in angles {
        if let Some(p) = prev {
            let d = a - p;
            if d > PI {
                offset -= TAU;
            } else if d < -PI {
                offset += TAU;
            }
        }
        prev = Some(a);
        out.push(a + offset);
    }
    out
}

/// Per-step measurement perturbation: attitude is right-multiplied by
/// `dq`, `dw` is added to the body rate.
#[derive(Debug, Clone, Copy)]
struct Perturbation {
    dq: UnitQuaternion,
    dw: Vec3,
}

impl Perturbation {
    const NONE: Perturbation = Perturbation {
        dq: UnitQuaternion::IDENTITY,
        dw: Vec3::ZERO,
    };

    fn draw(noise: &NoiseConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let normal = |s: f64| {
            Normal::new(0.0, s).map_err(|e| Error::InvalidConfig(format!("noise sigma {s}: {e}")))
        };
        let na = normal(noise.attitude_sigma)?;
        let nw = normal(noise.omega_sigma)?;
        let rot = Vec3::new(na.sample(rng), na.sample(rng), na.sample(rng));
        let dw = Vec3::new(nw.sample(rng), nw.sample(rng), nw.sample(rng));
        Ok(Self {
            dq: UnitQuaternion::from_rotation_vector(rot),
            dw,
        })
    }

    fn apply(&self, s: &BodyState) -> BodyState {
        BodyState {
            q: s.q * self.dq,
            w: s.w + self.dw,
            ..*s
        }
    }
}

/// A closed-loop simulation of one controller against one reference.
#[derive(Clone, Copy)]
pub struct Simulation<'a> {
    pub params: RigidBodyParams,
    pub law: ControlLaw,
    pub gains: Gains,
    pub reference: &'a dyn Reference,
    pub initial: BodyState,
    pub dt: f64,
    pub t_final: f64,
    pub mode: SimMode,
    pub update: ControlUpdate,
    pub hover: HoverController,
    pub noise: Option<NoiseConfig>,
    /// Recorded as `RunLog::t0`.
    pub t0: f64,
}

struct Evaluated {
    inputs: Inputs,
    reference: ReferenceSample,
    es: ErrorState,
}

impl<'a> Simulation<'a> {
    /// Attitude-only run at the default step with no noise.
    pub fn new(
        params: RigidBodyParams,
        law: ControlLaw,
        gains: Gains,
        reference: &'a dyn Reference,
        initial: BodyState,
        t_final: f64,
    ) -> Self {
        Self {
            params,
            law,
            gains,
            reference,
            initial,
            dt: 0.002,
            t_final,
            mode: SimMode::AttitudeOnly,
            update: ControlUpdate::ZeroOrderHold,
            hover: HoverController::default(),
            noise: None,
            t0: 0.0,
        }
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(0.0) as usize
    }

    fn evaluate(&self, t: f64, truth: &BodyState, pert: &Perturbation, sigma: Sigma) -> Evaluated {
        self.evaluate_with(self.reference.sample(t), truth, pert, sigma)
    }

    fn evaluate_with(
        &self,
        raw: ReferenceSample,
        truth: &BodyState,
        pert: &Perturbation,
        sigma: Sigma,
    ) -> Evaluated {
        let meas = pert.apply(truth);
        let reference = ReferenceSample {
            wd: map_desired_rate(&meas.q, &raw.qd, raw.wd),
            ..raw
        };
        let j = &self.params.inertia;
        let tau = self.law.torque(&meas, &reference, &self.gains, j, sigma);
        let fa = match self.mode {
            SimMode::AttitudeOnly => self.params.mass * self.params.gravity,
            SimMode::SixDof => self.hover.thrust(truth, &self.params),
        };
        Evaluated {
            inputs: Inputs { fa, tau },
            reference,
            es: error_state(&meas, &reference, Sigma::Plus, self.gains.kn()),
        }
    }

    /// Runs to `t_final`. `rng` is required when noise is configured.
    pub fn run(&self, mut rng: Option<&mut dyn RngCore>) -> Result<RunLog> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_final must be >= 0, got {}",
                self.t_final
            )));
        }
        if self.noise.is_some() && rng.is_none() {
            return Err(Error::InvalidArgument(
                "noise configured without an RNG".into(),
            ));
        }
        self.params.validate()?;

        let n = self.steps();
        let j = self.params.inertia;
        let mut rows = Vec::with_capacity(n + 1);
        let mut sw = SwitchState::new();
        let mut state = self.initial;

        for k in 0..=n {
            let t = k as f64 * self.dt;
            let pert = match (&self.noise, rng.as_deref_mut()) {
                (Some(noise), Some(r)) => Perturbation::draw(noise, r)?,
                _ => Perturbation::NONE,
            };

            // σ is refreshed from the current sample before the torque is formed
            let probe = self.evaluate(t, &state, &pert, sw.sigma);
            let (qe, we) = (probe.es.qe, probe.es.we);
            let sigma = match self.law {
                ControlLaw::Switching => {
                    let lam = lyapunov_sample(&qe, we, sw.sigma, &self.gains, &j);
                    let kq = *self.gains.kq();
                    let kn = self.gains.kn();
                    sw.update(lam.lambda, self.gains.delta(), t, |s| {
                        lyapunov_v(s, &qe, nu_for(s, &qe, we, kn), &kq, &j)
                    })?;
                    sw.sigma
                }
                ControlLaw::Benchmark => Sigma::of(qe.w()),
                ControlLaw::Continuous => Sigma::Plus,
            };
            let now = if self.law == ControlLaw::Switching {
                self.evaluate(t, &state, &pert, sigma)
            } else {
                probe
            };

            let lam = lyapunov_sample(&qe, we, sigma, &self.gains, &j);
            rows.push(LogRow {
                t,
                state,
                reference: now.reference,
                tau: now.inputs.tau,
                sigma,
                lambda: lam.lambda,
                v_plus: lam.v_plus,
                v_minus: lam.v_minus,
                psi: state.q.yaw(),
                psi_d: now.reference.qd.yaw(),
                fa: now.inputs.fa,
            });
            if k == n {
                break;
            }

            let held = now.inputs;
            state = match self.update {
                ControlUpdate::ZeroOrderHold => {
                    step_rk4(&state, |_, _| held, &self.params, t, self.dt, self.mode)?
                }
                ControlUpdate::Continuous => step_rk4(
                    &state,
                    // stages past the step start see the reference from the left
                    |ts, st| {
                        let raw = if ts > t {
                            self.reference.sample_left(ts)
                        } else {
                            self.reference.sample(ts)
                        };
                        self.evaluate_with(raw, st, &pert, sigma).inputs
                    },
                    &self.params,
                    t,
                    self.dt,
                    self.mode,
                )?,
            };
        }

        Ok(RunLog {
            controller: self.law,
            dt: self.dt,
            t0: self.t0,
            rows,
            switches: sw.events,
        })
    }
}

/// Initial state of every experiment: level and at rest, at the hover
/// altitude in 6-DOF mode.
pub fn initial_state(cfg: &ExperimentConfig) -> BodyState {
    let z = match cfg.mode {
        SimMode::AttitudeOnly => 0.0,
        SimMode::SixDof => cfg.hover.z_ref,
    };
    BodyState::at_rest(Vec3::new(0.0, 0.0, z))
}

pub fn gains_for(cfg: &ExperimentConfig, law: ControlLaw) -> Gains {
    match law {
        ControlLaw::Switching => cfg.gains_switching,
        ControlLaw::Benchmark | ControlLaw::Continuous => cfg.gains_benchmark,
    }
}

/// Runs the three-stage maneuver of `cfg` with `law`, drawing noise from `rng`.
pub fn run_experiment_with_rng(
    cfg: &ExperimentConfig,
    law: ControlLaw,
    rng: Option<&mut dyn RngCore>,
) -> Result<RunLog> {
    cfg.validate()?;
    let profile = cfg.yaw_profile()?;
    let (t0, _) = cfg.metric_window()?;
    let sim = Simulation {
        params: cfg.params,
        law,
        gains: gains_for(cfg, law),
        reference: &profile,
        initial: initial_state(cfg),
        dt: cfg.dt,
        t_final: profile.t_final(),
        mode: cfg.mode,
        update: cfg.control_update,
        hover: cfg.hover,
        noise: cfg.noise,
        t0,
    };
    sim.run(rng)
}

/// Runs the three-stage maneuver. Noise, if configured, is drawn from
/// stream 0 of the configured seed.
pub fn run_experiment(cfg: &ExperimentConfig, law: ControlLaw) -> Result<RunLog> {
    let mut rng = run_rng(cfg.rng_seed, 0);
    run_experiment_with_rng(cfg, law, Some(&mut rng))
}

/// Independent RNG for run number `index` under `seed`.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::ConstantReference;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    #[test]
    fn row_count_and_grid() {
        let c = cfg();
        let log = run_experiment(&c, ControlLaw::Benchmark).unwrap();
        let tf = c.yaw_profile().unwrap().t_final();
        assert_eq!(log.len(), (tf / c.dt).ceil() as usize + 1);
        for (k, r) in log.rows.iter().enumerate() {
            assert_eq!(r.t, k as f64 * c.dt);
        }
        assert!(log.rows.last().unwrap().t >= tf - 1e-12);
    }

    #[test]
    fn zero_length_run_has_one_row() {
        let p = RigidBodyParams::crazyflie();
        let r = ConstantReference(ReferenceSample::HOLD_LEVEL);
        let g = Gains::switching_default(&p.inertia);
        let sim = Simulation::new(
            p,
            ControlLaw::Switching,
            g,
            &r,
            BodyState::at_rest(Vec3::ZERO),
            0.0,
        );
        assert_eq!(sim.run(None).unwrap().len(), 1);
    }

    #[test]
    fn noise_requires_rng() {
        let mut c = cfg();
        c.noise = Some(NoiseConfig::default());
        assert!(run_experiment_with_rng(&c, ControlLaw::Switching, None).is_err());
        assert!(run_experiment(&c, ControlLaw::Switching).is_ok());
    }

    #[test]
    fn pure_hover_holds() {
        let mut c = cfg();
        c.profile.w0 = Vec3::ZERO;
        c.profile.psi0_deg = 0.0;
        for law in [ControlLaw::Benchmark, ControlLaw::Switching] {
            let log = run_experiment(&c, law).unwrap();
            for r in &log.rows {
                assert!(r.state.q.v().norm() < 1e-6);
                assert_eq!(r.sigma, Sigma::Plus);
            }
            assert_eq!(log.switch_count(), 0);
        }
    }

    #[test]
    fn six_dof_holds_altitude() {
        let mut c = cfg();
        c.mode = SimMode::SixDof;
        let log = run_experiment(&c, ControlLaw::Switching).unwrap();
        for r in &log.rows {
            assert!(
                (r.state.r.z - c.hover.z_ref).abs() < 1e-3,
                "z = {}",
                r.state.r.z
            );
            assert!(r.fa > 0.0);
        }
    }

    #[test]
    fn lambda_matches_lyapunov_difference() {
        let log = run_experiment(&cfg(), ControlLaw::Switching).unwrap();
        for r in &log.rows {
            assert!((r.lambda - (r.v_minus - r.v_plus)).abs() <= 1e-9);
        }
    }

    #[test]
    fn determinism_with_noise() {
        let mut c = cfg();
        c.noise = Some(NoiseConfig::default());
        c.rng_seed = 7;
        let a = run_experiment(&c, ControlLaw::Switching).unwrap();
        let b = run_experiment(&c, ControlLaw::Switching).unwrap();
        assert_eq!(a, b);
        c.rng_seed = 8;
        let d = run_experiment(&c, ControlLaw::Switching).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn noise_leaves_plant_unperturbed_at_start() {
        let mut c = cfg();
        c.noise = Some(NoiseConfig::default());
        let log = run_experiment(&c, ControlLaw::Benchmark).unwrap();
        assert_eq!(log.rows[0].state, initial_state(&c));
        // but the controller saw noise, so it pushed back
        assert!(log.rows[0].tau.norm() > 0.0);
    }

    #[test]
    fn unwrap_removes_jumps() {
        use std::f64::consts::PI;
        let u = unwrap_angles([3.0, -3.0, -2.5, 3.1]);
        assert!((u[1] - (2.0 * PI - 3.0)).abs() < 1e-12);
        assert!((u[2] - (2.0 * PI - 2.5)).abs() < 1e-12);
        assert_eq!(u[3], 3.1);
        assert_eq!(unwrap_angles(std::iter::empty()).len(), 0);
    }

    #[test]
    fn index_lookup() {
        let log = run_experiment(&cfg(), ControlLaw::Benchmark).unwrap();
        assert_eq!(log.index_at(0.0), Some(0));
        assert_eq!(log.index_at(0.002), Some(1));
        assert_eq!(log.index_at(0.0015), Some(1));
        assert_eq!(log.index_at(1e9), None);
    }
}
