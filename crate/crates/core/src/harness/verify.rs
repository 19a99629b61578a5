//! Numerical checks of the controller and integrator properties. Each
//! check reports what it measured against which tolerance; failures are
//! entries in the report, never errors.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::control::{ControlLaw, Gains, Sigma};
use crate::diag::Diag3;
use crate::dynamics::{step_rk4, BodyState, Inputs, RigidBodyParams, SimMode};
use crate::harness::config::{ControlUpdate, ExperimentConfig, IcPair};
use crate::harness::emit::summary_to_csv;
use crate::harness::metrics::pfm_for;
use crate::harness::sim::{run_experiment, run_rng, RunLog, Simulation};
use crate::harness::sweep::{sweep, Execution};
use crate::quat::{attitude_error, Quaternion, UnitQuaternion, Vec3};
use crate::reference::{ConstantReference, ReferenceSample};
use crate::swlyap::{
    fixed_point_residuals, in_region_of_attraction, lambda_fn, lyapunov_v, lyapunov_vdot,
    next_sigma, nu_for, SwitchState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sample sizes and seeds for [`verify_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub random_states: usize,
    pub trajectories: usize,
    /// Per-axis bound of the random initial body rates, rad/s.
    pub rate_bound: f64,
    pub horizon: f64,
    pub determinism: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            random_states: 100_000,
            trajectories: 100,
            rate_bound: 1.0,
            horizon: 3.0,
            determinism: true,
        }
    }
}

fn check(
    name: &str,
    passed: bool,
    measured: f64,
    tolerance: f64,
    detail: String,
    start: Instant,
) -> Check {
    Check {
        name: name.to_string(),
        passed,
        measured,
        tolerance,
        detail,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

/// Uniformly distributed on the unit 3-sphere.
pub fn random_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
    loop {
        let q = Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Ok(u) = UnitQuaternion::normalize(q) {
            return u;
        }
    }
}

pub fn random_vec<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-bound..=bound),
        rng.random_range(-bound..=bound),
        rng.random_range(-bound..=bound),
    )
}

/// σ selected at the first update from `(q_e, ω_e)`, starting from `+1`.
pub fn initial_sigma(qe: &UnitQuaternion, we: Vec3, g: &Gains, j: &Diag3) -> Sigma {
    next_sigma(Sigma::Plus, lambda_fn(qe, we, g.kq(), j, g.kn()), g.delta())
}

/// A state with the level attitude as reference that lies in `{V_σ < 4}`
/// for the σ the switching controller picks first. Rejection sampling over
/// uniform attitudes and rates bounded by `rate_bound`.
pub fn random_state_in_region<R: Rng + ?Sized>(
    rng: &mut R,
    g: &Gains,
    j: &Diag3,
    rate_bound: f64,
) -> BodyState {
    loop {
        let q = random_unit_quaternion(rng);
        let w = random_vec(rng, rate_bound);
        let qe = attitude_error(&q, &UnitQuaternion::IDENTITY);
        let sigma = initial_sigma(&qe, -w, g, j);
        let v = lyapunov_v(sigma, &qe, nu_for(sigma, &qe, -w, g.kn()), g.kq(), j);
        if in_region_of_attraction(v) {
            return BodyState::with_attitude(q, w);
        }
    }
}

const LEVEL: ConstantReference = ConstantReference(ReferenceSample::HOLD_LEVEL);

/// Regulation to the level attitude with the controller evaluated at every
/// integrator stage.
pub fn regulation_run(
    params: &RigidBodyParams,
    law: ControlLaw,
    gains: &Gains,
    initial: BodyState,
    dt: f64,
    horizon: f64,
) -> crate::error::Result<RunLog> {
    let mut sim = Simulation::new(*params, law, *gains, &LEVEL, initial, horizon);
    sim.dt = dt;
    sim.update = ControlUpdate::Continuous;
    sim.run(None)
}

/// `V` of the σ that was active at each row.
pub fn active_v(log: &RunLog) -> Vec<f64> {
    log.rows
        .iter()
        .map(|r| match r.sigma {
            Sigma::Plus => r.v_plus,
            Sigma::Minus => r.v_minus,
        })
        .collect()
}

/// Analytic `V̇` of the active σ at each row.
pub fn active_vdot(log: &RunLog, g: &Gains) -> Vec<f64> {
    log.rows
        .iter()
        .map(|r| {
            let qe = attitude_error(&r.state.q, &r.reference.qd);
            let we = r.reference.wd - r.state.w;
            let nu = nu_for(r.sigma, &qe, we, g.kn());
            lyapunov_vdot(r.sigma, &qe, nu, g.kq(), g.kw(), g.kn())
        })
        .collect()
}

/// Per-trajectory Lyapunov statistics along a switching run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecreaseStats {
    pub max_vdot: f64,
    /// Largest `V(t_{k+1}) - V(t_k)` with σ unchanged.
    pub max_increase: f64,
    /// Share of interior steps, away from switches, where the centered
    /// difference of `V` is within `fd_tol` of the analytic `V̇`.
    pub fd_pass_fraction: f64,
    pub fd_max_error: f64,
}

pub fn decrease_stats(log: &RunLog, g: &Gains, fd_tol: f64) -> DecreaseStats {
    let v = active_v(log);
    let vd = active_vdot(log, g);
    let rows = &log.rows;
    let n = rows.len();
    let mut max_increase = f64::NEG_INFINITY;
    for k in 0..n.saturating_sub(1) {
        if rows[k].sigma == rows[k + 1].sigma {
            max_increase = max_increase.max(v[k + 1] - v[k]);
        }
    }
    let (mut ok, mut total, mut worst) = (0usize, 0usize, 0.0f64);
    for k in 1..n.saturating_sub(1) {
        if rows[k - 1].sigma != rows[k].sigma || rows[k + 1].sigma != rows[k].sigma {
            continue;
        }
        let fd = (v[k + 1] - v[k - 1]) / (rows[k + 1].t - rows[k - 1].t);
        let err = (fd - vd[k]).abs();
        worst = worst.max(err);
        total += 1;
        if err <= fd_tol {
            ok += 1;
        }
    }
    DecreaseStats {
        max_vdot: vd.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_increase,
        fd_pass_fraction: if total == 0 {
            1.0
        } else {
            ok as f64 / total as f64
        },
        fd_max_error: worst,
    }
}

pub fn check_lambda_identity(g: &Gains, j: &Diag3, n: usize, seed: u64) -> Check {
    let start = Instant::now();
    let mut rng = run_rng(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let qe = random_unit_quaternion(&mut rng);
        let we = random_vec(&mut rng, 10.0);
        let vp = lyapunov_v(
            Sigma::Plus,
            &qe,
            nu_for(Sigma::Plus, &qe, we, g.kn()),
            g.kq(),
            j,
        );
        let vm = lyapunov_v(
            Sigma::Minus,
            &qe,
            nu_for(Sigma::Minus, &qe, we, g.kn()),
            g.kq(),
            j,
        );
        let lam = lambda_fn(&qe, we, g.kq(), j, g.kn());
        worst = worst.max((lam - (vm - vp)).abs());
    }
    let tol = 1e-10;
    check(
        "lambda_identity",
        worst <= tol,
        worst,
        tol,
        format!("max |lambda - (V- - V+)| over {n} random states"),
        start,
    )
}

pub fn check_fixed_points(g: &Gains, j: &Diag3) -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for sigma in [Sigma::Plus, Sigma::Minus] {
        for m in [1.0, -1.0] {
            let qe = UnitQuaternion::normalize(Quaternion::new(m, 0.0, 0.0, 0.0)).unwrap();
            let (a, b, c) = fixed_point_residuals(sigma, &qe, Vec3::ZERO, g, j);
            worst = worst.max(a.abs()).max(b.max_abs()).max(c.max_abs());
        }
    }
    let tol = 1e-14;
    check(
        "fixed_points",
        worst <= tol,
        worst,
        tol,
        "largest equilibrium residual at q_e = (+-1, 0) with nu = 0, both sigma".into(),
        start,
    )
}

/// V̇ sign, monotonicity between switches, and the finite-difference match
/// along switching runs from random states in the region of attraction.
pub fn check_lyapunov_trajectories(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Vec<Check> {
    let start = Instant::now();
    let g = cfg.gains_switching;
    let j = cfg.params.inertia;
    let mut rng = run_rng(opts.seed, 2);
    let mut stats = vec![];
    let mut failures = vec![];
    for i in 0..opts.trajectories {
        let s0 = random_state_in_region(&mut rng, &g, &j, opts.rate_bound);
        match regulation_run(
            &cfg.params,
            ControlLaw::Switching,
            &g,
            s0,
            cfg.dt,
            opts.horizon,
        ) {
            Ok(log) => stats.push(decrease_stats(&log, &g, 1e-4)),
            Err(e) => failures.push(format!("trajectory {i}: {e}")),
        }
    }
    let max_vdot = stats
        .iter()
        .map(|s| s.max_vdot)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_inc = stats
        .iter()
        .map(|s| s.max_increase)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_frac = stats
        .iter()
        .map(|s| s.fd_pass_fraction)
        .fold(f64::INFINITY, f64::min);
    let below = stats.iter().filter(|s| s.fd_pass_fraction < 0.99).count();
    let ok_runs = failures.is_empty();
    let note = if ok_runs {
        String::new()
    } else {
        format!("; failed runs: {}", failures.join(", "))
    };
    vec![
        check(
            "vdot_nonpositive",
            ok_runs && max_vdot <= 0.0,
            max_vdot,
            0.0,
            format!("max analytic V-dot over {} trajectories{note}", stats.len()),
            start,
        ),
        check(
            "v_nonincreasing",
            ok_runs && max_inc <= 1e-6,
            max_inc,
            1e-6,
            format!("max step increase of the active V between switches{note}"),
            start,
        ),
        check(
            "vdot_finite_difference",
            ok_runs && below == 0,
            min_frac,
            1e-4,
            format!(
                "smallest per-trajectory share of steps with |centered diff - V-dot| <= 1e-4 \
                 (need >= 0.99); {below} of {} trajectories below",
                stats.len()
            ),
            start,
        ),
    ]
}

/// `‖q_e − q_e†‖` with `q_e† = (−1, 0, 0, 0)`.
fn distance_from_antipode(log: &RunLog, k: usize) -> f64 {
    let r = &log.rows[k];
    let qe = attitude_error(&r.state.q, &r.reference.qd).as_quaternion();
    (qe - Quaternion::new(-1.0, 0.0, 0.0, 0.0)).norm()
}

/// The smooth law with benchmark gains: convergence to `q_e = (1, 0)` from
/// states with `m_e > 0`, and monotone departure from `q_e = (−1, 0)`.
pub fn check_benchmark_equilibria(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Vec<Check> {
    let g = cfg.gains_benchmark;
    let p = cfg.params;

    let start = Instant::now();
    let mut rng = run_rng(opts.seed, 3);
    let mut worst_n = 0.0f64;
    let mut errors = vec![];
    for i in 0..opts.trajectories {
        let mut qe = random_unit_quaternion(&mut rng);
        if qe.w() <= 0.0 {
            qe = qe.negate();
        }
        let s0 = BodyState::with_attitude(qe.inverse(), random_vec(&mut rng, opts.rate_bound));
        match regulation_run(&p, ControlLaw::Continuous, &g, s0, cfg.dt, opts.horizon) {
            Ok(log) => {
                let last = log.rows.last().unwrap();
                let qe = attitude_error(&last.state.q, &last.reference.qd);
                worst_n = worst_n.max(if qe.w() > 0.0 {
                    qe.v().norm()
                } else {
                    f64::INFINITY
                });
            }
            Err(e) => errors.push(format!("trajectory {i}: {e}")),
        }
    }
    let converge = check(
        "benchmark_converges",
        errors.is_empty() && worst_n < 1e-3,
        worst_n,
        1e-3,
        format!(
            "max |n_e({} s)| over {} starts with m_e(0) > 0{}",
            opts.horizon,
            opts.trajectories,
            if errors.is_empty() {
                String::new()
            } else {
                format!("; {}", errors.join(", "))
            }
        ),
        start,
    );

    let start = Instant::now();
    let mut rng = run_rng(opts.seed, 4);
    let eps = 1e-3;
    let window = 0.2;
    let starts = 20;
    let mut worst_step = f64::NEG_INFINITY;
    let mut end_n = 0.0f64;
    let mut errors = vec![];
    for i in 0..starts {
        let axis = {
            let v = Vec3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            v / v.norm()
        };
        let antipode = UnitQuaternion::normalize(Quaternion::new(-1.0, 0.0, 0.0, 0.0)).unwrap();
        let qe0 = antipode * UnitQuaternion::from_rotation_vector(axis * eps);
        let s0 = BodyState::with_attitude(qe0.inverse(), Vec3::ZERO);
        match regulation_run(
            &p,
            ControlLaw::Continuous,
            &g,
            s0,
            cfg.dt,
            opts.horizon.max(5.0),
        ) {
            Ok(log) => {
                let kmax = log.index_at(window).unwrap_or(log.len() - 1);
                for k in 1..=kmax {
                    // negative means the distance grew over the step
                    worst_step = worst_step
                        .max(distance_from_antipode(&log, k - 1) - distance_from_antipode(&log, k));
                }
                let last = log.rows.last().unwrap();
                let qe = attitude_error(&last.state.q, &last.reference.qd);
                end_n = end_n.max(if qe.w() > 0.0 {
                    qe.v().norm()
                } else {
                    f64::INFINITY
                });
            }
            Err(e) => errors.push(format!("start {i}: {e}")),
        }
    }
    let depart = check(
        "benchmark_departs_antipode",
        errors.is_empty() && worst_step < 0.0 && end_n < 1e-3,
        worst_step,
        0.0,
        format!(
            "max one-step decrease of |q_e - (-1,0)| over the first {window} s from {starts} \
             starts at {eps} rad (must be < 0); all then reach q_e = (1,0) with max |n_e| = {end_n:.3e}{}",
            if errors.is_empty() { String::new() } else { format!("; {}", errors.join(", ")) }
        ),
        start,
    );
    vec![converge, depart]
}

/// Switching regulation from random states in the region of attraction.
pub fn check_switching_convergence(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Check {
    let start = Instant::now();
    let g = cfg.gains_switching;
    let j = cfg.params.inertia;
    let mut rng = run_rng(opts.seed, 5);
    let (mut worst_n, mut worst_nu, mut violations) = (0.0f64, 0.0f64, 0usize);
    let mut errors = vec![];
    for i in 0..opts.trajectories {
        let s0 = random_state_in_region(&mut rng, &g, &j, opts.rate_bound);
        match regulation_run(
            &cfg.params,
            ControlLaw::Switching,
            &g,
            s0,
            cfg.dt,
            opts.horizon,
        ) {
            Ok(log) => {
                let last = log.rows.last().unwrap();
                let qe = attitude_error(&last.state.q, &last.reference.qd);
                let we = last.reference.wd - last.state.w;
                worst_n = worst_n.max(qe.v().norm());
                worst_nu = worst_nu.max(nu_for(last.sigma, &qe, we, g.kn()).norm());
                let sw = SwitchState {
                    sigma: last.sigma,
                    events: log.switches.clone(),
                };
                violations += sw.check_eq30(g.delta()).len();
            }
            Err(e) => errors.push(format!("trajectory {i}: {e}")),
        }
    }
    let worst = worst_n.max(worst_nu);
    check(
        "switching_converges",
        errors.is_empty() && worst < 1e-3 && violations == 0,
        worst,
        1e-3,
        format!(
            "max(|n_e|, |nu|) at {} s over {} starts; {violations} switch-decrease violations{}",
            opts.horizon,
            opts.trajectories,
            if errors.is_empty() {
                String::new()
            } else {
                format!("; {}", errors.join(", "))
            }
        ),
        start,
    )
}

/// Behavior of both controllers on one maneuver.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverOutcome {
    pub t0: f64,
    pub lambda_at_t0: f64,
    pub first_switch: Option<(f64, Sigma)>,
    pub switches: usize,
    /// Unwrapped yaw at the end minus unwrapped yaw at `t0`.
    pub switching_yaw_travel: f64,
    pub benchmark_yaw_travel: f64,
    pub switching_crosses_pi: bool,
    pub benchmark_crosses_pi: bool,
}

fn yaw_after(log: &RunLog, t0: f64) -> (f64, bool) {
    let psi = log.psi_unwrapped();
    let i0 = log.index_at(t0).unwrap_or(0);
    let travel = psi.last().copied().unwrap_or(0.0) - psi[i0];
    let lo = psi[i0..].iter().copied().fold(f64::INFINITY, f64::min);
    let hi = psi[i0..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // the wrapped yaw passes ±180° iff the unwrapped one reaches an odd multiple of π
    let pi = std::f64::consts::PI;
    let first_odd = ((lo / pi - 1.0) / 2.0).ceil();
    let last_odd = ((hi / pi - 1.0) / 2.0).floor();
    (travel, first_odd <= last_odd)
}

pub fn maneuver_outcome(switching: &RunLog, benchmark: &RunLog) -> ManeuverOutcome {
    let t0 = switching.t0;
    let i0 = switching.index_at(t0).unwrap_or(0);
    let (st, sc) = yaw_after(switching, t0);
    let (bt, bc) = yaw_after(benchmark, t0);
    ManeuverOutcome {
        t0,
        lambda_at_t0: switching.rows[i0].lambda,
        first_switch: switching
            .switches
            .iter()
            .find(|e| e.t >= t0 - 1e-12)
            .map(|e| (e.t, e.to)),
        switches: switching.switch_count(),
        switching_yaw_travel: st,
        benchmark_yaw_travel: bt,
        switching_crosses_pi: sc,
        benchmark_crosses_pi: bc,
    }
}

pub fn check_unwinding_case(cfg: &ExperimentConfig) -> Vec<Check> {
    let start = Instant::now();
    let c = cfg.with_ic(IcPair::new(3.0, 120.0));
    let runs = run_experiment(&c, ControlLaw::Switching)
        .and_then(|s| run_experiment(&c, ControlLaw::Benchmark).map(|b| (s, b)));
    let (sw, bm) = match runs {
        Ok(r) => r,
        Err(e) => {
            return vec![check(
                "unwinding_case",
                false,
                f64::NAN,
                0.05,
                format!("run failed: {e}"),
                start,
            )];
        }
    };
    let o = maneuver_outcome(&sw, &bm);
    let flip_delay = match o.first_switch {
        Some((t, Sigma::Minus)) => t - o.t0,
        _ => f64::INFINITY,
    };
    let target = -3.196;
    let lam_err = (o.lambda_at_t0 - target).abs();
    let long_way = o.switching_yaw_travel > 0.0 && o.switching_crosses_pi;
    let reverses = o.benchmark_yaw_travel < 0.0 && !o.benchmark_crosses_pi;
    let norm_drift = sw
        .rows
        .iter()
        .chain(&bm.rows)
        .map(|r| (r.state.q.as_quaternion().norm() - 1.0).abs())
        .fold(0.0, f64::max);
    vec![
        check(
            "unwinding_case_lambda",
            lam_err <= 0.05,
            o.lambda_at_t0,
            0.05,
            format!("lambda at the first sample after t0 = {:.4} s; expected {target}", o.t0),
            start,
        ),
        check(
            "unwinding_case_switch",
            flip_delay <= 0.05,
            flip_delay,
            0.05,
            "delay from t0 to the switch to sigma = -1".into(),
            start,
        ),
        check(
            "unwinding_case_paths",
            long_way && reverses,
            o.switching_yaw_travel,
            0.0,
            format!(
                "switching yaw travel {:.3} rad (crosses 180 deg: {}), benchmark travel {:.3} rad (crosses: {})",
                o.switching_yaw_travel, o.switching_crosses_pi, o.benchmark_yaw_travel, o.benchmark_crosses_pi
            ),
            start,
        ),
        check(
            "no_chattering",
            o.switches <= 2,
            o.switches as f64,
            2.0,
            "switch count of the switching run".into(),
            start,
        ),
        check(
            "quaternion_norm",
            norm_drift <= 1e-9,
            norm_drift,
            1e-9,
            "max | |q| - 1 | over both runs".into(),
            start,
        ),
    ]
}

/// Largest relative difference `(switching - benchmark) / benchmark` of
/// either metric, per pair.
pub fn pfm_comparison(
    cfg: &ExperimentConfig,
    pair: IcPair,
) -> crate::error::Result<[(f64, f64); 2]> {
    let c = cfg.with_ic(pair);
    let s = pfm_for(&run_experiment(&c, ControlLaw::Switching)?, &c)?;
    let b = pfm_for(&run_experiment(&c, ControlLaw::Benchmark)?, &c)?;
    Ok([(s.gamma_tau, b.gamma_tau), (s.gamma_p, b.gamma_p)])
}

pub fn check_pfm_direction(
    cfg: &ExperimentConfig,
    disagreeing: &[IcPair],
    agreeing: &[IcPair],
) -> Check {
    let start = Instant::now();
    let mut notes = vec![];
    let mut ok = true;
    let mut worst_agree = 0.0f64;
    for (pairs, better) in [(disagreeing, true), (agreeing, false)] {
        for &pair in pairs {
            match pfm_comparison(cfg, pair) {
                Ok(m) => {
                    for (name, (s, b)) in ["gamma_tau", "gamma_p"].iter().zip(m) {
                        let rel = (s - b) / b;
                        notes.push(format!(
                            "{} {name}: {s:.4e} vs {b:.4e} ({:+.1}%)",
                            pair.label(),
                            100.0 * rel
                        ));
                        if better {
                            ok &= s < b;
                        } else {
                            worst_agree = worst_agree.max(rel.abs());
                            ok &= rel.abs() < 0.15;
                        }
                    }
                }
                Err(e) => {
                    ok = false;
                    notes.push(format!("{}: {e}", pair.label()));
                }
            }
        }
    }
    check(
        "pfm_direction",
        ok,
        worst_agree,
        0.15,
        format!(
            "switching vs benchmark; disagreeing pairs must be strictly lower, agreeing within 15%: {}",
            notes.join("; ")
        ),
        start,
    )
}

/// Torque-free rotational energy drift over `horizon` from a tumbling start.
pub fn energy_drift(
    params: &RigidBodyParams,
    w0: Vec3,
    dt: f64,
    horizon: f64,
) -> crate::error::Result<f64> {
    let mut s = BodyState::with_attitude(UnitQuaternion::IDENTITY, w0);
    let e0 = params.rotational_energy(w0);
    let n = (horizon / dt).round() as usize;
    let mut worst = 0.0f64;
    for k in 0..n {
        s = step_rk4(
            &s,
            |_, _| Inputs::default(),
            params,
            k as f64 * dt,
            dt,
            SimMode::AttitudeOnly,
        )?;
        worst = worst.max((params.rotational_energy(s.w) - e0).abs() / e0);
    }
    Ok(worst)
}

/// Observed convergence order of the closed-loop switching regulation
/// from `initial`, comparing steps `dt`, `dt/2`, `dt/4` with a `dt/32`
/// reference at `horizon`. Returns the two successive order estimates.
pub fn rk4_order(
    params: &RigidBodyParams,
    g: &Gains,
    initial: BodyState,
    dt: f64,
    horizon: f64,
) -> crate::error::Result<(f64, f64)> {
    let end = |h: f64| -> crate::error::Result<BodyState> {
        let log = regulation_run(params, ControlLaw::Switching, g, initial, h, horizon)?;
        Ok(log.rows.last().unwrap().state)
    };
    let reference = end(dt / 32.0)?;
    let err = |s: BodyState| {
        (s.q.as_quaternion() - reference.q.as_quaternion())
            .norm()
            .max((s.w - reference.w).norm())
    };
    let e1 = err(end(dt)?);
    let e2 = err(end(dt / 2.0)?);
    let e4 = err(end(dt / 4.0)?);
    Ok(((e1 / e2).log2(), (e2 / e4).log2()))
}

/// Initial state of the order check: 60° about a skewed axis with a
/// moderate tumble, which the switching law regulates without switching.
pub fn order_check_state() -> BodyState {
    let axis = Vec3::new(1.0, -2.0, 2.0) / 3.0;
    let q = UnitQuaternion::from_axis_angle(axis, 60f64.to_radians()).unwrap();
    BodyState::with_attitude(q, Vec3::new(0.5, -0.3, 0.8))
}

pub fn check_integrator(cfg: &ExperimentConfig) -> Vec<Check> {
    let start = Instant::now();
    let p = cfg.params;
    let energy = check_result(
        "energy_conservation",
        energy_drift(&p, Vec3::new(3.0, -2.0, 5.0), cfg.dt, 3.0),
        1e-8,
        "max relative torque-free energy drift over 3 s from w = (3, -2, 5) rad/s",
        start,
    );
    let start = Instant::now();
    let order = match rk4_order(&p, &cfg.gains_switching, order_check_state(), cfg.dt, 1.0) {
        Ok((a, b)) => check(
            "rk4_order",
            (a - 4.0).abs() < 0.3 && (b - 4.0).abs() < 0.3,
            b,
            0.3,
            format!("observed orders {a:.3} (dt -> dt/2) and {b:.3} (dt/2 -> dt/4); expected 4"),
            start,
        ),
        Err(e) => check(
            "rk4_order",
            false,
            f64::NAN,
            0.3,
            format!("run failed: {e}"),
            start,
        ),
    };
    vec![energy, order]
}

fn check_result(
    name: &str,
    r: crate::error::Result<f64>,
    tol: f64,
    what: &str,
    start: Instant,
) -> Check {
    match r {
        Ok(v) => check(name, v <= tol, v, tol, what.into(), start),
        Err(e) => check(name, false, f64::NAN, tol, format!("{what}: {e}"), start),
    }
}

/// Repeated sweeps, serial and parallel, must give identical CSV bytes.
pub fn check_determinism(cfg: &ExperimentConfig) -> Check {
    let start = Instant::now();
    let mut c = cfg.clone();
    c.repeats = 2;
    c.noise = Some(c.noise.unwrap_or_default());
    let pairs = [IcPair::new(3.0, 120.0)];
    let result = (|| -> crate::error::Result<bool> {
        let a = summary_to_csv(&sweep(&c, &pairs, Execution::Parallel)?);
        let b = summary_to_csv(&sweep(&c, &pairs, Execution::Parallel)?);
        let s = summary_to_csv(&sweep(&c, &pairs, Execution::Serial)?);
        Ok(a == b && a == s)
    })();
    match result {
        Ok(same) => check(
            "sweep_determinism",
            same,
            if same { 0.0 } else { 1.0 },
            0.0,
            "noisy sweep summaries: two parallel runs and one serial run compared byte for byte"
                .into(),
            start,
        ),
        Err(e) => check(
            "sweep_determinism",
            false,
            f64::NAN,
            0.0,
            format!("sweep failed: {e}"),
            start,
        ),
    }
}

pub fn verify(cfg: &ExperimentConfig) -> VerifyReport {
    verify_with(cfg, &VerifyOptions::default())
}

pub fn verify_with(cfg: &ExperimentConfig, opts: &VerifyOptions) -> VerifyReport {
    let j = cfg.params.inertia;
    let mut checks = vec![
        check_lambda_identity(&cfg.gains_switching, &j, opts.random_states, opts.seed),
        check_fixed_points(&cfg.gains_switching, &j),
    ];
    checks.extend(check_lyapunov_trajectories(cfg, opts));
    checks.extend(check_benchmark_equilibria(cfg, opts));
    checks.push(check_switching_convergence(cfg, opts));
    checks.extend(check_unwinding_case(cfg));
    checks.push(check_pfm_direction(
        cfg,
        &[IcPair::new(3.0, 120.0), IcPair::new(4.0, 90.0)],
        &[IcPair::new(1.0, 60.0), IcPair::new(0.5, 45.0)],
    ));
    checks.extend(check_integrator(cfg));
    if opts.determinism {
        checks.push(check_determinism(cfg));
    }
    VerifyReport { checks }
}
