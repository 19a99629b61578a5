use std::f64::consts::PI;

use attswitch::harness::emit::{parse_numeric_csv, read_run_csv, run_to_csv, CSV_COLUMNS};
use attswitch::harness::svg::{run_svg, RunSeries};
use attswitch::harness::*;
use attswitch::*;

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn stage_one_and_two_are_tracked_by_both_controllers() {
    let c = ExperimentConfig::default();
    let profile = c.yaw_profile().unwrap();
    for law in [ControlLaw::Benchmark, ControlLaw::Switching] {
        let log = run_experiment(&c, law).unwrap();
        for r in &log.rows {
            if r.t < profile.t_hover() {
                assert!(r.state.q.v().norm() < 1e-12, "{law} hover at t = {}", r.t);
            }
            // steady state of the spin stage
            if r.t > profile.t_hover() + 0.3 && r.t < profile.stage3_start() {
                let err = wrap(r.psi - r.psi_d).abs();
                assert!(err < 5f64.to_radians(), "{law} at t = {}: {err}", r.t);
                assert_eq!(r.sigma, Sigma::Plus);
            }
        }
    }
}

#[test]
fn switching_unwinds_and_benchmark_reverses() {
    let c = ExperimentConfig::default();
    let sw = run_experiment(&c, ControlLaw::Switching).unwrap();
    let bm = run_experiment(&c, ControlLaw::Benchmark).unwrap();
    let i0 = sw.index_at(sw.t0).unwrap();
    let (ps, pb) = (sw.psi_unwrapped(), bm.psi_unwrapped());
    // switching keeps turning the same way until a full turn is completed
    assert!((ps.last().unwrap() - 2.0 * PI).abs() < 0.01);
    assert!(ps[i0..].windows(2).all(|w| w[1] >= w[0] - 1e-6));
    // the benchmark turns back to zero
    assert!(pb.last().unwrap().abs() < 0.01);
    assert!(pb[i0..].iter().all(|&p| p < PI));
    assert_eq!(sw.switches.len(), 1);
    assert_eq!(sw.switches[0].to, Sigma::Minus);
    assert!(sw.rows[i0..]
        .iter()
        .skip(2)
        .all(|r| r.sigma == Sigma::Minus));
    // a 120 degree error still has a positive scalar part
    assert!(bm.rows[i0..].iter().all(|r| r.sigma == Sigma::Plus));
}

#[test]
fn lambda_equals_lyapunov_difference_on_every_step() {
    for ic in IcPair::defaults() {
        let c = ExperimentConfig::default().with_ic(ic);
        let log = run_experiment(&c, ControlLaw::Switching).unwrap();
        for r in &log.rows {
            assert!((r.lambda - (r.v_minus - r.v_plus)).abs() <= 1e-9);
        }
    }
}

#[test]
fn metrics_converge_when_the_step_is_halved() {
    // a held torque would make the closed loop itself depend on dt
    // the snap at t0 = 2 lands on a grid point of both step sizes
    let mut c = ExperimentConfig::default().with_ic(IcPair::new(PI / 3.0, 60.0));
    c.control_update = ControlUpdate::Continuous;
    let mut fine = c.clone();
    fine.dt = c.dt / 2.0;
    for law in [ControlLaw::Benchmark, ControlLaw::Switching] {
        let a = run_experiment(&c, law).unwrap();
        let b = run_experiment(&fine, law).unwrap();
        // smooth segments: the spin stage and the tail after the snap transient
        for (t0, tf) in [(1.5, 1.9), (a.t0 + 0.5, a.t0 + 3.0)] {
            let (pa, pb) = (pfm(&a, t0, tf).unwrap(), pfm(&b, t0, tf).unwrap());
            assert!(
                ((pa.gamma_tau - pb.gamma_tau) / pb.gamma_tau).abs() < 1e-3,
                "{law} {pa:?} {pb:?}"
            );
            assert!(
                ((pa.gamma_p - pb.gamma_p) / pb.gamma_p).abs() < 1e-3,
                "{law} {pa:?} {pb:?}"
            );
        }
    }
}

#[test]
fn identical_config_gives_identical_log() {
    let c = ExperimentConfig {
        noise: Some(NoiseConfig::default()),
        rng_seed: 5,
        mode: SimMode::SixDof,
        ..Default::default()
    };
    let a = run_experiment(&c, ControlLaw::Switching).unwrap();
    let b = run_experiment(&c, ControlLaw::Switching).unwrap();
    assert_eq!(run_to_csv(&a), run_to_csv(&b));
}

#[test]
fn noise_spreads_the_sweep_but_not_the_noiseless_one() {
    let pairs = [IcPair::new(3.0, 120.0), IcPair::new(4.0, 90.0)];
    let mut c = ExperimentConfig {
        repeats: 4,
        ..Default::default()
    };
    let quiet = sweep(&c, &pairs, Execution::Parallel).unwrap();
    assert!(quiet
        .cells
        .iter()
        .all(|x| x.gamma_tau.esd == 0.0 && x.gamma_p.esd == 0.0));
    c.noise = Some(NoiseConfig::default());
    let noisy = sweep(&c, &pairs, Execution::Parallel).unwrap();
    for pair in pairs {
        let s = noisy.cell(pair, ControlLaw::Switching).unwrap();
        let b = noisy.cell(pair, ControlLaw::Benchmark).unwrap();
        assert!(s.gamma_tau.esd > 0.0);
        assert!(s.gamma_tau.mean < b.gamma_tau.mean, "{pair:?}");
    }
}

#[test]
fn csv_file_round_trip_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let log = run_experiment(&ExperimentConfig::default(), ControlLaw::Switching).unwrap();
    let path = dir.path().join("run.csv");
    emit_run(&log, Format::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(text.lines().count(), log.len() + 1);
    let table = read_run_csv(&path).unwrap();
    for (row, parsed) in log.rows.iter().zip(&table.rows) {
        assert_eq!(
            row.csv_values().map(f64::to_bits).to_vec(),
            parsed.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
    let series = RunSeries::try_from(&table).unwrap();
    assert_eq!(series, RunSeries::from(&log));
    let svg = run_svg(&series, "switching");
    assert_eq!(svg.matches(r#"<g class="panel">"#).count(), 2);
}

#[test]
fn plot_rejects_csv_without_needed_columns() {
    let t = parse_numeric_csv("t,x\n0,1\n", std::path::Path::new("x.csv")).unwrap();
    assert!(RunSeries::try_from(&t).is_err());
}

#[test]
fn summary_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        repeats: 2,
        ..Default::default()
    };
    let s = sweep(&c, &[IcPair::new(3.0, 120.0)], Execution::Serial).unwrap();
    for f in [Format::Csv, Format::Json, Format::Svg] {
        let p = dir.path().join(format!("summary.{}", f.extension()));
        emit_summary(&s, f, &p).unwrap();
        assert!(std::fs::metadata(&p).unwrap().len() > 100);
    }
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.starts_with(
        "wz,psi0_deg,controller,n,gamma_tau_mean,gamma_tau_esd,gamma_p_mean,gamma_p_esd,status\n"
    ));
    assert_eq!(csv.lines().count(), 3);
    let back: SweepSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(back, s);
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let c = ExperimentConfig {
        dt: 0.0,
        ..Default::default()
    };
    assert!(matches!(
        run_experiment(&c, ControlLaw::Switching),
        Err(Error::InvalidConfig(_))
    ));
    let mut c = ExperimentConfig::default();
    c.profile.t_final = Some(2.0);
    assert!(run_experiment(&c, ControlLaw::Switching).is_err());
}

#[test]
fn blowup_reports_failure_time() {
    let mut c = ExperimentConfig::default();
    let j = c.params.inertia;
    c.gains_benchmark = Gains::new(j.scale(1e9), j.scale(1e9), 10.0, 0.5).unwrap();
    match run_experiment(&c, ControlLaw::Benchmark) {
        Err(Error::NumericalBlowup { t }) => assert!(t > 1.0 && t < 2.0, "{t}"),
        other => panic!("expected blowup, got {:?}", other.map(|l| l.len())),
    }
}
