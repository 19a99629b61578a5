use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attswitch::harness::emit::{read_run_csv, write_json};
use attswitch::harness::svg::{run_svg, RunSeries};
use attswitch::harness::{
    emit_run, emit_summary, pfm_for, run_experiment, sweep, verify_with, Execution,
    ExperimentConfig, Format, IcPair, NoiseConfig, VerifyOptions,
};
use attswitch::{ControlLaw, Error, SimMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "attswitch",
    version,
    about = "Quaternion attitude switching-control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one yaw maneuver and write the time series.
    Run(RunArgs),
    /// Repeat the maneuver over initial-condition pairs and summarize the metrics.
    Sweep(SweepArgs),
    /// Run the numerical invariant checks.
    Verify(VerifyArgs),
    /// Render a run CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Enable measurement noise with the default model when the config has none.
    #[arg(long)]
    noise: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "both")]
    controller: ControllerArg,
    /// Spin rate and snap angle as "<wz>,<psi0_deg>".
    #[arg(long)]
    ic: Option<IcPair>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Pair to include; repeat for several. Defaults to the configured pairs.
    #[arg(long)]
    ic: Vec<IcPair>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Run on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fewer random states and trajectories.
    #[arg(long)]
    quick: bool,
    /// Also write the report as JSON into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Run CSV written by `run`.
    input: PathBuf,
    /// Defaults to the input path with an .svg extension.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ControllerArg {
    Benchmark,
    Switching,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Attitude,
    #[value(name = "6dof")]
    SixDof,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Svg => Format::Svg,
        }
    }
}

enum Failure {
    Core(Error),
    /// Some sweep runs diverged; their messages were already printed.
    Sweep,
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn configure(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = load_config(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.rng_seed = s;
    }
    if let Some(dt) = c.dt {
        cfg.dt = dt;
    }
    if let Some(m) = c.mode {
        cfg.mode = match m {
            ModeArg::Attitude => SimMode::AttitudeOnly,
            ModeArg::SixDof => SimMode::SixDof,
        };
    }
    if c.noise && cfg.noise.is_none() {
        cfg.noise = Some(NoiseConfig::default());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let mut cfg = configure(&a.common)?;
    if let Some(ic) = a.ic {
        cfg = cfg.with_ic(ic);
    }
    let laws: &[ControlLaw] = match a.controller {
        ControllerArg::Benchmark => &[ControlLaw::Benchmark],
        ControllerArg::Switching => &[ControlLaw::Switching],
        ControllerArg::Both => &[ControlLaw::Benchmark, ControlLaw::Switching],
    };
    create_dir(&a.out)?;
    let format = Format::from(a.format);
    for &law in laws {
        let log = run_experiment(&cfg, law)?;
        let m = pfm_for(&log, &cfg)?;
        let path = a
            .out
            .join(format!("run_{}.{}", law.name(), format.extension()));
        emit_run(&log, format, &path)?;
        println!(
            "{:<10} switches {:>2}  gamma_tau {:.6e}  gamma_p {:.6e}  window [{:.4}, {:.4}]  -> {}",
            law.name(),
            log.switch_count(),
            m.gamma_tau,
            m.gamma_p,
            m.t0,
            m.tf,
            path.display()
        );
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let mut cfg = configure(&a.common)?;
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    let pairs = if a.ic.is_empty() {
        cfg.ic_pairs.clone()
    } else {
        a.ic.clone()
    };
    let exec = if a.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let summary = sweep(&cfg, &pairs, exec)?;
    create_dir(&a.out)?;
    let format = Format::from(a.format);
    let path = a.out.join(format!("summary.{}", format.extension()));
    emit_summary(&summary, format, &path)?;
    for c in &summary.cells {
        println!(
            "{:<16} {:<10} gamma_tau {:.6e} +- {:.2e}  gamma_p {:.6e} +- {:.2e}{}",
            c.pair.label(),
            c.controller.name(),
            c.gamma_tau.mean,
            c.gamma_tau.esd,
            c.gamma_p.mean,
            c.gamma_p.esd,
            if c.failed { "  FAILED" } else { "" }
        );
        for e in &c.errors {
            eprintln!("  {e}");
        }
    }
    println!("wrote {}", path.display());
    if summary.any_failed() {
        eprintln!("error: some runs failed numerically");
        return Err(Failure::Sweep);
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref())?;
    cfg.validate()?;
    let mut opts = VerifyOptions::default();
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    if a.quick {
        opts.random_states = 10_000;
        opts.trajectories = 10;
    }
    let report = verify_with(&cfg, &opts);
    for c in &report.checks {
        println!(
            "{} {:<26} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_json(&report, &dir.join("verify.json"))?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", report.checks.len(), failed);
    if failed > 0 {
        return Err(Failure::Verify);
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Result<(), Failure> {
    let table = read_run_csv(&a.input)?;
    let series = RunSeries::try_from(&table).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Parse {
            path: a.input.clone(),
            message: m,
        },
        other => other,
    })?;
    let out = a
        .output
        .clone()
        .unwrap_or_else(|| a.input.with_extension("svg"));
    let title = a.title.clone().unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    std::fs::write(&out, run_svg(&series, &title)).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(3),
        Err(Failure::Sweep) => ExitCode::from(2),
        Err(Failure::Core(e)) if e.is_numerical() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
