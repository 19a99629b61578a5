use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ControlLaw;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, IcPair};
use crate::harness::metrics::{pfm_for, PfmResult};
use crate::harness::sim::{run_experiment_with_rng, run_rng};

/// Controllers compared in every sweep cell, in output order.
pub const SWEEP_CONTROLLERS: [ControlLaw; 2] = [ControlLaw::Benchmark, ControlLaw::Switching];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Sample mean and empirical standard deviation (n − 1 divisor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub esd: f64,
    pub n: usize,
}

impl Stat {
    /// Deviations are taken from the first sample so that identical inputs
    /// give an ESD of exactly zero.
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                esd: f64::NAN,
                n,
            };
        }
        let x0 = xs[0];
        let d: Vec<f64> = xs.iter().map(|x| x - x0).collect();
        let dm = d.iter().sum::<f64>() / n as f64;
        let esd = if n < 2 {
            f64::NAN
        } else {
            (d.iter().map(|v| (v - dm).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stat {
            mean: x0 + dm,
            esd,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub pair: IcPair,
    pub controller: ControlLaw,
    pub gamma_tau: Stat,
    pub gamma_p: Stat,
    /// Statistics cover only the runs that completed.
    pub failed: bool,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rng_seed: u64,
    pub repeats: usize,
    pub cells: Vec<SweepCell>,
}

impl SweepSummary {
    pub fn cell(&self, pair: IcPair, controller: ControlLaw) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.pair == pair && c.controller == controller)
    }

    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(|c| c.failed)
    }
}

/// Runs `repeats` experiments per (pair, controller). Run `i` of the flat
/// (pair, controller, repeat) enumeration draws noise from stream `i` of
/// the seed, so the execution order cannot change the result.
pub fn sweep(cfg: &ExperimentConfig, pairs: &[IcPair], exec: Execution) -> Result<SweepSummary> {
    cfg.validate()?;
    if cfg.repeats < 2 {
        return Err(Error::InvalidConfig(format!(
            "a sweep needs repeats >= 2, got {}",
            cfg.repeats
        )));
    }
    let ncl = SWEEP_CONTROLLERS.len();
    let jobs: Vec<(usize, usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..ncl).flat_map(move |c| (0..cfg.repeats).map(move |r| (p, c, r))))
        .collect();

    let one = |&(p, c, r): &(usize, usize, usize)| -> Result<PfmResult> {
        let index = ((p * ncl + c) * cfg.repeats + r) as u64;
        let mut rng = run_rng(cfg.rng_seed, index);
        let run_cfg = cfg.with_ic(pairs[p]);
        let log = run_experiment_with_rng(&run_cfg, SWEEP_CONTROLLERS[c], Some(&mut rng))?;
        pfm_for(&log, &run_cfg)
    };
    let results: Vec<Result<PfmResult>> = match exec {
        Execution::Serial => jobs.iter().map(one).collect(),
        Execution::Parallel => jobs.par_iter().map(one).collect(),
    };

    let mut cells = Vec::with_capacity(pairs.len() * ncl);
    for (chunk, (p, c)) in results
        .chunks(cfg.repeats)
        .zip((0..pairs.len()).flat_map(|p| (0..ncl).map(move |c| (p, c))))
    {
        let ok: Vec<&PfmResult> = chunk.iter().filter_map(|r| r.as_ref().ok()).collect();
        let errors: Vec<String> = chunk
            .iter()
            .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
            .collect();
        let gt: Vec<f64> = ok.iter().map(|r| r.gamma_tau).collect();
        let gp: Vec<f64> = ok.iter().map(|r| r.gamma_p).collect();
        cells.push(SweepCell {
            pair: pairs[p],
            controller: SWEEP_CONTROLLERS[c],
            gamma_tau: Stat::of(&gt),
            gamma_p: Stat::of(&gp),
            failed: !errors.is_empty(),
            errors,
        });
    }
    Ok(SweepSummary {
        rng_seed: cfg.rng_seed,
        repeats: cfg.repeats,
        cells,
    })
}
