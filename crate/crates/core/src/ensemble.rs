//! Independent noisy realizations with reproducible seeding.
//!
//! Realization `i` draws its noise from a generator seeded with
//! `derive_seed(base_seed, i)`, so every realization is fixed by its index
//! alone. Realizations run on the rayon pool when the `parallel` feature is
//! enabled; the reduction into ensemble means always walks the results in
//! index order, which makes the output independent of scheduling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegrationConfig, NoiseConfig, Trajectory};
use crate::model::{pt_residual, ModelParams};

/// Number of realizations averaged in the reference phase-noise experiments.
pub const DEFAULT_REALIZATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub base_seed: u64,
    pub params: ModelParams,
    pub integration: IntegrationConfig,
    pub noise: NoiseConfig,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::invalid("n_realizations", "must be >= 1"));
        }
        self.params.validate()?;
        self.integration.validate(&self.noise)
    }
}

/// How the realizations are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Rayon pool; `workers: None` uses the global pool. Falls back to
    /// serial execution without the `parallel` feature.
    #[default]
    Parallel,
    Workers(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_pop_l: Vec<f64>,
    pub mean_pop_r: Vec<f64>,
    pub mean_theta: Vec<Complex64>,
    pub mean_n_l: Vec<f64>,
    pub mean_n_r: Vec<f64>,
    /// Ensemble mean of R(n_L + n_R) - 2κ.
    pub mean_pt_residual: Vec<f64>,
    /// Per-realization records at the configured stride, ordered by index.
    pub trajectories: Vec<Trajectory>,
    pub seeds_used: Vec<u64>,
}

/// SplitMix64 output for position `index` of the stream started at
/// `base_seed`: `mix(base_seed + (index + 1)·φ)` with φ = 0x9E3779B97F4A7C15.
/// The finalizer is a bijection and φ is odd, so distinct indices map to
/// distinct seeds.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn realize(cfg: &EnsembleConfig, index: usize) -> Result<Trajectory> {
    let seed = derive_seed(cfg.base_seed, index as u64);
    let init = cfg.integration.initial_state(&cfg.params);
    integrate(&init, &cfg.params, &cfg.integration, &cfg.noise, seed).map_err(|e| Error::Realization {
        index,
        source: Box::new(e),
    })
}

fn run_serial(cfg: &EnsembleConfig) -> Vec<Result<Trajectory>> {
    (0..cfg.n_realizations).map(|i| realize(cfg, i)).collect()
}

#[cfg(feature = "parallel")]
fn run_parallel(cfg: &EnsembleConfig, workers: Option<usize>) -> Vec<Result<Trajectory>> {
    use rayon::prelude::*;

    let job = || {
        (0..cfg.n_realizations)
            .into_par_iter()
            .map(|i| realize(cfg, i))
            .collect::<Vec<_>>()
    };
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        },
        None => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(cfg: &EnsembleConfig, _workers: Option<usize>) -> Vec<Result<Trajectory>> {
    run_serial(cfg)
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    run_ensemble_with(cfg, Execution::default())
}

pub fn run_ensemble_with(cfg: &EnsembleConfig, execution: Execution) -> Result<EnsembleResult> {
    cfg.validate()?;
    let results = match execution {
        Execution::Serial => run_serial(cfg),
        Execution::Parallel => run_parallel(cfg, None),
        Execution::Workers(n) => run_parallel(cfg, Some(n.max(1))),
    };
    // first failure by index, independent of which thread hit it first
    let trajectories = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, trajectories))
}

fn aggregate(cfg: &EnsembleConfig, trajectories: Vec<Trajectory>) -> EnsembleResult {
    let times = trajectories[0].times.clone();
    let len = times.len();
    let n = trajectories.len() as f64;

    let mut pop_l = vec![0.0; len];
    let mut pop_r = vec![0.0; len];
    let mut theta = vec![Complex64::new(0.0, 0.0); len];
    let mut n_l = vec![0.0; len];
    let mut n_r = vec![0.0; len];
    let mut residual = vec![0.0; len];
    for traj in &trajectories {
        for (k, s) in traj.states.iter().enumerate() {
            pop_l[k] += s.pop_l();
            pop_r[k] += s.pop_r();
            theta[k] += s.coherence().0;
            n_l[k] += s.n_l;
            n_r[k] += s.n_r;
            residual[k] += pt_residual(s, &cfg.params);
        }
    }
    let scale = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x /= n);
    scale(&mut pop_l);
    scale(&mut pop_r);
    scale(&mut n_l);
    scale(&mut n_r);
    scale(&mut residual);
    theta.iter_mut().for_each(|x| *x /= n);

    let seeds_used = trajectories.iter().map(|t| t.rng_seed).collect();
    EnsembleResult {
        times,
        mean_pop_l: pop_l,
        mean_pop_r: pop_r,
        mean_theta: theta,
        mean_n_l: n_l,
        mean_n_r: n_r,
        mean_pt_residual: residual,
        trajectories,
        seeds_used,
    }
}
