//! Command dispatch: one experiment, one output directory.
//!
//! Every run writes `config.toml` (the effective configuration) and
//! `manifest.json` (seed, version, timings). A failed run writes
//! `error.json` instead of the data files.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::analytics::{below_threshold_decay_rate, steady_state, threshold_pump};
use crate::config::{EstimatorKind, Experiment, RunConfig};
use crate::correlation::{ergodicity_metric, fit_decay, g1_ensemble, g1_time_avg, CorrelationSeries, DecayFit};
use crate::ensemble::{derive_seed, run_ensemble_with, Execution};
use crate::error::{Error, Result};
use crate::integrator::integrate;
use crate::io::{self, OutputDir};
use crate::spectral::{bifurcation_scan, classify_phase, PtPhase};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for ensemble runs and sweeps; `None` uses every core.
    pub workers: Option<usize>,
}

impl RunOptions {
    fn execution(&self) -> Execution {
        match self.workers {
            Some(1) => Execution::Serial,
            Some(n) => Execution::Workers(n),
            None => Execution::Parallel,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Seed of the single trajectory of `simulate`; the same stream as
/// realization 0 of an ensemble with the same base seed.
pub fn trajectory_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.base_seed, 0)
}

/// Runs `experiment`, writing into `cfg.out_dir`. On failure an `error.json`
/// record is written (when the directory can be created) and the error
/// returned.
pub fn run_command(cfg: &RunConfig, experiment: Experiment, opts: RunOptions) -> Result<OutputDir> {
    let mut out = OutputDir::create(&cfg.out_dir)?;
    match execute(cfg, experiment, opts, &mut out) {
        Ok(()) => Ok(out),
        Err(e) => {
            let _ = out.write_json("error.json", &io::error_record(&e));
            Err(e)
        }
    }
}

fn execute(cfg: &RunConfig, experiment: Experiment, opts: RunOptions, out: &mut OutputDir) -> Result<()> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut cfg = cfg.clone();
    cfg.experiment = Some(experiment);
    if experiment == Experiment::Correlate {
        extend_for_correlation(&mut cfg);
    }
    cfg.validate()?;
    out.write_text("config.toml", &cfg.emit())?;

    let seed = match experiment {
        Experiment::Simulate => Some(trajectory_seed(&cfg)),
        Experiment::Ensemble | Experiment::Correlate => Some(cfg.base_seed),
        _ => None,
    };
    match experiment {
        Experiment::Simulate => simulate(&cfg, out)?,
        Experiment::Ensemble => ensemble(&cfg, opts, out)?,
        Experiment::Steady => steady(&cfg, out)?,
        Experiment::Spectrum => spectrum(&cfg, out)?,
        Experiment::Correlate => correlate(&cfg, opts, out)?,
        Experiment::Sweep => sweep(&cfg, opts, out)?,
    }

    let mut files = out.files().to_vec();
    files.push("manifest.json".into());
    let manifest = json!({
        "experiment": experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "base_seed": cfg.base_seed,
        "trajectory_seed": seed,
        "workers": opts.workers,
        "parallel_feature": cfg!(feature = "parallel"),
        "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "files": files,
    });
    out.write_json("manifest.json", &manifest)?;
    Ok(())
}

/// Ensures the integration reaches every sample the estimators need.
fn extend_for_correlation(cfg: &mut RunConfig) {
    let c = &cfg.correlation;
    let needed = match c.estimator {
        EstimatorKind::Ensemble => c.t0 + c.max_lag,
        EstimatorKind::TimeAveraged | EstimatorKind::Both => c.t0 + c.window + c.max_lag,
    };
    let margin = cfg.integration.record_dt();
    if cfg.integration.t_end < needed + margin {
        cfg.integration.t_end = needed + margin;
    }
}

#[derive(Serialize)]
struct TrajectorySummary {
    t_end: f64,
    pop_l: f64,
    pop_r: f64,
    total_pop: f64,
    n_l: f64,
    n_r: f64,
    re_theta: f64,
    im_theta: f64,
    samples: usize,
    reservoir_clamps: u64,
    rng_seed: u64,
}

fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let init = cfg.integration.initial_state(&cfg.params);
    let traj = integrate(&init, &cfg.params, &cfg.integration, &cfg.noise, trajectory_seed(cfg))?;
    out.write_text("trajectory.tsv", &io::trajectory_table(&traj))?;
    let last = traj.last();
    let theta = last.coherence();
    let doc = TrajectorySummary {
        t_end: last.t,
        pop_l: last.pop_l(),
        pop_r: last.pop_r(),
        total_pop: last.total_pop(),
        n_l: last.n_l,
        n_r: last.n_r,
        re_theta: theta.re(),
        im_theta: theta.im(),
        samples: traj.len(),
        reservoir_clamps: traj.warnings.clamps,
        rng_seed: traj.rng_seed,
    };
    out.write_json(
        "summary.json",
        &io::summary(
            &doc,
            &[
                ("t_end", "1/J"),
                ("pop_l", "|psi|^2"),
                ("pop_r", "|psi|^2"),
                ("total_pop", "|psi|^2"),
                ("n_l", "excitons"),
                ("n_r", "excitons"),
                ("re_theta", "|psi|^2"),
                ("im_theta", "|psi|^2"),
            ],
        ),
    )?;
    Ok(())
}

fn fit_doc(series: &CorrelationSeries, floor: f64) -> serde_json::Value {
    match fit_decay(series, floor) {
        Ok(DecayFit {
            rate,
            r_squared,
            points,
            lag_end,
            envelope_window,
        }) => json!({
            "rate": rate,
            "r_squared": r_squared,
            "points": points,
            "lag_end": lag_end,
            "envelope_window": envelope_window,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn ensemble(cfg: &RunConfig, opts: RunOptions, out: &mut OutputDir) -> Result<()> {
    let res = run_ensemble_with(&cfg.ensemble(), opts.execution())?;
    out.write_text("ensemble_means.tsv", &io::ensemble_table(&res))?;
    let c = &cfg.correlation;
    let g1 = if res.trajectories.len() >= 2 {
        g1_ensemble(&res.trajectories, c.t0, c.well).ok()
    } else {
        None
    };
    if let Some(g) = &g1 {
        out.write_text("g1_ensemble.tsv", &io::g1_table(g))?;
    }
    let k = res.times.len() - 1;
    let doc = json!({
        "n_realizations": res.trajectories.len(),
        "base_seed": cfg.base_seed,
        "t_end": res.times[k],
        "final_mean_pop_l": res.mean_pop_l[k],
        "final_mean_pop_r": res.mean_pop_r[k],
        "final_mean_pt_residual": res.mean_pt_residual[k],
        "g1_t0": g1.as_ref().map(|_| c.t0),
        "g1_fit": g1.as_ref().map(|g| fit_doc(g, c.fit_floor)),
    });
    out.write_json(
        "summary.json",
        &io::summary(
            &doc,
            &[
                ("t_end", "1/J"),
                ("final_mean_pop_l", "|psi|^2"),
                ("final_mean_pop_r", "|psi|^2"),
                ("final_mean_pt_residual", "J"),
                ("g1_t0", "1/J"),
                ("g1_fit.rate", "J"),
                ("g1_fit.lag_end", "1/J"),
            ],
        ),
    )?;
    Ok(())
}

fn phase_name(phase: PtPhase) -> &'static str {
    match phase {
        PtPhase::PTSymmetric => "pt_symmetric",
        PtPhase::ExceptionalPoint => "exceptional_point",
        PtPhase::PTBroken => "pt_broken",
    }
}

fn steady(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let p = &cfg.params;
    let sol = steady_state(p)?;
    let phase = classify_phase(sol.gamma, p.j_coupling, cfg.spectrum.tolerance)?;
    let doc = json!({
        "threshold_pump": threshold_pump(p),
        "total_pump": p.p_l + p.p_r,
        "above_threshold": sol.above_threshold,
        "pop": sol.pop,
        "n_l": sol.n_l,
        "n_r": sol.n_r,
        "gamma": sol.gamma,
        "re_theta": sol.re_theta,
        "im_theta": sol.im_theta,
        "pt_phase": phase_name(phase.phase),
        "below_threshold_decay_rate": below_threshold_decay_rate(p).ok(),
    });
    out.write_json(
        "steady.json",
        &io::summary(
            &doc,
            &[
                ("threshold_pump", "J"),
                ("total_pump", "J"),
                ("pop", "|psi|^2"),
                ("n_l", "excitons"),
                ("n_r", "excitons"),
                ("gamma", "J"),
                ("re_theta", "|psi|^2"),
                ("im_theta", "|psi|^2"),
                ("below_threshold_decay_rate", "J"),
            ],
        ),
    )?;
    Ok(())
}

fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let s = &cfg.spectrum;
    let j = cfg.params.j_coupling;
    let rows = bifurcation_scan(s.gamma_min, s.gamma_max, s.steps, j)?;
    out.write_text("spectrum.tsv", &io::scan_table(&rows))?;
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let doc = json!({
        "j_abs": j.norm(),
        "exceptional_point_gamma": j.norm(),
        "gamma_min": s.gamma_min,
        "gamma_max": s.gamma_max,
        "steps": s.steps,
        "max_residual": max_residual,
    });
    out.write_json(
        "spectrum.json",
        &io::summary(
            &doc,
            &[
                ("j_abs", "J"),
                ("exceptional_point_gamma", "J"),
                ("gamma_min", "J"),
                ("gamma_max", "J"),
                ("max_residual", "J"),
            ],
        ),
    )?;
    Ok(())
}

fn correlate(cfg: &RunConfig, opts: RunOptions, out: &mut OutputDir) -> Result<()> {
    let c = &cfg.correlation;
    let mut ens = None;
    let mut tav = None;
    if matches!(c.estimator, EstimatorKind::Ensemble | EstimatorKind::Both) {
        let mut e = cfg.ensemble();
        if c.estimator == EstimatorKind::Both {
            // the long single trajectory is not needed by every realization
            e.integration.t_end = c.t0 + c.max_lag + e.integration.record_dt();
        }
        let res = run_ensemble_with(&e, opts.execution())?;
        let mut g = g1_ensemble(&res.trajectories, c.t0, c.well)?;
        let keep = g.lags.iter().take_while(|&&l| l <= c.max_lag + 1e-9).count();
        g.lags.truncate(keep);
        g.values.truncate(keep);
        out.write_text("g1_ensemble.tsv", &io::g1_table(&g))?;
        ens = Some(g);
    }
    if matches!(c.estimator, EstimatorKind::TimeAveraged | EstimatorKind::Both) {
        let init = cfg.integration.initial_state(&cfg.params);
        let traj = integrate(&init, &cfg.params, &cfg.integration, &cfg.noise, trajectory_seed(cfg))?;
        let g = g1_time_avg(&traj, c.t0, c.t0 + c.window, c.max_lag, c.well)?;
        out.write_text("g1_time_averaged.tsv", &io::g1_table(&g))?;
        tav = Some(g);
    }
    let metric = match (&ens, &tav) {
        (Some(a), Some(b)) => Some(ergodicity_metric(a, b, c.max_lag)?),
        _ => None,
    };
    let doc = json!({
        "well": c.well,
        "t0": c.t0,
        "window": c.window,
        "max_lag": c.max_lag,
        "fit_floor": c.fit_floor,
        "xi": cfg.noise.xi,
        "ensemble_fit": ens.as_ref().map(|g| fit_doc(g, c.fit_floor)),
        "time_averaged_fit": tav.as_ref().map(|g| fit_doc(g, c.fit_floor)),
        "ergodicity_metric": metric,
    });
    out.write_json(
        "correlation.json",
        &io::summary(
            &doc,
            &[
                ("t0", "1/J"),
                ("window", "1/J"),
                ("max_lag", "1/J"),
                ("xi", "J"),
                ("ensemble_fit.rate", "J"),
                ("time_averaged_fit.rate", "J"),
                ("ergodicity_metric", "dimensionless"),
            ],
        ),
    )?;
    Ok(())
}

/// One sweep point: `[p_l, p_r, above, pop, n_l, n_r, gamma, re_theta, im_theta, phase]`.
/// `phase` is -1 below threshold or without a steady state, else 0, 1, 2 for
/// PT-symmetric, exceptional point, PT-broken. Missing values are NaN.
fn sweep_point(cfg: &RunConfig, p_l: f64, p_r: f64) -> Result<[f64; 10]> {
    let params = cfg.params.with_pumps(p_l, p_r);
    let nan = f64::NAN;
    match steady_state(&params) {
        Ok(sol) => {
            let phase = if sol.above_threshold {
                match classify_phase(sol.gamma, params.j_coupling, cfg.spectrum.tolerance)?.phase {
                    PtPhase::PTSymmetric => 0.0,
                    PtPhase::ExceptionalPoint => 1.0,
                    PtPhase::PTBroken => 2.0,
                }
            } else {
                -1.0
            };
            Ok([
                p_l,
                p_r,
                f64::from(u8::from(sol.above_threshold)),
                sol.pop,
                sol.n_l,
                sol.n_r,
                sol.gamma,
                sol.re_theta,
                sol.im_theta,
                phase,
            ])
        }
        Err(Error::NegativeRadicand { .. }) => Ok([p_l, p_r, 1.0, nan, nan, nan, nan, nan, nan, -1.0]),
        Err(e) => Err(e),
    }
}

fn sweep(cfg: &RunConfig, opts: RunOptions, out: &mut OutputDir) -> Result<()> {
    let grid: Vec<(f64, f64)> = cfg
        .sweep
        .p_l
        .values()
        .into_iter()
        .flat_map(|p_l| cfg.sweep.p_r.values().into_iter().map(move |p_r| (p_l, p_r)))
        .collect();
    let rows = sweep_rows(cfg, &grid, opts)?;
    out.write_text(
        "sweep.tsv",
        &io::table(
            &["p_l", "p_r", "above_threshold", "pop", "n_l", "n_r", "gamma", "re_theta", "im_theta", "phase"],
            &rows,
        ),
    )?;
    let doc = json!({
        "threshold_pump": threshold_pump(&cfg.params),
        "points": rows.len(),
        "above_threshold": rows.iter().filter(|r| r[2] == 1.0).count(),
        "without_steady_state": rows.iter().filter(|r| r[2] == 1.0 && r[3].is_nan()).count(),
    });
    out.write_json("summary.json", &io::summary(&doc, &[("threshold_pump", "J")]))?;
    Ok(())
}

#[cfg(feature = "parallel")]
fn sweep_rows(cfg: &RunConfig, grid: &[(f64, f64)], opts: RunOptions) -> Result<Vec<[f64; 10]>> {
    use rayon::prelude::*;

    let job = || grid.par_iter().map(|&(l, r)| sweep_point(cfg, l, r)).collect();
    match opts.workers {
        Some(1) => grid.iter().map(|&(l, r)| sweep_point(cfg, l, r)).collect(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        },
        None => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn sweep_rows(cfg: &RunConfig, grid: &[(f64, f64)], _opts: RunOptions) -> Result<Vec<[f64; 10]>> {
    grid.iter().map(|&(l, r)| sweep_point(cfg, l, r)).collect()
}
