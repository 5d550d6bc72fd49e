//! First-order field correlation g¹(t) of a single well.
//!
//! Both estimators use the conjugated product ψ*(t₀)ψ(t₀ + t), so g¹(0) = 1
//! and |g¹| ≤ 1 by Cauchy-Schwarz:
//!
//! * ensemble: `⟨ψ*(t₀)ψ(t₀+t)⟩ / √(⟨|ψ(t₀)|²⟩⟨|ψ(t₀+t)|²⟩)` over realizations,
//! * time-averaged: the same with the average replaced by a sliding sum over
//!   τ ∈ [t_i, t_f) of one long trajectory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Trajectory, Well};

pub const DEFAULT_T0: f64 = 50.0;
pub const DEFAULT_WINDOW: f64 = 3000.0;
pub const DEFAULT_FIT_FLOOR: f64 = 0.05;
pub const MIN_FIT_POINTS: usize = 10;
/// One Rabi period 2π/|J|: spans the beat between the two normal modes.
pub const DEFAULT_ENVELOPE_WINDOW: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Ensemble { t0: f64, realizations: usize },
    TimeAveraged { t_i: f64, t_f: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub lags: Vec<f64>,
    pub values: Vec<Complex64>,
    pub estimator: Estimator,
    /// Rough statistical resolution, 1/√(number of averaged terms).
    pub stat_tolerance: f64,
}

impl CorrelationSeries {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// |g¹| at `lag` by linear interpolation; `None` outside the lag range.
    pub fn magnitude_at(&self, lag: f64) -> Option<f64> {
        let last = *self.lags.last()?;
        let first = self.lags[0];
        if lag < first || lag > last {
            return None;
        }
        let k = self.lags.partition_point(|&l| l <= lag);
        if k == 0 {
            return Some(self.values[0].norm());
        }
        if k >= self.lags.len() {
            return Some(self.values[self.lags.len() - 1].norm());
        }
        let (l0, l1) = (self.lags[k - 1], self.lags[k]);
        let (m0, m1) = (self.values[k - 1].norm(), self.values[k].norm());
        let w = (lag - l0) / (l1 - l0);
        Some(m0 + w * (m1 - m0))
    }
}

fn pick(s: &crate::model::SystemState, well: Well) -> Complex64 {
    match well {
        Well::Left => s.psi_l,
        Well::Right => s.psi_r,
    }
}

pub fn g1_ensemble(trajectories: &[Trajectory], t0: f64, well: Well) -> Result<CorrelationSeries> {
    let (first, rest) = match trajectories {
        [first, rest @ ..] if !rest.is_empty() => (first, rest),
        _ => {
            return Err(Error::invalid(
                "trajectories",
                "ensemble estimator needs at least two realizations",
            ))
        }
    };
    for (k, t) in rest.iter().enumerate() {
        if t.times != first.times {
            return Err(Error::GridMismatch(format!("realization {} differs from realization 0", k + 1)));
        }
    }
    let i0 = first.index_of(t0).ok_or(Error::OffGrid(t0))?;
    let len = first.len() - i0;

    let mut num = vec![Complex64::new(0.0, 0.0); len];
    let mut power = vec![0.0; len];
    for traj in trajectories {
        let states = &traj.states[i0..];
        let anchor = pick(&states[0], well).conj();
        for (k, s) in states.iter().enumerate() {
            let psi = pick(s, well);
            num[k] += anchor * psi;
            power[k] += psi.norm_sqr();
        }
    }
    let values = num
        .iter()
        .zip(&power)
        .map(|(n, p)| {
            let denom = (power[0] * p).sqrt();
            if denom > 0.0 {
                n / denom
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let lags = first.times[i0..].iter().map(|t| t - first.times[i0]).collect();

    Ok(CorrelationSeries {
        lags,
        values,
        estimator: Estimator::Ensemble {
            t0,
            realizations: trajectories.len(),
        },
        stat_tolerance: 1.0 / (trajectories.len() as f64).sqrt(),
    })
}

pub fn g1_time_avg(trajectory: &Trajectory, t_i: f64, t_f: f64, max_lag: f64, well: Well) -> Result<CorrelationSeries> {
    if !(t_f > t_i) {
        return Err(Error::Window(format!("t_f ({t_f}) must exceed t_i ({t_i})")));
    }
    if !(max_lag >= 0.0) || t_f - t_i < max_lag {
        return Err(Error::Window(format!(
            "max_lag ({max_lag}) must lie in [0, t_f - t_i = {}]",
            t_f - t_i
        )));
    }
    let h = trajectory.record_dt;
    let a = trajectory.index_of(t_i).ok_or(Error::OffGrid(t_i))?;
    let last_needed = t_f + max_lag;
    let b = trajectory.index_of(t_f).ok_or_else(|| {
        Error::Window(format!("t_f = {t_f} lies outside the recorded grid"))
    })?;
    let max_k = (max_lag / h).round() as usize;
    if b + max_k >= trajectory.len() {
        return Err(Error::Window(format!(
            "window plus lag reaches t = {last_needed}, trajectory ends at {}",
            trajectory.times.last().copied().unwrap_or(0.0)
        )));
    }

    let psi: Vec<Complex64> = trajectory.field(well).collect();
    let mut prefix = Vec::with_capacity(psi.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for p in &psi {
        acc += p.norm_sqr();
        prefix.push(acc);
    }
    let window_power = |start: usize| prefix[start + b - a] - prefix[start];
    let p0 = window_power(a);

    let mut lags = Vec::with_capacity(max_k + 1);
    let mut values = Vec::with_capacity(max_k + 1);
    for k in 0..=max_k {
        let num: Complex64 = psi[a..b]
            .iter()
            .zip(&psi[a + k..b + k])
            .map(|(x, y)| x.conj() * y)
            .sum();
        let denom = (p0 * window_power(a + k)).sqrt();
        values.push(if denom > 0.0 { num / denom } else { Complex64::new(0.0, 0.0) });
        lags.push(k as f64 * h);
    }

    Ok(CorrelationSeries {
        lags,
        values,
        estimator: Estimator::TimeAveraged { t_i, t_f },
        stat_tolerance: 1.0 / ((b - a) as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Positive for decay.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Largest lag included in the fit.
    pub lag_end: f64,
    /// Envelope window used; zero when |g¹| was fitted directly.
    pub envelope_window: f64,
}

/// Decay rate of |g¹|.
///
/// A monotone series is fitted directly. When |g¹| is modulated by the beat
/// between the two normal modes, the leading run above `fit_floor` ends in a
/// modulation dip while the envelope is still far above the floor; the fit
/// then follows the forward envelope over [`DEFAULT_ENVELOPE_WINDOW`].
pub fn fit_decay(series: &CorrelationSeries, fit_floor: f64) -> Result<DecayFit> {
    let mags = series.magnitudes();
    let run = mags.iter().take_while(|&&m| m > fit_floor).count();
    if run < mags.len() {
        let envelope = forward_envelope(series, DEFAULT_ENVELOPE_WINDOW);
        if envelope[run] > 2.0 * fit_floor {
            return fit_decay_with(series, fit_floor, DEFAULT_ENVELOPE_WINDOW);
        }
    }
    fit_decay_with(series, fit_floor, 0.0)
}

/// Forward envelope `E(t) = max |g¹(s)|` over `s ∈ [t, t + window]`. Equals |g¹|
/// for a monotone series and follows the peaks of a modulated one.
pub fn forward_envelope(series: &CorrelationSeries, window: f64) -> Vec<f64> {
    let mags = series.magnitudes();
    let mut out = Vec::with_capacity(mags.len());
    let mut end = 0;
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for (k, &lag) in series.lags.iter().enumerate() {
        while end < mags.len() && series.lags[end] <= lag + window {
            while deque.back().is_some_and(|&b| mags[b] <= mags[end]) {
                deque.pop_back();
            }
            deque.push_back(end);
            end += 1;
        }
        while deque.front().is_some_and(|&f| f < k) {
            deque.pop_front();
        }
        out.push(deque.front().map_or(mags[k], |&f| mags[f]));
    }
    out
}

/// Least-squares slope of ln E against lag, where E is the forward envelope of
/// |g¹| over `window` (zero fits |g¹| itself). Points are weighted by E², the
/// inverse variance of ln E under additive estimator noise. Only the leading
/// run of samples with E > `fit_floor` is used, so a noise-dominated tail is
/// not fitted.
pub fn fit_decay_with(series: &CorrelationSeries, fit_floor: f64, window: f64) -> Result<DecayFit> {
    let envelope = forward_envelope(series, window.max(0.0));
    let usable: Vec<(f64, f64, f64)> = series
        .lags
        .iter()
        .zip(envelope)
        .take_while(|&(_, m)| m > fit_floor)
        .map(|(&l, m)| (l, m.ln(), m * m))
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            usable: usable.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let w_sum: f64 = usable.iter().map(|p| p.2).sum();
    let mean_x = usable.iter().map(|p| p.2 * p.0).sum::<f64>() / w_sum;
    let mean_y = usable.iter().map(|p| p.2 * p.1).sum::<f64>() / w_sum;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y, w) in &usable {
        sxx += w * (x - mean_x) * (x - mean_x);
        sxy += w * (x - mean_x) * (y - mean_y);
        syy += w * (y - mean_y) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        points: usable.len(),
        lag_end: usable.last().map(|p| p.0).unwrap_or(0.0),
        envelope_window: window.max(0.0),
    })
}

/// max over lags ≤ `lag_max` of ||a| - |b||, with `b` interpolated onto the
/// lags of `a`.
pub fn ergodicity_metric(a: &CorrelationSeries, b: &CorrelationSeries, lag_max: f64) -> Result<f64> {
    let mut worst: Option<f64> = None;
    for (lag, va) in a.lags.iter().zip(&a.values) {
        if *lag > lag_max {
            break;
        }
        if let Some(mb) = b.magnitude_at(*lag) {
            let d = (va.norm() - mb).abs();
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst.ok_or(Error::EmptyOverlap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::Warnings;
    use crate::model::SystemState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn from_field(psi: &[Complex64], h: f64) -> Trajectory {
        let states = psi
            .iter()
            .enumerate()
            .map(|(k, &p)| SystemState {
                psi_l: p,
                psi_r: p * 0.5,
                n_l: 0.0,
                n_r: 0.0,
                t: k as f64 * h,
            })
            .collect::<Vec<_>>();
        Trajectory {
            times: states.iter().map(|s| s.t).collect(),
            gain_integral: vec![0.0; states.len()],
            states,
            rng_seed: 0,
            warnings: Warnings::default(),
            record_dt: h,
        }
    }

    /// Unit-modulus field whose phase diffuses with rate `xi`.
    fn phase_diffusion(xi: f64, h: f64, len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = (2.0 * xi * h).sqrt();
        let mut phase = 0.0;
        (0..len)
            .map(|_| {
                let z = Complex64::from_polar(1.0, phase);
                let g: f64 = rng.sample(StandardNormal);
                phase += sigma * g;
                z
            })
            .collect()
    }

    fn synthetic(values: Vec<Complex64>, h: f64) -> CorrelationSeries {
        CorrelationSeries {
            lags: (0..values.len()).map(|k| k as f64 * h).collect(),
            values,
            estimator: Estimator::TimeAveraged { t_i: 0.0, t_f: 1.0 },
            stat_tolerance: 0.0,
        }
    }

    #[test]
    fn ensemble_of_identical_rotating_fields_is_coherent() {
        let h = 0.1;
        let psi: Vec<_> = (0..200).map(|k| Complex64::from_polar(2.0, -1.3 * k as f64 * h)).collect();
        let trajs = vec![from_field(&psi, h); 5];
        let g = g1_ensemble(&trajs, 5.0, Well::Left).unwrap();
        assert!((g.values[0].norm() - 1.0).abs() < 1e-12);
        assert!((g.values[0] - 1.0).norm() < 1e-12);
        for v in &g.values {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(g.lags[0], 0.0);
        assert_eq!(g.len(), 150);
    }

    #[test]
    fn ensemble_errors() {
        let h = 0.1;
        let psi: Vec<_> = (0..20).map(|_| Complex64::new(1.0, 0.0)).collect();
        let one = from_field(&psi, h);
        assert!(g1_ensemble(std::slice::from_ref(&one), 0.0, Well::Left).is_err());
        let short = from_field(&psi[..10], h);
        assert!(matches!(
            g1_ensemble(&[one.clone(), short], 0.0, Well::Left),
            Err(Error::GridMismatch(_))
        ));
        assert!(matches!(
            g1_ensemble(&[one.clone(), one], 0.05, Well::Left),
            Err(Error::OffGrid(_))
        ));
    }

    #[test]
    fn time_average_of_rotating_field_is_coherent() {
        let h = 0.05;
        let psi: Vec<_> = (0..2000).map(|k| Complex64::from_polar(1.5, 0.7 * k as f64 * h)).collect();
        let g = g1_time_avg(&from_field(&psi, h), 0.0, 50.0, 40.0, Well::Right).unwrap();
        for v in &g.values {
            assert!((v.norm() - 1.0).abs() < 1e-10);
        }
        assert!((g.values[0] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn time_average_window_errors() {
        let h = 0.1;
        let psi = vec![Complex64::new(1.0, 0.0); 100];
        let t = from_field(&psi, h);
        assert!(matches!(g1_time_avg(&t, 0.0, 8.0, 5.0, Well::Left), Err(Error::Window(_))));
        assert!(matches!(g1_time_avg(&t, 0.0, 4.0, 5.0, Well::Left), Err(Error::Window(_))));
        assert!(g1_time_avg(&t, 0.0, 5.0, 4.0, Well::Left).is_ok());
    }

    #[test]
    fn fit_exact_exponential() {
        let h = 0.5;
        let values = (0..200).map(|k| Complex64::new((-0.05 * k as f64 * h).exp(), 0.0)).collect();
        let fit = fit_decay(&synthetic(values, h), DEFAULT_FIT_FLOOR).unwrap();
        assert!((fit.rate - 0.05).abs() < 1e-6, "{fit:?}");
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_follows_envelope_of_beating_series() {
        let h = 0.1;
        // two normal modes of unequal weight beating at 2J
        let values = (0..1200)
            .map(|k| {
                let t = k as f64 * h;
                (Complex64::from_polar(0.6, t) + Complex64::from_polar(0.4, -t)) * (-0.05 * t).exp()
            })
            .collect();
        let fit = fit_decay(&synthetic(values, h), DEFAULT_FIT_FLOOR).unwrap();
        assert_eq!(fit.envelope_window, DEFAULT_ENVELOPE_WINDOW);
        assert!((fit.rate - 0.05).abs() < 0.005, "{fit:?}");
        assert!(fit.lag_end > 50.0);

        let plain = (0..200).map(|k| Complex64::new((-0.05 * k as f64 * 0.5).exp(), 0.0)).collect();
        assert_eq!(fit_decay(&synthetic(plain, 0.5), DEFAULT_FIT_FLOOR).unwrap().envelope_window, 0.0);
    }

    #[test]
    fn fit_needs_enough_points() {
        let values = (0..5).map(|_| Complex64::new(1.0, 0.0)).collect();
        assert!(matches!(
            fit_decay(&synthetic(values, 1.0), 0.05),
            Err(Error::TooFewPoints { usable: 5, .. })
        ));
    }

    #[test]
    fn ergodicity_metric_cases() {
        let h = 0.5;
        let values: Vec<_> = (0..100).map(|k| Complex64::new((-0.05 * k as f64 * h).exp(), 0.0)).collect();
        let a = synthetic(values.clone(), h);
        assert_eq!(ergodicity_metric(&a, &a, 20.0).unwrap(), 0.0);

        // coherent series against one whose phases are independent from lag 0 on
        let coherent = synthetic(vec![Complex64::new(1.0, 0.0); 100], h);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4000;
        let psi: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
            .collect();
        let white = g1_time_avg(&from_field(&psi, h), 0.0, 1900.0, 40.0, Well::Left).unwrap();
        let m = ergodicity_metric(&coherent, &white, 40.0).unwrap();
        assert!(m > 0.9, "metric = {m}");

        // interpolation onto a finer grid
        let coarse = synthetic(values.iter().step_by(2).copied().collect(), 2.0 * h);
        assert!(ergodicity_metric(&a, &coarse, 20.0).unwrap() < 1e-3);

        let far = CorrelationSeries {
            lags: vec![100.0, 101.0],
            ..synthetic(vec![Complex64::new(1.0, 0.0); 2], 1.0)
        };
        assert!(matches!(ergodicity_metric(&a, &far, 20.0), Err(Error::EmptyOverlap)));
    }

    #[test]
    fn phase_invariance() {
        let h = 0.1;
        let trajs: Vec<_> = (0..20).map(|s| from_field(&phase_diffusion(0.1, h, 300, s), h)).collect();
        let rotated: Vec<_> = trajs
            .iter()
            .map(|t| {
                let rot = Complex64::from_polar(1.0, 2.1);
                let psi: Vec<_> = t.states.iter().map(|s| s.psi_l * rot).collect();
                from_field(&psi, h)
            })
            .collect();
        let a = g1_ensemble(&trajs, 1.0, Well::Left).unwrap();
        let b = g1_ensemble(&rotated, 1.0, Well::Left).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x.norm() - y.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn both_estimators_recover_phase_diffusion_rate() {
        let (xi, h) = (0.05, 0.1);
        let trajs: Vec<_> = (0..2000).map(|s| from_field(&phase_diffusion(xi, h, 700, s), h)).collect();
        let ens = g1_ensemble(&trajs, 0.0, Well::Left).unwrap();
        let fit = fit_decay(&ens, DEFAULT_FIT_FLOOR).unwrap();
        assert!((fit.rate - xi).abs() < 0.1 * xi, "ensemble rate {}", fit.rate);

        let long = from_field(&phase_diffusion(xi, h, 31_000, 99), h);
        let tav = g1_time_avg(&long, 0.0, 3000.0, 60.0, Well::Left).unwrap();
        let fit = fit_decay(&tav, DEFAULT_FIT_FLOOR).unwrap();
        assert!((fit.rate - xi).abs() < 0.3 * xi, "time-averaged rate {}", fit.rate);
        assert!(ergodicity_metric(&ens, &tav, 50.0).unwrap() < 0.1);
    }

    #[test]
    fn ensemble_error_shrinks_with_realizations() {
        let (xi, h) = (0.05, 0.1);
        let spread = |n: u64| {
            let rates: Vec<f64> = (0..6)
                .map(|rep| {
                    let trajs: Vec<_> = (0..n)
                        .map(|s| from_field(&phase_diffusion(xi, h, 400, 10_000 * rep + s), h))
                        .collect();
                    fit_decay(&g1_ensemble(&trajs, 0.0, Well::Left).unwrap(), 0.2).unwrap().rate
                })
                .collect();
            rates.iter().map(|r| (r - xi).abs()).sum::<f64>() / rates.len() as f64
        };
        let small = spread(50);
        let large = spread(800);
        assert!(large < small, "error did not shrink: {small} -> {large}");
    }
}
