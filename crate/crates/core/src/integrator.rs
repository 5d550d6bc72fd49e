//! Fixed-step time evolution of the full model.
//!
//! The deterministic part is advanced with classical fourth-order Runge-Kutta.
//! Phase noise enters as Gaussian single-particle energies held constant over
//! each redraw interval δt with variance 2ξ/δt; it is applied after the
//! Runge-Kutta step as an exact rotation ψ ← ψ·exp(-iε dt), which leaves |ψ|
//! untouched.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pt_residual, rhs_full, ModelParams, StateDerivative, SystemState};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SEED_AMPLITUDE: f64 = 0.1;
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e12;

/// Stochastic single-particle energy fluctuations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Decoherence rate ξ.
    pub xi: f64,
    /// Interval δt between redraws of the random energies.
    pub noise_dt: f64,
    pub enabled: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::disabled()
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        NoiseConfig {
            xi: 0.0,
            noise_dt: DEFAULT_DT,
            enabled: false,
        }
    }

    pub fn phase(xi: f64, noise_dt: f64) -> Self {
        NoiseConfig {
            xi,
            noise_dt,
            enabled: true,
        }
    }

    /// σ² = 2ξ/δt.
    pub fn variance(&self) -> f64 {
        2.0 * self.xi / self.noise_dt
    }

    /// Enabled with a nonzero rate. ξ = 0 never touches the random stream.
    pub fn is_active(&self) -> bool {
        self.enabled && self.xi > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return Err(Error::invalid("xi", format!("must be >= 0, got {}", self.xi)));
        }
        if !(self.noise_dt.is_finite() && self.noise_dt > 0.0) {
            return Err(Error::invalid("noise_dt", format!("must be > 0, got {}", self.noise_dt)));
        }
        Ok(())
    }
}

/// How the reservoir populations are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialReservoir {
    /// n = P/Γ, the empty-condensate stationary value.
    PumpOverGamma,
    Explicit { n_l: f64, n_r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `record_stride`-th step.
    pub record_stride: usize,
    pub seed_amp_l: Complex64,
    pub seed_amp_r: Complex64,
    pub n0_policy: InitialReservoir,
    pub divergence_bound: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            dt: DEFAULT_DT,
            t_end: 100.0,
            record_stride: 100,
            seed_amp_l: Complex64::new(DEFAULT_SEED_AMPLITUDE, 0.0),
            seed_amp_r: Complex64::new(DEFAULT_SEED_AMPLITUDE, 0.0),
            n0_policy: InitialReservoir::PumpOverGamma,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }
}

impl IntegrationConfig {
    /// Seeds of modulus `amplitude` with phases `phase_l`, `phase_r`.
    pub fn with_seed_phases(mut self, amplitude: f64, phase_l: f64, phase_r: f64) -> Self {
        self.seed_amp_l = Complex64::from_polar(amplitude, phase_l);
        self.seed_amp_r = Complex64::from_polar(amplitude, phase_r);
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil() as usize
    }

    pub fn record_dt(&self) -> f64 {
        self.record_stride as f64 * self.dt
    }

    pub fn initial_state(&self, params: &ModelParams) -> SystemState {
        let (n_l, n_r) = match self.n0_policy {
            InitialReservoir::PumpOverGamma => (params.p_l / params.gamma_x, params.p_r / params.gamma_x),
            InitialReservoir::Explicit { n_l, n_r } => (n_l, n_r),
        };
        SystemState {
            psi_l: self.seed_amp_l,
            psi_r: self.seed_amp_r,
            n_l,
            n_r,
            t: 0.0,
        }
    }

    pub fn validate(&self, noise: &NoiseConfig) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid("t_end", format!("must be > 0, got {}", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be >= 1"));
        }
        if !self.seed_amp_l.is_finite() || !self.seed_amp_r.is_finite() {
            return Err(Error::invalid("seed_amp", "must be finite"));
        }
        if let InitialReservoir::Explicit { n_l, n_r } = self.n0_policy {
            if !(n_l >= 0.0 && n_r >= 0.0 && n_l.is_finite() && n_r.is_finite()) {
                return Err(Error::invalid("n0", "explicit reservoir populations must be finite and >= 0"));
            }
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::invalid("divergence_bound", "must be > 0"));
        }
        noise.validate()?;
        if noise.enabled {
            steps_per_redraw(self.dt, noise.noise_dt)?;
        }
        Ok(())
    }
}

/// Number of stepper steps per noise redraw; δt must be an integer multiple of dt.
fn steps_per_redraw(dt: f64, noise_dt: f64) -> Result<usize> {
    let ratio = noise_dt / dt;
    let k = ratio.round();
    if k < 1.0 {
        return Err(Error::invalid("noise_dt", format!("must be >= dt ({dt}), got {noise_dt}")));
    }
    if (ratio - k).abs() > 1e-6 * k {
        return Err(Error::invalid(
            "noise_dt",
            format!("must be an integer multiple of dt ({dt}), got {noise_dt}"),
        ));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warnings {
    /// Steps after which a negative reservoir population was clamped to zero.
    pub clamps: u64,
}

/// Recorded time series of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    /// ∫₀ᵗ (γ_L + γ_R) dt' at each recorded sample, accumulated by the stepper.
    pub gain_integral: Vec<f64>,
    pub rng_seed: u64,
    pub warnings: Warnings,
    /// Spacing of the recorded samples.
    pub record_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Well {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &SystemState {
        self.states.last().expect("trajectory records the initial state")
    }

    pub fn field(&self, well: Well) -> impl Iterator<Item = Complex64> + '_ {
        self.states.iter().map(move |s| match well {
            Well::Left => s.psi_l,
            Well::Right => s.psi_r,
        })
    }

    /// Index of the recorded sample at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let t_start = *self.times.first()?;
        let x = (t - t_start) / self.record_dt;
        let k = x.round();
        if k < 0.0 || (x - k).abs() > 1e-6 || k as usize >= self.len() {
            return None;
        }
        Some(k as usize)
    }
}

pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, noise: &NoiseConfig) -> (f64, f64) {
    if !noise.is_active() {
        return (0.0, 0.0);
    }
    let sigma = noise.variance().sqrt();
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (sigma * a, sigma * b)
}

/// Result of one stepper step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub state: SystemState,
    /// Increment of ∫(γ_L + γ_R)dt over the step.
    pub gain_increment: f64,
    pub clamped: bool,
}

/// Fixed-step RK4 stepper with the noise rotation split off.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    pub params: ModelParams,
    pub dt: f64,
    pub divergence_bound: f64,
}

impl Stepper {
    pub fn new(params: ModelParams, dt: f64) -> Self {
        Stepper {
            params,
            dt,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }

    pub fn advance(&self, state: &SystemState, eps_l: f64, eps_r: f64) -> Result<StepOutput> {
        let p = &self.params;
        let dt = self.dt;
        let eval = |s: &SystemState| (rhs_full(s, p, p.eps_l, p.eps_r), 0.5 * pt_residual(s, p));
        let shift = |s: &SystemState, d: &StateDerivative, h: f64| SystemState {
            psi_l: s.psi_l + d.d_psi_l * h,
            psi_r: s.psi_r + d.d_psi_r * h,
            n_l: s.n_l + d.d_n_l * h,
            n_r: s.n_r + d.d_n_r * h,
            t: s.t + h,
        };

        let (k1, g1) = eval(state);
        let (k2, g2) = eval(&shift(state, &k1, 0.5 * dt));
        let (k3, g3) = eval(&shift(state, &k2, 0.5 * dt));
        let (k4, g4) = eval(&shift(state, &k3, dt));

        let w = dt / 6.0;
        let mut next = SystemState {
            psi_l: state.psi_l + (k1.d_psi_l + (k2.d_psi_l + k3.d_psi_l) * 2.0 + k4.d_psi_l) * w,
            psi_r: state.psi_r + (k1.d_psi_r + (k2.d_psi_r + k3.d_psi_r) * 2.0 + k4.d_psi_r) * w,
            n_l: state.n_l + (k1.d_n_l + 2.0 * (k2.d_n_l + k3.d_n_l) + k4.d_n_l) * w,
            n_r: state.n_r + (k1.d_n_r + 2.0 * (k2.d_n_r + k3.d_n_r) + k4.d_n_r) * w,
            t: state.t + dt,
        };
        let gain_increment = (g1 + 2.0 * (g2 + g3) + g4) * w;

        if eps_l != 0.0 {
            next.psi_l *= Complex64::from_polar(1.0, -eps_l * dt);
        }
        if eps_r != 0.0 {
            next.psi_r *= Complex64::from_polar(1.0, -eps_r * dt);
        }

        let clamped = next.n_l < 0.0 || next.n_r < 0.0;
        next.n_l = next.n_l.max(0.0);
        next.n_r = next.n_r.max(0.0);

        let pop = next.pop_l().max(next.pop_r());
        if !next.is_finite() || !(pop <= self.divergence_bound) {
            return Err(Error::Divergence {
                time: next.t,
                population: pop,
            });
        }
        Ok(StepOutput {
            state: next,
            gain_increment,
            clamped,
        })
    }
}

/// One RK4 step of the deterministic model followed by the phase rotation for
/// the held noise energies `eps_l`, `eps_r` (zero for a deterministic step).
pub fn step(state: &SystemState, params: &ModelParams, dt: f64, eps_l: f64, eps_r: f64) -> Result<SystemState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    Stepper::new(*params, dt).advance(state, eps_l, eps_r).map(|o| o.state)
}

/// Integrates from `initial` to `cfg.t_end`. The noise stream is a ChaCha8
/// generator seeded from `seed`, so `(seed, config)` fixes the result bit for bit.
pub fn integrate(
    initial: &SystemState,
    params: &ModelParams,
    cfg: &IntegrationConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate(noise)?;

    let stepper = Stepper {
        params: *params,
        dt: cfg.dt,
        divergence_bound: cfg.divergence_bound,
    };
    let redraw = if noise.is_active() {
        steps_per_redraw(cfg.dt, noise.noise_dt)?
    } else {
        usize::MAX
    };
    let n_steps = cfg.n_steps();
    let capacity = n_steps / cfg.record_stride + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        gain_integral: Vec::with_capacity(capacity),
        rng_seed: seed,
        warnings: Warnings::default(),
        record_dt: cfg.record_dt(),
    };

    let t0 = initial.t;
    let mut state = *initial;
    let mut gain = 0.0;
    let mut eps = (0.0, 0.0);
    traj.times.push(t0);
    traj.states.push(state);
    traj.gain_integral.push(gain);

    for k in 0..n_steps {
        if k % redraw == 0 {
            eps = sample_noise(&mut rng, noise);
        }
        let out = stepper.advance(&state, eps.0, eps.1)?;
        state = out.state;
        // keep the clock drift-free
        state.t = t0 + (k + 1) as f64 * cfg.dt;
        gain += out.gain_increment;
        if out.clamped {
            traj.warnings.clamps += 1;
        }
        if (k + 1) % cfg.record_stride == 0 {
            traj.times.push(state.t);
            traj.states.push(state);
            traj.gain_integral.push(gain);
        }
    }
    Ok(traj)
}
