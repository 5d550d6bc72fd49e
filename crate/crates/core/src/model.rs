//! Two-mode polariton condensate fed by laser-pumped exciton reservoirs.
//!
//! Units: every rate and energy is measured in units of the Josephson coupling
//! |J| and time in units of 1/|J|.
//!
//! The condensate equations are usually written as `i dψ/dt = H ψ`. Derivatives
//! here are stored in first-order form, `dψ/dt = -i H ψ`:
//!
//! ```text
//! dψ_L/dt = -i(ε_L + η|ψ_L|²) ψ_L + ½(R n_L - κ) ψ_L + i J  ψ_R
//! dψ_R/dt = -i(ε_R + η|ψ_R|²) ψ_R + ½(R n_R - κ) ψ_R + i J* ψ_L
//! dn_X/dt = P_X - Γ n_X - R n_X |ψ_X|²
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the model, in units of |J|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub eps_l: f64,
    pub eps_r: f64,
    /// Kerr nonlinearity η.
    pub eta: f64,
    /// Polariton decay rate κ.
    pub kappa: f64,
    /// Exciton reservoir decay rate Γ.
    pub gamma_x: f64,
    /// Reservoir-to-condensate scattering rate R.
    pub r_scatter: f64,
    /// Josephson coupling J. The left well couples through J, the right through J*.
    pub j_coupling: Complex64,
    pub p_l: f64,
    pub p_r: f64,
}

impl Default for ModelParams {
    /// κ = 10, Γ = 2, R = 0.02, J = 1, no pumping, no nonlinearity.
    fn default() -> Self {
        ModelParams {
            eps_l: 0.0,
            eps_r: 0.0,
            eta: 0.0,
            kappa: 10.0,
            gamma_x: 2.0,
            r_scatter: 0.02,
            j_coupling: Complex64::new(1.0, 0.0),
            p_l: 0.0,
            p_r: 0.0,
        }
    }
}

impl ModelParams {
    pub fn with_pumps(mut self, p_l: f64, p_r: f64) -> Self {
        self.p_l = p_l;
        self.p_r = p_r;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("eps_l", self.eps_l),
            ("eps_r", self.eps_r),
            ("eta", self.eta),
            ("j_re", self.j_coupling.re),
            ("j_im", self.j_coupling.im),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(key, "must be finite"));
            }
        }
        for (key, v) in [
            ("kappa", self.kappa),
            ("gamma_x", self.gamma_x),
            ("r_scatter", self.r_scatter),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, format!("must be > 0, got {v}")));
            }
        }
        for (key, v) in [("p_l", self.p_l), ("p_r", self.p_r)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(key, format!("must be >= 0, got {v}")));
            }
        }
        if self.j_coupling.norm() == 0.0 {
            return Err(Error::invalid("j_coupling", "|J| must be > 0"));
        }
        Ok(())
    }

    pub fn has_real_coupling(&self) -> bool {
        self.j_coupling.im == 0.0
    }
}

/// Condensate amplitudes and reservoir populations at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub psi_l: Complex64,
    pub psi_r: Complex64,
    pub n_l: f64,
    pub n_r: f64,
    pub t: f64,
}

impl SystemState {
    pub fn pop_l(&self) -> f64 {
        self.psi_l.norm_sqr()
    }

    pub fn pop_r(&self) -> f64 {
        self.psi_r.norm_sqr()
    }

    pub fn total_pop(&self) -> f64 {
        self.pop_l() + self.pop_r()
    }

    pub fn coherence(&self) -> Coherence {
        Coherence::of(self.psi_l, self.psi_r)
    }

    pub fn is_finite(&self) -> bool {
        self.psi_l.is_finite() && self.psi_r.is_finite() && self.n_l.is_finite() && self.n_r.is_finite()
    }
}

/// Inter-well coherence Θ = ψ_L ψ_R*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coherence(pub Complex64);

impl Coherence {
    pub fn of(psi_l: Complex64, psi_r: Complex64) -> Self {
        Coherence(psi_l * psi_r.conj())
    }

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub d_psi_l: Complex64,
    pub d_psi_r: Complex64,
    pub d_n_l: f64,
    pub d_n_r: f64,
}

/// Right-hand sides of the population-coherence equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopCoherenceRates {
    pub d_pop_l: f64,
    pub d_pop_r: f64,
    pub d_theta: Complex64,
}

/// Net gain of each mode, γ_X = (R n_X - κ)/2.
pub fn gain_rates(n_l: f64, n_r: f64, params: &ModelParams) -> (f64, f64) {
    let g = |n: f64| 0.5 * (params.r_scatter * n - params.kappa);
    (g(n_l), g(n_r))
}

/// Full model right-hand side with instantaneous single-particle energies
/// `eps_l`, `eps_r` standing in for `params.eps_l`, `params.eps_r`.
pub fn rhs_full(state: &SystemState, params: &ModelParams, eps_l: f64, eps_r: f64) -> StateDerivative {
    let i = Complex64::i();
    let j = params.j_coupling;
    let pop_l = state.pop_l();
    let pop_r = state.pop_r();
    let (gamma_l, gamma_r) = gain_rates(state.n_l, state.n_r, params);

    let d_psi_l = state.psi_l * Complex64::new(gamma_l, -(eps_l + params.eta * pop_l)) + i * j * state.psi_r;
    let d_psi_r =
        state.psi_r * Complex64::new(gamma_r, -(eps_r + params.eta * pop_r)) + i * j.conj() * state.psi_l;

    let d_n_l = params.p_l - params.gamma_x * state.n_l - params.r_scatter * state.n_l * pop_l;
    let d_n_r = params.p_r - params.gamma_x * state.n_r - params.r_scatter * state.n_r * pop_r;

    StateDerivative {
        d_psi_l,
        d_psi_r,
        d_n_l,
        d_n_r,
    }
}

/// Population-coherence form of the condensate equations. Only defined for
/// real J; complex coupling is rejected.
pub fn pop_coherence_rhs(
    pop_l: f64,
    pop_r: f64,
    theta: Coherence,
    gamma_l: f64,
    gamma_r: f64,
    params: &ModelParams,
) -> Result<PopCoherenceRates> {
    if !params.has_real_coupling() {
        return Err(Error::Unsupported(
            "population-coherence equations require a real Josephson coupling".into(),
        ));
    }
    let j = params.j_coupling.re;
    let theta = theta.0;
    let imbalance = pop_l - pop_r;
    let detuning = params.eps_l - params.eps_r + params.eta * imbalance;

    let d_pop_l = 2.0 * gamma_l * pop_l + 2.0 * j * theta.im;
    let d_pop_r = 2.0 * gamma_r * pop_r - 2.0 * j * theta.im;
    let d_theta = Complex64::new(0.0, -detuning) * theta + (gamma_l + gamma_r) * theta
        - Complex64::new(0.0, j * imbalance);

    Ok(PopCoherenceRates {
        d_pop_l,
        d_pop_r,
        d_theta,
    })
}

/// R(n_L + n_R) - 2κ. Zero exactly when gain in one well balances loss in
/// the other (γ_L + γ_R = 0), which is also the steady-state condition.
pub fn pt_residual(state: &SystemState, params: &ModelParams) -> f64 {
    params.r_scatter * (state.n_l + state.n_r) - 2.0 * params.kappa
}
