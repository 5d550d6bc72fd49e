//! Closed-form thresholds and the self-organized PT-symmetric fixed point.
//!
//! Above threshold the stationary populations satisfy R(n_L + n_R) = 2κ and
//! |ψ_L|² = |ψ_R|², which fixes
//!
//! ```text
//! |ψ|²  = (P_L + P_R)/(2κ) - Γ/R
//! n_X   = 2κ P_X / (R (P_L + P_R))
//! γ     = κ (P_L - P_R) / (2 (P_L + P_R))          (γ_L = -γ_R = γ)
//! ImΘ   = κΓ(P_L - P_R)/(2RJ(P_L + P_R)) - (P_L - P_R)/(4J)
//! ReΘ   = D √(4J²(P_L + P_R)² - κ²(P_L - P_R)²)
//! D     = (P_L + P_R - 2κΓ/R) / (4Jκ(P_L + P_R))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    /// Common condensate population |ψ_L|² = |ψ_R|².
    pub pop: f64,
    pub n_l: f64,
    pub n_r: f64,
    /// Balanced gain/loss γ = γ_L = -γ_R.
    pub gamma: f64,
    pub im_theta: f64,
    /// Non-negative branch; the closed form fixes only |ReΘ|.
    pub re_theta: f64,
    pub above_threshold: bool,
}

/// Total pump 2κΓ/R at which the condensate starts to form.
pub fn threshold_pump(params: &ModelParams) -> f64 {
    2.0 * params.kappa * params.gamma_x / params.r_scatter
}

/// Stationary reservoir P/(Γ + R|ψ|²) for a fixed condensate population.
pub fn reservoir_quasi_steady(p: f64, pop: f64, params: &ModelParams) -> f64 {
    p / (params.gamma_x + params.r_scatter * pop)
}

pub fn steady_state(params: &ModelParams) -> Result<SteadyStateSolution> {
    params.validate()?;
    if params.eps_l != params.eps_r {
        return Err(Error::Unsupported("steady state requires degenerate wells (eps_l = eps_r)".into()));
    }
    if !params.has_real_coupling() {
        return Err(Error::Unsupported("steady state requires a real Josephson coupling".into()));
    }

    let sum = params.p_l + params.p_r;
    let diff = params.p_l - params.p_r;
    let threshold = threshold_pump(params);

    if sum <= threshold {
        return Ok(SteadyStateSolution {
            pop: 0.0,
            n_l: reservoir_quasi_steady(params.p_l, 0.0, params),
            n_r: reservoir_quasi_steady(params.p_r, 0.0, params),
            gamma: 0.0,
            im_theta: 0.0,
            re_theta: 0.0,
            above_threshold: false,
        });
    }

    let ModelParams {
        kappa,
        gamma_x,
        r_scatter: r,
        ..
    } = *params;
    let j = params.j_coupling.re;

    let pop = sum / (2.0 * kappa) - gamma_x / r;
    let n_l = 2.0 * kappa * params.p_l / (r * sum);
    let n_r = 2.0 * kappa * params.p_r / (r * sum);
    let gamma = kappa * diff / (2.0 * sum);
    let im_theta = kappa * gamma_x * diff / (2.0 * r * j * sum) - diff / (4.0 * j);

    let radicand = 4.0 * j * j * sum * sum - kappa * kappa * diff * diff;
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand { radicand });
    }
    let prefactor = (sum - threshold) / (4.0 * j * kappa * sum);
    let re_theta = (prefactor * radicand.sqrt()).abs();

    Ok(SteadyStateSolution {
        pop,
        n_l,
        n_r,
        gamma,
        im_theta,
        re_theta,
        above_threshold: true,
    })
}

/// Net decay rate γ_L + γ_R ≈ (R/2Γ)(P_L + P_R) - κ of a seed below threshold.
pub fn below_threshold_decay_rate(params: &ModelParams) -> Result<f64> {
    let sum = params.p_l + params.p_r;
    let threshold = threshold_pump(params);
    if sum > threshold {
        return Err(Error::invalid(
            "p_l + p_r",
            format!("total pump {sum} is above threshold {threshold}"),
        ));
    }
    Ok(params.r_scatter / (2.0 * params.gamma_x) * sum - params.kappa)
}
