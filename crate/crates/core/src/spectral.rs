//! Non-Hermitian two-mode Hamiltonian with balanced gain and loss,
//!
//! ```text
//! H = [[ iγ, -J ], [ -J*, -iγ ]],   λ± = ±√(|J|² - γ²)
//! ```
//!
//! The spectrum is real for γ < |J|, coalesces at the exceptional point
//! γ = |J| and turns purely imaginary beyond it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeHamiltonian {
    pub gamma: f64,
    pub j_coupling: Complex64,
    pub entries: [[Complex64; 2]; 2],
}

impl TwoModeHamiltonian {
    pub fn new(gamma: f64, j_coupling: Complex64) -> Self {
        let i_gamma = Complex64::new(0.0, gamma);
        TwoModeHamiltonian {
            gamma,
            j_coupling,
            entries: [[i_gamma, -j_coupling], [-j_coupling.conj(), -i_gamma]],
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn determinant(&self) -> Complex64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    pub fn apply(&self, v: &[Complex64; 2]) -> [Complex64; 2] {
        let h = &self.entries;
        [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]]
    }

    /// ‖H v - λ v‖.
    pub fn residual(&self, lambda: Complex64, v: &[Complex64; 2]) -> f64 {
        let hv = self.apply(v);
        ((hv[0] - lambda * v[0]).norm_sqr() + (hv[1] - lambda * v[1]).norm_sqr()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigensystem {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub v_plus: [Complex64; 2],
    pub v_minus: [Complex64; 2],
}

/// Unit Euclidean norm with the first nonzero component real and positive.
fn normalize(v: [Complex64; 2]) -> [Complex64; 2] {
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let pivot = if v[0].norm() > 0.0 { v[0] } else { v[1] };
    let phase = pivot.conj() / pivot.norm();
    [v[0] * phase / norm, v[1] * phase / norm]
}

pub fn eigensystem(gamma: f64, j: Complex64) -> Result<Eigensystem> {
    if !(j.norm() > 0.0) {
        return Err(Error::invalid("j_coupling", "|J| must be > 0"));
    }
    let s = Complex64::new(j.norm_sqr() - gamma * gamma, 0.0).sqrt();
    let i_gamma = Complex64::new(0.0, gamma);
    Ok(Eigensystem {
        lambda_plus: s,
        lambda_minus: -s,
        v_plus: normalize([s + i_gamma, -j.conj()]),
        v_minus: normalize([s - i_gamma, j.conj()]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PtPhase {
    PTSymmetric,
    ExceptionalPoint,
    PTBroken,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseClassification {
    pub phase: PtPhase,
    pub tolerance: f64,
}

/// Default width of the exceptional-point band, relative to |J|.
pub const EP_RELATIVE_TOLERANCE: f64 = 1e-9;

pub fn classify_phase(gamma: f64, j: Complex64, tol: f64) -> Result<PhaseClassification> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    let gamma = gamma.abs();
    let jn = j.norm();
    let phase = if (gamma - jn).abs() <= tol {
        PtPhase::ExceptionalPoint
    } else if gamma < jn {
        PtPhase::PTSymmetric
    } else {
        PtPhase::PTBroken
    };
    Ok(PhaseClassification { phase, tolerance: tol })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub gamma: f64,
    pub re_plus: f64,
    pub im_plus: f64,
    pub re_minus: f64,
    pub im_minus: f64,
    /// Largest ‖Hv - λv‖ of the two eigenpairs.
    pub residual: f64,
}

pub fn bifurcation_scan(gamma_min: f64, gamma_max: f64, steps: usize, j: Complex64) -> Result<Vec<ScanRow>> {
    if !(gamma_min < gamma_max) {
        return Err(Error::invalid("gamma_max", "must exceed gamma_min"));
    }
    if steps < 2 {
        return Err(Error::invalid("steps", "must be >= 2"));
    }
    let span = gamma_max - gamma_min;
    (0..steps)
        .map(|k| {
            let gamma = gamma_min + span * k as f64 / (steps - 1) as f64;
            let es = eigensystem(gamma, j)?;
            let h = TwoModeHamiltonian::new(gamma, j);
            let residual = h
                .residual(es.lambda_plus, &es.v_plus)
                .max(h.residual(es.lambda_minus, &es.v_minus));
            Ok(ScanRow {
                gamma,
                re_plus: es.lambda_plus.re,
                im_plus: es.lambda_plus.im,
                re_minus: es.lambda_minus.re,
                im_minus: es.lambda_minus.im,
                residual,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const J1: Complex64 = Complex64::new(1.0, 0.0);

    fn dist(a: &[Complex64; 2], b: &[Complex64; 2]) -> f64 {
        ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt()
    }

    #[test]
    fn hermitian_limit() {
        let es = eigensystem(0.0, J1).unwrap();
        assert_eq!(es.lambda_plus, Complex64::new(1.0, 0.0));
        assert_eq!(es.lambda_minus, Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn exceptional_point_coalesces() {
        let es = eigensystem(1.0, J1).unwrap();
        assert_eq!(es.lambda_plus.norm(), 0.0);
        assert_eq!(es.lambda_minus.norm(), 0.0);
        assert!(dist(&es.v_plus, &es.v_minus) < 1e-6);
    }

    #[test]
    fn intermediate_gain() {
        let es = eigensystem(0.5, J1).unwrap();
        assert!((es.lambda_plus.re - 0.866_025_403_8).abs() < 1e-9);
        assert_eq!(es.lambda_plus.im, 0.0);
        let h = TwoModeHamiltonian::new(0.5, J1);
        assert!(h.residual(es.lambda_plus, &es.v_plus) < 1e-12);
        assert!(h.residual(es.lambda_minus, &es.v_minus) < 1e-12);
    }

    #[test]
    fn classification() {
        let tol = EP_RELATIVE_TOLERANCE;
        assert_eq!(classify_phase(0.5, J1, tol).unwrap().phase, PtPhase::PTSymmetric);
        assert_eq!(classify_phase(1.0, J1, tol).unwrap().phase, PtPhase::ExceptionalPoint);
        assert_eq!(classify_phase(1.0 + 0.5 * tol, J1, tol).unwrap().phase, PtPhase::ExceptionalPoint);
        assert_eq!(classify_phase(1.5, J1, tol).unwrap().phase, PtPhase::PTBroken);
        assert!(classify_phase(1.5, J1, 0.0).is_err());
        let es = eigensystem(1.5, J1).unwrap();
        assert!((es.lambda_plus.im - 1.118_034_0).abs() < 1e-7);
    }

    #[test]
    fn scan_shape() {
        let rows = bifurcation_scan(0.0, 2.0, 201, J1).unwrap();
        assert_eq!(rows.len(), 201);
        assert!((rows[200].im_plus - 3f64.sqrt()).abs() < 1e-12);
        let mut last = 0.0;
        for r in &rows {
            assert_eq!(r.im_minus, -r.im_plus);
            if r.gamma < 1.0 {
                assert_eq!(r.im_plus, 0.0);
            } else if r.gamma > 1.0 {
                assert!(r.im_plus > last);
                last = r.im_plus;
            }
        }
        assert!(bifurcation_scan(1.0, 1.0, 10, J1).is_err());
        assert!(bifurcation_scan(0.0, 1.0, 1, J1).is_err());
    }

    #[test]
    fn hamiltonian_structure() {
        let h = TwoModeHamiltonian::new(0.7, Complex64::new(0.6, -0.8));
        assert_eq!(h.trace(), Complex64::new(0.0, 0.0));
        assert_eq!(h.entries[0][0], h.entries[1][1].conj());
        assert_eq!(h.entries[0][1], h.entries[1][0].conj());
    }

    proptest! {
        #[test]
        fn trace_and_determinant_identities(gamma in 0.0f64..3.0, jr in -2.0f64..2.0, ji in -2.0f64..2.0) {
            let j = Complex64::new(jr, ji);
            prop_assume!(j.norm() > 1e-3);
            let es = eigensystem(gamma, j).unwrap();
            prop_assert!((es.lambda_plus + es.lambda_minus).norm() < 1e-12);
            let det = es.lambda_plus * es.lambda_minus;
            prop_assert!((det - Complex64::new(gamma * gamma - j.norm_sqr(), 0.0)).norm() < 1e-12 * (1.0 + gamma * gamma));
            let h = TwoModeHamiltonian::new(gamma, j);
            prop_assert!((h.determinant() - det).norm() < 1e-12 * (1.0 + gamma * gamma));
        }
    }
}
