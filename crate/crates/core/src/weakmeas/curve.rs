use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::P_FLOOR;

const DELTA_NORM_TOL: f64 = 1e-10;

/// M(x) = sqrt((I + tanh(x) Δ)/2); x → +∞ gives M₂, x → −∞ gives M₁.
pub fn curve_operator(x: f64, delta: &CMatrix) -> Result<CMatrix> {
    let (w, v) = delta_eigen(delta)?;
    let t = x.tanh();
    let s: Vec<f64> = w.iter().map(|&d| ((1.0 + t * d) / 2.0).max(0.0).sqrt()).collect();
    Ok(linalg::hermitize(&linalg::reassemble(&s, &v)))
}

/// Eigen-decomposition of Δ after checking ‖Δ‖ ≤ 1.
pub fn delta_eigen(delta: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let h = linalg::hermiticity_residual(delta);
    if h > 1e-10 {
        return Err(MonolabError::NotHermitian(h));
    }
    let (w, v) = linalg::eigh(delta);
    let norm = w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if norm > 1.0 + DELTA_NORM_TOL {
        return Err(MonolabError::Domain(format!("‖Δ‖ = {norm} exceeds 1")));
    }
    Ok((w.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect(), v))
}

/// Weights C± = (1 ± tanh(ε) tanh(x))/2.
pub fn step_weights(x: f64, eps: f64) -> (f64, f64) {
    let p = eps.tanh() * x.tanh();
    ((1.0 + p) / 2.0, (1.0 - p) / 2.0)
}

/// Squared eigenvalues of M(x, +ε) and M(x, −ε) for each eigenvalue δ of Δ.
pub fn step_factors_sq(x: f64, eps: f64, delta_eigs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (cp, cm) = step_weights(x, eps);
    let (t0, tp, tm) = (x.tanh(), (x + eps).tanh(), (x - eps).tanh());
    let mut plus = Vec::with_capacity(delta_eigs.len());
    let mut minus = Vec::with_capacity(delta_eigs.len());
    for &d in delta_eigs {
        let den = 1.0 + t0 * d;
        if den < P_FLOOR {
            return Err(MonolabError::ProbabilityUnderflow(den));
        }
        plus.push((cp * (1.0 + tp * d) / den).max(0.0));
        minus.push((cm * (1.0 + tm * d) / den).max(0.0));
    }
    Ok((plus, minus))
}

#[derive(Clone, Debug)]
pub struct StepOperators {
    pub m_plus: CMatrix,
    pub m_minus: CMatrix,
    pub c_plus: f64,
    pub c_minus: f64,
}

/// M(x, ±ε) = sqrt(C± (I + tanh(x±ε)Δ)(I + tanh(x)Δ)⁻¹), evaluated in the
/// common eigenbasis of numerator and denominator.
pub fn step_operators(x: f64, eps: f64, delta: &CMatrix) -> Result<StepOperators> {
    if !x.is_finite() || !eps.is_finite() {
        return Err(MonolabError::Domain(format!("non-finite x = {x} or ε = {eps}")));
    }
    let (w, v) = delta_eigen(delta)?;
    let (plus, minus) = step_factors_sq(x, eps, &w)?;
    let sp: Vec<f64> = plus.iter().map(|a| a.sqrt()).collect();
    let sm: Vec<f64> = minus.iter().map(|a| a.sqrt()).collect();
    let (c_plus, c_minus) = step_weights(x, eps);
    Ok(StepOperators {
        m_plus: linalg::hermitize(&linalg::reassemble(&sp, &v)),
        m_minus: linalg::hermitize(&linalg::reassemble(&sm, &v)),
        c_plus,
        c_minus,
    })
}

/// A scaled to unit Frobenius norm.
pub fn normalize_frobenius(a: &CMatrix) -> CMatrix {
    let n = linalg::frobenius(a);
    if n > 0.0 {
        a.unscale(n)
    } else {
        a.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{diag_real, identity, max_abs, max_abs_diff, operator_norm};

    #[test]
    fn curve_at_origin_and_symmetric_case() {
        let delta = diag_real(&[-1.0, 1.0]);
        let m0 = curve_operator(0.0, &delta).unwrap();
        assert!(max_abs_diff(&m0, &identity(2).scale(0.5f64.sqrt())) < 1e-15);
        let zero = CMatrix::zeros(2, 2);
        for x in [-3.0, 0.5, 7.0] {
            let m = curve_operator(x, &zero).unwrap();
            assert!(max_abs_diff(&m, &identity(2).scale(0.5f64.sqrt())) < 1e-15);
        }
    }

    #[test]
    fn curve_limit_signs() {
        // M1² = |0⟩⟨0|, M2² = |1⟩⟨1|
        let delta = diag_real(&[-1.0, 1.0]);
        let x = (1.0f64 - 1e-6).atanh();
        let mp = curve_operator(x, &delta).unwrap();
        assert!(operator_norm(&(mp - diag_real(&[0.0, 1.0]))) < 1e-3);
        let mm = curve_operator(-x, &delta).unwrap();
        assert!(operator_norm(&(mm - diag_real(&[1.0, 0.0]))) < 1e-3);
    }

    #[test]
    fn step_examples() {
        let delta = diag_real(&[-1.0, 1.0]);
        let s = step_operators(0.0, 0.1, &delta).unwrap();
        assert_eq!((s.c_plus, s.c_minus), (0.5, 0.5));

        let s = step_operators(0.7, 0.05, &CMatrix::zeros(2, 2)).unwrap();
        let weak = max_abs(&(s.m_plus.unscale(s.c_plus.sqrt()) - identity(2)));
        assert!(weak < 1e-15);

        let s = step_operators(1.0, 0.05, &delta).unwrap();
        let comp = &s.m_plus * &s.m_plus + &s.m_minus * &s.m_minus - identity(2);
        assert!(max_abs(&comp) < 1e-12);
        let lhs = normalize_frobenius(&(&s.m_plus * curve_operator(1.0, &delta).unwrap()));
        let rhs = normalize_frobenius(&curve_operator(1.05, &delta).unwrap());
        assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn oversized_delta_rejected() {
        assert!(curve_operator(0.0, &diag_real(&[2.0, 0.0])).is_err());
    }
}
