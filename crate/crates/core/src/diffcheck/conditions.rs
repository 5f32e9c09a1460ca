use serde::{Deserialize, Serialize};

use super::fd::{fd_amplitude, fd_directional, fd_scalar, FdStep, Order};
use crate::error::{MonolabError, Result};
use crate::monotones::MonotoneDescriptor;
use crate::qcore::linalg::{self, anticommutator, c, commutator, outer, CMatrix, CVector};
use crate::qcore::{embed_local, partial_trace, LocalHermitian, PureState, SystemShape, PSD_CLAMP};

/// Evaluation points for G(ρ, tε)/t², extrapolated quadratically to t → 0.
pub const G_STEPS: [f64; 2] = [0.02, 0.01];

/// D = Tr(ερ)ρ − ½{ε, ρ}.
pub fn measurement_direction(rho: &CMatrix, eps_full: &CMatrix) -> CMatrix {
    let mean = linalg::trace_product_re(eps_full, rho);
    rho.scale(mean) - anticommutator(eps_full, rho).scale(0.5)
}

/// [[ε, ρ], ε].
pub fn double_commutator(rho: &CMatrix, eps_full: &CMatrix) -> CMatrix {
    commutator(&commutator(eps_full, rho), eps_full)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LuValue {
    /// Tr{(∂f/∂ρ) i[ε,ρ]} / ‖ε‖
    pub fd_value: f64,
    /// f(e^{iε}ρe^{−iε}) − f(ρ) at the full ε
    pub exact_value: f64,
    pub fd_raw: f64,
}

pub fn lu_condition(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    eps: &LocalHermitian,
    step: FdStep,
) -> Result<LuValue> {
    let e = eps.embedded();
    let dir = commutator(&e, rho).map(|z| z * c(0.0, 1.0));
    let f = |m: &CMatrix| desc.evaluate(shape, m);
    let fd_raw = fd_directional(f, rho, &dir, step, Order::First)?;
    let u = linalg::expi(&e)?;
    let rotated = &u * rho * u.adjoint();
    let exact_value = f(&rotated)? - f(rho)?;
    Ok(LuValue {
        fd_value: fd_raw / eps.norm_bound(),
        exact_value,
        fd_raw,
    })
}

/// G(ρ, ε) = p₁ f(M₁ρM₁/p₁) + p₂ f(M₂ρM₂/p₂) − f(ρ) with M₁,₂ = sqrt((I ± ε)/2).
pub fn g_function(desc: &MonotoneDescriptor, shape: &SystemShape, rho: &CMatrix, eps: &LocalHermitian) -> Result<f64> {
    if eps.norm_bound() >= 1.0 {
        return Err(MonolabError::Domain(format!(
            "‖ε‖ = {} must be below 1",
            eps.norm_bound()
        )));
    }
    let d = eps.block().nrows();
    let id = linalg::identity(d);
    let f0 = desc.evaluate(shape, rho)?;
    let mut total = -f0;
    for sign in [1.0, -1.0] {
        let m = linalg::sqrt_psd(&(&id + eps.block().scale(sign)).scale(0.5))?;
        let mf = embed_local(&m, eps.target(), shape)?;
        let branch = &mf * rho * &mf;
        let p = linalg::trace_re(&branch);
        if p <= 0.0 {
            return Err(MonolabError::ProbabilityUnderflow(p));
        }
        total += p * desc.evaluate(shape, &linalg::hermitize(&branch).unscale(p))?;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementValue {
    /// ¼Tr{f'[[ε,ρ],ε]} + Tr{f''D⊗D}, divided by ‖ε‖²
    pub lhs: f64,
    /// lim G(ρ,tε)/t², divided by ‖ε‖²
    pub g_ratio: f64,
    pub lhs_raw: f64,
    pub g_raw: f64,
}

pub fn measurement_condition(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    eps: &LocalHermitian,
    step: FdStep,
) -> Result<MeasurementValue> {
    let e = eps.embedded();
    let f = |m: &CMatrix| desc.evaluate(shape, m);
    let first = fd_directional(f, rho, &double_commutator(rho, &e), step, Order::First)?;
    let second = fd_directional(f, rho, &measurement_direction(rho, &e), step, Order::Second)?;
    let lhs_raw = 0.25 * first + second;
    let g_raw = g_ratio(desc, shape, rho, eps)?;
    let n2 = eps.norm_bound().powi(2);
    Ok(MeasurementValue {
        lhs: lhs_raw / n2,
        g_ratio: g_raw / n2,
        lhs_raw,
        g_raw,
    })
}

/// G(ρ,tε)/t² at the two `G_STEPS` values, extrapolated to t → 0 (G is
/// even in t, so the leading error is O(t²)).
pub fn g_ratio(desc: &MonotoneDescriptor, shape: &SystemShape, rho: &CMatrix, eps: &LocalHermitian) -> Result<f64> {
    let [t1, t2] = G_STEPS;
    let g1 = g_function(desc, shape, rho, &eps.scaled(t1))? / (t1 * t1);
    let g2 = g_function(desc, shape, rho, &eps.scaled(t2))? / (t2 * t2);
    let r = (t1 / t2).powi(2);
    Ok((r * g2 - g1) / (r - 1.0))
}

/// Tr{(∂²f/∂ρ⊗²) σ⊗²}.
pub fn convexity_condition(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    sigma: &CMatrix,
    step: FdStep,
) -> Result<f64> {
    fd_directional(|m| desc.evaluate(shape, m), rho, sigma, step, Order::Second)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeValue {
    /// |Σ ∂f/∂α (εα) − c.c.| / ‖ε‖
    pub lu_residual: f64,
    /// Σ ∂²f/∂α∂α u u + c.c. with u = εα − ⟨ε⟩α, divided by ‖ε‖²
    pub meas_lhs: f64,
}

/// Amplitude forms of the LU and measurement conditions for f(|ψ⟩) = f(|ψ⟩⟨ψ|).
///
/// With Wirtinger derivatives g = ∂f/∂α, a real f satisfies
/// d/ds f(α + s iv) = −2 Im Σ g v and
/// d²/ds² f(α + s v) − d²/ds² f(α + s iv) = 2 Re Σ ∂²f/∂α∂α v v,
/// so both sides are directional derivatives in (Re α, Im α).
pub fn pure_amplitude_conditions(
    desc: &MonotoneDescriptor,
    psi: &PureState,
    eps: &LocalHermitian,
    step: FdStep,
) -> Result<AmplitudeValue> {
    let shape = psi.shape();
    let e = eps.embedded();
    let alpha = psi.amplitudes();
    let f = |a: &CVector| desc.evaluate(shape, &outer(a, a));
    let ea = &e * alpha;
    let mean = alpha.dotc(&ea);
    let u = &ea - alpha * mean;
    let i = c(0.0, 1.0);
    let lu = fd_amplitude(f, alpha, &ea.map(|z| z * i), step, Order::First)?.abs();
    let d_real = fd_amplitude(f, alpha, &u, step, Order::Second)?;
    let d_imag = fd_amplitude(f, alpha, &u.map(|z| z * i), step, Order::Second)?;
    let n = eps.norm_bound();
    Ok(AmplitudeValue {
        lu_residual: lu / n,
        meas_lhs: 0.5 * (d_real - d_imag) / (n * n),
    })
}

/// Marginals on `part` of ρ, of C = [[ε,ρ],ε] and of D.
fn marginal_terms(
    shape: &SystemShape,
    rho: &CMatrix,
    eps: &LocalHermitian,
    part: &[usize],
) -> Result<(CMatrix, CMatrix, CMatrix)> {
    let e = eps.embedded();
    Ok((
        partial_trace(rho, shape, part)?,
        partial_trace(&double_commutator(rho, &e), shape, part)?,
        partial_trace(&measurement_direction(rho, &e), shape, part)?,
    ))
}

/// ½Tr{ρ_P C_P} + 2Tr{D_P²} for f = Tr ρ_P², divided by ‖ε‖².
/// C_P vanishes when ε acts outside P, leaving 2Tr{D_P²}.
pub fn purity_closed_form(shape: &SystemShape, rho: &CMatrix, eps: &LocalHermitian, part: &[usize]) -> Result<f64> {
    let (r, cp, d) = marginal_terms(shape, rho, eps, part)?;
    let v = 0.5 * linalg::trace_product_re(&r, &cp) + 2.0 * linalg::trace_product_re(&d, &d);
    Ok(v / eps.norm_bound().powi(2))
}

/// −¼Tr{ln ρ_P C_P}/ln 2 + Hessian term, divided by ‖ε‖².
fn entropy_form(
    shape: &SystemShape,
    rho: &CMatrix,
    eps: &LocalHermitian,
    part: &[usize],
    hessian: fn(&CMatrix, &CMatrix) -> Result<f64>,
) -> Result<f64> {
    let (r, cp, d) = marginal_terms(shape, rho, eps, part)?;
    let first = if linalg::max_abs(&cp) == 0.0 {
        0.0
    } else {
        let log = linalg::herm_matrix_function(&r, linalg::MatrixFn::Log, PSD_CLAMP)?;
        -0.25 * linalg::trace_product_re(&log, &cp) / std::f64::consts::LN_2
    };
    Ok((first + hessian(&r, &d)?) / eps.norm_bound().powi(2))
}

/// Entropy measurement condition with the Hessian written as −Tr{ρ_P⁻¹ D_P²}/ln 2.
pub fn entropy_closed_form(shape: &SystemShape, rho: &CMatrix, eps: &LocalHermitian, part: &[usize]) -> Result<f64> {
    entropy_form(shape, rho, eps, part, entropy_hessian_inverse_form)
}

/// Entropy measurement condition with the exact Hessian.
pub fn entropy_exact_form(shape: &SystemShape, rho: &CMatrix, eps: &LocalHermitian, part: &[usize]) -> Result<f64> {
    entropy_form(shape, rho, eps, part, entropy_hessian_exact)
}

/// −Tr{r⁻¹ s²}/ln 2.
pub fn entropy_hessian_inverse_form(r: &CMatrix, s: &CMatrix) -> Result<f64> {
    let inv = linalg::herm_matrix_function(r, linalg::MatrixFn::Inverse, PSD_CLAMP)?;
    Ok(-linalg::trace_product_re(&inv, &(s * s)) / std::f64::consts::LN_2)
}

/// d²/dt² of −Tr{(r+ts) log₂(r+ts)} at t = 0:
/// −Σ_ij |s_ij|² (ln λ_i − ln λ_j)/(λ_i − λ_j) / ln 2 in the eigenbasis of r.
pub fn entropy_hessian_exact(r: &CMatrix, s: &CMatrix) -> Result<f64> {
    let (w, v) = linalg::eigh(r);
    if w[0] <= PSD_CLAMP {
        return Err(MonolabError::Domain(format!(
            "marginal eigenvalue {:.3e} not positive",
            w[0]
        )));
    }
    let st = v.adjoint() * s * &v;
    let n = w.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dd = if (w[i] - w[j]).abs() < 1e-12 * w[i].max(w[j]) {
                2.0 / (w[i] + w[j])
            } else {
                (w[i].ln() - w[j].ln()) / (w[i] - w[j])
            };
            acc += st[(i, j)].norm_sqr() * dd;
        }
    }
    Ok(-acc / std::f64::consts::LN_2)
}

/// 2 Tr σ_P² for f = Tr ρ_P² along a full-space direction σ.
pub fn purity_convexity_closed_form(shape: &SystemShape, sigma: &CMatrix, part: &[usize]) -> Result<f64> {
    let s = partial_trace(sigma, shape, part)?;
    Ok(2.0 * linalg::trace_product_re(&s, &s))
}

/// −Tr{ρ_P⁻¹ σ_P²}/ln 2 for the marginal entropy along σ.
pub fn entropy_convexity_closed_form(
    shape: &SystemShape,
    rho: &CMatrix,
    sigma: &CMatrix,
    part: &[usize],
) -> Result<f64> {
    let s = partial_trace(sigma, shape, part)?;
    let r = partial_trace(rho, shape, part)?;
    entropy_hessian_inverse_form(&r, &s)
}

pub fn entropy_convexity_exact(shape: &SystemShape, rho: &CMatrix, sigma: &CMatrix, part: &[usize]) -> Result<f64> {
    let s = partial_trace(sigma, shape, part)?;
    let r = partial_trace(rho, shape, part)?;
    entropy_hessian_exact(&r, &s)
}

/// Second derivative of t ↦ G(ρ, tε) at 0 divided by ‖ε‖², evaluated by a
/// central difference in t.
pub fn g_second_derivative(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    eps: &LocalHermitian,
    h: f64,
) -> Result<f64> {
    let d = fd_scalar(
        |t| {
            if t == 0.0 {
                Ok(0.0)
            } else if t > 0.0 {
                g_function(desc, shape, rho, &eps.scaled(t))
            } else {
                g_function(desc, shape, rho, &eps.scaled(-t).with_sign_flipped())
            }
        },
        FdStep { h, richardson: true },
        Order::Second,
    )?;
    Ok(d / eps.norm_bound().powi(2))
}

trait SignFlip {
    fn with_sign_flipped(&self) -> Self;
}

impl SignFlip for LocalHermitian {
    fn with_sign_flipped(&self) -> Self {
        LocalHermitian::new(self.shape().clone(), self.target(), self.block().scale(-1.0))
            .expect("negated Hermitian block")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotones::lookup;
    use crate::qcore::sample::{ginibre_mixed, haar_pure, hermitian_direction, trial_rng};

    const STEP: FdStep = FdStep {
        h: 1e-3,
        richardson: true,
    };

    #[test]
    fn trace_conditions_vanish() {
        let s = SystemShape::qubits(3);
        let d = lookup("norm").unwrap();
        for seed in 0..5 {
            let mut rng = trial_rng(seed, 0);
            let rho = ginibre_mixed(&s, 8, &mut rng);
            let eps = hermitian_direction(&s, (seed % 3) as usize, 0.1, &mut rng).unwrap();
            let lu = lu_condition(&d, &s, rho.matrix(), &eps, STEP).unwrap();
            assert!(lu.fd_raw.abs() < 1e-10 && lu.exact_value.abs() < 1e-10);
            let m = measurement_condition(&d, &s, rho.matrix(), &eps, STEP).unwrap();
            assert!(m.lhs_raw.abs() < 1e-10 && m.g_raw.abs() < 1e-10);
        }
    }

    #[test]
    fn purity_off_subsystem_matches_closed_form() {
        let s = SystemShape::qubits(3);
        let d = lookup("purity").unwrap();
        for seed in 0..5 {
            let mut rng = trial_rng(seed, 1);
            let rho = haar_pure(&s, &mut rng).density();
            for target in 0..3 {
                let eps = hermitian_direction(&s, target, 0.1, &mut rng).unwrap();
                let m = measurement_condition(&d, &s, rho.matrix(), &eps, STEP).unwrap();
                let closed = purity_closed_form(&s, rho.matrix(), &eps, &[0]).unwrap();
                assert!((m.lhs - closed).abs() < 1e-6, "{} vs {closed}", m.lhs);
                assert!(m.lhs >= -1e-7);
            }
        }
    }

    #[test]
    fn lhs_is_second_t_derivative_of_g() {
        let s = SystemShape::qubits(3);
        let mut rng = trial_rng(12, 0);
        let rho = haar_pure(&s, &mut rng).density();
        for name in ["purity", "phi_ABC", "entropy"] {
            let d = lookup(name).unwrap();
            let eps = hermitian_direction(&s, 2, 0.1, &mut rng).unwrap();
            let m = measurement_condition(&d, &s, rho.matrix(), &eps, STEP).unwrap();
            let g2 = g_second_derivative(&d, &s, rho.matrix(), &eps, 0.02).unwrap();
            assert!(
                (m.lhs - g2).abs() < 1e-4 * (1.0 + m.lhs.abs()),
                "{name}: {} vs {g2}",
                m.lhs
            );
            assert!((m.lhs - 2.0 * m.g_ratio).abs() < 1e-4 * (1.0 + m.lhs.abs()));
        }
    }

    #[test]
    fn entropy_exact_form_matches_evaluator() {
        let s = SystemShape::qubits(3);
        let d = lookup("entropy").unwrap();
        let mut rng = trial_rng(3, 3);
        let rho = haar_pure(&s, &mut rng).density();
        for target in 0..3 {
            let eps = hermitian_direction(&s, target, 0.1, &mut rng).unwrap();
            let m = measurement_condition(&d, &s, rho.matrix(), &eps, STEP).unwrap();
            let exact = entropy_exact_form(&s, rho.matrix(), &eps, &[0]).unwrap();
            let inverse = entropy_closed_form(&s, rho.matrix(), &eps, &[0]).unwrap();
            assert!((m.lhs - exact).abs() < 1e-6);
            assert!(inverse <= exact + 1e-12 && exact <= 1e-12);
        }
    }

    #[test]
    fn amplitude_forms() {
        let s = SystemShape::qubits(3);
        let mut rng = trial_rng(8, 0);
        let psi = haar_pure(&s, &mut rng);
        let norm = lookup("norm").unwrap();
        let eps = hermitian_direction(&s, 1, 0.1, &mut rng).unwrap();
        let a = pure_amplitude_conditions(&norm, &psi, &eps, STEP).unwrap();
        assert!(a.lu_residual < 1e-10 && a.meas_lhs.abs() < 1e-8);

        let pur = lookup("purity").unwrap();
        let a = pure_amplitude_conditions(&pur, &psi, &eps, STEP).unwrap();
        let m = measurement_condition(&pur, &s, psi.density().matrix(), &eps, STEP).unwrap();
        let lu = lu_condition(&pur, &s, psi.density().matrix(), &eps, STEP).unwrap();
        assert!((a.meas_lhs - 2.0 * m.lhs).abs() < 1e-4);
        assert!((a.lu_residual - lu.fd_value.abs()).abs() < 1e-8);
    }
}
