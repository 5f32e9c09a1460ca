use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::{partial_trace, DensityMatrix, SystemShape, PSD_CLAMP};

const PURE_TOL: f64 = 1e-8;

/// Tr ρ; valid on unnormalized post-measurement branches too.
pub fn norm_monotone(rho: &CMatrix) -> f64 {
    linalg::trace_re(rho)
}

/// Tr(ρ_part²).
pub fn local_purity(rho: &CMatrix, shape: &SystemShape, part: &[usize]) -> Result<f64> {
    let r = partial_trace(rho, shape, part)?;
    Ok(linalg::trace_product_re(&r, &r))
}

/// −Tr(ρ_part log₂ ρ_part) on any Hermitian input with marginal eigenvalues
/// ≥ −clamp; no purity requirement.
pub fn marginal_entropy(rho: &CMatrix, shape: &SystemShape, part: &[usize]) -> Result<f64> {
    let r = partial_trace(rho, shape, part)?;
    spectral_entropy(&r)
}

pub fn spectral_entropy(r: &CMatrix) -> Result<f64> {
    let w = linalg::eigvalsh(r);
    if let Some(&min) = w.first() {
        if min < -PSD_CLAMP {
            return Err(MonolabError::NotPositive(min));
        }
    }
    Ok(-w.iter().filter(|&&x| x > PSD_CLAMP).map(|&x| x * x.log2()).sum::<f64>())
}

/// Entropy of entanglement of a pure state across `part` | complement, in bits.
pub fn entropy_of_entanglement(rho: &DensityMatrix, part: &[usize]) -> Result<f64> {
    let p = rho.purity();
    if p < 1.0 - PURE_TOL {
        return Err(MonolabError::NotPure(p));
    }
    marginal_entropy(rho.matrix(), rho.shape(), part)
}

/// Smallest eigenvalue of the marginal on `part`.
pub fn marginal_min_eigenvalue(rho: &CMatrix, shape: &SystemShape, part: &[usize]) -> Result<f64> {
    let r = partial_trace(rho, shape, part)?;
    Ok(linalg::eigvalsh(&r)[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::named::{bell, ghz, product, w};

    #[test]
    fn purity_examples() {
        let p = product(3).density();
        assert!((local_purity(p.matrix(), p.shape(), &[1]).unwrap() - 1.0).abs() < 1e-14);
        let b = bell().density();
        assert!((local_purity(b.matrix(), b.shape(), &[0]).unwrap() - 0.5).abs() < 1e-14);
        let g = ghz(3).density();
        assert!((local_purity(g.matrix(), g.shape(), &[0]).unwrap() - 0.5).abs() < 1e-14);
        assert!((local_purity(g.matrix(), g.shape(), &[0, 1]).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn entropy_examples() {
        let p = product(2).density();
        assert!(entropy_of_entanglement(&p, &[0]).unwrap().abs() < 1e-12);
        let b = bell().density();
        assert!((entropy_of_entanglement(&b, &[0]).unwrap() - 1.0).abs() < 1e-12);
        let wd = w(3).density();
        let h = (2.0 / 3.0) * (1.5f64).log2() + (1.0 / 3.0) * 3f64.log2();
        assert!((entropy_of_entanglement(&wd, &[0]).unwrap() - h).abs() < 1e-12);
        // S_A = S_BC
        assert!((entropy_of_entanglement(&wd, &[1, 2]).unwrap() - h).abs() < 1e-10);
        let mixed = DensityMatrix::maximally_mixed(SystemShape::qubits(2));
        assert!(matches!(
            entropy_of_entanglement(&mixed, &[0]),
            Err(MonolabError::NotPure(_))
        ));
    }

    #[test]
    fn norm_examples() {
        let g = ghz(3).density();
        assert!((norm_monotone(g.matrix()) - 1.0).abs() < 1e-15);
        assert!((norm_monotone(&g.matrix().scale(0.3)) - 0.3).abs() < 1e-15);
    }
}
