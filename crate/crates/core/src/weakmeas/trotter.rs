use serde::Serialize;

use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{self, c, CMatrix};
use crate::qcore::{embed_local, LocalHermitian};

#[derive(Clone, Debug)]
pub struct TrotterResult {
    /// exp(iH/n) on the full space
    pub step: CMatrix,
    /// step composed n times
    pub composed: CMatrix,
    /// ‖(I + iH/n)ⁿ − e^{iH}‖ for the raw first-order product
    pub raw_deviation: f64,
    /// ‖stepⁿ − e^{iH}‖
    pub exp_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrotterPoint {
    pub n: usize,
    pub raw_deviation: f64,
}

fn power(m: &CMatrix, n: usize) -> CMatrix {
    let mut acc = linalg::identity(m.nrows());
    for _ in 0..n {
        acc = &acc * m;
    }
    acc
}

/// Unitary e^{iH} as a product of n infinitesimal steps.
pub fn trotter_unitary(h: &LocalHermitian, n: usize) -> Result<TrotterResult> {
    if n == 0 {
        return Err(MonolabError::Domain("trotter step count must be at least 1".into()));
    }
    let block = h.block();
    let d = block.nrows();
    let exact = linalg::expi(block)?;
    let step_block = linalg::expi(&block.unscale(n as f64))?;
    let composed_block = power(&step_block, n);
    let raw_step = linalg::identity(d) + block.map(|z| z * c(0.0, 1.0 / n as f64));
    let raw = power(&raw_step, n);
    let shape = h.shape();
    Ok(TrotterResult {
        step: embed_local(&step_block, h.target(), shape)?,
        composed: embed_local(&composed_block, h.target(), shape)?,
        raw_deviation: linalg::operator_norm(&(raw - &exact)),
        exp_deviation: linalg::operator_norm(&(composed_block - exact)),
    })
}

/// Raw-product deviations for each n.
pub fn trotter_sweep(h: &LocalHermitian, ns: &[usize]) -> Result<Vec<TrotterPoint>> {
    ns.iter()
        .map(|&n| {
            trotter_unitary(h, n).map(|r| TrotterPoint {
                n,
                raw_deviation: r.raw_deviation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{max_abs_diff, pauli_x};
    use crate::qcore::SystemShape;

    #[test]
    fn zero_hamiltonian() {
        let h = LocalHermitian::new(SystemShape::qubits(2), 1, CMatrix::zeros(2, 2)).unwrap();
        let r = trotter_unitary(&h, 7).unwrap();
        assert!(max_abs_diff(&r.composed, &linalg::identity(4)) < 1e-15);
        assert_eq!(r.raw_deviation, 0.0);
        assert!(trotter_unitary(&h, 0).is_err());
    }

    #[test]
    fn first_order_convergence() {
        let h = LocalHermitian::new(SystemShape::qubits(1), 0, pauli_x().scale(std::f64::consts::FRAC_PI_2)).unwrap();
        let pts = trotter_sweep(&h, &[10, 100, 1000]).unwrap();
        for w in pts.windows(2) {
            let ratio = w[0].raw_deviation / w[1].raw_deviation;
            assert!((ratio - 10.0).abs() < 2.0, "ratio {ratio}");
        }
        for n in [1, 3, 50] {
            assert!(trotter_unitary(&h, n).unwrap().exp_deviation < 1e-12);
        }
    }
}
