//! Fixture states with exact amplitudes.
//!
//! | name      | amplitudes                                  |
//! |-----------|---------------------------------------------|
//! | `product` | `|0…0⟩`                                      |
//! | `bell`    | `(|00⟩ + |11⟩)/√2`                           |
//! | `ghz`     | `(|0…0⟩ + |1…1⟩)/√2`                         |
//! | `w`       | equal superposition of single-excitation kets |

use super::linalg::{c, CVector};
use super::shape::SystemShape;
use super::state::PureState;
use crate::error::{MonolabError, Result};

pub const NAMES: [&str; 4] = ["product", "bell", "ghz", "w"];

fn basis(n: usize, i: usize) -> CVector {
    let mut v = CVector::from_element(n, c(0.0, 0.0));
    v[i] = c(1.0, 0.0);
    v
}

pub fn product(n_qubits: usize) -> PureState {
    let s = SystemShape::qubits(n_qubits);
    let n = s.total_dim();
    PureState::new(s, basis(n, 0)).expect("unit vector")
}

pub fn bell() -> PureState {
    ghz(2)
}

pub fn ghz(n_qubits: usize) -> PureState {
    let s = SystemShape::qubits(n_qubits);
    let n = s.total_dim();
    PureState::normalized(s, basis(n, 0) + basis(n, n - 1)).expect("nonzero vector")
}

pub fn w(n_qubits: usize) -> PureState {
    let s = SystemShape::qubits(n_qubits);
    let n = s.total_dim();
    let mut v = CVector::from_element(n, c(0.0, 0.0));
    for q in 0..n_qubits {
        v[1 << q] = c(1.0, 0.0);
    }
    PureState::normalized(s, v).expect("nonzero vector")
}

/// Three-qubit fixtures by name; `bell` is the two-qubit Bell pair.
pub fn named_state(name: &str) -> Result<PureState> {
    match name.to_ascii_lowercase().as_str() {
        "product" | "000" => Ok(product(3)),
        "bell" => Ok(bell()),
        "ghz" => Ok(ghz(3)),
        "w" => Ok(w(3)),
        other => Err(MonolabError::Config(format!(
            "unknown named state '{other}' (expected one of {NAMES:?})"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitudes() {
        let g = ghz(3);
        let a = g.amplitudes();
        assert!((a[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[7].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let wv = w(3);
        for i in [1usize, 2, 4] {
            assert!((wv.amplitudes()[i].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
        assert!(named_state("nope").is_err());
        assert_eq!(named_state("bell").unwrap().shape().n_subsystems(), 2);
    }
}
