//! Entanglement monotones as functions of the density matrix.
//!
//! Every catalog entry evaluates on a raw complex matrix so that finite
//! differences may step off the set of normalized states.

mod basic;
mod invariants;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use basic::{
    entropy_of_entanglement, local_purity, marginal_entropy, marginal_min_eigenvalue, norm_monotone, spectral_entropy,
};
pub use invariants::{
    i5, i5_amplitude, i5_amplitude_exhaustive, i5_from_density, kempe_i4_three_ways, kempe_i4_three_ways_density,
    phi_abc, phi_from_density, phi_from_rho_ab, phi_from_rho_ab_unchecked, phi_x_operator, polynomial_invariant,
    polynomial_invariant_complex, sigma_abc, sigma_from_density, tau_abc_calibration, three_qubit_invariants,
    tr_x3_expansion_check, InvariantSet, Marginals, TrX3Check,
};

use crate::error::{MonolabError, Result};
use crate::qcore::{CMatrix, SystemShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// non-increasing on average under local operations
    Decreasing,
    /// non-decreasing on average
    Increasing,
}

impl Direction {
    /// +1 for decreasing, −1 for increasing: multiplying a change by this
    /// makes a violation positive.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Decreasing => 1.0,
            Direction::Increasing => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    PureOnly,
    Mixed,
}

pub type EvalFn = Arc<dyn Fn(&SystemShape, &CMatrix) -> Result<f64> + Send + Sync>;
pub type SmoothFn = Arc<dyn Fn(&SystemShape, &CMatrix) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct MonotoneDescriptor {
    pub name: String,
    pub direction: Direction,
    pub domain: Domain,
    /// monotonicity not established; reported, never asserted
    pub conjectured: bool,
    pub default_shape: SystemShape,
    /// shapes other than `default_shape` are accepted
    pub any_shape: bool,
    eval: EvalFn,
    smooth: Option<SmoothFn>,
}

impl fmt::Debug for MonotoneDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneDescriptor")
            .field("name", &self.name)
            .field("direction", &self.direction)
            .field("domain", &self.domain)
            .field("conjectured", &self.conjectured)
            .field("default_shape", &self.default_shape)
            .finish()
    }
}

impl MonotoneDescriptor {
    pub fn new(
        name: impl Into<String>,
        direction: Direction,
        domain: Domain,
        default_shape: SystemShape,
        eval: EvalFn,
    ) -> Self {
        Self {
            name: name.into(),
            direction,
            domain,
            conjectured: false,
            default_shape,
            any_shape: false,
            eval,
            smooth: None,
        }
    }

    pub fn with_smooth_on(mut self, smooth: SmoothFn) -> Self {
        self.smooth = Some(smooth);
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn conjectured(mut self) -> Self {
        self.conjectured = true;
        self
    }

    fn any_shape(mut self) -> Self {
        self.any_shape = true;
        self
    }

    pub fn accepts_shape(&self, shape: &SystemShape) -> bool {
        self.any_shape || *shape == self.default_shape
    }

    pub fn evaluate(&self, shape: &SystemShape, rho: &CMatrix) -> Result<f64> {
        if !self.accepts_shape(shape) {
            return Err(MonolabError::InvalidShape(format!(
                "{} is defined on {}, got {shape}",
                self.name, self.default_shape
            )));
        }
        if rho.nrows() != shape.total_dim() || rho.ncols() != shape.total_dim() {
            return Err(MonolabError::SizeMismatch {
                expected: shape.total_dim(),
                got: rho.nrows(),
            });
        }
        (self.eval)(shape, rho)
    }

    /// False where derivatives are ill-conditioned.
    pub fn smooth_on(&self, shape: &SystemShape, rho: &CMatrix) -> bool {
        self.smooth.as_ref().is_none_or(|s| s(shape, rho))
    }
}

/// Marginal eigenvalue floor for the entropy's smoothness predicate.
pub const ENTROPY_SMOOTH_FLOOR: f64 = 1e-6;
/// I₅ floor below which 2√I₅ is treated as non-differentiable.
pub const TAU_ABC_SMOOTH_FLOOR: f64 = 1e-6;

pub const CATALOG_NAMES: [&str; 9] = [
    "norm",
    "purity",
    "entropy",
    "tau_AB_C",
    "tau_AC_B",
    "tau_BC_A",
    "tau_ABC",
    "phi_ABC",
    "sigma_ABC",
];

fn tangle_pair(name: &str, traced_part: usize) -> MonotoneDescriptor {
    MonotoneDescriptor::new(
        name,
        Direction::Decreasing,
        Domain::PureOnly,
        SystemShape::qubits(3),
        Arc::new(move |s, r| Ok(2.0 * (1.0 - local_purity(r, s, &[traced_part])?))),
    )
}

/// Catalog entry by name (case-insensitive; a few long-form aliases).
pub fn lookup(name: &str) -> Result<MonotoneDescriptor> {
    let three = SystemShape::qubits(3);
    let d = match name.to_ascii_lowercase().as_str() {
        "norm" | "trace" | "tr" => MonotoneDescriptor::new(
            "norm",
            Direction::Decreasing,
            Domain::Mixed,
            three,
            Arc::new(|_, r| Ok(norm_monotone(r))),
        )
        .any_shape(),
        "purity" | "local_purity" | "i2" => MonotoneDescriptor::new(
            "purity",
            Direction::Increasing,
            Domain::PureOnly,
            three,
            Arc::new(|s, r| local_purity(r, s, &[0])),
        )
        .any_shape(),
        "entropy" | "entropy_of_entanglement" | "s_a" => MonotoneDescriptor::new(
            "entropy",
            Direction::Decreasing,
            Domain::PureOnly,
            three,
            Arc::new(|s, r| marginal_entropy(r, s, &[0])),
        )
        .any_shape()
        .with_smooth_on(Arc::new(|s, r| {
            marginal_min_eigenvalue(r, s, &[0]).is_ok_and(|m| m >= ENTROPY_SMOOTH_FLOOR)
        })),
        // I₁, I₂, I₃ are the purities of C, B, A
        "tau_ab_c" => tangle_pair("tau_AB_C", 2),
        "tau_ac_b" => tangle_pair("tau_AC_B", 1),
        "tau_bc_a" => tangle_pair("tau_BC_A", 0),
        "tau_abc" => MonotoneDescriptor::new(
            "tau_ABC",
            Direction::Decreasing,
            Domain::PureOnly,
            three,
            Arc::new(|_, r| Ok(2.0 * i5_from_density(r)?.max(0.0).sqrt())),
        )
        .with_smooth_on(Arc::new(|_, r| {
            i5_from_density(r).is_ok_and(|v| v >= TAU_ABC_SMOOTH_FLOOR)
        })),
        "phi_abc" | "phi" => MonotoneDescriptor::new(
            "phi_ABC",
            Direction::Decreasing,
            Domain::PureOnly,
            three,
            Arc::new(|_, r| phi_from_density(r)),
        ),
        "sigma_abc" | "sigma" => MonotoneDescriptor::new(
            "sigma_ABC",
            Direction::Decreasing,
            Domain::PureOnly,
            three,
            Arc::new(|_, r| sigma_from_density(r)),
        )
        .conjectured(),
        _ => return Err(MonolabError::UnknownMonotone(name.to_string())),
    };
    Ok(d)
}

pub fn catalog() -> Vec<MonotoneDescriptor> {
    CATALOG_NAMES.iter().map(|n| lookup(n).expect("catalog name")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::named::{ghz, product};
    use crate::qcore::sample::{haar_pure, haar_unitary, trial_rng};
    use crate::qcore::{embed_local, PureState};

    #[test]
    fn catalog_is_complete() {
        let c = catalog();
        assert_eq!(c.len(), CATALOG_NAMES.len());
        assert!(lookup("nope").is_err());
        assert!(lookup("sigma_ABC").unwrap().conjectured);
        assert_eq!(lookup("purity").unwrap().direction, Direction::Increasing);
    }

    #[test]
    fn catalog_values_on_fixtures() {
        let g = ghz(3).density();
        let s = g.shape().clone();
        let expect = [1.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 49.5, 21.0 / 8.0];
        for (d, e) in catalog().iter().zip(expect) {
            let v = d.evaluate(&s, g.matrix()).unwrap();
            assert!((v - e).abs() < 1e-10, "{} = {v}, expected {e}", d.name);
        }
        let p = product(3).density();
        assert!(lookup("tau_ABC").unwrap().evaluate(&s, p.matrix()).unwrap().abs() < 1e-10);
        assert!(!lookup("tau_ABC").unwrap().smooth_on(&s, p.matrix()));
        assert!(!lookup("entropy").unwrap().smooth_on(&s, p.matrix()));
    }

    #[test]
    fn shape_restrictions() {
        let b = crate::qcore::named::bell().density();
        assert!(lookup("phi_ABC").unwrap().evaluate(b.shape(), b.matrix()).is_err());
        assert!((lookup("entropy").unwrap().evaluate(b.shape(), b.matrix()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_unitary_invariance() {
        let s = SystemShape::qubits(3);
        for seed in 0..10 {
            let mut rng = trial_rng(seed, 21);
            let psi = haar_pure(&s, &mut rng);
            let mut u = crate::qcore::linalg::identity(8);
            for t in 0..3 {
                u = embed_local(&haar_unitary(2, &mut rng), t, &s).unwrap() * u;
            }
            let moved = psi.evolve(&u).unwrap();
            for d in catalog() {
                let a = d.evaluate(&s, psi.density().matrix()).unwrap();
                let b = d.evaluate(&s, moved.density().matrix()).unwrap();
                assert!((a - b).abs() < 1e-10, "{}", d.name);
            }
        }
    }

    #[test]
    fn phi_lu_invariant_on_ghz() {
        let s = SystemShape::qubits(3);
        let mut rng = trial_rng(99, 0);
        let mut u = crate::qcore::linalg::identity(8);
        for t in 0..3 {
            u = embed_local(&haar_unitary(2, &mut rng), t, &s).unwrap() * u;
        }
        let moved: PureState = ghz(3).evolve(&u).unwrap();
        assert!((phi_abc(&moved).unwrap() - 49.5).abs() < 1e-10);
    }
}
