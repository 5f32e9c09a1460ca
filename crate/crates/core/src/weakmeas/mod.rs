//! Two-outcome measurements as random walks of weak measurements.
//!
//! A measurement with positive operators M₁² + M₂² = I is traversed along
//! the curve M(x) = sqrt((I + tanh(x)Δ)/2), Δ = M₂² − M₁², in steps of ±ε.
//! The walk is absorbed at x ≤ −X (outcome 1) or x ≥ X (outcome 2).

mod campaign;
mod curve;
mod polar;
mod trotter;
mod walk;

pub use campaign::{run_walk_campaign, MeasurementSpec, WalkCampaignRecord};
pub use curve::{curve_operator, normalize_frobenius, step_factors_sq, step_operators, step_weights, StepOperators};
pub use polar::{polar_reduce, PolarParts};
pub use trotter::{trotter_sweep, trotter_unitary, TrotterPoint, TrotterResult};
pub use walk::{
    closed_form_p1, curve_state, exact_walk_probabilities, run_walk, run_walk_reference, TracePoint, WalkConfig,
    WalkEngine, WalkOracle, WalkResult, ORACLE_NODE_LIMIT,
};
