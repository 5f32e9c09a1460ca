//! Finite-difference evaluation of the differential monotonicity conditions,
//! cross-checked against the exact finite-ε average change G.

mod conditions;
mod fd;
mod run;

pub use conditions::{
    convexity_condition, double_commutator, entropy_closed_form, entropy_convexity_closed_form,
    entropy_convexity_exact, entropy_exact_form, entropy_hessian_exact, entropy_hessian_inverse_form, g_function,
    g_ratio, g_second_derivative, lu_condition, measurement_condition, measurement_direction,
    pure_amplitude_conditions, purity_closed_form, purity_convexity_closed_form, AmplitudeValue, LuValue,
    MeasurementValue, G_STEPS,
};
pub use fd::{fd_amplitude, fd_directional, fd_scalar, FdStep, Order};
pub use run::{
    check_state, run_check, tol_cross, CheckConfig, CheckReport, Classification, ConditionSample, Counts,
    CrossValidation, RawMaxima, INTERIOR_FLOOR,
};
