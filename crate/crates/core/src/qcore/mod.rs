//! Dense multipartite states, local operators and sampling.

pub mod linalg;
pub mod named;
pub mod repr;
pub mod sample;
pub mod shape;
pub mod state;

pub use linalg::{
    bracket, embed_local, herm_matrix_function, partial_trace, tensor_product, BracketKind, CMatrix, CVector, MatrixFn,
    C64, PSD_CLAMP,
};
pub use repr::MatrixRepr;
pub use sample::{sample, trial_rng, SampleKind, Sampled, TrialRng};
pub use shape::SystemShape;
pub use state::{apply_kraus, DensityMatrix, LocalHermitian, PureState, TwoOutcomeMeasurement, P_FLOOR};
