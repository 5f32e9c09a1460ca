//! Monte Carlo trials of concrete local operations: exact measurement
//! branches, weak-measurement walks, local channels and ensemble mixing.

mod campaign;
mod trials;

pub use campaign::{
    resolve_monotone, run_campaign, write_records_csv, CampaignConfig, EnsembleSpec, MonotoneSummary, OpSummary,
    OperationMix, SimReport, WalkSummary, RECORD_CSV_HEADER,
};
pub use trials::{
    absorbed_state, chained_measurement_trial, channel_trial, dephasing_channel, judge, measurement_branches,
    mixing_trial, random_local_channel, sample_walks, single_step_trial, walk_trajectory_trial, Expectation,
    OperationKind, Outcome, TrialRecord, Verdict, WalkSamples, WalkTrajectoryRecord, CLOSURE_TOL, VIOLATION_REL_TOL,
};
