use serde::{Deserialize, Serialize};

use super::walk::{exact_walk_probabilities, WalkConfig, WalkEngine};
use crate::error::{MonolabError, Result};
use crate::qcore::sample::{stream_id, trial_rng};
use crate::qcore::{DensityMatrix, MatrixRepr, SystemShape, TwoOutcomeMeasurement};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub dims: SystemShape,
    pub target: usize,
    pub p1: MatrixRepr,
    pub p2: MatrixRepr,
}

impl From<&TwoOutcomeMeasurement> for MeasurementSpec {
    fn from(m: &TwoOutcomeMeasurement) -> Self {
        Self {
            dims: m.shape().clone(),
            target: m.target(),
            p1: MatrixRepr::from(m.p1()),
            p2: MatrixRepr::from(m.p2()),
        }
    }
}

impl MeasurementSpec {
    pub fn to_measurement(&self) -> Result<TwoOutcomeMeasurement> {
        TwoOutcomeMeasurement::new(
            self.dims.clone(),
            self.target,
            self.p1.to_matrix()?,
            self.p2.to_matrix()?,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkCampaignRecord {
    pub seed: u64,
    pub measurement: MeasurementSpec,
    pub config: WalkConfig,
    pub trials: u64,
    /// walks absorbed at outcome 1 and outcome 2
    pub outcome_counts: [u64; 2],
    pub unabsorbed: u64,
    pub mean_steps: f64,
    /// Tr(M₁²ρ) of the one-shot measurement
    pub p_exact: f64,
    /// lattice-oracle absorption probability, when the lattice is small enough
    pub p_oracle: Option<f64>,
    pub p_walk: f64,
    pub sigma: f64,
    pub truncation_tol: f64,
}

const WALK_STREAM_TAG: u64 = 0x57A1_C0DE;

/// Runs `trials` independent walks; trial i uses stream i of `seed`.
pub fn run_walk_campaign(
    rho: &DensityMatrix,
    meas: &TwoOutcomeMeasurement,
    config: &WalkConfig,
    trials: u64,
    seed: u64,
) -> Result<WalkCampaignRecord> {
    if trials == 0 {
        return Err(MonolabError::Config("trials must be at least 1".into()));
    }
    let engine = WalkEngine::new(meas, config)?;
    let mut counts = [0u64; 2];
    let mut unabsorbed = 0u64;
    let mut steps = 0u64;
    for i in 0..trials {
        let mut rng = trial_rng(seed, stream_id(WALK_STREAM_TAG, i));
        match engine.run(rho, &mut rng) {
            Ok(r) => {
                counts[(r.outcome - 1) as usize] += 1;
                steps += r.steps_taken as u64;
            }
            Err(MonolabError::Unabsorbed(_)) => unabsorbed += 1,
            Err(e) => return Err(e),
        }
    }
    let absorbed = counts[0] + counts[1];
    let p_walk = if absorbed > 0 {
        counts[0] as f64 / absorbed as f64
    } else {
        0.0
    };
    let p_oracle = match exact_walk_probabilities(rho, meas, config) {
        Ok(o) => Some(o.p1_walk),
        Err(MonolabError::TreeTooLarge { .. }) | Err(MonolabError::Unabsorbed(_)) => None,
        Err(e) => return Err(e),
    };
    let p_ref = p_oracle.unwrap_or(p_walk);
    Ok(WalkCampaignRecord {
        seed,
        measurement: MeasurementSpec::from(meas),
        config: config.clone(),
        trials,
        outcome_counts: counts,
        unabsorbed,
        mean_steps: if absorbed > 0 {
            steps as f64 / absorbed as f64
        } else {
            0.0
        },
        p_exact: meas.p1_probability(rho),
        p_oracle,
        p_walk,
        sigma: (p_ref * (1.0 - p_ref) / absorbed.max(1) as f64).sqrt(),
        truncation_tol: config.truncation_tol(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::diag_real;

    #[test]
    fn symmetric_and_plus_state() {
        let s = SystemShape::qubits(1);
        let cfg = WalkConfig::new(0.1, 4.0).unwrap();
        let meas = TwoOutcomeMeasurement::new(s.clone(), 0, diag_real(&[1.0, 0.0]), diag_real(&[0.0, 1.0])).unwrap();
        let mut plus = diag_real(&[0.5, 0.5]);
        plus[(0, 1)] = crate::qcore::linalg::c(0.5, 0.0);
        plus[(1, 0)] = crate::qcore::linalg::c(0.5, 0.0);
        let rho = DensityMatrix::new(s, plus).unwrap();
        let rec = run_walk_campaign(&rho, &meas, &cfg, 4000, 1).unwrap();
        assert!((rec.p_exact - 0.5).abs() < 1e-12);
        assert!((rec.p_walk - 0.5).abs() <= 3.0 * rec.sigma + rec.truncation_tol);
        let again = run_walk_campaign(&rho, &meas, &cfg, 4000, 1).unwrap();
        assert_eq!(rec, again);
        let json = serde_json::to_string(&rec).unwrap();
        let back: WalkCampaignRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.outcome_counts, rec.outcome_counts);
    }
}
