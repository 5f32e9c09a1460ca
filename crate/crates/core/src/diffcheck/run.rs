use serde::{Deserialize, Serialize};

use super::conditions::{convexity_condition, lu_condition, measurement_condition};
use super::fd::FdStep;
use crate::error::{MonolabError, Result};
use crate::monotones::{Direction, Domain, MonotoneDescriptor};
use crate::qcore::linalg;
use crate::qcore::sample::{ginibre_mixed, haar_pure, hermitian_direction, stream_id, traceless_full, trial_rng};
use crate::qcore::{CMatrix, SystemShape};

const STATE_TAG: u64 = 0xD1FF_0001;
const DIR_TAG: u64 = 0xD1FF_0002;
/// Minimum eigenvalue for a mixed state to count as interior.
pub const INTERIOR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub n_states: usize,
    pub n_directions: usize,
    pub fd_step: f64,
    pub eps_norm: f64,
    pub tol_zero: f64,
    pub tol_sign: f64,
    pub richardson: bool,
    pub seed: u64,
    /// subsystem dimensions; the descriptor's default shape when absent
    pub shape: Option<Vec<usize>>,
    pub keep_samples: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            n_states: 200,
            n_directions: 20,
            fd_step: 1e-3,
            eps_norm: 0.1,
            tol_zero: 1e-8,
            tol_sign: 1e-7,
            richardson: true,
            seed: 0,
            shape: None,
            keep_samples: false,
        }
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Result<()> {
        self.step().validate()?;
        if !(self.tol_zero > 0.0 && self.tol_sign > 0.0) {
            return Err(MonolabError::Config("tolerances must be positive".into()));
        }
        if !(self.eps_norm > 0.0 && self.eps_norm < 1.0) {
            return Err(MonolabError::Config(format!(
                "eps_norm {} outside (0, 1)",
                self.eps_norm
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> FdStep {
        FdStep {
            h: self.fd_step,
            richardson: self.richardson,
        }
    }

    fn resolve_shape(&self, desc: &MonotoneDescriptor) -> Result<SystemShape> {
        let shape = match &self.shape {
            Some(d) => SystemShape::new(d.clone())?,
            None => desc.default_shape.clone(),
        };
        if !desc.accepts_shape(&shape) {
            return Err(MonolabError::InvalidShape(format!(
                "{} is not defined on {shape}",
                desc.name
            )));
        }
        Ok(shape)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Pass,
    Violation,
    IllConditioned,
}

/// Cross-validation tolerance between the differential form and G/t².
pub fn tol_cross(lhs: f64) -> f64 {
    (1e-3 * lhs.abs()).max(1e-4)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSample {
    pub state_id: usize,
    pub direction_id: usize,
    pub target: usize,
    pub classification: Classification,
    /// why a sample is ill-conditioned or which condition it violates
    pub status: String,
    pub f_value: Option<f64>,
    pub lu_value: Option<f64>,
    pub lu_exact: Option<f64>,
    pub meas_value: Option<f64>,
    pub g_exact_ratio: Option<f64>,
    pub convexity_value: Option<f64>,
    /// amount by which the worst condition exceeds its tolerance bound
    pub violation: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub violation: usize,
    pub ill_conditioned: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.pass + self.violation + self.ill_conditioned
    }

    fn add(&mut self, c: Classification) {
        match c {
            Classification::Pass => self.pass += 1,
            Classification::Violation => self.violation += 1,
            Classification::IllConditioned => self.ill_conditioned += 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub compared: usize,
    pub max_discrepancy: f64,
    pub failures: usize,
    /// least-squares ratio lhs/g; None when every g vanishes
    pub fitted_factor: Option<f64>,
    /// max |lhs − 2g|, the discrepancy after the fitted factor 2
    pub max_discrepancy_twice_g: f64,
    pub failures_twice_g: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawMaxima {
    pub lu: f64,
    pub meas: f64,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub monotone: String,
    pub direction: Direction,
    pub domain: Domain,
    pub conjectured: bool,
    pub shape: String,
    pub counts: Counts,
    pub worst_violation: f64,
    pub worst_sample: Option<ConditionSample>,
    pub cross_validation: CrossValidation,
    pub max_abs_lu: f64,
    pub max_abs_lu_exact: f64,
    pub max_abs_meas: f64,
    /// maxima before normalization by ‖ε‖ or ‖ε‖²
    pub max_abs_raw: RawMaxima,
    pub convexity_evaluated: usize,
    pub convexity_min: Option<f64>,
    pub convexity_max: Option<f64>,
    pub config: CheckConfig,
    pub samples: Option<Vec<ConditionSample>>,
}

impl CheckReport {
    pub fn has_violations(&self) -> bool {
        self.counts.violation > 0
    }
}

/// Samples one state for `desc`'s domain.
pub fn check_state(desc: &MonotoneDescriptor, shape: &SystemShape, seed: u64, state_id: usize) -> CMatrix {
    let mut rng = trial_rng(seed, stream_id(STATE_TAG, state_id as u64));
    match desc.domain {
        Domain::PureOnly => haar_pure(shape, &mut rng).density().into_matrix(),
        Domain::Mixed => ginibre_mixed(shape, shape.total_dim(), &mut rng).into_matrix(),
    }
}

struct Evaluated {
    f_value: f64,
    lu: f64,
    lu_exact: f64,
    meas: f64,
    g: f64,
    lu_raw: f64,
    meas_raw: f64,
    g_raw: f64,
    convexity: Option<f64>,
    convexity_skipped: bool,
}

fn evaluate_sample(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    min_eig: f64,
    cfg: &CheckConfig,
    target: usize,
    dir_stream: u64,
) -> Result<Evaluated> {
    let mut rng = trial_rng(cfg.seed, stream_id(DIR_TAG, dir_stream));
    let eps = hermitian_direction(shape, target, cfg.eps_norm, &mut rng)?;
    let step = cfg.step();
    let f_value = desc.evaluate(shape, rho)?;
    let lu = lu_condition(desc, shape, rho, &eps, step)?;
    let m = measurement_condition(desc, shape, rho, &eps, step)?;
    let (convexity, convexity_skipped) = match desc.domain {
        Domain::Mixed if min_eig >= INTERIOR_FLOOR => {
            let sigma = traceless_full(shape.total_dim(), 1.0, &mut rng);
            (Some(convexity_condition(desc, shape, rho, &sigma, step)?), false)
        }
        Domain::Mixed => (None, true),
        Domain::PureOnly => (None, false),
    };
    Ok(Evaluated {
        f_value,
        lu: lu.fd_value,
        lu_exact: lu.exact_value,
        meas: m.lhs,
        g: m.g_ratio,
        lu_raw: lu.fd_raw,
        meas_raw: m.lhs_raw,
        g_raw: m.g_raw,
        convexity,
        convexity_skipped,
    })
}

fn classify(desc: &MonotoneDescriptor, e: &Evaluated, cfg: &CheckConfig) -> (Classification, String, f64) {
    let scale = e.f_value.abs().max(1.0);
    let zero = cfg.tol_zero * scale;
    let sign = cfg.tol_sign * scale;
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let lu_excess = e.lu.abs().max(e.lu_exact.abs()) - zero;
    if lu_excess > 0.0 {
        worst = worst.max(lu_excess);
        failed.push("lu");
    }
    // positive when the measurement condition points the wrong way
    let meas_excess = desc.direction.sign() * e.meas - sign;
    if meas_excess > 0.0 {
        worst = worst.max(meas_excess);
        failed.push("measurement");
    }
    if let Some(cv) = e.convexity {
        let conv_excess = -desc.direction.sign() * cv - sign;
        if conv_excess > 0.0 {
            worst = worst.max(conv_excess);
            failed.push("convexity");
        }
    }
    if failed.is_empty() {
        let status = if e.convexity_skipped {
            "pass (convexity skipped: boundary state)"
        } else {
            "pass"
        };
        (Classification::Pass, status.into(), 0.0)
    } else {
        (Classification::Violation, failed.join(","), worst)
    }
}

/// Evaluates the differential conditions on sampled (state, ε) pairs.
pub fn run_check(desc: &MonotoneDescriptor, cfg: &CheckConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let shape = cfg.resolve_shape(desc)?;
    let n_sub = shape.n_subsystems();
    let mut counts = Counts::default();
    let mut worst: Option<ConditionSample> = None;
    let mut xv = CrossValidation::default();
    let (mut sum_lg, mut sum_gg) = (0.0, 0.0);
    let mut max_abs_lu = 0.0f64;
    let mut max_abs_lu_exact = 0.0f64;
    let mut max_abs_meas = 0.0f64;
    let mut raw = RawMaxima::default();
    let mut conv_n = 0;
    let mut conv_min: Option<f64> = None;
    let mut conv_max: Option<f64> = None;
    let mut samples = Vec::new();

    for s in 0..cfg.n_states {
        let rho = check_state(desc, &shape, cfg.seed, s);
        let min_eig = linalg::eigvalsh(&rho)[0];
        let smooth = desc.smooth_on(&shape, &rho);
        for target in 0..n_sub {
            for d in 0..cfg.n_directions {
                let dir_stream = ((s * n_sub + target) * cfg.n_directions + d) as u64;
                let mut sample = ConditionSample {
                    state_id: s,
                    direction_id: d,
                    target,
                    classification: Classification::IllConditioned,
                    status: String::new(),
                    f_value: None,
                    lu_value: None,
                    lu_exact: None,
                    meas_value: None,
                    g_exact_ratio: None,
                    convexity_value: None,
                    violation: 0.0,
                };
                if !smooth {
                    sample.status = "not smooth at state".into();
                } else {
                    match evaluate_sample(desc, &shape, &rho, min_eig, cfg, target, dir_stream) {
                        Err(e) => sample.status = format!("evaluation failed: {e}"),
                        Ok(e) => {
                            let (c, status, v) = classify(desc, &e, cfg);
                            sample.classification = c;
                            sample.status = status;
                            sample.violation = v;
                            sample.f_value = Some(e.f_value);
                            sample.lu_value = Some(e.lu);
                            sample.lu_exact = Some(e.lu_exact);
                            sample.meas_value = Some(e.meas);
                            sample.g_exact_ratio = Some(e.g);
                            sample.convexity_value = e.convexity;
                            max_abs_lu = max_abs_lu.max(e.lu.abs());
                            max_abs_lu_exact = max_abs_lu_exact.max(e.lu_exact.abs());
                            max_abs_meas = max_abs_meas.max(e.meas.abs());
                            raw.lu = raw.lu.max(e.lu_raw.abs());
                            raw.meas = raw.meas.max(e.meas_raw.abs());
                            raw.g = raw.g.max(e.g_raw.abs());
                            xv.compared += 1;
                            let dis = (e.meas - e.g).abs();
                            xv.max_discrepancy = xv.max_discrepancy.max(dis);
                            if dis > tol_cross(e.meas) {
                                xv.failures += 1;
                            }
                            let dis2 = (e.meas - 2.0 * e.g).abs();
                            xv.max_discrepancy_twice_g = xv.max_discrepancy_twice_g.max(dis2);
                            if dis2 > tol_cross(e.meas) {
                                xv.failures_twice_g += 1;
                            }
                            sum_lg += e.meas * e.g;
                            sum_gg += e.g * e.g;
                            if let Some(cv) = e.convexity {
                                conv_n += 1;
                                conv_min = Some(conv_min.map_or(cv, |m| m.min(cv)));
                                conv_max = Some(conv_max.map_or(cv, |m| m.max(cv)));
                            }
                        }
                    }
                }
                counts.add(sample.classification);
                if sample.classification == Classification::Violation
                    && worst.as_ref().is_none_or(|w| sample.violation > w.violation)
                {
                    worst = Some(sample.clone());
                }
                if cfg.keep_samples {
                    samples.push(sample);
                }
            }
        }
    }
    // rms g below 1e-8 is roundoff
    xv.fitted_factor = (sum_gg > xv.compared as f64 * 1e-16).then(|| sum_lg / sum_gg);

    Ok(CheckReport {
        monotone: desc.name.clone(),
        direction: desc.direction,
        domain: desc.domain,
        conjectured: desc.conjectured,
        shape: shape.to_string(),
        counts,
        worst_violation: worst.as_ref().map_or(0.0, |w| w.violation),
        worst_sample: worst,
        cross_validation: xv,
        max_abs_lu,
        max_abs_lu_exact,
        max_abs_meas,
        max_abs_raw: raw,
        convexity_evaluated: conv_n,
        convexity_min: conv_min,
        convexity_max: conv_max,
        config: cfg.clone(),
        samples: cfg.keep_samples.then_some(samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotones::lookup;

    fn small(seed: u64) -> CheckConfig {
        CheckConfig {
            n_states: 4,
            n_directions: 3,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn norm_has_no_violations() {
        let r = run_check(&lookup("norm").unwrap(), &small(1)).unwrap();
        assert_eq!(r.counts.violation, 0);
        assert_eq!(r.counts.total(), 4 * 3 * 3);
        let raw = r.max_abs_raw;
        assert!(raw.meas < 1e-10 && raw.lu < 1e-10 && raw.g < 1e-10 && r.max_abs_lu_exact < 1e-10);
        assert!(r.cross_validation.fitted_factor.is_none());
        assert_eq!(r.convexity_evaluated, r.counts.pass);
    }

    #[test]
    fn mislabeled_purity_is_caught() {
        let d = lookup("purity").unwrap();
        assert_eq!(run_check(&d, &small(2)).unwrap().counts.violation, 0);
        let bad = d.with_direction(Direction::Decreasing).renamed("purity_mislabeled");
        let r = run_check(&bad, &small(2)).unwrap();
        assert!(r.counts.violation > 0);
        assert!(r.worst_violation > 0.0);
    }

    #[test]
    fn deterministic_and_counts_sum() {
        let mut cfg = small(5);
        cfg.keep_samples = true;
        let d = lookup("phi_ABC").unwrap();
        let a = run_check(&d, &cfg).unwrap();
        let b = run_check(&d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.as_ref().unwrap().len(), a.counts.total());
    }

    #[test]
    fn rejects_bad_config() {
        let d = lookup("norm").unwrap();
        let mut cfg = small(0);
        cfg.fd_step = 1.0;
        assert!(run_check(&d, &cfg).is_err());
        let mut cfg = small(0);
        cfg.shape = Some(vec![2, 2]);
        assert!(run_check(&lookup("phi_ABC").unwrap(), &cfg).is_err());
    }
}
