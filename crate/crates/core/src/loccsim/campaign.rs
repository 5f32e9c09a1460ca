use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::trials::{
    chained_measurement_trial, channel_trial, mixing_trial, random_local_channel, sample_walks, walk_trajectory_trial,
    OperationKind, TrialRecord, Verdict,
};
use crate::error::{MonolabError, Result};
use crate::monotones::{lookup, Direction, Domain, MonotoneDescriptor, CATALOG_NAMES};
use crate::qcore::named::named_state;
use crate::qcore::sample::{
    ginibre_mixed, haar_pure, haar_unitary, hermitian_block, positive_pair, stream_id, trial_rng, TrialRng,
};
use crate::qcore::{CMatrix, DensityMatrix, LocalHermitian, SystemShape, TwoOutcomeMeasurement};
use crate::weakmeas::{trotter_unitary, WalkConfig};

const TRIAL_TAG: u64 = 0x10CC_0001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    HaarPure {
        dims: Vec<usize>,
    },
    /// rank defaults to the full dimension
    GinibreMixed {
        dims: Vec<usize>,
        rank: Option<usize>,
    },
    /// fixed named state (product, bell, ghz, w)
    Named {
        name: String,
    },
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec::HaarPure { dims: vec![2, 2, 2] }
    }
}

impl EnsembleSpec {
    pub fn shape(&self) -> Result<SystemShape> {
        match self {
            EnsembleSpec::HaarPure { dims } | EnsembleSpec::GinibreMixed { dims, .. } => SystemShape::new(dims.clone()),
            EnsembleSpec::Named { name } => Ok(named_state(name)?.shape().clone()),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, shape: &SystemShape, rng: &mut R) -> Result<DensityMatrix> {
        Ok(match self {
            EnsembleSpec::HaarPure { .. } => haar_pure(shape, rng).density(),
            EnsembleSpec::GinibreMixed { rank, .. } => {
                let r = rank.unwrap_or(shape.total_dim());
                if r == 0 || r > shape.total_dim() {
                    return Err(MonolabError::Config(format!("ginibre rank {r}")));
                }
                ginibre_mixed(shape, r, rng)
            }
            EnsembleSpec::Named { name } => named_state(name)?.density(),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperationMix {
    pub measurement: f64,
    pub walk: f64,
    pub trotter: f64,
    pub channel: f64,
    pub mixing: f64,
}

impl OperationMix {
    pub fn standard() -> Self {
        Self {
            measurement: 0.5,
            walk: 0.1,
            trotter: 0.1,
            channel: 0.15,
            mixing: 0.15,
        }
    }

    fn weights(&self) -> [(OperationKind, f64); 5] {
        [
            (OperationKind::Measurement, self.measurement),
            (OperationKind::Walk, self.walk),
            (OperationKind::Trotter, self.trotter),
            (OperationKind::Channel, self.channel),
            (OperationKind::Mixing, self.mixing),
        ]
    }

    pub fn total(&self) -> f64 {
        self.weights().iter().map(|w| w.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0.0
    }

    fn pick(&self, u: f64) -> OperationKind {
        let mut acc = 0.0;
        let weights = self.weights();
        for (k, w) in weights {
            acc += w;
            if u < acc {
                return k;
            }
        }
        weights
            .iter()
            .rev()
            .find(|w| w.1 > 0.0)
            .map_or(OperationKind::Measurement, |w| w.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub n_trials: usize,
    pub ensemble: EnsembleSpec,
    pub mix: OperationMix,
    pub walk: WalkConfig,
    pub n_walks: usize,
    /// measurements per chained trial are drawn from 1..=chain_depth
    pub chain_depth: usize,
    pub postselect_fraction: f64,
    /// mixing ensembles have 2..=mixing_size members
    pub mixing_size: usize,
    pub trotter_max_steps: usize,
    pub seed: u64,
    /// catalog names, optionally `name@decreasing` / `name@increasing`
    pub monotones: Vec<String>,
    pub keep_records: bool,
    /// record f along the first walk of each walk trial every this many steps
    pub trajectory_stride: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            n_trials: 1000,
            ensemble: EnsembleSpec::default(),
            mix: OperationMix::standard(),
            walk: WalkConfig {
                step: 0.1,
                cutoff: 4.0,
                ..WalkConfig::default()
            },
            n_walks: 100,
            chain_depth: 3,
            postselect_fraction: 0.25,
            mixing_size: 3,
            trotter_max_steps: 64,
            seed: 0,
            monotones: CATALOG_NAMES.iter().map(|s| s.to_string()).collect(),
            keep_records: false,
            trajectory_stride: 0,
        }
    }
}

/// Catalog lookup with an optional `@decreasing`/`@increasing` override.
pub fn resolve_monotone(spec: &str) -> Result<MonotoneDescriptor> {
    match spec.split_once('@') {
        None => lookup(spec),
        Some((name, dir)) => {
            let direction = match dir.to_ascii_lowercase().as_str() {
                "decreasing" => Direction::Decreasing,
                "increasing" => Direction::Increasing,
                other => return Err(MonolabError::Config(format!("unknown direction '{other}' in '{spec}'"))),
            };
            let d = lookup(name)?;
            let label = format!("{}@{dir}", d.name);
            Ok(d.with_direction(direction).renamed(label))
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = self.mix.weights();
        if weights.iter().any(|w| w.1.is_nan() || w.1 < 0.0 || w.1.is_infinite()) {
            return Err(MonolabError::Config("operation weights must be non-negative".into()));
        }
        if !self.mix.is_empty() && (self.mix.total() - 1.0).abs() > 1e-9 {
            return Err(MonolabError::Config(format!(
                "operation weights sum to {}",
                self.mix.total()
            )));
        }
        if self.n_trials == 0 {
            return Err(MonolabError::Config("n_trials must be at least 1".into()));
        }
        if !(1..=3).contains(&self.chain_depth) {
            return Err(MonolabError::Config(format!(
                "chain_depth {} not in 1..=3",
                self.chain_depth
            )));
        }
        if !(0.0..=1.0).contains(&self.postselect_fraction) {
            return Err(MonolabError::Config("postselect_fraction must be in [0, 1]".into()));
        }
        if self.mixing_size < 2 || self.trotter_max_steps == 0 || (self.mix.walk > 0.0 && self.n_walks == 0) {
            return Err(MonolabError::Config(
                "mixing_size ≥ 2, trotter_max_steps ≥ 1, n_walks ≥ 1".into(),
            ));
        }
        self.walk.validate()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpSummary {
    pub trials: usize,
    pub pass: usize,
    pub violation: usize,
    pub recorded: usize,
    pub min_delta: Option<f64>,
    pub max_delta: Option<f64>,
    /// largest signed delta in the violating direction among violations
    pub worst_violation: f64,
}

impl OpSummary {
    fn add(&mut self, r: &TrialRecord, sign: f64) {
        self.trials += 1;
        match r.verdict {
            Verdict::Pass => self.pass += 1,
            Verdict::Violation => {
                self.violation += 1;
                self.worst_violation = self.worst_violation.max(sign * r.delta);
            }
            Verdict::Recorded => self.recorded += 1,
        }
        self.min_delta = Some(self.min_delta.map_or(r.delta, |m| m.min(r.delta)));
        self.max_delta = Some(self.max_delta.map_or(r.delta, |m| m.max(r.delta)));
    }

    fn merge(&mut self, o: &OpSummary) {
        self.trials += o.trials;
        self.pass += o.pass;
        self.violation += o.violation;
        self.recorded += o.recorded;
        self.worst_violation = self.worst_violation.max(o.worst_violation);
        for v in [o.min_delta, o.max_delta].into_iter().flatten() {
            self.min_delta = Some(self.min_delta.map_or(v, |m| m.min(v)));
            self.max_delta = Some(self.max_delta.map_or(v, |m| m.max(v)));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSummary {
    pub name: String,
    pub direction: Direction,
    pub domain: Domain,
    pub conjectured: bool,
    pub total: OpSummary,
    pub by_operation: BTreeMap<OperationKind, OpSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub trials: usize,
    pub walks: usize,
    pub unabsorbed: usize,
    pub mean_steps: f64,
    /// (trial, monotone) pairs whose walk mean missed the one-shot average
    pub inconsistent: usize,
    /// max |walk mean − one-shot| / tolerance
    pub max_normalized_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n_trials: usize,
    pub operation_counts: BTreeMap<OperationKind, usize>,
    pub monotones: Vec<MonotoneSummary>,
    pub walk: WalkSummary,
    /// max |Σp − 1| over trials without postselection
    pub max_probability_defect: f64,
    pub config: CampaignConfig,
    pub records: Option<Vec<TrialRecord>>,
}

impl SimReport {
    pub fn violations(&self) -> usize {
        self.monotones.iter().map(|m| m.total.violation).sum()
    }
}

fn local_unitary_measurement(shape: &SystemShape, rng: &mut TrialRng) -> Result<TwoOutcomeMeasurement> {
    let target = rng.random_range(0..shape.n_subsystems());
    let d = shape.dim(target);
    positive_pair(shape, target, rng)?.with_unitaries(Some(haar_unitary(d, rng)), Some(haar_unitary(d, rng)))
}

fn dirichlet(k: usize, rng: &mut TrialRng) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

enum Operation {
    Chain(Vec<TwoOutcomeMeasurement>),
    Walk(TwoOutcomeMeasurement),
    Kraus(Vec<CMatrix>, bool),
    Mixing(Vec<(f64, CMatrix)>),
}

fn draw_operation(
    kind: OperationKind,
    cfg: &CampaignConfig,
    shape: &SystemShape,
    rng: &mut TrialRng,
) -> Result<Operation> {
    Ok(match kind {
        OperationKind::Measurement => {
            let depth = rng.random_range(1..=cfg.chain_depth);
            Operation::Chain(
                (0..depth)
                    .map(|_| local_unitary_measurement(shape, rng))
                    .collect::<Result<_>>()?,
            )
        }
        OperationKind::Walk => Operation::Walk(local_unitary_measurement(shape, rng)?),
        OperationKind::Trotter => {
            let target = rng.random_range(0..shape.n_subsystems());
            // ‖H‖ uniform in (0, π]
            let norm = std::f64::consts::PI * (1.0 - rng.random::<f64>());
            let h = LocalHermitian::new(
                shape.clone(),
                target,
                hermitian_block(shape.dim(target), norm, false, rng),
            )?;
            let n = rng.random_range(1..=cfg.trotter_max_steps);
            Operation::Kraus(vec![trotter_unitary(&h, n)?.composed], false)
        }
        OperationKind::Channel => {
            let target = rng.random_range(0..shape.n_subsystems());
            let n_kraus = rng.random_range(2..=3);
            let mut kraus = random_local_channel(shape, target, n_kraus, rng)?;
            let post = rng.random::<f64>() < cfg.postselect_fraction;
            if post {
                kraus.truncate(1);
            }
            Operation::Kraus(kraus, post)
        }
        OperationKind::Mixing => {
            let k = rng.random_range(2..=cfg.mixing_size);
            let w = dirichlet(k, rng);
            let mut members = Vec::with_capacity(k);
            for p in w {
                members.push((p, cfg.ensemble.draw(shape, rng)?.into_matrix()));
            }
            Operation::Mixing(members)
        }
    })
}

/// Runs the operation mix over sampled states for every listed monotone.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<SimReport> {
    cfg.validate()?;
    let shape = cfg.ensemble.shape()?;
    let descs = cfg
        .monotones
        .iter()
        .map(|m| resolve_monotone(m))
        .collect::<Result<Vec<_>>>()?;
    for d in &descs {
        if !d.accepts_shape(&shape) {
            return Err(MonolabError::InvalidShape(format!(
                "{} is not defined on {shape}",
                d.name
            )));
        }
    }
    let mut summaries: Vec<MonotoneSummary> = descs
        .iter()
        .map(|d| MonotoneSummary {
            name: d.name.clone(),
            direction: d.direction,
            domain: d.domain,
            conjectured: d.conjectured,
            total: OpSummary::default(),
            by_operation: BTreeMap::new(),
        })
        .collect();
    let mut op_counts = BTreeMap::new();
    let mut walk = WalkSummary::default();
    let mut walk_steps = 0.0;
    let mut defect = 0.0f64;
    let mut records = Vec::new();
    let n_trials = if cfg.mix.is_empty() { 0 } else { cfg.n_trials };

    for trial in 0..n_trials {
        let mut rng = trial_rng(cfg.seed, stream_id(TRIAL_TAG, trial as u64));
        let kind = cfg.mix.pick(rng.random());
        let rho = cfg.ensemble.draw(&shape, &mut rng)?;
        let op = draw_operation(kind, cfg, &shape, &mut rng)?;
        *op_counts.entry(kind).or_insert(0) += 1;
        let walk_samples = match &op {
            Operation::Walk(m) => {
                let s = sample_walks(&rho, m, &cfg.walk, cfg.n_walks, cfg.trajectory_stride, &mut rng)?;
                walk.trials += 1;
                walk.walks += cfg.n_walks;
                walk.unabsorbed += s.unabsorbed;
                walk_steps += s.mean_steps * s.outcomes.len() as f64;
                Some(s)
            }
            _ => None,
        };
        for (d, summary) in descs.iter().zip(summaries.iter_mut()) {
            let mut r = match &op {
                Operation::Chain(chain) => chained_measurement_trial(d, &shape, rho.matrix(), chain)?,
                Operation::Walk(m) => {
                    let w = walk_trajectory_trial(d, &rho, m, &cfg.walk, walk_samples.as_ref().expect("walk samples"))?;
                    if !w.consistent {
                        walk.inconsistent += 1;
                    }
                    if w.tolerance > 0.0 {
                        let dev = (w.walk_mean - w.one_shot_avg).abs() / w.tolerance;
                        walk.max_normalized_deviation = walk.max_normalized_deviation.max(dev);
                    }
                    w.record
                }
                Operation::Kraus(k, post) => channel_trial(d, &shape, rho.matrix(), k, *post)?,
                Operation::Mixing(ens) => mixing_trial(d, &shape, ens)?,
            };
            r.trial = trial;
            if !r.postselected && !matches!(op, Operation::Walk(_)) {
                defect = defect.max((r.probability_sum - 1.0).abs());
            }
            let sign = d.direction.sign();
            summary.by_operation.entry(kind).or_default().add(&r, sign);
            if cfg.keep_records {
                records.push(r);
            }
        }
    }
    for s in &mut summaries {
        let mut total = OpSummary::default();
        for o in s.by_operation.values() {
            total.merge(o);
        }
        s.total = total;
    }
    let absorbed = walk.walks - walk.unabsorbed;
    if absorbed > 0 {
        walk.mean_steps = walk_steps / absorbed as f64;
    }
    Ok(SimReport {
        n_trials,
        operation_counts: op_counts,
        monotones: summaries,
        walk,
        max_probability_defect: defect,
        config: cfg.clone(),
        records: cfg.keep_records.then_some(records),
    })
}

pub const RECORD_CSV_HEADER: [&str; 11] = [
    "trial",
    "monotone",
    "operation",
    "before",
    "after_avg",
    "delta",
    "probability_sum",
    "n_outcomes",
    "postselected",
    "verdict",
    "note",
];

/// One CSV row per record, with a header row.
pub fn write_records_csv<W: Write>(records: &[TrialRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RECORD_CSV_HEADER)?;
    for r in records {
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Violation => "violation",
            Verdict::Recorded => "recorded",
        };
        w.write_record([
            r.trial.to_string(),
            r.monotone.clone(),
            r.operation.as_str().to_string(),
            format!("{:.17e}", r.before),
            format!("{:.17e}", r.after_avg),
            format!("{:.17e}", r.delta),
            format!("{:.17e}", r.probability_sum),
            r.outcomes.len().to_string(),
            r.postselected.to_string(),
            verdict.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64) -> CampaignConfig {
        CampaignConfig {
            n_trials: 60,
            n_walks: 20,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn standard_campaign_has_no_violations() {
        let r = run_campaign(&quick(3)).unwrap();
        assert_eq!(r.n_trials, 60);
        for m in &r.monotones {
            assert_eq!(m.total.violation, 0, "{}: {:?}", m.name, m.total);
            assert_eq!(m.total.trials, 60);
        }
        let sigma = r.monotones.iter().find(|m| m.name == "sigma_ABC").unwrap();
        assert_eq!(sigma.total.recorded, 60);
        assert!(r.max_probability_defect < 1e-10);
        assert_eq!(r.operation_counts.values().sum::<usize>(), 60);
    }

    #[test]
    fn empty_mix_gives_empty_report() {
        let cfg = CampaignConfig {
            mix: OperationMix::default(),
            ..quick(0)
        };
        let r = run_campaign(&cfg).unwrap();
        assert_eq!(r.n_trials, 0);
        assert_eq!(r.violations(), 0);
        assert!(r.monotones.iter().all(|m| m.total.trials == 0));
    }

    #[test]
    fn deterministic() {
        let mut cfg = quick(11);
        cfg.keep_records = true;
        let a = serde_json::to_string(&run_campaign(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_campaign(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mislabeled_monotone_produces_violations() {
        let cfg = CampaignConfig {
            monotones: vec!["purity@decreasing".into()],
            mix: OperationMix {
                measurement: 1.0,
                ..Default::default()
            },
            ..quick(4)
        };
        assert!(run_campaign(&cfg).unwrap().violations() > 0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = quick(0);
        cfg.mix.walk = 0.5;
        assert!(run_campaign(&cfg).is_err());
        let cfg = CampaignConfig {
            monotones: vec!["nope".into()],
            ..quick(0)
        };
        assert!(run_campaign(&cfg).is_err());
        assert!(resolve_monotone("purity@sideways").is_err());
        let parsed: CampaignConfig = serde_json::from_str(r#"{"n_trials": 5, "seed": 2}"#).unwrap();
        assert_eq!(parsed.n_trials, 5);
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn csv_rows_match_records() {
        let cfg = CampaignConfig {
            n_trials: 7,
            monotones: vec!["norm".into()],
            keep_records: true,
            ..quick(1)
        };
        let r = run_campaign(&cfg).unwrap();
        let mut buf = Vec::new();
        write_records_csv(r.records.as_ref().unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.starts_with("trial,monotone,operation"));
    }
}
