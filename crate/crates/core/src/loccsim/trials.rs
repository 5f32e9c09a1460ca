use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MonolabError, Result};
use crate::monotones::{Domain, MonotoneDescriptor};
use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::sample::haar_unitary;
use crate::qcore::{apply_kraus, embed_local, DensityMatrix, SystemShape, TwoOutcomeMeasurement, P_FLOOR};
use crate::weakmeas::{closed_form_p1, curve_state, TracePoint, WalkConfig, WalkEngine};

/// Violation threshold relative to max(1, |f(ρ)|).
pub const VIOLATION_REL_TOL: f64 = 1e-9;
/// Tolerance on Σ p_j = 1 and on Kraus completeness.
pub const CLOSURE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Measurement,
    Walk,
    Trotter,
    Channel,
    Mixing,
}

impl OperationKind {
    pub const ALL: [OperationKind; 5] = [
        OperationKind::Measurement,
        OperationKind::Walk,
        OperationKind::Trotter,
        OperationKind::Channel,
        OperationKind::Mixing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperationKind::Measurement => "measurement",
            OperationKind::Walk => "walk",
            OperationKind::Trotter => "trotter",
            OperationKind::Channel => "channel",
            OperationKind::Mixing => "mixing",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Violation,
    /// evaluated but not asserted (conjectured monotone or domain mismatch)
    Recorded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub probability: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub monotone: String,
    pub operation: OperationKind,
    pub before: f64,
    pub after_avg: f64,
    pub delta: f64,
    pub outcomes: Vec<Outcome>,
    pub probability_sum: f64,
    pub postselected: bool,
    pub verdict: Verdict,
    pub note: String,
}

/// How a trial's delta is judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expectation {
    /// sign(direction)·delta ≤ tol
    Monotone,
    /// |delta| ≤ tol
    Invariant,
    /// nothing asserted
    None,
}

pub fn judge(desc: &MonotoneDescriptor, before: f64, delta: f64, expect: Expectation) -> Verdict {
    let tol = VIOLATION_REL_TOL * before.abs().max(1.0);
    if desc.conjectured {
        return Verdict::Recorded;
    }
    let ok = match expect {
        Expectation::Monotone => desc.direction.sign() * delta <= tol,
        Expectation::Invariant => delta.abs() <= tol,
        Expectation::None => return Verdict::Recorded,
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Violation
    }
}

fn is_pure(rho: &CMatrix) -> bool {
    let t = linalg::trace_re(rho);
    (linalg::trace_product_re(rho, rho) - t * t).abs() <= 1e-8 * t * t
}

fn domain_allows(desc: &MonotoneDescriptor, rho: &CMatrix) -> bool {
    desc.domain == Domain::Mixed || is_pure(rho)
}

fn record(
    desc: &MonotoneDescriptor,
    operation: OperationKind,
    before: f64,
    outcomes: Vec<Outcome>,
    postselected: bool,
    expect: Expectation,
    note: String,
) -> TrialRecord {
    let after_avg = outcomes.iter().map(|o| o.probability * o.value).sum::<f64>();
    let probability_sum = outcomes.iter().map(|o| o.probability).sum();
    let delta = after_avg - before;
    TrialRecord {
        trial: 0,
        monotone: desc.name.clone(),
        operation,
        before,
        after_avg,
        delta,
        outcomes,
        probability_sum,
        postselected,
        verdict: judge(desc, before, delta, expect),
        note,
    }
}

/// Normalized branches of a sequence of two-outcome measurements applied
/// to every branch in turn; branches below `P_FLOOR` are dropped.
pub fn measurement_branches(rho: &CMatrix, chain: &[TwoOutcomeMeasurement]) -> Vec<(f64, CMatrix)> {
    let mut branches = vec![rho.clone()];
    for meas in chain {
        let ops = meas.kraus_ops();
        branches = branches
            .iter()
            .flat_map(|b| ops.iter().map(move |k| linalg::kraus_raw(b, k).0))
            .filter(|b| linalg::trace_re(b) >= P_FLOOR)
            .collect();
    }
    branches
        .into_iter()
        .map(|b| {
            let p = linalg::trace_re(&b);
            (p, linalg::hermitize(&b).unscale(p))
        })
        .collect()
}

/// Exact outcome average of f over a chain of measurements (one element
/// is the plain two-outcome case).
pub fn chained_measurement_trial(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    chain: &[TwoOutcomeMeasurement],
) -> Result<TrialRecord> {
    let before = desc.evaluate(shape, rho)?;
    let branches = measurement_branches(rho, chain);
    let mut outcomes = Vec::with_capacity(branches.len());
    for (p, b) in &branches {
        outcomes.push(Outcome {
            probability: *p,
            value: desc.evaluate(shape, b)?,
        });
    }
    let expect = if domain_allows(desc, rho) {
        Expectation::Monotone
    } else {
        Expectation::None
    };
    let full = 1usize << chain.len();
    let note = if outcomes.len() < full {
        format!("{} of {full} branches below probability floor", full - outcomes.len())
    } else {
        String::new()
    };
    Ok(record(
        desc,
        OperationKind::Measurement,
        before,
        outcomes,
        false,
        expect,
        note,
    ))
}

pub fn single_step_trial(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    meas: &TwoOutcomeMeasurement,
) -> Result<TrialRecord> {
    chained_measurement_trial(desc, shape, rho, std::slice::from_ref(meas))
}

/// delta = f(Σ p_k ρ_k) − Σ p_k f(ρ_k).
pub fn mixing_trial(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    ensemble: &[(f64, CMatrix)],
) -> Result<TrialRecord> {
    if ensemble.is_empty() {
        return Err(MonolabError::Config("empty ensemble".into()));
    }
    let total: f64 = ensemble.iter().map(|(p, _)| p).sum();
    if ensemble.iter().any(|(p, _)| *p < 0.0) || (total - 1.0).abs() > CLOSURE_TOL {
        return Err(MonolabError::Config(format!("ensemble weights sum to {total}")));
    }
    let n = shape.total_dim();
    let mut mix = CMatrix::zeros(n, n);
    let mut outcomes = Vec::with_capacity(ensemble.len());
    for (p, r) in ensemble {
        mix += r.scale(*p);
        outcomes.push(Outcome {
            probability: *p,
            value: desc.evaluate(shape, r)?,
        });
    }
    let mixed_value = desc.evaluate(shape, &mix)?;
    let avg = outcomes.iter().map(|o| o.probability * o.value).sum::<f64>();
    let delta = mixed_value - avg;
    let expect = if desc.domain == Domain::Mixed {
        Expectation::Monotone
    } else {
        Expectation::None
    };
    Ok(TrialRecord {
        trial: 0,
        monotone: desc.name.clone(),
        operation: OperationKind::Mixing,
        before: avg,
        after_avg: mixed_value,
        delta,
        outcomes,
        probability_sum: total,
        postselected: false,
        verdict: judge(desc, avg, delta, expect),
        note: String::new(),
    })
}

fn check_completeness(kraus: &[CMatrix], n: usize, postselect: bool) -> Result<()> {
    if kraus.is_empty() {
        return Err(MonolabError::Completeness(f64::INFINITY));
    }
    let mut s = CMatrix::zeros(n, n);
    for k in kraus {
        if k.nrows() != n || k.ncols() != n {
            return Err(MonolabError::SizeMismatch {
                expected: n,
                got: k.nrows(),
            });
        }
        s += k.adjoint() * k;
    }
    let residual = if postselect {
        (linalg::eigvalsh(&linalg::hermitize(&s)).last().copied().unwrap_or(0.0) - 1.0).max(0.0)
    } else {
        linalg::max_abs_diff(&s, &linalg::identity(n))
    };
    if residual > CLOSURE_TOL {
        return Err(MonolabError::Completeness(residual));
    }
    Ok(())
}

fn is_unitary(k: &CMatrix) -> bool {
    linalg::max_abs_diff(&(k.adjoint() * k), &linalg::identity(k.nrows())) <= CLOSURE_TOL
}

/// delta = f(Σ_k M_k ρ M_k†) − f(ρ). With `postselect` the output keeps
/// its reduced trace.
pub fn channel_trial(
    desc: &MonotoneDescriptor,
    shape: &SystemShape,
    rho: &CMatrix,
    kraus: &[CMatrix],
    postselect: bool,
) -> Result<TrialRecord> {
    let n = shape.total_dim();
    check_completeness(kraus, n, postselect)?;
    let before = desc.evaluate(shape, rho)?;
    let mut out = CMatrix::zeros(n, n);
    for k in kraus {
        out += linalg::kraus_raw(rho, k).0;
    }
    let out = linalg::hermitize(&out);
    let p = linalg::trace_re(&out);
    let after = desc.evaluate(shape, &out)?;
    let unitary = kraus.len() == 1 && is_unitary(&kraus[0]);
    let (operation, expect) = if unitary {
        (OperationKind::Trotter, Expectation::Invariant)
    } else if desc.domain == Domain::Mixed {
        (OperationKind::Channel, Expectation::Monotone)
    } else {
        (OperationKind::Channel, Expectation::None)
    };
    let mut r = record(
        desc,
        operation,
        before,
        vec![Outcome {
            probability: 1.0,
            value: after,
        }],
        postselect,
        expect,
        String::new(),
    );
    r.probability_sum = p;
    Ok(r)
}

/// Random local channel with `n_kraus` operators from a Haar isometry.
pub fn random_local_channel<R: Rng + ?Sized>(
    shape: &SystemShape,
    target: usize,
    n_kraus: usize,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    if n_kraus == 0 {
        return Err(MonolabError::Config("channel needs at least one Kraus operator".into()));
    }
    let d = shape.dim(target);
    let u = haar_unitary(d * n_kraus, rng);
    (0..n_kraus)
        .map(|k| embed_local(&u.view((k * d, 0), (d, d)).into_owned(), target, shape))
        .collect()
}

/// Phase flip with probability `p` on one subsystem.
pub fn dephasing_channel(shape: &SystemShape, target: usize, p: f64) -> Result<Vec<CMatrix>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MonolabError::Domain(format!("dephasing probability {p}")));
    }
    let d = shape.dim(target);
    let z = CMatrix::from_fn(d, d, |i, j| {
        if i != j {
            linalg::c(0.0, 0.0)
        } else if i == 0 {
            linalg::c(1.0, 0.0)
        } else {
            linalg::c(-1.0, 0.0)
        }
    });
    Ok(vec![
        embed_local(&linalg::identity(d).scale((1.0 - p).sqrt()), target, shape)?,
        embed_local(&z.scale(p.sqrt()), target, shape)?,
    ])
}

/// Walks sampled once and shared by every monotone of a trial.
#[derive(Clone, Debug)]
pub struct WalkSamples {
    pub outcomes: Vec<u8>,
    pub unabsorbed: usize,
    pub mean_steps: f64,
    /// first walk, recorded every `stride` steps
    pub trace: Vec<TracePoint>,
}

pub fn sample_walks<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    meas: &TwoOutcomeMeasurement,
    cfg: &WalkConfig,
    n_walks: usize,
    stride: usize,
    rng: &mut R,
) -> Result<WalkSamples> {
    let engine = WalkEngine::new(meas, cfg)?;
    let mut s = WalkSamples {
        outcomes: Vec::with_capacity(n_walks),
        unabsorbed: 0,
        mean_steps: 0.0,
        trace: Vec::new(),
    };
    let mut steps = 0usize;
    for i in 0..n_walks {
        let st = if i == 0 { stride } else { 0 };
        match engine.run_traced(rho, rng, st) {
            Ok((w, trace)) => {
                if i == 0 {
                    s.trace = trace;
                }
                steps += w.steps_taken;
                s.outcomes.push(w.outcome);
            }
            Err(MonolabError::Unabsorbed(_)) => s.unabsorbed += 1,
            Err(e) => return Err(e),
        }
    }
    if !s.outcomes.is_empty() {
        s.mean_steps = steps as f64 / s.outcomes.len() as f64;
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkTrajectoryRecord {
    /// verdict judged on the exact one-shot average, which the walk mean estimates
    pub record: TrialRecord,
    pub n_walks: usize,
    pub unabsorbed: usize,
    pub walk_mean: f64,
    pub one_shot_avg: f64,
    /// standard error of `walk_mean` under the exact walk probabilities
    pub sigma: f64,
    /// exact walk expectation minus the one-shot average, from the cutoff
    pub truncation_bias: f64,
    /// 3σ + |truncation_bias|
    pub tolerance: f64,
    pub consistent: bool,
    /// (step, x, f) along the first walk
    pub trajectory: Vec<(usize, f64, f64)>,
}

/// State on absorption at outcome 1 (x = −Kε) or 2 (x = +Kε), including
/// the outcome's unitary; None when the outcome has vanishing probability.
pub fn absorbed_state(
    rho: &DensityMatrix,
    meas: &TwoOutcomeMeasurement,
    cfg: &WalkConfig,
    outcome: u8,
) -> Result<Option<DensityMatrix>> {
    let x = cfg.lattice_cutoff() as f64 * cfg.step * if outcome == 1 { -1.0 } else { 1.0 };
    let state = match curve_state(rho, meas, x) {
        Ok(s) => s,
        Err(MonolabError::ProbabilityUnderflow(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let u = if outcome == 1 { meas.u1() } else { meas.u2() };
    Ok(Some(match u {
        Some(u) => apply_kraus(&state, &embed_local(u, meas.target(), rho.shape())?)?.0,
        None => state,
    }))
}

/// Walk-sampled average of f against the exact one-shot average; the
/// tolerance adds the exactly computed cutoff bias to 3σ.
pub fn walk_trajectory_trial(
    desc: &MonotoneDescriptor,
    rho: &DensityMatrix,
    meas: &TwoOutcomeMeasurement,
    cfg: &WalkConfig,
    samples: &WalkSamples,
) -> Result<WalkTrajectoryRecord> {
    let shape = rho.shape();
    let one_shot = single_step_trial(desc, shape, rho.matrix(), meas)?;
    let p1 = closed_form_p1(rho, meas, cfg);
    let mut values = [0.0; 2];
    let mut walk_expect = 0.0;
    for (slot, p) in [(0usize, p1), (1, 1.0 - p1)] {
        if let Some(s) = absorbed_state(rho, meas, cfg, slot as u8 + 1)? {
            values[slot] = desc.evaluate(shape, s.matrix())?;
            walk_expect += p * values[slot];
        }
    }
    let truncation_bias = walk_expect - one_shot.after_avg;
    let n = samples.outcomes.len();
    let mut counts = [0usize; 2];
    for &o in &samples.outcomes {
        counts[(o - 1) as usize] += 1;
    }
    // standard error from the exact walk outcome probabilities
    let (mean, sigma) = if n == 0 {
        (f64::NAN, f64::INFINITY)
    } else {
        let nf = n as f64;
        let mean = (counts[0] as f64 * values[0] + counts[1] as f64 * values[1]) / nf;
        let var = p1 * (1.0 - p1) * (values[0] - values[1]).powi(2);
        (mean, (var / nf).sqrt())
    };
    let tolerance = 3.0 * sigma + truncation_bias.abs() + 1e-12 * one_shot.before.abs().max(1.0);
    let consistent = n > 0 && (mean - one_shot.after_avg).abs() <= tolerance;
    let trajectory = samples
        .trace
        .iter()
        .map(|t| Ok((t.step, t.x, desc.evaluate(shape, t.state.matrix())?)))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = (0..2)
        .filter(|&i| counts[i] > 0)
        .map(|i| Outcome {
            probability: counts[i] as f64 / n as f64,
            value: values[i],
        })
        .collect();
    let note = if consistent {
        String::new()
    } else {
        format!("walk mean {mean} vs one-shot {}", one_shot.after_avg)
    };
    let record = TrialRecord {
        trial: 0,
        monotone: desc.name.clone(),
        operation: OperationKind::Walk,
        before: one_shot.before,
        after_avg: one_shot.after_avg,
        delta: one_shot.delta,
        outcomes,
        probability_sum: if n == 0 { 0.0 } else { 1.0 },
        postselected: false,
        verdict: one_shot.verdict,
        note,
    };
    Ok(WalkTrajectoryRecord {
        record,
        n_walks: n + samples.unabsorbed,
        unabsorbed: samples.unabsorbed,
        walk_mean: if n == 0 { 0.0 } else { mean },
        one_shot_avg: one_shot.after_avg,
        truncation_bias,
        sigma: if n == 0 { 0.0 } else { sigma },
        tolerance: if n == 0 { 0.0 } else { tolerance },
        consistent,
        trajectory,
    })
}
