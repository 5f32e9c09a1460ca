use rand::Rng;
use serde::{Deserialize, Serialize};

use super::curve::{curve_operator, delta_eigen, step_factors_sq, step_operators};
use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::{apply_kraus, embed_local, DensityMatrix, TwoOutcomeMeasurement, P_FLOOR};

/// Upper bound on `2 (cutoff/step)²` for the lattice oracle.
pub const ORACLE_NODE_LIMIT: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub step: f64,
    pub cutoff: f64,
    pub max_steps: usize,
    pub p_floor: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            step: 0.05,
            cutoff: (1.0f64 - 1e-6).atanh(),
            max_steps: 1_000_000,
            p_floor: P_FLOOR,
        }
    }
}

impl WalkConfig {
    pub fn new(step: f64, cutoff: f64) -> Result<Self> {
        let cfg = Self {
            step,
            cutoff,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 0.2) {
            return Err(MonolabError::Config(format!("walk step {} not in (0, 0.2]", self.step)));
        }
        if self.cutoff.is_nan() || self.cutoff <= 0.0 || self.cutoff.is_infinite() {
            return Err(MonolabError::Config(format!(
                "walk cutoff {} must be positive",
                self.cutoff
            )));
        }
        if self.max_steps == 0 {
            return Err(MonolabError::Config("max_steps must be at least 1".into()));
        }
        if !(self.p_floor >= 0.0 && self.p_floor < 1e-3) {
            return Err(MonolabError::Config(format!("p_floor {} out of range", self.p_floor)));
        }
        Ok(())
    }

    /// Number of lattice steps K with K·step ≥ cutoff.
    pub fn lattice_cutoff(&self) -> usize {
        ((self.cutoff / self.step) - 1e-9).ceil().max(1.0) as usize
    }

    /// 1 − tanh(K·step): how far the absorbed curve operators are from M₁, M₂.
    pub fn truncation_tol(&self) -> f64 {
        1.0 - (self.lattice_cutoff() as f64 * self.step).tanh()
    }
}

#[derive(Clone, Debug)]
pub struct WalkResult {
    pub outcome: u8,
    pub final_x: f64,
    pub steps_taken: usize,
    pub final_state: DensityMatrix,
    pub log_weight: f64,
}

#[derive(Clone, Debug)]
pub struct TracePoint {
    pub step: usize,
    pub x: f64,
    pub state: DensityMatrix,
}

/// Precomputed walk on the eigenbasis of Δ, where every step operator is
/// diagonal. Each lattice site stores the squared step factors so a step
/// costs O(d) for a d-level target.
#[derive(Clone, Debug)]
pub struct WalkEngine {
    meas: TwoOutcomeMeasurement,
    config: WalkConfig,
    k_max: i64,
    delta_eigs: Vec<f64>,
    /// V ⊗ I on the full space
    basis: CMatrix,
    /// local eigen-index of each full-space basis vector
    local_index: Vec<usize>,
    plus_sq: Vec<Vec<f64>>,
    minus_sq: Vec<Vec<f64>>,
}

impl WalkEngine {
    pub fn new(meas: &TwoOutcomeMeasurement, config: &WalkConfig) -> Result<Self> {
        config.validate()?;
        let (w, v) = delta_eigen(&meas.delta())?;
        let shape = meas.shape();
        let basis = embed_local(&v, meas.target(), shape)?;
        let local_index = (0..shape.total_dim()).map(|i| shape.digits(i)[meas.target()]).collect();
        let k_max = config.lattice_cutoff() as i64;
        let mut plus_sq = Vec::with_capacity(2 * k_max as usize - 1);
        let mut minus_sq = Vec::with_capacity(2 * k_max as usize - 1);
        for k in -(k_max - 1)..=(k_max - 1) {
            let (p, m) = step_factors_sq(k as f64 * config.step, config.step, &w)?;
            plus_sq.push(p);
            minus_sq.push(m);
        }
        Ok(Self {
            meas: meas.clone(),
            config: config.clone(),
            k_max,
            delta_eigs: w,
            basis,
            local_index,
            plus_sq,
            minus_sq,
        })
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn delta_eigs(&self) -> &[f64] {
        &self.delta_eigs
    }

    fn site(&self, k: i64) -> usize {
        (k + self.k_max - 1) as usize
    }

    /// ρ in the eigenbasis of the embedded Δ.
    fn rotate_in(&self, rho: &CMatrix) -> CMatrix {
        self.basis.adjoint() * rho * &self.basis
    }

    /// Populations of ρ on each local eigenvector of Δ.
    fn local_weights(&self, rho: &DensityMatrix) -> Vec<f64> {
        let r = self.rotate_in(rho.matrix());
        let mut w = vec![0.0; self.delta_eigs.len()];
        for (i, &li) in self.local_index.iter().enumerate() {
            w[li] += r[(i, i)].re.max(0.0);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    /// Probability of a +ε step at lattice site k given local populations.
    pub fn plus_probability(&self, k: i64, weights: &[f64]) -> f64 {
        let row = &self.plus_sq[self.site(k)];
        weights.iter().zip(row).map(|(w, a)| w * a).sum::<f64>().clamp(0.0, 1.0)
    }

    /// K ρ K† / Tr with K = V diag(amplitudes) V† on the target.
    fn state_from_amplitudes(&self, rho: &DensityMatrix, log_amp: &[f64]) -> Result<DensityMatrix> {
        let top = log_amp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let a: Vec<f64> = log_amp.iter().map(|l| (l - top).exp()).collect();
        let r = self.rotate_in(rho.matrix());
        let n = r.nrows();
        let mut out = r;
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] *= a[self.local_index[i]] * a[self.local_index[j]];
            }
        }
        let out = &self.basis * out * self.basis.adjoint();
        let p = linalg::trace_re(&out);
        if p < self.config.p_floor {
            return Err(MonolabError::ProbabilityUnderflow(p));
        }
        Ok(DensityMatrix::new_unchecked(
            rho.shape().clone(),
            linalg::hermitize(&out).unscale(p),
        ))
    }

    pub fn run<R: Rng + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<WalkResult> {
        self.run_traced(rho, rng, 0).map(|(r, _)| r)
    }

    /// Runs one walk; with `stride > 0` also records the state every
    /// `stride` steps (and at the start).
    pub fn run_traced<R: Rng + ?Sized>(
        &self,
        rho: &DensityMatrix,
        rng: &mut R,
        stride: usize,
    ) -> Result<(WalkResult, Vec<TracePoint>)> {
        let d = self.delta_eigs.len();
        let mut weights = self.local_weights(rho);
        // log of the composed Kraus eigenvalues, starting from M(0) ∝ I
        let mut log_amp = vec![0.0; d];
        let mut k: i64 = 0;
        let mut log_weight = 0.0;
        let mut trace = Vec::new();
        if stride > 0 {
            trace.push(TracePoint {
                step: 0,
                x: 0.0,
                state: rho.clone(),
            });
        }
        for step in 1..=self.config.max_steps {
            let site = self.site(k);
            let p_plus = self.plus_probability(k, &weights);
            let u: f64 = rng.random();
            let up = u < p_plus;
            let (row, p) = if up {
                (&self.plus_sq[site], p_plus)
            } else {
                (&self.minus_sq[site], 1.0 - p_plus)
            };
            if p < self.config.p_floor {
                return Err(MonolabError::ProbabilityUnderflow(p));
            }
            log_weight += p.ln();
            for i in 0..d {
                weights[i] *= row[i] / p;
                log_amp[i] += 0.5 * row[i].max(f64::MIN_POSITIVE).ln();
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            k += if up { 1 } else { -1 };

            if k.abs() >= self.k_max {
                let mut state = self.state_from_amplitudes(rho, &log_amp)?;
                let outcome = if k < 0 { 1 } else { 2 };
                let u = if outcome == 1 { self.meas.u1() } else { self.meas.u2() };
                if let Some(u) = u {
                    let full = embed_local(u, self.meas.target(), rho.shape())?;
                    state = apply_kraus(&state, &full)?.0;
                }
                let x = k as f64 * self.config.step;
                if stride > 0 {
                    trace.push(TracePoint {
                        step,
                        x,
                        state: state.clone(),
                    });
                }
                return Ok((
                    WalkResult {
                        outcome,
                        final_x: x,
                        steps_taken: step,
                        final_state: state,
                        log_weight,
                    },
                    trace,
                ));
            }
            if stride > 0 && step % stride == 0 {
                trace.push(TracePoint {
                    step,
                    x: k as f64 * self.config.step,
                    state: self.state_from_amplitudes(rho, &log_amp)?,
                });
            }
        }
        Err(MonolabError::Unabsorbed(self.config.max_steps))
    }
}

/// One random walk of weak measurements starting at x = 0.
pub fn run_walk<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    meas: &TwoOutcomeMeasurement,
    config: &WalkConfig,
    rng: &mut R,
) -> Result<WalkResult> {
    WalkEngine::new(meas, config)?.run(rho, rng)
}

/// Same walk using full-space step operators and `apply_kraus` at every
/// step; slow, kept as a reference for the diagonal engine.
pub fn run_walk_reference<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    meas: &TwoOutcomeMeasurement,
    config: &WalkConfig,
    rng: &mut R,
) -> Result<WalkResult> {
    config.validate()?;
    let delta = meas.delta();
    let shape = rho.shape().clone();
    let k_max = config.lattice_cutoff() as i64;
    let mut state = rho.clone();
    let mut k: i64 = 0;
    let mut log_weight = 0.0;
    for step in 1..=config.max_steps {
        let ops = step_operators(k as f64 * config.step, config.step, &delta)?;
        let mp = embed_local(&ops.m_plus, meas.target(), &shape)?;
        let mm = embed_local(&ops.m_minus, meas.target(), &shape)?;
        let p_plus = linalg::trace_product_re(&(&mp * &mp), state.matrix()).clamp(0.0, 1.0);
        let u: f64 = rng.random();
        let up = u < p_plus;
        let (next, p) = apply_kraus(&state, if up { &mp } else { &mm })?;
        log_weight += p.ln();
        state = next;
        k += if up { 1 } else { -1 };
        if k.abs() >= k_max {
            let outcome = if k < 0 { 1 } else { 2 };
            let u = if outcome == 1 { meas.u1() } else { meas.u2() };
            if let Some(u) = u {
                state = apply_kraus(&state, &embed_local(u, meas.target(), &shape)?)?.0;
            }
            return Ok(WalkResult {
                outcome,
                final_x: k as f64 * config.step,
                steps_taken: step,
                final_state: state,
                log_weight,
            });
        }
    }
    Err(MonolabError::Unabsorbed(config.max_steps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkOracle {
    pub p1_walk: f64,
    pub p2_walk: f64,
    /// probability mass not yet absorbed when the iteration stopped
    pub residual_mass: f64,
    pub iterations: usize,
}

const ORACLE_MASS_TOL: f64 = 1e-14;

/// Exact absorption probabilities by dynamic programming over the lattice
/// x = kε, propagating the unnormalized operator R_k = Σ_paths K ρ K†
/// summed over all paths currently at site k.
pub fn exact_walk_probabilities(
    rho: &DensityMatrix,
    meas: &TwoOutcomeMeasurement,
    config: &WalkConfig,
) -> Result<WalkOracle> {
    config.validate()?;
    let ratio = config.cutoff / config.step;
    let nodes = (2.0 * ratio * ratio).ceil() as usize;
    if nodes > ORACLE_NODE_LIMIT {
        return Err(MonolabError::TreeTooLarge {
            nodes,
            limit: ORACLE_NODE_LIMIT,
        });
    }
    let engine = WalkEngine::new(meas, config)?;
    let k_max = engine.k_max;
    let n_sites = (2 * k_max - 1) as usize;
    let start = engine.rotate_in(rho.matrix());
    let n = start.nrows();
    let li = &engine.local_index;

    // per-site full-space diagonal step amplitudes
    let amp = |table: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        table
            .iter()
            .map(|row| (0..n).map(|i| row[li[i]].sqrt()).collect())
            .collect()
    };
    let a_plus = amp(&engine.plus_sq);
    let a_minus = amp(&engine.minus_sq);

    let mut cur: Vec<Option<CMatrix>> = vec![None; n_sites];
    cur[engine.site(0)] = Some(start);
    let mut next: Vec<Option<CMatrix>> = vec![None; n_sites];
    let (mut p1, mut p2) = (0.0, 0.0);
    let mut iterations = 0;
    let mut remaining = 1.0;
    while iterations < config.max_steps {
        iterations += 1;
        next.iter_mut().for_each(|s| *s = None);
        for site in 0..n_sites {
            let Some(r) = cur[site].as_ref() else { continue };
            let k = site as i64 - (k_max - 1);
            for (dir, amps) in [(1i64, &a_plus[site]), (-1i64, &a_minus[site])] {
                let mut moved = r.clone();
                for i in 0..n {
                    for j in 0..n {
                        moved[(i, j)] *= amps[i] * amps[j];
                    }
                }
                let kn = k + dir;
                if kn.abs() >= k_max {
                    let t = linalg::trace_re(&moved);
                    if kn < 0 {
                        p1 += t;
                    } else {
                        p2 += t;
                    }
                } else {
                    let slot = &mut next[engine.site(kn)];
                    match slot {
                        Some(acc) => *acc += moved,
                        None => *slot = Some(moved),
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        remaining = cur.iter().flatten().map(linalg::trace_re).sum::<f64>();
        if remaining < ORACLE_MASS_TOL {
            break;
        }
    }
    if remaining >= 1e-9 {
        return Err(MonolabError::Unabsorbed(iterations));
    }
    Ok(WalkOracle {
        p1_walk: p1,
        p2_walk: p2,
        residual_mass: remaining,
        iterations,
    })
}

/// Absorption probability of outcome 1 in closed form:
/// (1 − tanh(Kε)·Tr(Δρ))/2.
pub fn closed_form_p1(rho: &DensityMatrix, meas: &TwoOutcomeMeasurement, config: &WalkConfig) -> f64 {
    let delta = embed_local(&meas.delta(), meas.target(), rho.shape()).expect("validated block");
    let m = linalg::trace_product_re(&delta, rho.matrix());
    let t = (config.lattice_cutoff() as f64 * config.step).tanh();
    (1.0 - t * m) / 2.0
}

/// State at lattice point x: M(x) ρ M(x) normalized.
pub fn curve_state(rho: &DensityMatrix, meas: &TwoOutcomeMeasurement, x: f64) -> Result<DensityMatrix> {
    let m = curve_operator(x, &meas.delta())?;
    let full = embed_local(&m, meas.target(), rho.shape())?;
    Ok(apply_kraus(rho, &full)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{c, diag_real, max_abs_diff};
    use crate::qcore::sample::{ginibre_mixed, positive_pair, trial_rng};
    use crate::qcore::{PureState, SystemShape};

    fn projective_qubit() -> TwoOutcomeMeasurement {
        TwoOutcomeMeasurement::new(
            SystemShape::qubits(1),
            0,
            diag_real(&[1.0, 0.0]),
            diag_real(&[0.0, 1.0]),
        )
        .unwrap()
    }

    fn rho_with_p0(p0: f64) -> DensityMatrix {
        DensityMatrix::new(SystemShape::qubits(1), diag_real(&[p0, 1.0 - p0])).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(WalkConfig::new(0.3, 4.0).is_err());
        assert!(WalkConfig::new(0.1, -1.0).is_err());
        let d = WalkConfig::default();
        assert!(d.validate().is_ok());
        assert!(d.truncation_tol() <= 1e-6 + 1e-12);
        assert_eq!(WalkConfig::new(0.1, 4.0).unwrap().lattice_cutoff(), 40);
    }

    #[test]
    fn oracle_symmetric_and_projective() {
        let s = SystemShape::qubits(1);
        let h = (0.5f64).sqrt();
        let sym = TwoOutcomeMeasurement::new(s, 0, diag_real(&[h, h]), diag_real(&[h, h])).unwrap();
        let cfg = WalkConfig::new(0.1, 4.0).unwrap();
        let o = exact_walk_probabilities(&rho_with_p0(0.3), &sym, &cfg).unwrap();
        assert!((o.p1_walk - 0.5).abs() < 1e-12 && (o.p2_walk - 0.5).abs() < 1e-12);

        let o = exact_walk_probabilities(&rho_with_p0(0.8), &projective_qubit(), &cfg).unwrap();
        assert!((o.p1_walk - 0.8).abs() <= 1e-3);
        let closed = closed_form_p1(&rho_with_p0(0.8), &projective_qubit(), &cfg);
        assert!((o.p1_walk - closed).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_large_lattice() {
        let cfg = WalkConfig::new(0.01, 7.0).unwrap();
        assert!(matches!(
            exact_walk_probabilities(&rho_with_p0(0.5), &projective_qubit(), &cfg),
            Err(MonolabError::TreeTooLarge { .. })
        ));
    }

    #[test]
    fn engine_matches_reference_walk() {
        let s = SystemShape::new(vec![3, 2]).unwrap();
        let cfg = WalkConfig::new(0.1, 3.0).unwrap();
        for seed in 0..5 {
            let mut rng = trial_rng(seed, 0);
            let rho = ginibre_mixed(&s, 6, &mut rng);
            let meas = positive_pair(&s, 0, &mut rng).unwrap();
            let a = run_walk(&rho, &meas, &cfg, &mut trial_rng(seed, 1)).unwrap();
            let b = run_walk_reference(&rho, &meas, &cfg, &mut trial_rng(seed, 1)).unwrap();
            assert_eq!((a.outcome, a.steps_taken), (b.outcome, b.steps_taken));
            assert!(max_abs_diff(a.final_state.matrix(), b.final_state.matrix()) < 1e-9);
            assert!((a.log_weight - b.log_weight).abs() < 1e-9);
        }
    }

    #[test]
    fn final_state_is_absorbed_curve_state() {
        let s = SystemShape::qubits(2);
        let mut rng = trial_rng(3, 0);
        let rho = ginibre_mixed(&s, 4, &mut rng);
        let meas = positive_pair(&s, 1, &mut rng).unwrap();
        let cfg = WalkConfig::new(0.1, 2.0).unwrap();
        let r = run_walk(&rho, &meas, &cfg, &mut rng).unwrap();
        let expect = curve_state(&rho, &meas, r.final_x).unwrap();
        assert!(max_abs_diff(r.final_state.matrix(), expect.matrix()) < 1e-10);
        assert!((r.final_state.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_points_follow_curve() {
        let s = SystemShape::qubits(1);
        let v = crate::qcore::CVector::from_vec(vec![c(0.6, 0.), c(0.0, 0.8)]);
        let rho = PureState::new(s, v).unwrap().density();
        let cfg = WalkConfig::new(0.1, 2.0).unwrap();
        let engine = WalkEngine::new(&projective_qubit(), &cfg).unwrap();
        let (_, trace) = engine.run_traced(&rho, &mut trial_rng(1, 1), 3).unwrap();
        assert!(trace.len() >= 2);
        for p in &trace {
            let expect = curve_state(&rho, &projective_qubit(), p.x).unwrap();
            assert!(max_abs_diff(p.state.matrix(), expect.matrix()) < 1e-10);
        }
    }
}
