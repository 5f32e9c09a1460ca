//! Seeded random states, directions and measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{self, c, CMatrix, CVector, C64};
use super::shape::SystemShape;
use super::state::{DensityMatrix, LocalHermitian, PureState, TwoOutcomeMeasurement};
use crate::error::{MonolabError, Result};

pub type TrialRng = ChaCha8Rng;

/// Independent generator for trial `stream` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a stream id so that different campaign stages draw
/// from disjoint streams.
pub fn stream_id(tag: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn haar_pure<R: Rng + ?Sized>(shape: &SystemShape, rng: &mut R) -> PureState {
    let n = shape.total_dim();
    loop {
        let v = CVector::from_fn(n, |_, _| complex_gaussian(rng));
        if let Ok(p) = PureState::normalized(shape.clone(), v) {
            return p;
        }
    }
}

/// ρ = GG†/Tr(GG†) with G a `d × rank` complex Gaussian matrix.
pub fn ginibre_mixed<R: Rng + ?Sized>(shape: &SystemShape, rank: usize, rng: &mut R) -> DensityMatrix {
    let n = shape.total_dim();
    let g = ginibre(n, rank.max(1), rng);
    let m = linalg::hermitize(&(&g * g.adjoint()));
    let t = linalg::trace_re(&m);
    DensityMatrix::new_unchecked(shape.clone(), m.unscale(t))
}

/// Haar unitary from the QR decomposition of a Ginibre matrix with the
/// phases of R's diagonal absorbed into Q.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            c(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random Hermitian block with operator norm exactly `norm_bound`.
pub fn hermitian_block<R: Rng + ?Sized>(d: usize, norm_bound: f64, traceless: bool, rng: &mut R) -> CMatrix {
    loop {
        let g = ginibre(d, d, rng);
        let mut h = linalg::hermitize(&g);
        if traceless {
            let t = linalg::trace(&h) / d as f64;
            for i in 0..d {
                h[(i, i)] -= t;
            }
            h = linalg::hermitize(&h);
        }
        let n = linalg::operator_norm(&h);
        if n > 1e-8 {
            return linalg::hermitize(&h.scale(norm_bound / n));
        }
    }
}

pub fn hermitian_direction<R: Rng + ?Sized>(
    shape: &SystemShape,
    target: usize,
    norm_bound: f64,
    rng: &mut R,
) -> Result<LocalHermitian> {
    check_target(shape, target)?;
    check_norm(norm_bound)?;
    LocalHermitian::new(
        shape.clone(),
        target,
        hermitian_block(shape.dim(target), norm_bound, false, rng),
    )
}

pub fn traceless_direction<R: Rng + ?Sized>(
    shape: &SystemShape,
    target: usize,
    norm_bound: f64,
    rng: &mut R,
) -> Result<LocalHermitian> {
    check_target(shape, target)?;
    check_norm(norm_bound)?;
    LocalHermitian::new(
        shape.clone(),
        target,
        hermitian_block(shape.dim(target), norm_bound, true, rng),
    )
}

/// Full-space traceless Hermitian matrix with Frobenius norm `norm`.
pub fn traceless_full<R: Rng + ?Sized>(n: usize, norm: f64, rng: &mut R) -> CMatrix {
    let mut h = linalg::hermitize(&ginibre(n, n, rng));
    let t = linalg::trace(&h) / n as f64;
    for i in 0..n {
        h[(i, i)] -= t;
    }
    let f = linalg::frobenius(&h);
    h.scale(norm / f)
}

/// P1 = V diag(λ) V†, λ uniform in [0,1], P2 = sqrt(I − P1²) in the same basis.
pub fn positive_pair<R: Rng + ?Sized>(
    shape: &SystemShape,
    target: usize,
    rng: &mut R,
) -> Result<TwoOutcomeMeasurement> {
    check_target(shape, target)?;
    let d = shape.dim(target);
    let v = haar_unitary(d, rng);
    let lam: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let comp: Vec<f64> = lam.iter().map(|l| (1.0 - l * l).max(0.0).sqrt()).collect();
    let p1 = linalg::hermitize(&linalg::reassemble(&lam, &v));
    let p2 = linalg::hermitize(&linalg::reassemble(&comp, &v));
    TwoOutcomeMeasurement::new(shape.clone(), target, p1, p2)
}

fn check_target(shape: &SystemShape, target: usize) -> Result<()> {
    if target >= shape.n_subsystems() {
        return Err(MonolabError::InvalidIndex(format!("target {target}")));
    }
    Ok(())
}

fn check_norm(norm_bound: f64) -> Result<()> {
    if norm_bound.is_nan() || norm_bound <= 0.0 || norm_bound.is_infinite() {
        return Err(MonolabError::Domain(format!(
            "norm bound {norm_bound} must be positive"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    HaarPure,
    GinibreMixed,
    HermitianDirection,
    TracelessDirection,
    PositivePair,
}

#[derive(Clone, Debug)]
pub enum Sampled {
    Pure(PureState),
    Mixed(DensityMatrix),
    Direction(LocalHermitian),
    Measurement(TwoOutcomeMeasurement),
}

/// Draws one value of `kind` from a generator seeded with `seed`.
pub fn sample(
    kind: SampleKind,
    shape: &SystemShape,
    target: Option<usize>,
    norm_bound: Option<f64>,
    seed: u64,
) -> Result<Sampled> {
    let mut rng = trial_rng(seed, 0);
    let target = target.unwrap_or(0);
    let need_norm = || norm_bound.ok_or_else(|| MonolabError::Config("norm_bound required".into()));
    Ok(match kind {
        SampleKind::HaarPure => Sampled::Pure(haar_pure(shape, &mut rng)),
        SampleKind::GinibreMixed => Sampled::Mixed(ginibre_mixed(shape, shape.total_dim(), &mut rng)),
        SampleKind::HermitianDirection => {
            Sampled::Direction(hermitian_direction(shape, target, need_norm()?, &mut rng)?)
        }
        SampleKind::TracelessDirection => {
            Sampled::Direction(traceless_direction(shape, target, need_norm()?, &mut rng)?)
        }
        SampleKind::PositivePair => Sampled::Measurement(positive_pair(shape, target, &mut rng)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{hermiticity_residual, identity, max_abs, max_abs_diff, operator_norm};

    #[test]
    fn determinism() {
        let s = SystemShape::qubits(3);
        let a = match sample(SampleKind::HaarPure, &s, None, None, 11).unwrap() {
            Sampled::Pure(p) => p,
            _ => unreachable!(),
        };
        let b = match sample(SampleKind::HaarPure, &s, None, None, 11).unwrap() {
            Sampled::Pure(p) => p,
            _ => unreachable!(),
        };
        assert_eq!(a, b);
        let other = haar_pure(&s, &mut trial_rng(11, 1));
        assert_ne!(a, other);
    }

    #[test]
    fn direction_construction() {
        let s = SystemShape::new(vec![2, 3]).unwrap();
        for seed in 0..20 {
            let mut rng = trial_rng(seed, 3);
            let h = hermitian_direction(&s, 1, 0.1, &mut rng).unwrap();
            assert!(hermiticity_residual(h.block()) <= 1e-14);
            assert!((operator_norm(h.block()) - 0.1).abs() < 1e-14);
            let t = traceless_direction(&s, 1, 0.25, &mut rng).unwrap();
            assert!(linalg::trace(t.block()).norm() < 1e-14);
            assert!((t.norm_bound() - 0.25).abs() < 1e-14);
        }
        assert!(hermitian_direction(&s, 0, 0.0, &mut trial_rng(0, 0)).is_err());
    }

    #[test]
    fn positive_pair_completeness() {
        let s = SystemShape::new(vec![3, 2]).unwrap();
        for seed in 0..20 {
            let m = positive_pair(&s, 0, &mut trial_rng(seed, 0)).unwrap();
            let r = m.p1() * m.p1() + m.p2() * m.p2() - identity(3);
            assert!(max_abs(&r) <= 1e-12);
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = trial_rng(5, 0);
        for d in 2..6 {
            let u = haar_unitary(d, &mut rng);
            assert!(max_abs_diff(&(u.adjoint() * &u), &identity(d)) < 1e-12);
        }
    }

    #[test]
    fn ginibre_state_is_valid() {
        let s = SystemShape::qubits(2);
        let rho = ginibre_mixed(&s, 4, &mut trial_rng(1, 0));
        assert!(DensityMatrix::new(s, rho.matrix().clone()).is_ok());
        assert!((rho.trace() - 1.0).abs() < 1e-14);
    }
}
