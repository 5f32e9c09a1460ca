use super::linalg::{self, c, embed_local, hermiticity_residual, max_abs, operator_norm, outer, CMatrix, CVector};
use super::shape::SystemShape;
use crate::error::{MonolabError, Result};

/// Outcome probabilities below this are treated as impossible branches.
pub const P_FLOOR: f64 = 1e-12;

const HERM_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const MEAS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    shape: SystemShape,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(shape: SystemShape, amplitudes: CVector) -> Result<Self> {
        let s = Self::new_unnormalized(shape, amplitudes)?;
        let n = s.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(MonolabError::NotNormalized(n));
        }
        Ok(s)
    }

    /// For post-measurement intermediates; only the length is checked.
    pub fn new_unnormalized(shape: SystemShape, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != shape.total_dim() {
            return Err(MonolabError::SizeMismatch {
                expected: shape.total_dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { shape, amplitudes })
    }

    /// Rescales to unit norm; fails on the zero vector.
    pub fn normalized(shape: SystemShape, amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n.is_nan() || n <= 0.0 || n.is_infinite() {
            return Err(MonolabError::NotNormalized(n));
        }
        Self::new(shape, amplitudes.unscale(n))
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.shape.clone(), outer(&self.amplitudes, &self.amplitudes))
    }

    /// Applies a full-space operator and renormalizes.
    pub fn evolve(&self, op: &CMatrix) -> Result<PureState> {
        Self::normalized(self.shape.clone(), op * &self.amplitudes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    shape: SystemShape,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(shape: SystemShape, matrix: CMatrix) -> Result<Self> {
        let n = shape.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(MonolabError::SizeMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let h = hermiticity_residual(&matrix);
        if h > HERM_TOL * (1.0 + max_abs(&matrix)) {
            return Err(MonolabError::NotHermitian(h));
        }
        let min = linalg::eigvalsh(&matrix)[0];
        if min < -PSD_TOL {
            return Err(MonolabError::NotPositive(min));
        }
        let tr = linalg::trace_re(&matrix);
        if tr.is_nan() || tr <= 0.0 || tr > 1.0 + 1e-12 {
            return Err(MonolabError::InvalidTrace(tr));
        }
        Ok(Self { shape, matrix })
    }

    /// Skips validation; for values produced by trusted operations.
    pub fn new_unchecked(shape: SystemShape, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), shape.total_dim());
        Self { shape, matrix }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        psi.density()
    }

    pub fn maximally_mixed(shape: SystemShape) -> Self {
        let n = shape.total_dim();
        Self::new_unchecked(shape, linalg::identity(n).unscale(n as f64))
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product_re(&self.matrix, &self.matrix)
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let m = linalg::partial_trace(&self.matrix, &self.shape, keep)?;
        Ok(Self::new_unchecked(self.shape.sub_shape(keep)?, m))
    }

    /// Rescaled to unit trace.
    pub fn normalized(&self) -> Result<DensityMatrix> {
        let t = self.trace();
        if t.is_nan() || t <= 0.0 {
            return Err(MonolabError::InvalidTrace(t));
        }
        Ok(Self::new_unchecked(self.shape.clone(), self.matrix.unscale(t)))
    }
}

/// ρ → MρM†/p with p = Tr(M†Mρ).
pub fn apply_kraus(rho: &DensityMatrix, m: &CMatrix) -> Result<(DensityMatrix, f64)> {
    let n = rho.shape.total_dim();
    if m.nrows() != n || m.ncols() != n {
        return Err(MonolabError::SizeMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    let (out, p) = linalg::kraus_raw(&rho.matrix, m);
    if p < P_FLOOR {
        return Err(MonolabError::ProbabilityUnderflow(p));
    }
    let out = linalg::hermitize(&out).unscale(p);
    Ok((DensityMatrix::new_unchecked(rho.shape.clone(), out), p))
}

/// Hermitian operator on a single subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalHermitian {
    shape: SystemShape,
    target: usize,
    block: CMatrix,
    norm_bound: f64,
}

impl LocalHermitian {
    pub fn new(shape: SystemShape, target: usize, block: CMatrix) -> Result<Self> {
        if target >= shape.n_subsystems() {
            return Err(MonolabError::InvalidIndex(format!("target {target}")));
        }
        let d = shape.dim(target);
        if block.nrows() != d || block.ncols() != d {
            return Err(MonolabError::SizeMismatch {
                expected: d,
                got: block.nrows(),
            });
        }
        let h = hermiticity_residual(&block);
        if h > HERM_TOL * (1.0 + max_abs(&block)) {
            return Err(MonolabError::NotHermitian(h));
        }
        let norm_bound = operator_norm(&block);
        Ok(Self {
            shape,
            target,
            block,
            norm_bound,
        })
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn block(&self) -> &CMatrix {
        &self.block
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn embedded(&self) -> CMatrix {
        embed_local(&self.block, self.target, &self.shape).expect("validated block")
    }

    pub fn scaled(&self, t: f64) -> LocalHermitian {
        Self {
            shape: self.shape.clone(),
            target: self.target,
            block: self.block.scale(t),
            norm_bound: self.norm_bound * t.abs(),
        }
    }
}

/// Local measurement with positive commuting operators P1² + P2² = I and
/// optional polar unitaries applied after each outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoOutcomeMeasurement {
    shape: SystemShape,
    target: usize,
    p1: CMatrix,
    p2: CMatrix,
    u1: Option<CMatrix>,
    u2: Option<CMatrix>,
}

impl TwoOutcomeMeasurement {
    pub fn new(shape: SystemShape, target: usize, p1: CMatrix, p2: CMatrix) -> Result<Self> {
        if target >= shape.n_subsystems() {
            return Err(MonolabError::InvalidIndex(format!("target {target}")));
        }
        let d = shape.dim(target);
        for p in [&p1, &p2] {
            if p.nrows() != d || p.ncols() != d {
                return Err(MonolabError::SizeMismatch {
                    expected: d,
                    got: p.nrows(),
                });
            }
            let h = hermiticity_residual(p);
            if h > MEAS_TOL {
                return Err(MonolabError::NotHermitian(h));
            }
            let w = linalg::eigvalsh(p);
            if w[0] < -MEAS_TOL {
                return Err(MonolabError::NotPositive(w[0]));
            }
            if w[d - 1] > 1.0 + MEAS_TOL {
                return Err(MonolabError::Domain(format!(
                    "measurement operator eigenvalue {} exceeds 1",
                    w[d - 1]
                )));
            }
        }
        let comp = max_abs(&(&p1 * &p1 + &p2 * &p2 - linalg::identity(d)));
        if comp > MEAS_TOL {
            return Err(MonolabError::Completeness(comp));
        }
        let comm = max_abs(&linalg::commutator(&p1, &p2));
        if comm > MEAS_TOL {
            return Err(MonolabError::Domain(format!(
                "measurement operators do not commute (residual {comm:.3e})"
            )));
        }
        Ok(Self {
            shape,
            target,
            p1,
            p2,
            u1: None,
            u2: None,
        })
    }

    /// M1 = sqrt((I+ε)/2), M2 = sqrt((I−ε)/2) for a block with ‖ε‖ ≤ 1.
    pub fn from_epsilon(eps: &LocalHermitian) -> Result<Self> {
        if eps.norm_bound() > 1.0 + MEAS_TOL {
            return Err(MonolabError::Domain(format!("‖ε‖ = {} exceeds 1", eps.norm_bound())));
        }
        let d = eps.block().nrows();
        let id = linalg::identity(d);
        let p1 = linalg::sqrt_psd(&(&id + eps.block()).scale(0.5))?;
        let p2 = linalg::sqrt_psd(&(&id - eps.block()).scale(0.5))?;
        Self::new(eps.shape().clone(), eps.target(), p1, p2)
    }

    pub fn with_unitaries(mut self, u1: Option<CMatrix>, u2: Option<CMatrix>) -> Result<Self> {
        let d = self.p1.nrows();
        for u in [&u1, &u2].into_iter().flatten() {
            if u.nrows() != d || u.ncols() != d {
                return Err(MonolabError::SizeMismatch {
                    expected: d,
                    got: u.nrows(),
                });
            }
            let r = max_abs(&(u.adjoint() * u - linalg::identity(d)));
            if r > MEAS_TOL {
                return Err(MonolabError::Domain(format!("non-unitary polar factor ({r:.3e})")));
            }
        }
        self.u1 = u1;
        self.u2 = u2;
        Ok(self)
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn p1(&self) -> &CMatrix {
        &self.p1
    }

    pub fn p2(&self) -> &CMatrix {
        &self.p2
    }

    pub fn u1(&self) -> Option<&CMatrix> {
        self.u1.as_ref()
    }

    pub fn u2(&self) -> Option<&CMatrix> {
        self.u2.as_ref()
    }

    /// Δ = P2² − P1² on the target block.
    pub fn delta(&self) -> CMatrix {
        linalg::hermitize(&(&self.p2 * &self.p2 - &self.p1 * &self.p1))
    }

    /// Full-space Kraus operators U_i P_i for outcomes 1 and 2.
    pub fn kraus_ops(&self) -> [CMatrix; 2] {
        let k1 = match &self.u1 {
            Some(u) => u * &self.p1,
            None => self.p1.clone(),
        };
        let k2 = match &self.u2 {
            Some(u) => u * &self.p2,
            None => self.p2.clone(),
        };
        [
            embed_local(&k1, self.target, &self.shape).expect("validated block"),
            embed_local(&k2, self.target, &self.shape).expect("validated block"),
        ]
    }

    /// Probability Tr(P1² ρ) of outcome 1.
    pub fn p1_probability(&self, rho: &DensityMatrix) -> f64 {
        let e = embed_local(&(&self.p1 * &self.p1), self.target, &self.shape).expect("validated block");
        linalg::trace_product_re(&e, rho.matrix())
    }
}

pub fn zero_vector(n: usize) -> CVector {
    CVector::from_element(n, c(0.0, 0.0))
}
