//! Three-qubit polynomial invariants, tangles, φ_ABC and σ_ABC.
//!
//! Amplitudes α_{ijk} are indexed `4i + 2j + k` (A slowest).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{self, c, tensor_product, CMatrix, C64};
use crate::qcore::{partial_trace, PureState, SystemShape};

const IMAG_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

fn amp_index(i: usize, j: usize, k: usize) -> usize {
    4 * i + 2 * j + k
}

fn require_three_qubits(shape: &SystemShape) -> Result<()> {
    if shape.dims() != [2, 2, 2] {
        return Err(MonolabError::InvalidShape(format!("expected 2x2x2, got {shape}")));
    }
    Ok(())
}

fn check_permutation(p: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &x in p {
        if x >= n || seen[x] {
            return Err(MonolabError::Arity(format!("{p:?} is not a permutation of 0..{n}")));
        }
        seen[x] = true;
    }
    Ok(())
}

/// Σ Π_m α_{i_m j_m k_m} α*_{i_m j_{σ(m)} k_{τ(m)}} by brute force over
/// all 8ⁿ index tuples. Permutations are 0-based images, e.g. the cycle
/// (123) is `[1, 2, 0]`.
pub fn polynomial_invariant_complex(psi: &PureState, sigma: &[usize], tau: &[usize]) -> Result<C64> {
    require_three_qubits(psi.shape())?;
    let n = sigma.len();
    if n == 0 || n > 3 || tau.len() != n {
        return Err(MonolabError::Arity(format!(
            "permutation degrees {} and {} must match and lie in 1..=3",
            sigma.len(),
            tau.len()
        )));
    }
    check_permutation(sigma, n)?;
    check_permutation(tau, n)?;
    let a = psi.amplitudes();
    let mut total = c(0.0, 0.0);
    let mut idx = vec![0usize; n];
    for flat in 0..8usize.pow(n as u32) {
        let mut f = flat;
        for slot in idx.iter_mut() {
            *slot = f % 8;
            f /= 8;
        }
        let mut term = c(1.0, 0.0);
        for m in 0..n {
            let (i, j, k) = (idx[m] >> 2, (idx[m] >> 1) & 1, idx[m] & 1);
            let jm = (idx[sigma[m]] >> 1) & 1;
            let km = idx[tau[m]] & 1;
            term *= a[amp_index(i, j, k)] * a[amp_index(i, jm, km)].conj();
        }
        total += term;
    }
    Ok(total)
}

pub fn polynomial_invariant(psi: &PureState, sigma: &[usize], tau: &[usize]) -> Result<f64> {
    let z = polynomial_invariant_complex(psi, sigma, tau)?;
    if z.im.abs() > IMAG_TOL {
        return Err(MonolabError::ImaginaryResidue(z.im.abs()));
    }
    Ok(z.re)
}

fn eps2(a: usize, b: usize) -> f64 {
    match (a, b) {
        (0, 1) => 1.0,
        (1, 0) => -1.0,
        _ => 0.0,
    }
}

/// The ε-contraction inside I₅, summed over all 2¹² index tuples.
pub fn i5_amplitude_exhaustive(psi: &PureState) -> Result<C64> {
    require_three_qubits(psi.shape())?;
    let a = psi.amplitudes();
    let mut total = c(0.0, 0.0);
    for bits in 0..(1usize << 12) {
        let b = |p: usize| (bits >> p) & 1;
        let (i1, i2, i3, i4) = (b(0), b(1), b(2), b(3));
        let (j1, j2, j3, j4) = (b(4), b(5), b(6), b(7));
        let (k1, k2, k3, k4) = (b(8), b(9), b(10), b(11));
        let w = eps2(i1, i2) * eps2(i3, i4) * eps2(j1, j2) * eps2(j3, j4) * eps2(k1, k3) * eps2(k2, k4);
        if w == 0.0 {
            continue;
        }
        total += a[amp_index(i1, j1, k1)]
            * a[amp_index(i2, j2, k2)]
            * a[amp_index(i3, j3, k3)]
            * a[amp_index(i4, j4, k4)]
            * w;
    }
    Ok(total)
}

/// Same contraction factored through the 2×2 slices A_k = α[·,·,k].
pub fn i5_amplitude(psi: &PureState) -> Result<C64> {
    require_three_qubits(psi.shape())?;
    let a = psi.amplitudes();
    let s = |k: usize, i: usize, j: usize| a[amp_index(i, j, k)];
    let d = |k1: usize, k2: usize| {
        s(k1, 0, 0) * s(k2, 1, 1) - s(k1, 0, 1) * s(k2, 1, 0) - s(k1, 1, 0) * s(k2, 0, 1) + s(k1, 1, 1) * s(k2, 0, 0)
    };
    Ok((d(0, 0) * d(1, 1) - d(0, 1) * d(1, 0)) * 2.0)
}

pub fn i5(psi: &PureState) -> Result<f64> {
    Ok(i5_amplitude(psi)?.norm_sqr())
}

/// Nonzero ε-weights of the I₅ contraction as (four flat amplitude
/// indices, sign).
fn i5_terms() -> &'static [([usize; 4], f64)] {
    static TERMS: OnceLock<Vec<([usize; 4], f64)>> = OnceLock::new();
    TERMS.get_or_init(|| {
        let mut out = Vec::new();
        for bits in 0..(1usize << 12) {
            let b = |p: usize| (bits >> p) & 1;
            let w = eps2(b(0), b(1))
                * eps2(b(2), b(3))
                * eps2(b(4), b(5))
                * eps2(b(6), b(7))
                * eps2(b(8), b(10))
                * eps2(b(9), b(11));
            if w != 0.0 {
                let t = [0, 1, 2, 3].map(|m| amp_index(b(m), b(4 + m), b(8 + m)));
                out.push((t, w));
            }
        }
        out
    })
}

/// I₅ as a degree-4 polynomial in the entries of ρ; equals |H|² on
/// ρ = |ψ⟩⟨ψ|.
pub fn i5_from_density(rho: &CMatrix) -> Result<f64> {
    if rho.nrows() != 8 || rho.ncols() != 8 {
        return Err(MonolabError::SizeMismatch {
            expected: 8,
            got: rho.nrows(),
        });
    }
    let terms = i5_terms();
    let mut total = c(0.0, 0.0);
    for (t, wt) in terms {
        for (u, wu) in terms {
            total += rho[(t[0], u[0])] * rho[(t[1], u[1])] * rho[(t[2], u[2])] * rho[(t[3], u[3])] * (wt * wu);
        }
    }
    Ok(total.re)
}

/// Marginals of a three-qubit operator.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub ab: CMatrix,
    pub ac: CMatrix,
    pub bc: CMatrix,
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

impl Marginals {
    pub fn of(rho: &CMatrix) -> Result<Self> {
        let s = SystemShape::qubits(3);
        let ab = partial_trace(rho, &s, &[0, 1])?;
        let ac = partial_trace(rho, &s, &[0, 2])?;
        let bc = partial_trace(rho, &s, &[1, 2])?;
        let s2 = SystemShape::qubits(2);
        Ok(Self {
            a: partial_trace(&ab, &s2, &[0])?,
            b: partial_trace(&ab, &s2, &[1])?,
            c: partial_trace(&ac, &s2, &[1])?,
            ab,
            ac,
            bc,
        })
    }
}

fn tr3(m: &CMatrix) -> f64 {
    linalg::trace_product_re(&(m * m), m)
}

fn tr2(m: &CMatrix) -> f64 {
    linalg::trace_product_re(m, m)
}

/// 3Tr{ρ_XY(ρ_X⊗ρ_Y)} − Trρ_X³ − Trρ_Y³ for a two-party marginal.
fn kempe_route(pair: &CMatrix, x: &CMatrix, y: &CMatrix) -> f64 {
    3.0 * linalg::trace_product_re(pair, &tensor_product(x, y)) - tr3(x) - tr3(y)
}

/// I₄ from the (AB), (AC) and (BC) marginal expressions.
pub fn kempe_i4_three_ways_density(rho: &CMatrix) -> Result<(f64, f64, f64)> {
    let m = Marginals::of(rho)?;
    Ok((
        kempe_route(&m.ab, &m.a, &m.b),
        kempe_route(&m.ac, &m.a, &m.c),
        kempe_route(&m.bc, &m.b, &m.c),
    ))
}

pub fn kempe_i4_three_ways(psi: &PureState) -> Result<(f64, f64, f64)> {
    require_three_qubits(psi.shape())?;
    kempe_i4_three_ways_density(psi.density().matrix())
}

/// X = 2ρ_AB + ρ_A⊗I + I⊗ρ_B with the marginals taken from ρ_AB itself.
pub fn phi_x_operator(rho_ab: &CMatrix) -> Result<CMatrix> {
    let s2 = SystemShape::qubits(2);
    let a = partial_trace(rho_ab, &s2, &[0])?;
    let b = partial_trace(rho_ab, &s2, &[1])?;
    let id = linalg::identity(2);
    Ok(rho_ab.scale(2.0) + tensor_product(&a, &id) + tensor_product(&id, &b))
}

/// 69 − Tr X³ − 3 Tr ρ_AB², without positivity checks.
pub fn phi_from_rho_ab_unchecked(rho_ab: &CMatrix) -> Result<f64> {
    let x = phi_x_operator(rho_ab)?;
    Ok(69.0 - tr3(&x) - 3.0 * tr2(rho_ab))
}

/// φ_ABC from a two-qubit ρ_AB; asserts X ⪰ 0.
pub fn phi_from_rho_ab(rho_ab: &CMatrix) -> Result<f64> {
    let x = phi_x_operator(rho_ab)?;
    let min = linalg::eigvalsh(&x)[0];
    if min < -PSD_TOL {
        return Err(MonolabError::NotPositive(min));
    }
    Ok(69.0 - tr3(&x) - 3.0 * tr2(rho_ab))
}

/// φ_ABC of a three-qubit operator through its AB marginal.
pub fn phi_from_density(rho: &CMatrix) -> Result<f64> {
    let ab = partial_trace(rho, &SystemShape::qubits(3), &[0, 1])?;
    phi_from_rho_ab_unchecked(&ab)
}

pub fn phi_abc(psi: &PureState) -> Result<f64> {
    require_three_qubits(psi.shape())?;
    let ab = partial_trace(psi.density().matrix(), psi.shape(), &[0, 1])?;
    phi_from_rho_ab(&ab)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrX3Check {
    pub tr_x3: f64,
    pub expansion: f64,
    /// |Tr{ρ_AB²(I⊗ρ_B)} − Tr{ρ_BC(ρ_B⊗ρ_C)}|
    pub identity_b: f64,
    /// |Tr{ρ_AB²(ρ_A⊗I)} − Tr{ρ_AC(ρ_A⊗ρ_C)}|
    pub identity_a: f64,
    /// |Tr ρ_AB³ − Tr ρ_C³|
    pub identity_c: f64,
    pub max_residual: f64,
}

/// Both sides of Tr X³ = 12 I₄ + 16(Trρ_A³+Trρ_B³+Trρ_C³) + 3Trρ_A² + 3Trρ_B²
/// and the three partial-trace identities behind it.
pub fn tr_x3_expansion_check(psi: &PureState) -> Result<TrX3Check> {
    require_three_qubits(psi.shape())?;
    let m = Marginals::of(psi.density().matrix())?;
    let x = phi_x_operator(&m.ab)?;
    let tr_x3 = tr3(&x);
    let i4 = kempe_route(&m.ab, &m.a, &m.b);
    let expansion = 12.0 * i4 + 16.0 * (tr3(&m.a) + tr3(&m.b) + tr3(&m.c)) + 3.0 * tr2(&m.a) + 3.0 * tr2(&m.b);
    let id = linalg::identity(2);
    let ab2 = &m.ab * &m.ab;
    let identity_b = (linalg::trace_product_re(&ab2, &tensor_product(&id, &m.b))
        - linalg::trace_product_re(&m.bc, &tensor_product(&m.b, &m.c)))
    .abs();
    let identity_a = (linalg::trace_product_re(&ab2, &tensor_product(&m.a, &id))
        - linalg::trace_product_re(&m.ac, &tensor_product(&m.a, &m.c)))
    .abs();
    let identity_c = (tr3(&m.ab) - tr3(&m.c)).abs();
    let max_residual = (tr_x3 - expansion)
        .abs()
        .max(identity_a)
        .max(identity_b)
        .max(identity_c);
    Ok(TrX3Check {
        tr_x3,
        expansion,
        identity_b,
        identity_a,
        identity_c,
        max_residual,
    })
}

/// 3 − (I₁+I₂+I₃)·I₄ from marginals of a three-qubit operator.
pub fn sigma_from_density(rho: &CMatrix) -> Result<f64> {
    let m = Marginals::of(rho)?;
    let i4 = kempe_route(&m.ab, &m.a, &m.b);
    Ok(3.0 - (tr2(&m.c) + tr2(&m.b) + tr2(&m.a)) * i4)
}

pub fn sigma_abc(psi: &PureState) -> Result<f64> {
    let inv = three_qubit_invariants(psi)?;
    Ok(inv.sigma)
}

/// 1 divided by 2√I₅ of GHZ: the factor that would map τ_ABC = 2√I₅ onto
/// the three-tangle normalization where GHZ has tangle 1.
pub fn tau_abc_calibration() -> f64 {
    let ghz = crate::qcore::named::ghz(3);
    1.0 / (2.0 * i5(&ghz).expect("three-qubit fixture").sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub tau_ab_c: f64,
    pub tau_ac_b: f64,
    pub tau_bc_a: f64,
    pub tau_abc: f64,
    pub phi: f64,
    pub sigma: f64,
    pub tau_abc_calibration: f64,
    pub max_imaginary_residue: f64,
}

pub fn three_qubit_invariants(psi: &PureState) -> Result<InvariantSet> {
    require_three_qubits(psi.shape())?;
    let id = [0, 1];
    let swap = [1, 0];
    let z1 = polynomial_invariant_complex(psi, &id, &swap)?;
    let z2 = polynomial_invariant_complex(psi, &swap, &id)?;
    let z3 = polynomial_invariant_complex(psi, &swap, &swap)?;
    let z4 = polynomial_invariant_complex(psi, &[1, 2, 0], &[2, 0, 1])?;
    let h = i5_amplitude_exhaustive(psi)?;
    let residue = [z1, z2, z3, z4].iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > IMAG_TOL {
        return Err(MonolabError::ImaginaryResidue(residue));
    }
    let (i1, i2, i3, i4) = (z1.re, z2.re, z3.re, z4.re);
    let i5 = h.norm_sqr();
    Ok(InvariantSet {
        i1,
        i2,
        i3,
        i4,
        i5,
        tau_ab_c: 2.0 * (1.0 - i1),
        tau_ac_b: 2.0 * (1.0 - i2),
        tau_bc_a: 2.0 * (1.0 - i3),
        tau_abc: 2.0 * i5.sqrt(),
        phi: phi_abc(psi)?,
        sigma: 3.0 - (i1 + i2 + i3) * i4,
        tau_abc_calibration: tau_abc_calibration(),
        max_imaginary_residue: residue,
    })
}
