//! Dense complex linear algebra on small multipartite operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::shape::SystemShape;
use crate::error::{MonolabError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as zero before sqrt/log.
pub const PSD_CLAMP: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Re Tr(AB) without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Spectral (operator 2-) norm.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if hermiticity_residual(m) <= 1e-12 * (1.0 + max_abs(m)) {
        let (w, _) = eigh(m);
        return w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    }
    m.clone().singular_values().iter().fold(0.0_f64, |a, &x| a.max(x))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vecs)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

/// V diag(values) V†.
pub fn reassemble(values: &[f64], vecs: &CMatrix) -> CMatrix {
    reassemble_complex(&values.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>(), vecs)
}

pub fn reassemble_complex(values: &[C64], vecs: &CMatrix) -> CMatrix {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for (j, v) in values.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= v;
        }
    }
    scaled * vecs.adjoint()
}

/// Kronecker product, row-major (first factor slowest).
pub fn tensor_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn tensor_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketKind {
    Commutator,
    Anticommutator,
}

pub fn bracket(a: &CMatrix, b: &CMatrix, kind: BracketKind) -> Result<CMatrix> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(MonolabError::SizeMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let ab = a * b;
    let ba = b * a;
    Ok(match kind {
        BracketKind::Commutator => ab - ba,
        BracketKind::Anticommutator => ab + ba,
    })
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Scalar functions applied through the spectral decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFn {
    Sqrt,
    /// Natural logarithm; eigenvalues at or below the clamp map to 0 so that
    /// `x log x` terms vanish.
    Log,
    Exp,
    /// `e^{iH}`; the result is unitary rather than Hermitian.
    ExpI,
    Cube,
    /// Inverse on the support; fails on eigenvalues below the clamp.
    Inverse,
}

pub fn herm_matrix_function(h: &CMatrix, f: MatrixFn, clamp: f64) -> Result<CMatrix> {
    let scale = 1.0 + max_abs(h);
    let res = hermiticity_residual(h);
    if res > 1e-10 * scale {
        return Err(MonolabError::NotHermitian(res));
    }
    let (w, v) = eigh(h);
    let min = w.first().copied().unwrap_or(0.0);
    match f {
        MatrixFn::Sqrt | MatrixFn::Log if min < -clamp => {
            return Err(MonolabError::NotPositive(min));
        }
        MatrixFn::Inverse if min.abs() < clamp || w.iter().any(|x| x.abs() < clamp) => {
            return Err(MonolabError::Domain(format!(
                "inverse of matrix with eigenvalue {min:.3e}"
            )));
        }
        _ => {}
    }
    let mapped: Vec<C64> = w
        .iter()
        .map(|&x| match f {
            MatrixFn::Sqrt => c(x.max(0.0).sqrt(), 0.0),
            MatrixFn::Log => {
                if x <= clamp {
                    c(0.0, 0.0)
                } else {
                    c(x.ln(), 0.0)
                }
            }
            MatrixFn::Exp => c(x.exp(), 0.0),
            MatrixFn::ExpI => C64::from_polar(1.0, x),
            MatrixFn::Cube => c(x * x * x, 0.0),
            MatrixFn::Inverse => c(1.0 / x, 0.0),
        })
        .collect();
    Ok(reassemble_complex(&mapped, &v))
}

pub fn sqrt_psd(h: &CMatrix) -> Result<CMatrix> {
    herm_matrix_function(h, MatrixFn::Sqrt, PSD_CLAMP)
}

pub fn expi(h: &CMatrix) -> Result<CMatrix> {
    herm_matrix_function(h, MatrixFn::ExpI, PSD_CLAMP)
}

/// Block acting on `target`, identity on every other subsystem.
pub fn embed_local(block: &CMatrix, target: usize, shape: &SystemShape) -> Result<CMatrix> {
    if target >= shape.n_subsystems() {
        return Err(MonolabError::InvalidIndex(format!("target {target} out of range")));
    }
    let d = shape.dim(target);
    if block.nrows() != d || block.ncols() != d {
        return Err(MonolabError::SizeMismatch {
            expected: d,
            got: block.nrows(),
        });
    }
    let before: usize = shape.dims()[..target].iter().product();
    let after: usize = shape.dims()[target + 1..].iter().product();
    let mut m = identity(before).kronecker(block);
    if after > 1 {
        m = m.kronecker(&identity(after));
    }
    Ok(m)
}

/// Reduced operator on the subsystems in `keep`, ordered ascending.
pub fn partial_trace(rho: &CMatrix, shape: &SystemShape, keep: &[usize]) -> Result<CMatrix> {
    let keep = shape.normalize_part(keep)?;
    let n = shape.total_dim();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(MonolabError::SizeMismatch {
            expected: n,
            got: rho.nrows(),
        });
    }
    if keep.len() == shape.n_subsystems() {
        return Ok(rho.clone());
    }
    let traced = shape.complement(&keep);
    let keep_dims: Vec<usize> = keep.iter().map(|&i| shape.dim(i)).collect();
    let tr_dims: Vec<usize> = traced.iter().map(|&i| shape.dim(i)).collect();
    let dk: usize = keep_dims.iter().product();
    let dt: usize = tr_dims.iter().product();

    // groups[t] lists (full index, kept index) sharing traced index t
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(dk); dt];
    for full in 0..n {
        let digits = shape.digits(full);
        let k = keep.iter().fold(0, |acc, &s| acc * shape.dim(s) + digits[s]);
        let t = traced.iter().fold(0, |acc, &s| acc * shape.dim(s) + digits[s]);
        groups[t].push((full, k));
    }
    let mut out = CMatrix::zeros(dk, dk);
    for g in &groups {
        for &(r, kr) in g {
            for &(col, kc) in g {
                out[(kr, kc)] += rho[(r, col)];
            }
        }
    }
    Ok(out)
}

/// Outcome of applying one Kraus operator to an unnormalized operator.
pub fn kraus_raw(rho: &CMatrix, m: &CMatrix) -> (CMatrix, f64) {
    let out = m * rho * m.adjoint();
    let p = trace_re(&out);
    (out, p)
}

/// Vector outer product |a⟩⟨b|.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| c(v, 0.0))))
}

/// Projector onto basis vector `i` of an `n`-dimensional space.
pub fn basis_projector(n: usize, i: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, i)] = c(1.0, 0.0);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn kron_identity_and_projectors() {
        assert!(max_abs_diff(&tensor_product(&identity(2), &identity(2)), &identity(4)) < TOL);
        let p = tensor_product(&basis_projector(2, 0), &basis_projector(2, 1));
        assert!(max_abs_diff(&p, &basis_projector(4, 1)) < TOL);
    }

    #[test]
    fn zz_stabilizes_phi_plus() {
        let zz = tensor_product(&pauli_z(), &pauli_z());
        let v = CVector::from_vec(vec![c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
        let w = &zz * &v;
        assert!((w - v).norm() < TOL);
    }

    #[test]
    fn pauli_brackets() {
        let x = pauli_x();
        let y = pauli_y();
        let z = pauli_z();
        let comm = bracket(&x, &y, BracketKind::Commutator).unwrap();
        assert!(max_abs_diff(&comm, &z.scale(2.0).map(|e| e * c(0., 1.))) < TOL);
        let zero = bracket(&x, &x, BracketKind::Commutator).unwrap();
        assert!(max_abs(&zero) < TOL);
        let anti = bracket(
            &basis_projector(2, 0),
            &basis_projector(2, 1),
            BracketKind::Anticommutator,
        )
        .unwrap();
        assert!(max_abs(&anti) < TOL);
        assert!(bracket(&x, &identity(3), BracketKind::Commutator).is_err());
    }

    #[test]
    fn matrix_functions_on_diagonals() {
        let s = herm_matrix_function(&identity(3), MatrixFn::Sqrt, PSD_CLAMP).unwrap();
        assert!(max_abs_diff(&s, &identity(3)) < TOL);
        let s = herm_matrix_function(&diag_real(&[4.0, 9.0]), MatrixFn::Sqrt, PSD_CLAMP).unwrap();
        assert!(max_abs_diff(&s, &diag_real(&[2.0, 3.0])) < TOL);
        let e = herm_matrix_function(&CMatrix::zeros(2, 2), MatrixFn::ExpI, PSD_CLAMP).unwrap();
        assert!(max_abs_diff(&e, &identity(2)) < TOL);
        let e = herm_matrix_function(&CMatrix::zeros(2, 2), MatrixFn::Exp, PSD_CLAMP).unwrap();
        assert!(max_abs_diff(&e, &identity(2)) < TOL);
        let cube = herm_matrix_function(&diag_real(&[2.0, -1.0]), MatrixFn::Cube, PSD_CLAMP).unwrap();
        assert!(max_abs_diff(&cube, &diag_real(&[8.0, -1.0])) < TOL);
    }

    #[test]
    fn log_clamps_zero_eigenvalues() {
        let l = herm_matrix_function(&diag_real(&[1.0, 0.0]), MatrixFn::Log, PSD_CLAMP).unwrap();
        assert!(max_abs(&l) < TOL);
        let l = herm_matrix_function(&diag_real(&[0.5, -1e-12]), MatrixFn::Log, PSD_CLAMP).unwrap();
        assert!((l[(0, 0)].re - 0.5f64.ln()).abs() < TOL);
        assert!(herm_matrix_function(&diag_real(&[0.5, -1e-6]), MatrixFn::Log, PSD_CLAMP).is_err());
        assert!(herm_matrix_function(&diag_real(&[0.5, -1e-6]), MatrixFn::Sqrt, PSD_CLAMP).is_err());
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(
            herm_matrix_function(&m, MatrixFn::Sqrt, PSD_CLAMP),
            Err(MonolabError::NotHermitian(_))
        ));
    }

    #[test]
    fn embed_examples() {
        let s2 = SystemShape::qubits(2);
        let e = embed_local(&pauli_x(), 0, &s2).unwrap();
        assert!(max_abs_diff(&e, &tensor_product(&pauli_x(), &identity(2))) < TOL);
        let e = embed_local(&identity(2), 1, &s2).unwrap();
        assert!(max_abs_diff(&e, &identity(4)) < TOL);

        // diag(1,-1) on qubit 2 of 3 is I4 ⊗ σz: sign alternates with the last bit
        let s3 = SystemShape::qubits(3);
        let e = embed_local(&pauli_z(), 2, &s3).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j {
                    if i % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
                assert!((e[(i, j)] - c(expect, 0.0)).norm() < TOL);
            }
        }
        assert!(embed_local(&identity(3), 0, &s2).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let s = SystemShape::qubits(2);
        let bell = CVector::from_vec(vec![
            c(std::f64::consts::FRAC_1_SQRT_2, 0.),
            c(0., 0.),
            c(0., 0.),
            c(std::f64::consts::FRAC_1_SQRT_2, 0.),
        ]);
        let rho = outer(&bell, &bell);
        let ra = partial_trace(&rho, &s, &[0]).unwrap();
        assert!(max_abs_diff(&ra, &identity(2).scale(0.5)) < TOL);
        let all = partial_trace(&rho, &s, &[0, 1]).unwrap();
        assert!(max_abs_diff(&all, &rho) < TOL);
        assert!(partial_trace(&rho, &s, &[]).is_err());
        assert!(partial_trace(&rho, &s, &[2]).is_err());
    }

    #[test]
    fn partial_trace_middle_subsystem_of_qutrit_sandwich() {
        // ρ = a ⊗ b ⊗ c with distinct dims; keeping {0,2} returns Tr(b) a ⊗ c
        let s = SystemShape::new(vec![2, 3, 2]).unwrap();
        let a = diag_real(&[0.25, 0.75]);
        let b = diag_real(&[0.2, 0.3, 0.5]);
        let cc = CMatrix::from_row_slice(2, 2, &[c(0.6, 0.), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.)]);
        let rho = tensor_product(&tensor_product(&a, &b), &cc);
        let kept = partial_trace(&rho, &s, &[0, 2]).unwrap();
        assert!(max_abs_diff(&kept, &tensor_product(&a, &cc)) < TOL);
        let mid = partial_trace(&rho, &s, &[1]).unwrap();
        assert!(max_abs_diff(&mid, &b) < TOL);
    }

    #[test]
    fn operator_norm_of_pauli_sum() {
        let h = pauli_x() + pauli_z();
        assert!((operator_norm(&h) - 2f64.sqrt()).abs() < TOL);
        let nonherm = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(2., 0.), c(0., 0.), c(0., 0.)]);
        assert!((operator_norm(&nonherm) - 2.0).abs() < TOL);
    }
}
