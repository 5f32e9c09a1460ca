use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{self, CMatrix};

const COMPLETENESS_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PolarParts {
    pub p1: CMatrix,
    pub p2: CMatrix,
    pub u1: CMatrix,
    pub u2: CMatrix,
}

/// Splits M_i = U_i P_i with P_i = sqrt(M_i†M_i).
///
/// On the null space of P_i the unitary maps ker P_i onto the orthogonal
/// complement of range M_i by the isometry closest to the identity, which
/// is the identity whenever the two subspaces coincide.
pub fn polar_reduce(m1: &CMatrix, m2: &CMatrix) -> Result<PolarParts> {
    let d = m1.nrows();
    if m1.shape() != (d, d) || m2.shape() != (d, d) {
        return Err(MonolabError::SizeMismatch {
            expected: d,
            got: m2.nrows(),
        });
    }
    let q1 = m1.adjoint() * m1;
    let q2 = m2.adjoint() * m2;
    let comp = linalg::max_abs(&(&q1 + &q2 - linalg::identity(d)));
    if comp > COMPLETENESS_TOL {
        return Err(MonolabError::Completeness(comp));
    }
    let (p1, u1) = polar_one(m1, &q1)?;
    let (p2, u2) = polar_one(m2, &q2)?;
    Ok(PolarParts { p1, p2, u1, u2 })
}

fn polar_one(m: &CMatrix, q: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let d = m.nrows();
    let (w, v) = linalg::eigh(q);
    let s: Vec<f64> = w.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let p = linalg::hermitize(&linalg::reassemble(&s, &v));

    let support: Vec<usize> = (0..d).filter(|&i| s[i] > SUPPORT_TOL).collect();
    let kernel: Vec<usize> = (0..d).filter(|&i| s[i] <= SUPPORT_TOL).collect();

    // on the support: U v_i = M v_i / s_i
    let mut u = CMatrix::zeros(d, d);
    let mut images = Vec::with_capacity(support.len());
    for &i in &support {
        let vi = v.column(i).into_owned();
        let img = (m * &vi).unscale(s[i]);
        u += &img * vi.adjoint();
        images.push(img);
    }
    if !kernel.is_empty() {
        let k = kernel.len();
        let kbasis = CMatrix::from_fn(d, k, |r, j| v[(r, kernel[j])]);
        // orthonormal basis of (range M)^⊥ from the projector I − Σ|img⟩⟨img|
        let mut proj = linalg::identity(d);
        for img in &images {
            proj -= img * img.adjoint();
        }
        let (pw, pv) = linalg::eigh(&linalg::hermitize(&proj));
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| pw[b].total_cmp(&pw[a]));
        let rbasis = CMatrix::from_fn(d, k, |r, j| pv[(r, idx[j])]);
        let overlap = rbasis.adjoint() * &kbasis;
        let svd = overlap.svd(true, true);
        let (x, yt) = match (svd.u, svd.v_t) {
            (Some(x), Some(yt)) => (x, yt),
            _ => return Err(MonolabError::Domain("polar completion failed".into())),
        };
        let iso = &rbasis * (x * yt) * kbasis.adjoint();
        u += iso;
    }
    Ok((p, u))
}
