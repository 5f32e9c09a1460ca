use serde::{Deserialize, Serialize};

use super::linalg::{c, CMatrix};
use crate::error::{MonolabError, Result};

/// Row-major real/imaginary parts of a complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMatrix> for MatrixRepr {
    fn from(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { rows, cols, re, im }
    }
}

impl MatrixRepr {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(MonolabError::SizeMismatch {
                expected: n,
                got: self.re.len().min(self.im.len()),
            });
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            c(self.re[k], self.im[k])
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::pauli_y;

    #[test]
    fn round_trip() {
        let y = pauli_y();
        let r = MatrixRepr::from(&y);
        assert_eq!(r.to_matrix().unwrap(), y);
        let json = serde_json::to_string(&r).unwrap();
        let back: MatrixRepr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
