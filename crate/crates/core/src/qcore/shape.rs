use serde::{Deserialize, Serialize};

use crate::error::{MonolabError, Result};

/// Ordered subsystem dimensions of a multipartite Hilbert space.
///
/// Amplitudes and matrix indices are flattened row-major over the
/// subsystems with subsystem 0 varying slowest, so for three qubits the
/// flat index of `|i j k⟩` is `4i + 2j + k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SystemShape {
    dims: Vec<usize>,
}

impl SystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(MonolabError::InvalidShape("no subsystems".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(MonolabError::InvalidShape(format!(
                "subsystem dimension {d} is below 2"
            )));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| MonolabError::InvalidShape("total dimension overflows".into()))?;
        if total > 1 << 12 {
            return Err(MonolabError::InvalidShape(format!(
                "total dimension {total} is too large for dense algebra"
            )));
        }
        Ok(Self { dims })
    }

    pub fn qubits(n: usize) -> Self {
        Self::new(vec![2; n]).expect("qubit register shape")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, subsystem: usize) -> usize {
        self.dims[subsystem]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Sorted, deduplicated copy of `part` after checking every index.
    pub fn normalize_part(&self, part: &[usize]) -> Result<Vec<usize>> {
        if part.is_empty() {
            return Err(MonolabError::InvalidIndex("empty subsystem set".into()));
        }
        let mut p = part.to_vec();
        p.sort_unstable();
        p.dedup();
        if p.len() != part.len() {
            return Err(MonolabError::InvalidIndex(format!("repeated index in {part:?}")));
        }
        if let Some(&bad) = p.iter().find(|&&i| i >= self.dims.len()) {
            return Err(MonolabError::InvalidIndex(format!(
                "index {bad} out of range for {} subsystems",
                self.dims.len()
            )));
        }
        Ok(p)
    }

    pub fn complement(&self, part: &[usize]) -> Vec<usize> {
        (0..self.dims.len()).filter(|i| !part.contains(i)).collect()
    }

    pub fn sub_shape(&self, part: &[usize]) -> Result<SystemShape> {
        let p = self.normalize_part(part)?;
        SystemShape::new(p.iter().map(|&i| self.dims[i]).collect())
    }

    /// Per-subsystem digits of a flat index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn flat_index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }
}

impl TryFrom<Vec<usize>> for SystemShape {
    type Error = MonolabError;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        SystemShape::new(dims)
    }
}

impl From<SystemShape> for Vec<usize> {
    fn from(s: SystemShape) -> Self {
        s.dims
    }
}

impl std::fmt::Display for SystemShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_dims() {
        assert!(SystemShape::new(vec![]).is_err());
        assert!(SystemShape::new(vec![2, 1]).is_err());
        assert!(SystemShape::new(vec![2, 3]).is_ok());
    }

    #[test]
    fn row_major_digits() {
        let s = SystemShape::new(vec![2, 3, 2]).unwrap();
        assert_eq!(s.total_dim(), 12);
        // |1 2 0⟩ -> 1*6 + 2*2 + 0
        assert_eq!(s.flat_index(&[1, 2, 0]), 10);
        assert_eq!(s.digits(10), vec![1, 2, 0]);
        for i in 0..12 {
            assert_eq!(s.flat_index(&s.digits(i)), i);
        }
    }

    #[test]
    fn part_validation() {
        let s = SystemShape::qubits(3);
        assert_eq!(s.normalize_part(&[2, 0]).unwrap(), vec![0, 2]);
        assert!(s.normalize_part(&[]).is_err());
        assert!(s.normalize_part(&[3]).is_err());
        assert!(s.normalize_part(&[1, 1]).is_err());
        assert_eq!(s.complement(&[1]), vec![0, 2]);
    }
}
