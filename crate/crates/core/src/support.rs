use std::fmt;

use crate::error::{invalid, Result};

/// Strictly increasing set of row indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a support from arbitrary indices, sorting and rejecting
    /// duplicates or indices outside `[0, dim)`.
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("support contains duplicate indices");
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return invalid(format!("support index {last} out of range for dimension {dim}"));
            }
        }
        Ok(Self { indices })
    }

    /// Caller guarantees the indices are strictly increasing.
    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { indices }
    }

    pub fn full(dim: usize) -> Self {
        Self { indices: (0..dim).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Membership mask of length `dim`.
    pub fn mask(&self, dim: usize) -> Vec<bool> {
        let mut mask = vec![false; dim];
        for &i in &self.indices {
            if i < dim {
                mask[i] = true;
            }
        }
        mask
    }

    /// Indices in `[0, dim)` not in the set.
    pub fn complement(&self, dim: usize) -> SupportSet {
        let mask = self.mask(dim);
        Self::from_sorted((0..dim).filter(|&i| !mask[i]).collect())
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_validates() {
        let s = SupportSet::new(vec![4, 1, 2], 5).unwrap();
        assert_eq!(s.indices(), &[1, 2, 4]);
        assert!(SupportSet::new(vec![1, 1], 5).is_err());
        assert!(SupportSet::new(vec![5], 5).is_err());
    }

    #[test]
    fn complement_and_display() {
        let s = SupportSet::new(vec![0, 3], 4).unwrap();
        assert_eq!(s.complement(4).indices(), &[1, 2]);
        assert_eq!(s.to_string(), "{0,3}");
        assert!(s.contains(3) && !s.contains(2));
    }
}
