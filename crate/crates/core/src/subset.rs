use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

/// Largest dimension a [`Subset`] can represent.
pub const MAX_REPRESENTABLE_DIM: usize = 63;

/// A set of covariate indices (0-based), stored as a bit mask.
///
/// The mask doubles as the canonical encoding used to key per-subset
/// random streams.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_mask(mask: u64) -> Self {
        Subset(mask)
    }

    /// Full set `{0, .., dim-1}`.
    pub fn full(dim: usize) -> Self {
        assert!(dim <= MAX_REPRESENTABLE_DIM);
        Subset((1u64 << dim) - 1)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, index: usize) -> bool {
        index < 64 && self.0 & (1 << index) != 0
    }

    pub fn insert(&mut self, index: usize) {
        assert!(index <= MAX_REPRESENTABLE_DIM);
        self.0 |= 1 << index;
    }

    pub fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn difference(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest index in the set plus one (0 for the empty set).
    pub fn span(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    /// Indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// 1-based covariate numbers, matching the `x1..xD` column names.
    pub fn to_one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    pub fn from_one_based(numbers: &[usize]) -> Option<Self> {
        let mut s = Subset::EMPTY;
        for &n in numbers {
            if n == 0 || n > MAX_REPRESENTABLE_DIM + 1 {
                return None;
            }
            s.insert(n - 1);
        }
        Some(s)
    }

    /// Remaps indices through `perm` (index `i` becomes `perm[i]`).
    pub fn permute(self, perm: &[usize]) -> Subset {
        self.iter().map(|i| perm[i]).collect()
    }
}

impl FromIterator<usize> for Subset {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = Subset::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for Subset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(deserializer)?;
        Subset::from_one_based(&v)
            .ok_or_else(|| serde::de::Error::custom("covariate numbers must be in 1..=64"))
    }
}

/// All subsets of `{0, .., dim-1}` grouped by cardinality, each group in
/// lexicographic order.
pub fn subsets_by_cardinality(dim: usize) -> impl Iterator<Item = Vec<Subset>> {
    (0..=dim).map(move |k| {
        (0..dim)
            .combinations(k)
            .map(|c| c.into_iter().collect())
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_order_is_cardinality_then_lex() {
        let all: Vec<Vec<usize>> = subsets_by_cardinality(3)
            .flatten()
            .map(Subset::to_vec)
            .collect();
        assert_eq!(
            all,
            vec![
                vec![],
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
    }

    #[test]
    fn set_algebra() {
        let a: Subset = [0, 2, 5].into_iter().collect();
        let b: Subset = [2, 3].into_iter().collect();
        assert_eq!(a.intersection(b).to_vec(), vec![2]);
        assert_eq!(a.difference(b).to_vec(), vec![0, 5]);
        assert_eq!(a.union(b).len(), 4);
        assert!(Subset::EMPTY.is_subset_of(a));
        assert!(!a.is_subset_of(b));
        assert_eq!(a.span(), 6);
        assert_eq!(a.to_one_based(), vec![1, 3, 6]);
        assert_eq!(Subset::from_one_based(&[1, 3, 6]), Some(a));
        assert_eq!(Subset::from_one_based(&[0]), None);
    }

    #[test]
    fn serde_uses_one_based_numbers() {
        let s: Subset = [1, 2].into_iter().collect();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[2,3]");
        let back: Subset = serde_json::from_str("[2,3]").unwrap();
        assert_eq!(back, s);
    }
}
