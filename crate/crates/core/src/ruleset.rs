//! Sets of rule indices.
//!
//! Rules are numbered `1..=m` in every external format; internally a
//! [`RuleSet`] stores 0-based bit positions. The total order on rule sets is
//! the integer order of the bitmask with rule 1 as the least significant bit,
//! which is the "smallest subset" tie-break used by the exhaustive search.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RuleSet {
    universe: usize,
    words: SmallVec<[u64; 1]>,
}

fn word_count(universe: usize) -> usize {
    universe.div_ceil(64).max(1)
}

impl RuleSet {
    pub fn empty(universe: usize) -> Self {
        RuleSet {
            universe,
            words: SmallVec::from_elem(0, word_count(universe)),
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = Self::empty(universe);
        for i in 0..universe {
            s.insert(i);
        }
        s
    }

    /// Builds a set from 0-based indices.
    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(universe);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Builds a set from 1-based rule ids.
    pub fn from_ids(universe: usize, ids: impl IntoIterator<Item = usize>) -> Self {
        Self::from_indices(universe, ids.into_iter().map(|id| id - 1))
    }

    /// Interprets the low `universe` bits of `mask` as membership.
    pub fn from_mask(universe: usize, mask: u64) -> Self {
        assert!(universe <= 64, "mask form only covers 64 rules");
        let mut s = Self::empty(universe);
        s.words[0] = mask;
        s
    }

    pub fn to_mask(&self) -> Option<u64> {
        if self.words[1..].iter().any(|&w| w != 0) {
            None
        } else {
            Some(self.words[0])
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        index < self.universe && self.words[index / 64] >> (index % 64) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, index: usize) {
        assert!(index < self.universe, "rule index {index} out of range");
        self.words[index / 64] |= 1 << (index % 64);
    }

    #[inline]
    pub fn remove(&mut self, index: usize) {
        if index < self.universe {
            self.words[index / 64] &= !(1 << (index % 64));
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn intersects(&self, other: &RuleSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &RuleSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    /// Removes every member of `other` from `self`.
    pub fn subtract(&mut self, other: &RuleSet) {
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= !b;
        }
    }

    pub fn intersection(&self, other: &RuleSet) -> RuleSet {
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(other.words.iter()) {
            *a &= b;
        }
        out
    }

    pub fn complement(&self) -> RuleSet {
        let mut out = RuleSet::full(self.universe);
        out.subtract(self);
        out
    }

    /// 0-based indices in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// 1-based rule ids in ascending order.
    pub fn ids(&self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }
}

impl Ord for RuleSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.universe
            .cmp(&other.universe)
            .then_with(|| self.words.iter().rev().cmp(other.words.iter().rev()))
    }
}

impl PartialOrd for RuleSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, id) in self.ids().into_iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("}")
    }
}

#[derive(Serialize, Deserialize)]
struct RuleSetRepr {
    m: usize,
    active: Vec<usize>,
}

impl Serialize for RuleSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RuleSetRepr {
            m: self.universe,
            active: self.ids(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RuleSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = RuleSetRepr::deserialize(deserializer)?;
        if let Some(bad) = repr.active.iter().find(|&&id| id == 0 || id > repr.m) {
            return Err(serde::de::Error::custom(format!(
                "rule id {bad} outside 1..={}",
                repr.m
            )));
        }
        Ok(RuleSet::from_ids(repr.m, repr.active))
    }
}
