//! Finite atom sets: the semantic model of a class as a set of pixels.
//!
//! Every class of every dataset is a union of indivisible concept atoms.
//! Relations between classes (equality, containment, overlap) reduce to
//! ordinary set relations between their atom sets, which keeps every
//! relation decidable.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type AtomId = usize;

const WORD: usize = 64;

/// A set of atom ids backed by a bitset.
///
/// Trailing zero words are always trimmed so that equality, hashing and
/// ordering depend only on the members.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct AtomSet {
    words: Vec<u64>,
}

impl AtomSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(atom: AtomId) -> Self {
        let mut s = Self::new();
        s.insert(atom);
        s
    }

    pub fn insert(&mut self, atom: AtomId) -> bool {
        let (w, b) = (atom / WORD, atom % WORD);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, atom: AtomId) -> bool {
        let (w, b) = (atom / WORD, atom % WORD);
        if w >= self.words.len() {
            return false;
        }
        let present = self.words[w] & (1 << b) != 0;
        self.words[w] &= !(1 << b);
        self.trim();
        present
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        let (w, b) = (atom / WORD, atom % WORD);
        self.words.get(w).is_some_and(|x| x & (1 << b) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Single-atom sets cannot be split any further.
    pub fn is_atomic(&self) -> bool {
        self.len() == 1
    }

    pub fn first(&self) -> Option<AtomId> {
        self.iter().next()
    }

    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i * WORD + b)
            })
        })
    }

    pub fn is_subset(&self, other: &AtomSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, &w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn is_superset(&self, other: &AtomSet) -> bool {
        other.is_subset(self)
    }

    pub fn is_disjoint(&self, other: &AtomSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn intersects(&self, other: &AtomSet) -> bool {
        !self.is_disjoint(other)
    }

    pub fn union(&self, other: &AtomSet) -> AtomSet {
        let n = self.words.len().max(other.words.len());
        let words = (0..n)
            .map(|i| self.word(i) | other.word(i))
            .collect::<Vec<_>>();
        AtomSet::from_words(words)
    }

    pub fn intersection(&self, other: &AtomSet) -> AtomSet {
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a & b)
            .collect();
        AtomSet::from_words(words)
    }

    pub fn difference(&self, other: &AtomSet) -> AtomSet {
        let words = self
            .words
            .iter()
            .enumerate()
            .map(|(i, &w)| w & !other.word(i))
            .collect();
        AtomSet::from_words(words)
    }

    pub fn union_with(&mut self, other: &AtomSet) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    fn word(&self, i: usize) -> u64 {
        self.words.get(i).copied().unwrap_or(0)
    }

    fn from_words(words: Vec<u64>) -> AtomSet {
        let mut s = AtomSet { words };
        s.trim();
        s
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<AtomId> for AtomSet {
    fn from_iter<I: IntoIterator<Item = AtomId>>(iter: I) -> Self {
        let mut s = AtomSet::new();
        for a in iter {
            s.insert(a);
        }
        s
    }
}

impl<const N: usize> From<[AtomId; N]> for AtomSet {
    fn from(atoms: [AtomId; N]) -> Self {
        atoms.into_iter().collect()
    }
}

/// Lexicographic order on the ascending member lists.
impl Ord for AtomSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for AtomSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for AtomSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for AtomSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for AtomSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<AtomId>::deserialize(deserializer)?;
        Ok(ids.into_iter().collect())
    }
}

/// Set-theoretic relation between two non-empty classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Equal,
    Subset,
    Superset,
    /// Neither contains the other and the intersection is non-empty.
    Overlap,
    Disjoint,
}

impl Relation {
    /// The relation seen from the other operand.
    pub fn flip(self) -> Relation {
        match self {
            Relation::Subset => Relation::Superset,
            Relation::Superset => Relation::Subset,
            r => r,
        }
    }
}

/// Classifies the relation of `a` to `b`; `Subset` means `a ⊂ b` strictly.
pub fn classify_relation(a: &AtomSet, b: &AtomSet) -> Result<Relation> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidClass("class has no atoms".into()));
    }
    let a_in_b = a.is_subset(b);
    let b_in_a = b.is_subset(a);
    Ok(match (a_in_b, b_in_a) {
        (true, true) => Relation::Equal,
        (true, false) => Relation::Subset,
        (false, true) => Relation::Superset,
        (false, false) if a.intersects(b) => Relation::Overlap,
        (false, false) => Relation::Disjoint,
    })
}
