//! Fixed-universe subsets of segment indices.
//!
//! A [`SegmentSet`] is a bitset over `{0, .., n-1}`. Universes up to 128
//! segments stay inline; larger ones spill to the heap.

use std::fmt;

use smallvec::SmallVec;

const WORD_BITS: usize = 64;

type Words = SmallVec<[u64; 2]>;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentSet {
    universe: usize,
    words: Words,
}

fn word_count(universe: usize) -> usize {
    universe.div_ceil(WORD_BITS)
}

impl SegmentSet {
    /// Empty set over a universe of `universe` segments.
    pub fn empty(universe: usize) -> Self {
        SegmentSet {
            universe,
            words: smallvec::smallvec![0; word_count(universe)],
        }
    }

    /// The whole universe.
    pub fn full(universe: usize) -> Self {
        let mut set = Self::empty(universe);
        for w in set.words.iter_mut() {
            *w = u64::MAX;
        }
        set.clear_tail();
        set
    }

    /// Builds a set from indices; returns `None` if any index is `>= universe`.
    pub fn from_indices<I>(universe: usize, indices: I) -> Option<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut set = Self::empty(universe);
        for i in indices {
            if i >= universe {
                return None;
            }
            set.insert(i);
        }
        Some(set)
    }

    fn clear_tail(&mut self) {
        let rem = self.universe % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    /// Inserts `segment`; returns true if it was absent.
    ///
    /// Panics if `segment >= universe`.
    pub fn insert(&mut self, segment: usize) -> bool {
        assert!(
            segment < self.universe,
            "segment {segment} outside universe of {}",
            self.universe
        );
        let (w, b) = (segment / WORD_BITS, segment % WORD_BITS);
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn contains(&self, segment: usize) -> bool {
        segment < self.universe
            && self.words[segment / WORD_BITS] & (1 << (segment % WORD_BITS)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.universe
    }

    pub fn missing_count(&self) -> usize {
        self.universe - self.len()
    }

    pub fn union(&self, other: &SegmentSet) -> SegmentSet {
        debug_assert_eq!(self.universe, other.universe);
        SegmentSet {
            universe: self.universe,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    pub fn union_with(&mut self, other: &SegmentSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// `|self ∪ other|` without allocating.
    pub fn union_len(&self, other: &SegmentSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// True if `self` holds some segment absent from `other`.
    pub fn has_any_outside(&self, other: &SegmentSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .any(|(a, b)| a & !b != 0)
    }

    pub fn is_subset(&self, other: &SegmentSet) -> bool {
        !self.has_any_outside(other)
    }

    /// Member indices in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.universe).filter(move |&i| self.contains(i))
    }

    /// Indices absent from the set, ascending.
    pub fn missing(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.universe).filter(move |&i| !self.contains(i))
    }

    /// The `nth` (0-based) missing segment in ascending order.
    pub fn nth_missing(&self, nth: usize) -> Option<usize> {
        self.missing().nth(nth)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for SegmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for SegmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, s) in self.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}
