//! Partial stable matching over truncated preference lists.
//!
//! Proposals run in synchronized rounds over ascending node ids. A free node
//! proposes to the head of its list; the receiver holds the best proposal it
//! has seen and rejects the rest, and every rejection strikes the pair from
//! both lists. At the fixpoint, nodes holding each other's proposals pair up.
//!
//! When lists are ranked by give-and-take gains, preferences derive from the
//! symmetric weight `|O_i ∪ O_j|` with id tie-breaks, which admits no
//! preference cycle. Held proposals then only form mutual pairs and the
//! result has no blocking pair.

use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{ExchangeGraph, PreferenceList};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    /// Disjoint pairs `(i, j)` with `i < j`, sorted.
    pub pairs: Vec<(usize, usize)>,
    /// Nodes in no pair, ascending.
    pub unmatched: Vec<usize>,
}

impl Matching {
    pub fn from_pairs(node_count: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pairs: Vec<(usize, usize)> = pairs
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        pairs.sort_unstable();
        let mut paired = vec![false; node_count];
        for &(a, b) in &pairs {
            paired[a] = true;
            paired[b] = true;
        }
        let unmatched = (0..node_count).filter(|&i| !paired[i]).collect();
        Matching { pairs, unmatched }
    }

    pub fn node_count(&self) -> usize {
        self.pairs.len() * 2 + self.unmatched.len()
    }

    pub fn partner(&self, i: usize) -> Option<usize> {
        self.pairs.iter().find_map(|&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }

    fn partners(&self, node_count: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; node_count];
        for &(a, b) in &self.pairs {
            out[a] = Some(b);
            out[b] = Some(a);
        }
        out
    }

    /// Checks disjointness, the partition of nodes, and that every pair is
    /// mutually listed.
    pub fn is_valid_for(&self, lists: &[PreferenceList]) -> bool {
        let m = lists.len();
        let mut seen = vec![false; m];
        for &(a, b) in &self.pairs {
            if a >= m || b >= m || a == b || seen[a] || seen[b] {
                return false;
            }
            seen[a] = true;
            seen[b] = true;
            if !lists[a].contains(b) || !lists[b].contains(a) {
                return false;
            }
        }
        for &u in &self.unmatched {
            if u >= m || seen[u] {
                return false;
            }
            seen[u] = true;
        }
        seen.iter().all(|&s| s)
    }
}

/// `(i,j); (k,l); unmatched: a b`
impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b) in &self.pairs {
            write!(f, "({a},{b}); ")?;
        }
        write!(f, "unmatched:")?;
        if self.unmatched.is_empty() {
            write!(f, " none")
        } else {
            for u in &self.unmatched {
                write!(f, " {u}")?;
            }
            Ok(())
        }
    }
}

const UNRANKED: u32 = u32::MAX;

struct Proposals {
    /// Remaining mutually-listed candidates, best first.
    lists: Vec<Vec<usize>>,
    /// `rank[i][j]`: position of `j` in `i`'s original list.
    rank: Vec<Vec<u32>>,
    /// Proposer whose offer node `j` currently holds.
    held: Vec<Option<usize>>,
    /// Node currently holding `i`'s offer.
    held_by: Vec<Option<usize>>,
}

impl Proposals {
    fn strike(&mut self, a: usize, b: usize) {
        self.lists[a].retain(|&x| x != b);
        self.lists[b].retain(|&x| x != a);
        for (x, y) in [(a, b), (b, a)] {
            if self.held[x] == Some(y) {
                self.held[x] = None;
                self.held_by[y] = None;
            }
        }
    }

    fn round(&mut self) -> bool {
        let mut changed = false;
        for i in 0..self.lists.len() {
            if self.held_by[i].is_some() {
                continue;
            }
            let Some(&j) = self.lists[i].first() else {
                continue;
            };
            changed = true;
            match self.held[j] {
                None => {
                    self.held[j] = Some(i);
                    self.held_by[i] = Some(j);
                }
                Some(h) if self.rank[j][i] < self.rank[j][h] => {
                    self.held_by[h] = None;
                    self.held[j] = Some(i);
                    self.held_by[i] = Some(j);
                    self.strike(j, h);
                }
                Some(_) => self.strike(i, j),
            }
        }
        changed
    }
}

/// Computes a partial stable matching from per-node lists (indexed by owner).
///
/// Entries not reciprocated by the other side are dropped before proposing.
/// Fails if a list names a node that is not linked in `graph`.
pub fn find_stable_matching(graph: &ExchangeGraph, lists: &[PreferenceList]) -> Result<Matching> {
    let m = lists.len();
    if m != graph.node_count() {
        return Err(Error::InvalidParameter(format!(
            "{m} preference lists for a graph of {} nodes",
            graph.node_count()
        )));
    }
    let mut rank = vec![vec![UNRANKED; m]; m];
    for (i, list) in lists.iter().enumerate() {
        debug_assert_eq!(list.owner, i);
        for (pos, j) in list.ids().enumerate() {
            if j >= m || !graph.has_edge(i, j) {
                return Err(Error::InconsistentLists(i, j));
            }
            rank[i][j] = pos as u32;
        }
    }
    let pruned = lists
        .iter()
        .enumerate()
        .map(|(i, list)| list.ids().filter(|&j| rank[j][i] != UNRANKED).collect())
        .collect();
    let mut state = Proposals {
        lists: pruned,
        rank,
        held: vec![None; m],
        held_by: vec![None; m],
    };
    while state.round() {}

    let pairs = (0..m).filter_map(|i| {
        let j = state.held_by[i]?;
        (i < j && state.held_by[j] == Some(i)).then_some((i, j))
    });
    Ok(Matching::from_pairs(m, pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockingPair(pub usize, pub usize);

/// Scans every mutually-listed pair `(i, j)`, `i < j`, in order; reports the
/// first one where both sides prefer each other to their assignment.
pub fn verify_stability(lists: &[PreferenceList], matching: &Matching) -> Result<(), BlockingPair> {
    let partners = matching.partners(lists.len());
    let prefers = |i: usize, j: usize| -> bool {
        let Some(rank_j) = lists[i].rank_of(j) else {
            return false;
        };
        match partners[i] {
            None => true,
            Some(p) if p == j => false,
            Some(p) => lists[i].rank_of(p).is_none_or(|rank_p| rank_j < rank_p),
        }
    };
    for i in 0..lists.len() {
        let mut candidates: Vec<usize> = lists[i].ids().filter(|&j| j > i).collect();
        candidates.sort_unstable();
        for j in candidates {
            if lists[j].contains(i) && prefers(i, j) && prefers(j, i) {
                return Err(BlockingPair(i, j));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_exchange_graph, gt_satisfied, preference_lists};
    use crate::model::{Instance, SlotState, Utility};
    use crate::segment_set::SegmentSet;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lists_for(st: &SlotState, pef: f64) -> (ExchangeGraph, Vec<PreferenceList>) {
        let g = build_exchange_graph(st);
        let l = preference_lists(&g, st, Utility::Cardinality, |_| pef);
        (g, l)
    }

    fn state(n: usize, lists: &[&[usize]]) -> SlotState {
        Instance::from_lists(n, lists).unwrap().initial_state()
    }

    fn random_state(rng: &mut impl Rng, m: usize, n: usize) -> SlotState {
        let sets = (0..m)
            .map(|_| {
                let mask: u32 = rng.random_range(0..1 << n);
                SegmentSet::from_indices(n, (0..n).filter(|b| mask >> b & 1 == 1)).unwrap()
            })
            .collect();
        SlotState {
            slot: 1,
            sets,
            downloads: vec![0; m],
        }
    }

    /// Every matching on the mutually-listed edges, by recursive enumeration.
    fn all_matchings(lists: &[PreferenceList]) -> Vec<Matching> {
        fn rec(
            i: usize,
            used: &mut Vec<bool>,
            pairs: &mut Vec<(usize, usize)>,
            lists: &[PreferenceList],
            out: &mut Vec<Matching>,
        ) {
            let m = lists.len();
            if i == m {
                out.push(Matching::from_pairs(m, pairs.iter().copied()));
                return;
            }
            if used[i] {
                rec(i + 1, used, pairs, lists, out);
                return;
            }
            rec(i + 1, used, pairs, lists, out);
            for j in (i + 1)..m {
                if !used[j] && lists[i].contains(j) && lists[j].contains(i) {
                    used[i] = true;
                    used[j] = true;
                    pairs.push((i, j));
                    rec(i + 1, used, pairs, lists, out);
                    pairs.pop();
                    used[i] = false;
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(
            0,
            &mut vec![false; lists.len()],
            &mut Vec::new(),
            lists,
            &mut out,
        );
        out
    }

    /// Independent blocking check straight from the definition, comparing gains.
    fn brute_force_blocked(lists: &[PreferenceList], mt: &Matching) -> bool {
        let m = lists.len();
        let score = |i: usize, j: Option<usize>| -> Option<(f64, std::cmp::Reverse<usize>)> {
            let j = j?;
            lists[i]
                .ranked
                .iter()
                .find(|&&(x, _)| x == j)
                .map(|&(x, g)| (g, std::cmp::Reverse(x)))
        };
        for i in 0..m {
            for j in (i + 1)..m {
                if mt.partner(i) == Some(j) {
                    continue;
                }
                let (Some(si), Some(sj)) = (score(i, Some(j)), score(j, Some(i))) else {
                    continue;
                };
                let pi = score(i, mt.partner(i));
                let pj = score(j, mt.partner(j));
                let better =
                    |s: (f64, std::cmp::Reverse<usize>),
                     p: Option<(f64, std::cmp::Reverse<usize>)>| {
                        p.is_none_or(|p| s.0 > p.0 || (s.0 == p.0 && s.1 > p.1))
                    };
                if better(si, pi) && better(sj, pj) {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn four_node_example_matches_brute_force() {
        let st = state(4, &[&[0], &[1], &[0, 1, 2], &[3]]);
        let (g, lists) = lists_for(&st, 1.0);
        let mt = find_stable_matching(&g, &lists).unwrap();
        assert_eq!(mt.pairs, vec![(0, 1), (2, 3)]);
        assert!(mt.unmatched.is_empty());
        // Oracle: among the perfect matchings on linked pairs, only this one is unblocked.
        let perfect: Vec<Matching> = all_matchings(&lists)
            .into_iter()
            .filter(|x| x.unmatched.is_empty())
            .collect();
        let stable: Vec<&Matching> = perfect
            .iter()
            .filter(|x| !brute_force_blocked(&lists, x))
            .collect();
        assert_eq!(stable, vec![&mt]);
    }

    #[test]
    fn two_nodes_pair() {
        let st = state(2, &[&[0], &[1]]);
        let (g, lists) = lists_for(&st, 1.0);
        let mt = find_stable_matching(&g, &lists).unwrap();
        assert_eq!(mt.pairs, vec![(0, 1)]);
        assert_eq!(mt.to_string(), "(0,1); unmatched: none");
    }

    #[test]
    fn empty_lists_leave_everyone_unmatched() {
        let st = state(2, &[&[0, 1], &[0, 1], &[0, 1]]);
        let (g, lists) = lists_for(&st, 1.0);
        let mt = find_stable_matching(&g, &lists).unwrap();
        assert!(mt.pairs.is_empty());
        assert_eq!(mt.unmatched, vec![0, 1, 2]);
        assert_eq!(mt.to_string(), "unmatched: 0 1 2");
    }

    #[test]
    fn rejects_lists_naming_unlinked_nodes() {
        let st = state(2, &[&[0], &[1], &[0]]);
        let (g, mut lists) = lists_for(&st, 1.0);
        lists[0].ranked.push((2, 1.0));
        assert!(matches!(
            find_stable_matching(&g, &lists),
            Err(Error::InconsistentLists(0, 2))
        ));
    }

    #[test]
    fn one_directional_entries_never_pair() {
        // Node 0 ranks 3 first but 3 keeps only node 1.
        let st = state(4, &[&[0], &[1, 2], &[1], &[3]]);
        let (g, lists) = lists_for(&st, 0.0);
        let mt = find_stable_matching(&g, &lists).unwrap();
        assert!(mt.is_valid_for(&lists));
        assert_eq!(verify_stability(&lists, &mt), Ok(()));
    }

    #[test]
    fn constructed_blocking_pair_is_reported() {
        // 0 and 1 are paired, yet 0 gains 3 from the free node 2 and 1 gains 3 from the free node 3.
        let st = state(4, &[&[0], &[1], &[1, 2, 3], &[0, 2, 3]]);
        let (_, lists) = lists_for(&st, 1.0);
        let bad = Matching::from_pairs(4, [(0, 1)]);
        assert!(bad.is_valid_for(&lists));
        assert_eq!(verify_stability(&lists, &bad), Err(BlockingPair(0, 2)));
    }

    #[test]
    fn empty_matching_blocked_by_mutual_top_pair() {
        let st = state(2, &[&[0], &[1], &[0]]);
        let (_, lists) = lists_for(&st, 1.0);
        assert_eq!(
            verify_stability(&lists, &Matching::from_pairs(3, [])),
            Err(BlockingPair(0, 1))
        );
    }

    #[test]
    fn self_consistency_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let m = rng.random_range(2..=8);
            let n = rng.random_range(1..=8);
            let pef = [0.0, 0.2, 0.5, 1.0][rng.random_range(0..4)];
            let st = random_state(&mut rng, m, n);
            let (g, lists) = lists_for(&st, pef);
            let mt = find_stable_matching(&g, &lists).unwrap();
            assert!(mt.is_valid_for(&lists));
            assert_eq!(
                verify_stability(&lists, &mt),
                Ok(()),
                "{mt} for {:?}",
                st.sets
            );
        }
    }

    #[test]
    fn agrees_with_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let m = rng.random_range(2..=6);
            let n = rng.random_range(1..=6);
            let pef = [0.3, 0.6, 1.0][rng.random_range(0..3)];
            let st = random_state(&mut rng, m, n);
            let (g, lists) = lists_for(&st, pef);
            let mt = find_stable_matching(&g, &lists).unwrap();
            assert!(!brute_force_blocked(&lists, &mt));
            let stable: Vec<Matching> = all_matchings(&lists)
                .into_iter()
                .filter(|x| !brute_force_blocked(&lists, x))
                .collect();
            assert!(stable.contains(&mt));
            for s in &stable {
                assert_eq!(verify_stability(&lists, s), Ok(()));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn full_lists_give_maximal_nonempty_matching(seed in any::<u64>(), m in 2usize..12, n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let st = random_state(&mut rng, m, n);
            let (g, lists) = lists_for(&st, 1.0);
            let mt = find_stable_matching(&g, &lists).unwrap();
            if !g.is_empty() {
                prop_assert!(!mt.pairs.is_empty());
            }
            for (x, &a) in mt.unmatched.iter().enumerate() {
                for &b in &mt.unmatched[x + 1..] {
                    prop_assert!(!gt_satisfied(&st.sets[a], &st.sets[b]));
                }
            }
            prop_assert_eq!(find_stable_matching(&g, &lists).unwrap(), mt);
        }
    }
}
