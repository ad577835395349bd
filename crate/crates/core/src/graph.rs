//! Give-and-take criterion, the per-slot exchange graph and preference lists.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::model::{SlotState, Utility};
use crate::segment_set::SegmentSet;

/// Two sets may be exchanged iff each holds a segment the other lacks.
pub fn gt_satisfied(a: &SegmentSet, b: &SegmentSet) -> bool {
    a.has_any_outside(b) && b.has_any_outside(a)
}

/// Both parties end up with `a ∪ b`.
pub fn exchange(a: &SegmentSet, b: &SegmentSet) -> Result<(SegmentSet, SegmentSet)> {
    if !gt_satisfied(a, b) {
        return Err(Error::GtViolation);
    }
    let u = a.union(b);
    Ok((u.clone(), u))
}

/// Immediate utility gain of `i` from exchanging with `j`.
pub fn incremental_gain(i: usize, j: usize, state: &SlotState, utility: Utility) -> f64 {
    debug_assert_ne!(i, j);
    set_gain(&state.sets[i], &state.sets[j], utility)
}

fn set_gain(own: &SegmentSet, other: &SegmentSet, utility: Utility) -> f64 {
    utility.apply(own.union_len(other)) - utility.apply(own.len())
}

/// Undirected graph of node pairs satisfying give-and-take at one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeGraph {
    pub slot: usize,
    adjacency: Vec<Vec<usize>>,
}

impl ExchangeGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Neighbours of `i` in ascending id order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.iter().all(Vec::is_empty)
    }

    /// Edges as `(i, j)` with `i < j`, lexicographic.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }
}

pub fn build_exchange_graph(state: &SlotState) -> ExchangeGraph {
    let m = state.m();
    let mut adjacency = vec![Vec::new(); m];
    for i in 0..m {
        for j in (i + 1)..m {
            if gt_satisfied(&state.sets[i], &state.sets[j]) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    // Pushes happen with j increasing for fixed i and i increasing for fixed j, so rows are sorted.
    ExchangeGraph {
        slot: state.slot,
        adjacency,
    }
}

/// A node's ranked, truncated preference list.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceList {
    pub owner: usize,
    /// `(neighbour, gain)` by gain descending, then id ascending.
    pub ranked: Vec<(usize, f64)>,
    /// `max(1, floor(pef * degree))`.
    pub limit: usize,
}

impl PreferenceList {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// Rank of `j` (0 = most preferred), if listed.
    pub fn rank_of(&self, j: usize) -> Option<usize> {
        self.ranked.iter().position(|&(n, _)| n == j)
    }

    pub fn contains(&self, j: usize) -> bool {
        self.rank_of(j).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranked.iter().map(|&(j, _)| j)
    }
}

/// Cutoff applied to a node with `degree` neighbours.
pub fn truncation_limit(pef: f64, degree: usize) -> usize {
    ((pef * degree as f64).floor() as usize).max(1)
}

fn by_gain_then_id(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

pub fn preference_list(
    i: usize,
    graph: &ExchangeGraph,
    state: &SlotState,
    pef: f64,
    utility: Utility,
) -> PreferenceList {
    let degree = graph.degree(i);
    let mut ranked: Vec<(usize, f64)> = graph
        .neighbors(i)
        .iter()
        .map(|&j| (j, incremental_gain(i, j, state, utility)))
        .collect();
    ranked.sort_by(by_gain_then_id);
    let limit = truncation_limit(pef, degree);
    ranked.truncate(limit);
    debug_assert!(
        ranked.iter().all(|&(_, g)| g > 0.0),
        "linked node with zero gain"
    );
    PreferenceList {
        owner: i,
        ranked,
        limit,
    }
}

/// Preference lists of every node, using `pef(node)` as the factor.
pub fn preference_lists(
    graph: &ExchangeGraph,
    state: &SlotState,
    utility: Utility,
    pef: impl Fn(usize) -> f64,
) -> Vec<PreferenceList> {
    (0..graph.node_count())
        .map(|i| preference_list(i, graph, state, pef(i), utility))
        .collect()
}

/// Directed graph `i -> j` for every `j` maximising `i`'s gain (ties kept).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstPreferenceDigraph {
    pub edges: Vec<(usize, usize)>,
}

impl FirstPreferenceDigraph {
    pub fn out_degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, _)| a == i).count()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i, j)).is_ok()
    }

    /// Pairs `(i, j)`, `i < j`, with both `i -> j` and `j -> i`.
    pub fn bidirectional(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|&&(i, j)| i < j && self.has_edge(j, i))
            .copied()
            .collect()
    }
}

pub fn first_preference_digraph(
    graph: &ExchangeGraph,
    state: &SlotState,
) -> FirstPreferenceDigraph {
    let mut edges = Vec::new();
    for i in 0..graph.node_count() {
        // Gains rank by |O_i ∪ O_j| under any strictly increasing utility.
        let best = graph
            .neighbors(i)
            .iter()
            .map(|&j| state.sets[i].union_len(&state.sets[j]))
            .max();
        if let Some(best) = best {
            edges.extend(
                graph
                    .neighbors(i)
                    .iter()
                    .filter(|&&j| state.sets[i].union_len(&state.sets[j]) == best)
                    .map(|&j| (i, j)),
            );
        }
    }
    FirstPreferenceDigraph { edges }
}

fn fmt_gain(out: &mut String, g: f64) {
    if g.fract() == 0.0 && g.abs() < 1e15 {
        let _ = write!(out, "{}", g as i64);
    } else {
        let _ = write!(out, "{g}");
    }
}

/// One line per node: `i: j1 j2 ...`.
impl fmt::Display for ExchangeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, ns) in self.adjacency.iter().enumerate() {
            write!(f, "{i}:")?;
            for j in ns {
                write!(f, " {j}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// `i: j1(g1) j2(g2) ...`
impl fmt::Display for PreferenceList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut line = format!("{}:", self.owner);
        for &(j, g) in &self.ranked {
            let _ = write!(line, " {j}(");
            fmt_gain(&mut line, g);
            line.push(')');
        }
        f.write_str(&line)
    }
}

/// Renders preference lists one per line.
pub fn render_preferences(lists: &[PreferenceList]) -> String {
    let mut out = String::new();
    for l in lists {
        let _ = writeln!(out, "{l}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Instance;
    use proptest::prelude::*;

    fn set(n: usize, xs: &[usize]) -> SegmentSet {
        SegmentSet::from_indices(n, xs.iter().copied()).unwrap()
    }

    fn state(n: usize, lists: &[&[usize]]) -> SlotState {
        Instance::from_lists(n, lists).unwrap().initial_state()
    }

    #[test]
    fn gt_examples() {
        assert!(gt_satisfied(&set(3, &[0, 1]), &set(3, &[1, 2])));
        assert!(!gt_satisfied(&set(3, &[0, 1]), &set(3, &[0, 1])));
        assert!(!gt_satisfied(&set(3, &[0]), &set(3, &[0, 1, 2])));
    }

    #[test]
    fn exchange_examples() {
        let (a, b) = exchange(&set(3, &[0, 1]), &set(3, &[1, 2])).unwrap();
        assert_eq!(a.to_vec(), vec![0, 1, 2]);
        assert_eq!(a, b);
        let (a, b) = exchange(&set(2, &[0]), &set(2, &[1])).unwrap();
        assert_eq!((a.to_vec(), b.to_vec()), (vec![0, 1], vec![0, 1]));
        assert!(matches!(
            exchange(&set(2, &[0]), &set(2, &[0])),
            Err(Error::GtViolation)
        ));
    }

    #[test]
    fn gain_examples() {
        let st = state(3, &[&[0, 1], &[1, 2], &[0], &[1, 2]]);
        assert_eq!(incremental_gain(0, 1, &st, Utility::Cardinality), 1.0);
        assert_eq!(incremental_gain(2, 3, &st, Utility::Cardinality), 2.0);
        assert_eq!(incremental_gain(0, 2, &st, Utility::Cardinality), 0.0);
    }

    #[test]
    fn graph_examples() {
        let g = build_exchange_graph(&state(2, &[&[0], &[1], &[0]]));
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        assert!(build_exchange_graph(&state(3, &[&[0, 1], &[0, 1], &[0, 1]])).is_empty());
        assert_eq!(
            build_exchange_graph(&state(2, &[&[0], &[1]])).edges(),
            vec![(0, 1)]
        );
    }

    #[test]
    fn truncation_lengths() {
        // Node 0 = {0} is linked to five singletons.
        let st = state(6, &[&[0], &[1], &[2], &[3], &[4], &[5]]);
        let g = build_exchange_graph(&st);
        assert_eq!(g.degree(0), 5);
        let len = |pef| preference_list(0, &g, &st, pef, Utility::Cardinality).len();
        assert_eq!(len(0.5), 2);
        assert_eq!(len(0.1), 1);
        assert_eq!(len(1.0), 5);
        assert_eq!(len(0.0), 1);
    }

    #[test]
    fn ties_break_by_id_and_cut_strictly() {
        let st = state(4, &[&[0], &[1], &[2, 3], &[1], &[2]]);
        let g = build_exchange_graph(&st);
        let l = preference_list(0, &g, &st, 1.0, Utility::Cardinality);
        assert_eq!(l.ids().collect::<Vec<_>>(), vec![2, 1, 3, 4]);
        let cut = preference_list(0, &g, &st, 0.5, Utility::Cardinality);
        assert_eq!(cut.ids().collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(cut.to_string(), "0: 2(2) 1(1)");
    }

    #[test]
    fn digraph_examples() {
        let st = state(2, &[&[0], &[1]]);
        let d = first_preference_digraph(&build_exchange_graph(&st), &st);
        assert_eq!(d.edges, vec![(0, 1), (1, 0)]);
        let st = state(2, &[&[0], &[1], &[0]]);
        let d = first_preference_digraph(&build_exchange_graph(&st), &st);
        assert!(d.has_edge(1, 0) && d.has_edge(1, 2));
        let st = state(2, &[&[0, 1], &[0, 1]]);
        assert!(first_preference_digraph(&build_exchange_graph(&st), &st)
            .edges
            .is_empty());
    }

    #[test]
    fn render_format() {
        let st = state(2, &[&[0], &[1], &[0]]);
        let g = build_exchange_graph(&st);
        assert_eq!(g.to_string(), "0: 1\n1: 0 2\n2: 1\n");
        let lists = preference_lists(&g, &st, Utility::Cardinality, |_| 1.0);
        assert_eq!(
            render_preferences(&lists),
            "0: 1(1)\n1: 0(1) 2(1)\n2: 1(1)\n"
        );
    }

    #[test]
    fn gt_symmetric_exhaustive_small_universes() {
        for n in 1..=4usize {
            let all: Vec<SegmentSet> = (0..1u32 << n)
                .map(|mask| {
                    SegmentSet::from_indices(n, (0..n).filter(|b| mask >> b & 1 == 1)).unwrap()
                })
                .collect();
            for a in &all {
                for b in &all {
                    assert_eq!(gt_satisfied(a, b), gt_satisfied(b, a));
                    let expected =
                        a.iter().any(|x| !b.contains(x)) && b.iter().any(|x| !a.contains(x));
                    assert_eq!(gt_satisfied(a, b), expected);
                }
            }
        }
    }

    prop_compose! {
        fn arb_state()(n in 1usize..10, m in 2usize..9)
            (masks in proptest::collection::vec(0u32..(1 << n), m), n in Just(n)) -> SlotState {
            let sets = masks.iter()
                .map(|&mask| SegmentSet::from_indices(n, (0..n).filter(|b| mask >> b & 1 == 1)).unwrap())
                .collect();
            let m = masks.len();
            SlotState { slot: 1, sets, downloads: vec![0; m] }
        }
    }

    proptest! {
        #[test]
        fn graph_matches_pairwise_gt(st in arb_state()) {
            let g = build_exchange_graph(&st);
            for i in 0..st.m() {
                prop_assert!(!g.has_edge(i, i));
                for j in 0..st.m() {
                    prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
                    if i != j {
                        prop_assert_eq!(g.has_edge(i, j), gt_satisfied(&st.sets[i], &st.sets[j]));
                    }
                }
            }
        }

        #[test]
        fn preference_list_invariants(st in arb_state(), pef in 0.0f64..=1.0) {
            let g = build_exchange_graph(&st);
            for i in 0..st.m() {
                let l = preference_list(i, &g, &st, pef, Utility::Cardinality);
                prop_assert_eq!(l.len(), l.limit.min(g.degree(i)));
                if g.degree(i) > 0 {
                    prop_assert!(!l.is_empty());
                }
                for w in l.ranked.windows(2) {
                    prop_assert!(w[0].1 >= w[1].1);
                }
                for &(j, gain) in &l.ranked {
                    prop_assert!(gain > 0.0);
                    prop_assert!(g.has_edge(i, j));
                }
            }
            let d = first_preference_digraph(&g, &st);
            for i in 0..st.m() {
                if g.degree(i) > 0 {
                    prop_assert!(d.out_degree(i) >= 1);
                }
            }
        }
    }
}
