//! Exact optimum aggregate cardinality by exhaustive search over
//! give-and-take activation sequences.
//!
//! Every concurrent schedule of disjoint activations linearizes into a
//! sequence with the same terminal state, so searching sequences covers all
//! slot-based schedules. States are memoized on the sorted list of sets:
//! reachable aggregates depend only on the multiset of sets held.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::gt_satisfied;
use crate::model::{Instance, SlotState};
use crate::segment_set::SegmentSet;

/// `n·m − (m mod 2)`: at most an even number of nodes can hold the universe.
pub fn aggregate_upper_bound(m: usize, n: usize) -> u64 {
    (n * m - m % 2) as u64
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub memoize: bool,
    /// Cap on expanded states before giving up.
    pub max_states: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            memoize: true,
            max_states: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub alpha_star: u64,
    /// Activation sequence reaching `alpha_star`, in node ids.
    pub witness: Vec<(usize, usize)>,
    pub states_explored: u64,
}

struct Search {
    options: OracleOptions,
    memo: HashMap<Vec<SegmentSet>, u64>,
    explored: u64,
}

fn linked_pairs(sets: &[SegmentSet]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let m = sets.len();
    (0..m)
        .flat_map(move |i| ((i + 1)..m).map(move |j| (i, j)))
        .filter(move |&(i, j)| gt_satisfied(&sets[i], &sets[j]))
}

fn aggregate(sets: &[SegmentSet]) -> u64 {
    sets.iter().map(|s| s.len() as u64).sum()
}

impl Search {
    fn key(sets: &[SegmentSet]) -> Vec<SegmentSet> {
        let mut k = sets.to_vec();
        k.sort_unstable();
        k
    }

    fn best(&mut self, sets: &mut [SegmentSet]) -> Result<u64> {
        let key = if self.options.memoize {
            let key = Self::key(sets);
            if let Some(&v) = self.memo.get(&key) {
                return Ok(v);
            }
            Some(key)
        } else {
            None
        };
        self.explored += 1;
        if self.explored > self.options.max_states {
            return Err(Error::BudgetExceeded {
                explored: self.explored,
            });
        }
        let pairs: Vec<(usize, usize)> = linked_pairs(sets).collect();
        let mut best = if pairs.is_empty() { aggregate(sets) } else { 0 };
        for (i, j) in pairs {
            let (old_i, old_j) = (sets[i].clone(), sets[j].clone());
            let u = old_i.union(&old_j);
            sets[i] = u.clone();
            sets[j] = u;
            let v = self.best(sets);
            sets[i] = old_i;
            sets[j] = old_j;
            best = best.max(v?);
        }
        if let Some(key) = key {
            self.memo.insert(key, best);
        }
        Ok(best)
    }
}

/// Searches every give-and-take activation order from the initial sets.
/// SAP and PEF are ignored.
pub fn optimal_aggregate(inst: &Instance, options: &OracleOptions) -> Result<OracleResult> {
    let mut search = Search {
        options: *options,
        memo: HashMap::new(),
        explored: 0,
    };
    let mut sets = inst.initial_sets.clone();
    let alpha_star = search.best(&mut sets)?;

    let mut witness = Vec::new();
    loop {
        let pairs: Vec<(usize, usize)> = linked_pairs(&sets).collect();
        let mut advanced = false;
        for (i, j) in pairs {
            let mut child = sets.clone();
            let u = child[i].union(&child[j]);
            child[i] = u.clone();
            child[j] = u;
            if search.best(&mut child)? == alpha_star {
                sets = child;
                witness.push((i, j));
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    debug_assert_eq!(aggregate(&sets), alpha_star);
    Ok(OracleResult {
        alpha_star,
        witness,
        states_explored: search.explored,
    })
}

/// Applies an activation sequence from the initial sets, checking each step.
pub fn replay(inst: &Instance, sequence: &[(usize, usize)]) -> Result<SlotState> {
    let mut state = inst.initial_state();
    for &(i, j) in sequence {
        if i >= state.m() || j >= state.m() || !gt_satisfied(&state.sets[i], &state.sets[j]) {
            return Err(Error::GtViolationAt(i, j));
        }
        let u = state.sets[i].union(&state.sets[j]);
        state.sets[i] = u.clone();
        state.sets[j] = u;
        state.slot += 1;
    }
    Ok(state)
}
