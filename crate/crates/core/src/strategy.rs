//! Slot-by-slot simulation of the four pairing strategies.
//!
//! LSPA, PEPA and LFS share one engine: per-slot stable pairing on
//! PEF-truncated lists, simultaneous exchanges, then SAP-driven downloads by
//! unpaired nodes. PEPA pins SAP to zero and LFS additionally pins PEF to one.
//! The randomized algorithm pairs nodes that pick each other uniformly at
//! random and never downloads.

use std::borrow::Cow;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{build_exchange_graph, gt_satisfied, preference_lists, ExchangeGraph};
use crate::matching::find_stable_matching;
use crate::model::{Instance, ScheduleSet, SlotState};
use crate::segment_set::SegmentSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Limited stable pairing: truncated lists plus aggressive downloads.
    Lspa,
    /// Preferential exploration pairing: truncated lists, no downloads.
    Pepa,
    /// Link for sure: full lists, no downloads.
    Lfs,
    /// Uniform random mutual selection.
    Randomized,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Lspa,
        Algorithm::Pepa,
        Algorithm::Lfs,
        Algorithm::Randomized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Lspa => "lspa",
            Algorithm::Pepa => "pepa",
            Algorithm::Lfs => "lfs",
            Algorithm::Randomized => "randomized",
        }
    }

    pub fn is_deterministic_pairing(self) -> bool {
        !matches!(self, Algorithm::Randomized)
    }

    /// The instance as this algorithm sees it, with SAP/PEF pinned where the
    /// algorithm fixes them.
    pub fn configure(self, inst: &Instance) -> Cow<'_, Instance> {
        match self {
            Algorithm::Lspa | Algorithm::Randomized => Cow::Borrowed(inst),
            Algorithm::Pepa => Cow::Owned(inst.clone().with_sap(ScheduleSet::constant(0.0))),
            Algorithm::Lfs => Cow::Owned(
                inst.clone()
                    .with_sap(ScheduleSet::constant(0.0))
                    .with_pef(ScheduleSet::constant(1.0)),
            ),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lspa" => Ok(Algorithm::Lspa),
            "pepa" => Ok(Algorithm::Pepa),
            "lfs" | "lsa" => Ok(Algorithm::Lfs),
            "randomized" | "random" => Ok(Algorithm::Randomized),
            other => Err(format!(
                "unknown algorithm `{other}` (expected lspa, pepa, lfs or randomized)"
            )),
        }
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotEvents {
    pub slot: usize,
    /// Exchanging pairs `(i, j)`, `i < j`.
    pub activations: Vec<(usize, usize)>,
    /// `(node, segment)` fetched over the expensive link.
    pub downloads: Vec<(usize, usize)>,
}

impl SlotEvents {
    pub fn is_empty(&self) -> bool {
        self.activations.is_empty() && self.downloads.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Slots in which something happened, in order.
    pub events: Vec<SlotEvents>,
    pub final_state: SlotState,
    /// First slot whose starting state admits no further action.
    pub r_end: usize,
    /// Set when the slot cap was hit before termination.
    pub truncated: bool,
}

impl Trace {
    pub fn slots_run(&self) -> usize {
        self.r_end - 1
    }

    /// `slot r: exchange i j` / `slot r: download i s`, one event per line.
    pub fn event_log(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            for (i, j) in &ev.activations {
                let _ = writeln!(out, "slot {}: exchange {i} {j}", ev.slot);
            }
            for (i, s) in &ev.downloads {
                let _ = writeln!(out, "slot {}: download {i} {s}", ev.slot);
            }
        }
        out
    }
}

fn apply_exchanges(state: &mut SlotState, pairs: &[(usize, usize)]) {
    for &(i, j) in pairs {
        let u = state.sets[i].union(&state.sets[j]);
        state.sets[i] = u.clone();
        state.sets[j] = u;
    }
}

fn step_with_graph<R: Rng + ?Sized>(
    state: &mut SlotState,
    inst: &Instance,
    graph: &ExchangeGraph,
    rng: &mut R,
) -> SlotEvents {
    let slot = state.slot;
    let lists = preference_lists(graph, state, inst.utility, |i| inst.pef.at(i, slot));
    let matching = find_stable_matching(graph, &lists).expect("lists are built from the graph");
    let mut downloads = Vec::new();
    for &i in &matching.unmatched {
        let set = &state.sets[i];
        if set.is_full() {
            continue;
        }
        let p = inst.sap.at(i, slot);
        if p > 0.0 && rng.random_bool(p) {
            let pick = rng.random_range(0..set.missing_count());
            let seg = set.nth_missing(pick).expect("pick below missing count");
            downloads.push((i, seg));
        }
    }
    apply_exchanges(state, &matching.pairs);
    for &(i, seg) in &downloads {
        state.sets[i].insert(seg);
        state.downloads[i] += 1;
    }
    state.slot += 1;
    SlotEvents {
        slot,
        activations: matching.pairs,
        downloads,
    }
}

/// One LSPA slot with the instance's own SAP/PEF schedules.
pub fn step_deterministic<R: Rng + ?Sized>(
    state: &mut SlotState,
    inst: &Instance,
    rng: &mut R,
) -> SlotEvents {
    let graph = build_exchange_graph(state);
    step_with_graph(state, inst, &graph, rng)
}

/// Each node picks a uniform target among the others, in node order.
pub fn draw_targets<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<usize> {
    (0..m)
        .map(|i| {
            let t = rng.random_range(0..m - 1);
            if t >= i {
                t + 1
            } else {
                t
            }
        })
        .collect()
}

/// Pairs that selected each other and satisfy give-and-take.
pub fn mutual_activations(targets: &[usize], sets: &[SegmentSet]) -> Vec<(usize, usize)> {
    targets
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < j && targets[j] == i && gt_satisfied(&sets[i], &sets[j]))
        .map(|(i, &j)| (i, j))
        .collect()
}

/// One slot of the randomized algorithm.
pub fn step_randomized<R: Rng + ?Sized>(
    state: &mut SlotState,
    _inst: &Instance,
    rng: &mut R,
) -> SlotEvents {
    let slot = state.slot;
    let targets = draw_targets(state.m(), rng);
    let activations = mutual_activations(&targets, &state.sets);
    apply_exchanges(state, &activations);
    state.slot += 1;
    SlotEvents {
        slot,
        activations,
        downloads: Vec::new(),
    }
}

/// Default slot cap: `50 * n * m`.
pub fn default_max_slots(inst: &Instance) -> usize {
    50 * inst.n * inst.m()
}

fn can_still_download(state: &SlotState, inst: &Instance) -> bool {
    state
        .sets
        .iter()
        .enumerate()
        .any(|(i, s)| !s.is_full() && !inst.sap.node(i).zero_from(state.slot))
}

/// Number of GT-satisfying pairs, maintained across exchanges in O(m) each.
struct LinkCounter {
    links: usize,
}

impl LinkCounter {
    fn new(sets: &[SegmentSet]) -> Self {
        let m = sets.len();
        let links = (0..m)
            .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
            .filter(|&(i, j)| gt_satisfied(&sets[i], &sets[j]))
            .count();
        LinkCounter { links }
    }

    fn touching(sets: &[SegmentSet], i: usize, j: usize) -> usize {
        let mut c = usize::from(gt_satisfied(&sets[i], &sets[j]));
        for (k, s) in sets.iter().enumerate() {
            if k != i && k != j {
                c +=
                    usize::from(gt_satisfied(&sets[i], s)) + usize::from(gt_satisfied(&sets[j], s));
            }
        }
        c
    }

    fn exchange(&mut self, sets: &mut [SegmentSet], i: usize, j: usize) {
        self.links -= Self::touching(sets, i, j);
        let u = sets[i].union(&sets[j]);
        sets[i] = u.clone();
        sets[j] = u;
        self.links += Self::touching(sets, i, j);
    }
}

/// Runs `algorithm` from the initial sets until nothing more can happen or
/// `max_slots` slots have run. `None` uses [`default_max_slots`].
pub fn run_simulation(
    inst: &Instance,
    algorithm: Algorithm,
    seed: u64,
    max_slots: Option<usize>,
) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_simulation_with_rng(inst, algorithm, &mut rng, seed, max_slots)
}

pub(crate) fn run_simulation_with_rng<R: Rng + ?Sized>(
    inst: &Instance,
    algorithm: Algorithm,
    rng: &mut R,
    seed: u64,
    max_slots: Option<usize>,
) -> Trace {
    let cap = max_slots.unwrap_or_else(|| default_max_slots(inst));
    let inst = algorithm.configure(inst);
    let mut state = inst.initial_state();
    let mut events = Vec::new();
    let mut truncated = false;

    match algorithm {
        Algorithm::Randomized => {
            let mut links = LinkCounter::new(&state.sets);
            while links.links > 0 {
                if state.slot > cap {
                    truncated = true;
                    break;
                }
                let slot = state.slot;
                let targets = draw_targets(state.m(), rng);
                let activations = mutual_activations(&targets, &state.sets);
                for &(i, j) in &activations {
                    links.exchange(&mut state.sets, i, j);
                }
                state.slot += 1;
                if !activations.is_empty() {
                    events.push(SlotEvents {
                        slot,
                        activations,
                        downloads: Vec::new(),
                    });
                }
            }
        }
        _ => loop {
            let graph = build_exchange_graph(&state);
            if graph.is_empty() && !can_still_download(&state, &inst) {
                break;
            }
            if state.slot > cap {
                truncated = true;
                break;
            }
            let ev = step_with_graph(&mut state, &inst, &graph, rng);
            if !ev.is_empty() {
                events.push(ev);
            }
        },
    }

    Trace {
        algorithm,
        seed,
        events,
        r_end: state.slot,
        final_state: state,
        truncated,
    }
}
