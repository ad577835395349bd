//! Problem instances, per-node schedules and the mutable per-slot state.

use std::fmt;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment_set::SegmentSet;

/// Maximum whole-instance redraws before [`make_instance`] gives up.
pub const DEFAULT_GENERATION_ATTEMPTS: usize = 10_000;

/// A value per decision slot. Slot `r` (1-based) reads entry `r - 1`; the
/// last entry repeats forever.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule(Vec<f64>);

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule(vec![value])
    }

    /// Panics on an empty list.
    pub fn per_slot(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "schedule needs at least one value");
        Schedule(values)
    }

    pub fn at(&self, slot: usize) -> f64 {
        let idx = slot.saturating_sub(1).min(self.0.len() - 1);
        self.0[idx]
    }

    /// True if the schedule is zero at `slot` and every later slot.
    pub fn zero_from(&self, slot: usize) -> bool {
        let start = slot.saturating_sub(1).min(self.0.len() - 1);
        self.0[start..].iter().all(|&v| v == 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Schedules for every node: one shared by all, or one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ScheduleRepr", into = "ScheduleRepr")]
pub enum ScheduleSet {
    Shared(Schedule),
    PerNode(Vec<Schedule>),
}

/// On-disk shape: a bare number or flat list is shared, a list of lists is per node.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleRepr {
    Scalar(f64),
    Shared(Vec<f64>),
    PerNode(Vec<Vec<f64>>),
}

impl From<ScheduleRepr> for ScheduleSet {
    fn from(repr: ScheduleRepr) -> Self {
        match repr {
            ScheduleRepr::Scalar(v) => ScheduleSet::constant(v),
            // An empty list has no value to repeat; treat it as zero.
            ScheduleRepr::Shared(v) if v.is_empty() => ScheduleSet::constant(0.0),
            ScheduleRepr::Shared(v) => ScheduleSet::Shared(Schedule(v)),
            ScheduleRepr::PerNode(nodes) => ScheduleSet::PerNode(
                nodes
                    .into_iter()
                    .map(|v| {
                        if v.is_empty() {
                            Schedule::constant(0.0)
                        } else {
                            Schedule(v)
                        }
                    })
                    .collect(),
            ),
        }
    }
}

impl From<ScheduleSet> for ScheduleRepr {
    fn from(set: ScheduleSet) -> Self {
        match set {
            ScheduleSet::Shared(s) if s.0.len() == 1 => ScheduleRepr::Scalar(s.0[0]),
            ScheduleSet::Shared(s) => ScheduleRepr::Shared(s.0),
            ScheduleSet::PerNode(nodes) => {
                ScheduleRepr::PerNode(nodes.into_iter().map(|s| s.0).collect())
            }
        }
    }
}

impl ScheduleSet {
    pub fn constant(value: f64) -> Self {
        ScheduleSet::Shared(Schedule::constant(value))
    }

    /// Panics if a per-node set has no entry for `node`.
    pub fn node(&self, node: usize) -> &Schedule {
        match self {
            ScheduleSet::Shared(s) => s,
            ScheduleSet::PerNode(v) => &v[node],
        }
    }

    pub fn at(&self, node: usize, slot: usize) -> f64 {
        self.node(node).at(slot)
    }

    fn nodes(&self) -> Box<dyn Iterator<Item = (Option<usize>, &Schedule)> + '_> {
        match self {
            ScheduleSet::Shared(s) => Box::new(std::iter::once((None, s))),
            ScheduleSet::PerNode(v) => Box::new(v.iter().enumerate().map(|(i, s)| (Some(i), s))),
        }
    }

    /// True when every value of every node is zero.
    pub fn all_zero(&self) -> bool {
        self.nodes().all(|(_, s)| s.zero_from(1))
    }
}

/// Strictly increasing utility of a node's set cardinality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utility {
    /// f(x) = x
    #[default]
    Cardinality,
    /// f(x) = sqrt(x)
    Sqrt,
    /// f(x) = ln(1 + x)
    Log1p,
    /// f(x) = x^2
    Square,
}

impl Utility {
    pub fn apply(self, cardinality: usize) -> f64 {
        let x = cardinality as f64;
        match self {
            Utility::Cardinality => x,
            Utility::Sqrt => x.sqrt(),
            Utility::Log1p => x.ln_1p(),
            Utility::Square => x * x,
        }
    }
}

/// An immutable exchange problem: `m` initial sets over a universe of `n`
/// segments plus the behaviour schedules of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub n: usize,
    /// Common size of the initial sets when drawn by [`make_instance`].
    pub k: Option<usize>,
    pub initial_sets: Vec<SegmentSet>,
    /// Segment aggressive probability: chance an unpaired node downloads.
    pub sap: ScheduleSet,
    /// Preference exploration factor: fraction of neighbours kept in a list.
    pub pef: ScheduleSet,
    pub utility: Utility,
    pub cost_per_download: f64,
    /// Seed the sets were drawn with, if any.
    pub seed: Option<u64>,
}

impl Instance {
    /// Instance with non-aggressive, fully exploring nodes. Does not validate.
    pub fn new(n: usize, initial_sets: Vec<SegmentSet>) -> Self {
        Instance {
            n,
            k: None,
            initial_sets,
            sap: ScheduleSet::constant(0.0),
            pef: ScheduleSet::constant(1.0),
            utility: Utility::Cardinality,
            cost_per_download: 1.0,
            seed: None,
        }
    }

    /// Builds an instance from plain index lists; fails on out-of-universe indices.
    pub fn from_lists(n: usize, lists: &[&[usize]]) -> Result<Self> {
        let sets = lists
            .iter()
            .enumerate()
            .map(|(i, l)| {
                SegmentSet::from_indices(n, l.iter().copied()).ok_or_else(|| {
                    Error::InvalidParameter(format!("node {i} lists a segment outside 0..{n}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Instance::new(n, sets))
    }

    pub fn with_sap(mut self, sap: ScheduleSet) -> Self {
        self.sap = sap;
        self
    }

    pub fn with_pef(mut self, pef: ScheduleSet) -> Self {
        self.pef = pef;
        self
    }

    pub fn with_utility(mut self, utility: Utility) -> Self {
        self.utility = utility;
        self
    }

    pub fn m(&self) -> usize {
        self.initial_sets.len()
    }

    pub fn initial_state(&self) -> SlotState {
        SlotState {
            slot: 1,
            sets: self.initial_sets.clone(),
            downloads: vec![0; self.m()],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceDoc::from(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("instance document: {e}")))?;
        doc.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

/// Serialized form of an [`Instance`].
#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    m: usize,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    initial_sets: Vec<Vec<usize>>,
    #[serde(default = "zero_schedule")]
    sap: ScheduleSet,
    #[serde(default = "one_schedule")]
    pef: ScheduleSet,
    #[serde(default)]
    utility: Utility,
    #[serde(default = "unit_cost")]
    cost_per_download: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn zero_schedule() -> ScheduleSet {
    ScheduleSet::constant(0.0)
}

fn one_schedule() -> ScheduleSet {
    ScheduleSet::constant(1.0)
}

fn unit_cost() -> f64 {
    1.0
}

impl From<&Instance> for InstanceDoc {
    fn from(inst: &Instance) -> Self {
        InstanceDoc {
            m: inst.m(),
            n: inst.n,
            k: inst.k,
            initial_sets: inst.initial_sets.iter().map(SegmentSet::to_vec).collect(),
            sap: inst.sap.clone(),
            pef: inst.pef.clone(),
            utility: inst.utility,
            cost_per_download: inst.cost_per_download,
            seed: inst.seed,
        }
    }
}

impl TryFrom<InstanceDoc> for Instance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.m != doc.initial_sets.len() {
            return Err(Error::InvalidParameter(format!(
                "m = {} but {} initial sets given",
                doc.m,
                doc.initial_sets.len()
            )));
        }
        let lists: Vec<&[usize]> = doc.initial_sets.iter().map(Vec::as_slice).collect();
        let mut inst = Instance::from_lists(doc.n, &lists)?;
        inst.k = doc.k;
        inst.sap = doc.sap;
        inst.pef = doc.pef;
        inst.utility = doc.utility;
        inst.cost_per_download = doc.cost_per_download;
        inst.seed = doc.seed;
        Ok(inst)
    }
}

/// Mutable state at the beginning of a decision slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotState {
    /// 1-based slot index.
    pub slot: usize,
    pub sets: Vec<SegmentSet>,
    /// Segments fetched over the expensive link so far, per node.
    pub downloads: Vec<u64>,
}

impl SlotState {
    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn aggregate(&self) -> u64 {
        self.sets.iter().map(|s| s.len() as u64).sum()
    }

    pub fn total_downloads(&self) -> u64 {
        self.downloads.iter().sum()
    }

    pub fn universe_holders(&self) -> usize {
        self.sets.iter().filter(|s| s.is_full()).count()
    }
}

/// Draws `m` uniformly random `k`-subsets of `{0..n-1}`, redrawing the whole
/// collection until it covers the universe.
pub fn make_instance<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Instance> {
    make_instance_with_cap(m, n, k, rng, DEFAULT_GENERATION_ATTEMPTS)
}

pub fn make_instance_with_cap<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    k: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Instance> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need m >= 2 nodes, got {m}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n - 1, got k = {k}, n = {n}"
        )));
    }
    if m * k < n {
        return Err(Error::InvalidParameter(format!(
            "{m} sets of {k} segments cannot cover {n} segments"
        )));
    }
    let full = SegmentSet::full(n);
    for _ in 0..max_attempts {
        let sets: Vec<SegmentSet> = (0..m)
            .map(|_| {
                let mut s = SegmentSet::empty(n);
                for seg in index::sample(rng, n, k) {
                    s.insert(seg);
                }
                s
            })
            .collect();
        let mut union = SegmentSet::empty(n);
        for s in &sets {
            union.union_with(s);
        }
        if union == full {
            let mut inst = Instance::new(n, sets);
            inst.k = Some(k);
            return Ok(inst);
        }
    }
    Err(Error::GenerationFailure {
        attempts: max_attempts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewNodes(usize),
    UniverseMismatch {
        node: usize,
        universe: usize,
    },
    EmptySet {
        node: usize,
    },
    FullSet {
        node: usize,
    },
    UnionIncomplete {
        missing: Vec<usize>,
    },
    ScheduleArity {
        which: &'static str,
        expected: usize,
        got: usize,
    },
    ScheduleOutOfRange {
        which: &'static str,
        node: Option<usize>,
        slot: usize,
        value: f64,
    },
    NegativeCost(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewNodes(m) => write!(f, "need at least 2 nodes, got {m}"),
            Violation::UniverseMismatch { node, universe } => {
                write!(f, "node {node} uses a universe of {universe} segments")
            }
            Violation::EmptySet { node } => write!(f, "node {node} starts with no segments"),
            Violation::FullSet { node } => write!(f, "node {node} holds the full universe"),
            Violation::UnionIncomplete { missing } => {
                write!(f, "union of initial sets misses segments {missing:?}")
            }
            Violation::ScheduleArity {
                which,
                expected,
                got,
            } => {
                write!(
                    f,
                    "{which} has {got} per-node schedules, expected {expected}"
                )
            }
            Violation::ScheduleOutOfRange {
                which,
                node,
                slot,
                value,
            } => match node {
                Some(i) => write!(
                    f,
                    "{which} of node {i} at slot {slot} is {value}, outside [0, 1]"
                ),
                None => write!(f, "{which} at slot {slot} is {value}, outside [0, 1]"),
            },
            Violation::NegativeCost(c) => write!(f, "download cost {c} is negative"),
        }
    }
}

/// Checks the instance against the model assumptions, reporting the first
/// violated clause.
pub fn validate_instance(inst: &Instance) -> std::result::Result<(), Violation> {
    let m = inst.m();
    if m < 2 {
        return Err(Violation::TooFewNodes(m));
    }
    let mut union = SegmentSet::empty(inst.n);
    for (node, set) in inst.initial_sets.iter().enumerate() {
        if set.universe() != inst.n {
            return Err(Violation::UniverseMismatch {
                node,
                universe: set.universe(),
            });
        }
        if set.is_empty() {
            return Err(Violation::EmptySet { node });
        }
        if set.is_full() {
            return Err(Violation::FullSet { node });
        }
        union.union_with(set);
    }
    if !union.is_full() {
        return Err(Violation::UnionIncomplete {
            missing: union.missing().collect(),
        });
    }
    for (which, schedules) in [("sap", &inst.sap), ("pef", &inst.pef)] {
        if let ScheduleSet::PerNode(v) = schedules {
            if v.len() != m {
                return Err(Violation::ScheduleArity {
                    which,
                    expected: m,
                    got: v.len(),
                });
            }
        }
        for (node, schedule) in schedules.nodes() {
            for (idx, &value) in schedule.values().iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Violation::ScheduleOutOfRange {
                        which,
                        node,
                        slot: idx + 1,
                        value,
                    });
                }
            }
        }
    }
    if inst.cost_per_download.is_nan() || inst.cost_per_download < 0.0 {
        return Err(Violation::NegativeCost(inst.cost_per_download));
    }
    Ok(())
}
