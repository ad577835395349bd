//! Segment exchange in social groups under the give-and-take criterion.
//!
//! Nodes hold subsets of a universe of segments and may swap with any node
//! that has something they lack, provided they also have something to give.
//! The crate provides the exchange model, per-slot stable pairing, the four
//! decentralized strategies (LSPA, PEPA, LFS and the randomized algorithm),
//! an exhaustive optimum for small groups, the evaluation metrics and a
//! seeded Monte Carlo harness.

pub mod error;
pub mod graph;
pub mod harness;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod segment_set;
pub mod strategy;

pub use error::{Error, Result};
pub use graph::{
    build_exchange_graph, exchange, first_preference_digraph, gt_satisfied, incremental_gain,
    preference_list, preference_lists, ExchangeGraph, FirstPreferenceDigraph, PreferenceList,
};
pub use harness::{emit_results, run_scenario, OutputFormat, Scenario, TrialRecord};
pub use matching::{find_stable_matching, verify_stability, BlockingPair, Matching};
pub use metrics::{
    confidence_interval, nmac, nmsd, predict_expected_cardinality, price_of_choices,
};
pub use model::{
    make_instance, validate_instance, Instance, Schedule, ScheduleSet, SlotState, Utility,
    Violation,
};
pub use oracle::{aggregate_upper_bound, optimal_aggregate, OracleOptions, OracleResult};
pub use segment_set::SegmentSet;
pub use strategy::{
    run_simulation, step_deterministic, step_randomized, Algorithm, SlotEvents, Trace,
};
