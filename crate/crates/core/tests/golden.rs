//! Golden-file checks for the debug text formats and event logs.
//! Regenerate with `GIVETAKE_BLESS=1 cargo test --test golden`.

use std::fmt::Write;
use std::path::PathBuf;

use givetake::graph::render_preferences;
use givetake::{
    build_exchange_graph, find_stable_matching, make_instance, preference_lists, run_simulation,
    Algorithm, Instance, ScheduleSet, Utility,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("GIVETAKE_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}");
}

fn four_node() -> Instance {
    Instance::from_lists(4, &[&[0], &[1], &[0, 1, 2], &[3]]).unwrap()
}

#[test]
fn four_node_debug_formats() {
    let inst = four_node();
    let st = inst.initial_state();
    let g = build_exchange_graph(&st);
    let lists = preference_lists(&g, &st, Utility::Cardinality, |_| 1.0);
    let mt = find_stable_matching(&g, &lists).unwrap();
    let mut out = String::new();
    writeln!(
        out,
        "# graph\n{g}# preferences\n{}# matching\n{mt}",
        render_preferences(&lists)
    )
    .unwrap();
    check("four_node.txt", &out);
}

#[test]
fn seeded_event_logs() {
    let inst = make_instance(6, 9, 3, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let mut out = String::new();
    let sets: Vec<String> = inst.initial_sets.iter().map(|s| s.to_string()).collect();
    writeln!(out, "# sets {}", sets.join(" ")).unwrap();
    for (alg, sap, pef) in [
        (Algorithm::Lspa, 0.3, 0.5),
        (Algorithm::Pepa, 0.0, 0.25),
        (Algorithm::Lfs, 0.0, 1.0),
        (Algorithm::Randomized, 0.0, 1.0),
    ] {
        let t = run_simulation(
            &inst
                .clone()
                .with_sap(ScheduleSet::constant(sap))
                .with_pef(ScheduleSet::constant(pef)),
            alg,
            7,
            None,
        );
        writeln!(
            out,
            "# {alg} sap={sap} pef={pef} r_end={} aggregate={}",
            t.r_end,
            t.final_state.aggregate()
        )
        .unwrap();
        out.push_str(&t.event_log());
    }
    check("event_logs.txt", &out);
}
