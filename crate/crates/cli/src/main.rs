use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use givetake::harness::{
    run_scenario_with, run_sweep, summarize, write_manifest, write_results, Sweep,
};
use givetake::metrics::predict_expected_cardinality;
use givetake::{
    aggregate_upper_bound, make_instance, optimal_aggregate, run_simulation, Algorithm, Error,
    Instance, OracleOptions, OutputFormat, Scenario, TrialRecord,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "givetake",
    version,
    about = "Segment exchange simulator for cooperative downloading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write per-trial records.
    Simulate(RunArgs),
    /// Run every scenario in a sweep file (`[[scenario]]` tables).
    Sweep(RunArgs),
    /// Exhaustive optimum for a small instance.
    Oracle(OracleArgs),
    /// Print the expected-cardinality recurrence for the randomized strategy.
    Predict(PredictArgs),
    /// Print the slot-by-slot event log of one run.
    Trace(TraceArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results file; defaults to the scenario's `output`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Either `--config instance.json` or a random draw from `--m --n --k --seed`.
#[derive(Args)]
struct InstanceArgs {
    #[arg(long, conflicts_with_all = ["m", "n", "k"])]
    config: Option<PathBuf>,
    #[arg(long, requires_all = ["n", "k"])]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = OracleOptions::default().max_states)]
    max_states: u64,
    #[arg(long)]
    no_memo: bool,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "lfs")]
    algorithm: Algorithm,
    #[arg(long)]
    sap: Option<f64>,
    #[arg(long)]
    pef: Option<f64>,
    #[arg(long)]
    max_slots: Option<usize>,
}

/// Failure split into the two documented exit codes.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Anything that goes wrong while reading input counts as bad config.
fn config<T>(r: givetake::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Predict(a) => predict(a),
        Command::Trace(a) => trace(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn apply_overrides(s: &mut Scenario, a: &RunArgs) {
    if let Some(seed) = a.seed {
        s.master_seed = seed;
    }
    if let Some(trials) = a.trials {
        s.trials = trials;
    }
}

fn simulate(a: RunArgs) -> Result<(), Failure> {
    let mut s = config(Scenario::load(&a.config))?;
    apply_overrides(&mut s, &a);
    config(s.validate())?;
    let records = run_scenario_with(&s, a.jobs)?;
    let out = a.out.clone().or_else(|| s.output.clone());
    emit(&records, a.format, out.as_deref(), std::slice::from_ref(&s))
}

fn sweep(a: RunArgs) -> Result<(), Failure> {
    let mut sw = config(Sweep::load(&a.config))?;
    if sw.scenarios.is_empty() {
        return Err(Failure::Config(format!(
            "{}: no scenarios",
            a.config.display()
        )));
    }
    for s in &mut sw.scenarios {
        apply_overrides(s, &a);
        config(s.validate())?;
    }
    let records = run_sweep(&sw, a.jobs)?;
    emit(&records, a.format, a.out.as_deref(), &sw.scenarios)
}

fn emit(
    records: &[TrialRecord],
    format: OutputFormat,
    out: Option<&Path>,
    scenarios: &[Scenario],
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            givetake::emit_results(records, format, path)?;
            let manifest = write_manifest(path, scenarios, records.len())?;
            for c in summarize(records) {
                let poc = c
                    .poc_bound
                    .map_or("-".to_string(), |p| format!("{:.4}", p.mean));
                eprintln!(
                    "{} {} sap={} pef={}: nmac {:.4} ± {:.4}, nmsd {:.4}, poc_bound {poc}",
                    c.scenario_id,
                    c.algorithm,
                    c.sap,
                    c.pef,
                    c.nmac.mean,
                    c.nmac.half_width,
                    c.nmsd.mean
                );
            }
            eprintln!(
                "wrote {} records to {} ({})",
                records.len(),
                path.display(),
                manifest.display()
            );
        }
        None => write_results(records, format, io::stdout().lock())?,
    }
    Ok(())
}

fn load_instance(a: &InstanceArgs) -> Result<Instance, Failure> {
    match (&a.config, a.m) {
        (Some(path), _) => config(Instance::load(path)),
        (None, Some(m)) => {
            let (n, k) = (a.n.unwrap_or_default(), a.k.unwrap_or_default());
            let mut inst = config(make_instance(
                m,
                n,
                k,
                &mut ChaCha8Rng::seed_from_u64(a.seed),
            ))?;
            inst.seed = Some(a.seed);
            Ok(inst)
        }
        (None, None) => Err(Failure::Config("pass --config or --m/--n/--k".into())),
    }
}

fn oracle(a: OracleArgs) -> Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let opts = OracleOptions {
        memoize: !a.no_memo,
        max_states: a.max_states,
    };
    let res = optimal_aggregate(&inst, &opts)?;
    let bound = aggregate_upper_bound(inst.m(), inst.n);
    let mut out = io::stdout().lock();
    match a.format {
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "alpha_star": res.alpha_star,
                "bound": bound,
                "states_explored": res.states_explored,
                "witness": res.witness,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
        }
        OutputFormat::Csv => {
            writeln!(out, "alpha_star: {}", res.alpha_star)?;
            writeln!(out, "bound: {bound}")?;
            writeln!(out, "states_explored: {}", res.states_explored)?;
            let steps: Vec<String> = res
                .witness
                .iter()
                .map(|(i, j)| format!("({i},{j})"))
                .collect();
            writeln!(out, "witness: {}", steps.join(" "))?;
        }
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), Failure> {
    let seq = predict_expected_cardinality(a.m, a.n, a.k, a.epochs)?;
    let mut out = io::stdout().lock();
    match a.format {
        OutputFormat::Json => writeln!(out, "{}", serde_json::to_string(&seq).expect("json"))?,
        OutputFormat::Csv => {
            writeln!(out, "epoch,expected_cardinality")?;
            for (e, v) in seq.iter().enumerate() {
                writeln!(out, "{},{v}", e + 1)?;
            }
        }
    }
    Ok(())
}

fn trace(a: TraceArgs) -> Result<(), Failure> {
    let mut inst = load_instance(&a.instance)?;
    if let Some(sap) = a.sap {
        inst = inst.with_sap(givetake::ScheduleSet::constant(sap));
    }
    if let Some(pef) = a.pef {
        inst = inst.with_pef(givetake::ScheduleSet::constant(pef));
    }
    config(givetake::validate_instance(&inst).map_err(Error::InvalidInstance))?;
    let t = run_simulation(&inst, a.algorithm, a.instance.seed, a.max_slots);
    let mut out = io::stdout().lock();
    write!(out, "{}", t.event_log())?;
    writeln!(
        out,
        "end: r_end {} aggregate {} downloads {}{}",
        t.r_end,
        t.final_state.aggregate(),
        t.final_state.total_downloads(),
        if t.truncated { " (truncated)" } else { "" }
    )?;
    Ok(())
}
