//! Seeded Monte Carlo scenarios over SAP × PEF grids, with CSV/JSON output.
//!
//! Each `(cell, trial)` owns an RNG derived from the master seed, so results
//! do not depend on execution order or thread count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, confidence_interval, price_of_choices};
use crate::model::{make_instance, ScheduleSet};
use crate::oracle::{aggregate_upper_bound, optimal_aggregate, OracleOptions};
use crate::strategy::{run_simulation_with_rng, Algorithm};

/// The exact oracle is only attempted for groups up to this size.
pub const ORACLE_MAX_NODES: usize = 6;
/// ...and universes up to this size.
pub const ORACLE_MAX_UNIVERSE: usize = 10;

pub const CSV_COLUMNS: [&str; 17] = [
    "scenario_id",
    "algorithm",
    "m",
    "n",
    "k",
    "sap",
    "pef",
    "trial",
    "seed",
    "r_end",
    "truncated",
    "aggregate",
    "downloads",
    "nmac",
    "nmsd",
    "poc_exact",
    "poc_bound",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_id")]
    pub id: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub algorithm: Algorithm,
    #[serde(default = "zero_grid")]
    pub sap: Vec<f64>,
    #[serde(default = "one_grid")]
    pub pef: Vec<f64>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slots: Option<usize>,
    #[serde(default)]
    pub compute_oracle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_id() -> String {
    "scenario".into()
}
fn zero_grid() -> Vec<f64> {
    vec![0.0]
}
fn one_grid() -> Vec<f64> {
    vec![1.0]
}
fn one() -> usize {
    1
}

impl Scenario {
    pub fn new(m: usize, n: usize, k: usize, algorithm: Algorithm) -> Self {
        Scenario {
            id: format!("{algorithm}-{m}-{n}-{k}"),
            m,
            n,
            k,
            algorithm,
            sap: zero_grid(),
            pef: one_grid(),
            trials: 1,
            master_seed: 0,
            max_slots: None,
            compute_oracle: false,
            output: None,
        }
    }

    pub fn with_grid(mut self, sap: &[f64], pef: &[f64]) -> Self {
        self.sap = sap.to_vec();
        self.pef = pef.to_vec();
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_oracle(mut self, on: bool) -> Self {
        self.compute_oracle = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::InvalidParameter(format!(
                "scenario `{}`: {msg}",
                self.id
            )))
        };
        if self.m < 2 {
            return bad(format!("need m >= 2, got {}", self.m));
        }
        if self.k == 0 || self.k >= self.n {
            return bad(format!(
                "need 1 <= k <= n - 1, got k = {}, n = {}",
                self.k, self.n
            ));
        }
        if self.m * self.k < self.n {
            return bad(format!(
                "{} sets of {} cannot cover {} segments",
                self.m, self.k, self.n
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, grid) in [("sap", &self.sap), ("pef", &self.pef)] {
            if grid.is_empty() {
                return bad(format!("{name} grid is empty"));
            }
            if let Some(v) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return bad(format!("{name} value {v} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// `(sap, pef)` cells, SAP-major.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.sap
            .iter()
            .flat_map(|&s| self.pef.iter().map(move |&p| (s, p)))
            .collect()
    }

    pub fn oracle_enabled(&self) -> bool {
        self.compute_oracle && self.m <= ORACLE_MAX_NODES && self.n <= ORACLE_MAX_UNIVERSE
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_document(path)
    }
}

/// Several scenarios run back to back into one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

impl Sweep {
    pub fn load(path: &Path) -> Result<Self> {
        load_document(path)
    }
}

fn load_document<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| Error::Parse {
        path: path.into(),
        message,
    })
}

/// Bijective 64-bit mixer (splitmix64 finalizer).
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed. Injective in `(cell, trial)` for a fixed master seed while
/// both indices stay below 2^32.
pub fn derive_seed(master_seed: u64, cell: usize, trial: usize) -> u64 {
    debug_assert!(cell < 1 << 32 && trial < 1 << 32);
    mix64(master_seed ^ mix64(((cell as u64) << 32) | trial as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario_id: String,
    pub algorithm: Algorithm,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub sap: f64,
    pub pef: f64,
    pub trial: usize,
    pub seed: u64,
    pub r_end: usize,
    pub truncated: bool,
    pub aggregate: u64,
    pub downloads: u64,
    pub nmac: f64,
    pub nmsd: f64,
    /// Against the exact optimum, when the oracle ran.
    pub poc_exact: Option<f64>,
    /// Against `nm − (m mod 2)`; an upper estimate. Absent for aggressive runs.
    pub poc_bound: Option<f64>,
}

fn run_trial(
    s: &Scenario,
    cell: usize,
    (sap, pef): (f64, f64),
    trial: usize,
) -> Result<TrialRecord> {
    let seed = derive_seed(s.master_seed, cell, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = make_instance(s.m, s.n, s.k, &mut rng)?
        .with_sap(ScheduleSet::constant(sap))
        .with_pef(ScheduleSet::constant(pef));
    inst.seed = Some(seed);
    let trace = run_simulation_with_rng(&inst, s.algorithm, &mut rng, seed, s.max_slots);
    let fin = &trace.final_state;
    let aggregate = fin.aggregate();
    let non_aggressive =
        s.algorithm == Algorithm::Randomized || s.algorithm.configure(&inst).sap.all_zero();
    let poc_bound =
        price_of_choices(aggregate_upper_bound(s.m, s.n), aggregate, non_aggressive).ok();
    let poc_exact = if s.oracle_enabled() && non_aggressive {
        optimal_aggregate(&inst, &OracleOptions::default())
            .ok()
            .and_then(|r| price_of_choices(r.alpha_star, aggregate, true).ok())
    } else {
        None
    };
    Ok(TrialRecord {
        scenario_id: s.id.clone(),
        algorithm: s.algorithm,
        m: s.m,
        n: s.n,
        k: s.k,
        sap,
        pef,
        trial,
        seed,
        r_end: trace.r_end,
        truncated: trace.truncated,
        aggregate,
        downloads: fin.total_downloads(),
        nmac: metrics::nmac(fin, s.n),
        nmsd: metrics::nmsd(fin, s.n),
        poc_exact,
        poc_bound,
    })
}

/// Runs every grid cell × trial on the ambient rayon pool; records are
/// ordered by `(cell, trial)`.
pub fn run_scenario(s: &Scenario) -> Result<Vec<TrialRecord>> {
    run_scenario_with(s, None)
}

/// `jobs = Some(1)` runs serially; `Some(n)` uses a dedicated pool of `n` threads.
pub fn run_scenario_with(s: &Scenario, jobs: Option<usize>) -> Result<Vec<TrialRecord>> {
    s.validate()?;
    let work: Vec<(usize, (f64, f64), usize)> = s
        .cells()
        .into_iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..s.trials).map(move |t| (c, cell, t)))
        .collect();
    let run = || -> Result<Vec<TrialRecord>> {
        work.par_iter()
            .map(|&(c, cell, t)| run_trial(s, c, cell, t))
            .collect()
    };
    match jobs {
        Some(1) => work
            .iter()
            .map(|&(c, cell, t)| run_trial(s, c, cell, t))
            .collect(),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

pub fn run_sweep(sweep: &Sweep, jobs: Option<usize>) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for s in &sweep.scenarios {
        out.extend(run_scenario_with(s, jobs)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Writes records to any sink. CSV always carries the header row.
pub fn write_results<W: Write>(
    records: &[TrialRecord],
    format: OutputFormat,
    sink: W,
) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(sink);
            w.write_record(CSV_COLUMNS)?;
            for r in records {
                w.serialize(r)?;
            }
            w.flush()
        }
        OutputFormat::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, records)?;
            writeln!(sink)
        }
    }
}

pub fn emit_results(records: &[TrialRecord], format: OutputFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut sink = BufWriter::new(file);
    write_results(records, format, &mut sink).map_err(|e| Error::io(path, e))?;
    sink.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    records: usize,
    scenarios: &'a [Scenario],
}

/// `results.csv` → `results.csv.manifest.json`
pub fn manifest_path(results: &Path) -> PathBuf {
    let mut name = results.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes the scenarios and tool version next to a results file.
pub fn write_manifest(results: &Path, scenarios: &[Scenario], records: usize) -> Result<PathBuf> {
    let path = manifest_path(results);
    let manifest = Manifest {
        tool: "givetake",
        version: env!("CARGO_PKG_VERSION"),
        records,
        scenarios,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Mean and 95% half-width of one metric over a cell's trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

fn estimate(values: &[f64]) -> Option<Estimate> {
    match values.len() {
        0 => None,
        1 => Some(Estimate {
            mean: values[0],
            half_width: 0.0,
        }),
        _ => confidence_interval(values, 0.95)
            .ok()
            .map(|(mean, half_width)| Estimate { mean, half_width }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub scenario_id: String,
    pub algorithm: Algorithm,
    pub sap: f64,
    pub pef: f64,
    pub trials: usize,
    pub truncated: usize,
    pub nmac: Estimate,
    pub nmsd: Estimate,
    pub poc_bound: Option<Estimate>,
    pub poc_exact: Option<Estimate>,
}

/// Groups consecutive records of the same cell and averages them.
pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let same_cell = |a: &TrialRecord, b: &TrialRecord| {
        a.scenario_id == b.scenario_id
            && a.algorithm == b.algorithm
            && a.sap == b.sap
            && a.pef == b.pef
    };
    records
        .chunk_by(same_cell)
        .map(|cell| {
            let col = |f: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
                cell.iter().filter_map(f).collect()
            };
            let first = &cell[0];
            CellSummary {
                scenario_id: first.scenario_id.clone(),
                algorithm: first.algorithm,
                sap: first.sap,
                pef: first.pef,
                trials: cell.len(),
                truncated: cell.iter().filter(|r| r.truncated).count(),
                nmac: estimate(&col(|r| Some(r.nmac))).expect("cell has trials"),
                nmsd: estimate(&col(|r| Some(r.nmsd))).expect("cell has trials"),
                poc_bound: estimate(&col(|r| r.poc_bound)),
                poc_exact: estimate(&col(|r| r.poc_exact)),
            }
        })
        .collect()
}
