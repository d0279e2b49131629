//! Config-driven experiment runs and their on-disk artifacts.
//!
//! A config is a TOML file with optional top-level `replicas` and `method`
//! keys and a list of `[[experiment]]` tables, each with a `kind`:
//!
//! ```toml
//! replicas = 64
//!
//! [[experiment]]
//! kind = "arm_table"
//! name = "alpha"
//! beta = 0.2
//! ns = [4, 8, 16]
//! trials = 20000
//!
//! [[experiment]]
//! kind = "sweep"
//! beta = 0.2
//! ns = [8, 16]
//! scaled_times = [0.1, 1.0, 10.0]
//! table = "alpha"
//! trials = 5000
//! ```
//!
//! A run writes `estimates.csv` with columns
//! `beta,n,m,k,t,event,trials,successes,p_hat,ci_low,ci_high,seed`, one JSON
//! report per experiment and `manifest.json`. The CSV depends only on the
//! config and the seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::estimate::{estimate_pair, estimate_static, EstimateRecord, McConfig, PairMode, DEFAULT_REPLICAS};
use super::reports::{
    arm_table, cross_sweep, decoupling_report, derivative_report, green_tail, mixing_ratio_report, nested_one_arm, qm_report,
    translation_report, ArmTable, DerivConfig, TimeAxis,
};
use super::seeding::derive_seed;
use crate::dynamics::{constants, DEFAULT_M};
use crate::error::{Error, Result};
use crate::events::EventSpec;
use crate::ising::{ModelParams, SamplerMethod};
use crate::lattice::{Region, SiteCoord};
use crate::oracle::run_exactness_suite;

pub const CSV_HEADER: [&str; 12] = ["beta", "n", "m", "k", "t", "event", "trials", "successes", "p_hat", "ci_low", "ci_high", "seed"];
pub const CSV_FILE: &str = "estimates.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub replicas: Option<u64>,
    /// `cluster`, `exact`, `burnin` or `burnin:<sweeps>`.
    pub method: Option<String>,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<Spanned<ExperimentSpec>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    Constants {
        name: Option<String>,
        beta: f64,
        big_m: Option<f64>,
    },
    Static {
        name: Option<String>,
        event: String,
        beta: f64,
        trials: u64,
        frame: Option<String>,
    },
    Pair {
        name: Option<String>,
        event: String,
        /// Event read at time t; defaults to `event`.
        event_t: Option<String>,
        #[serde(default)]
        time0_only: bool,
        beta: f64,
        t: f64,
        trials: u64,
        frame: Option<String>,
    },
    ArmTable {
        name: Option<String>,
        beta: f64,
        ns: Vec<u32>,
        trials: u64,
    },
    Sweep {
        name: Option<String>,
        beta: f64,
        ns: Vec<u32>,
        times: Option<Vec<f64>>,
        scaled_times: Option<Vec<f64>>,
        /// Name of an earlier `arm_table`; defaults to the most recent one.
        table: Option<String>,
        trials: u64,
    },
    Qm {
        name: Option<String>,
        beta: f64,
        t: f64,
        triples: Vec<[u32; 3]>,
        trials: u64,
    },
    Deriv {
        name: Option<String>,
        beta: f64,
        n: u32,
        t: f64,
        fd_trials: Option<u64>,
        fd_step: Option<f64>,
        coupled_trials: Option<u64>,
        pivotal_trials: Option<u64>,
    },
    Mixing {
        name: Option<String>,
        beta: f64,
        inner: String,
        delta: f64,
        a: String,
        b: String,
        t: f64,
        frame: Option<String>,
        trials: u64,
    },
    NestedArm {
        name: Option<String>,
        beta: f64,
        m: u32,
        n: u32,
        t: f64,
        trials: u64,
    },
    Translation {
        name: Option<String>,
        beta: f64,
        event: String,
        x: String,
        n: u32,
        m: u32,
        t: f64,
        trials: u64,
    },
    GreenTail {
        name: Option<String>,
        n: u32,
        t: f64,
        lambdas: Vec<u32>,
        trials: u64,
    },
    Decoupling {
        name: Option<String>,
        beta: f64,
        n: u32,
        t: f64,
        tau_cut: Option<f64>,
        trials: u64,
    },
    Oracle {
        name: Option<String>,
        beta: f64,
        t_small: Option<f64>,
    },
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Constants { .. } => "constants",
            ExperimentSpec::Static { .. } => "static",
            ExperimentSpec::Pair { .. } => "pair",
            ExperimentSpec::ArmTable { .. } => "arm_table",
            ExperimentSpec::Sweep { .. } => "sweep",
            ExperimentSpec::Qm { .. } => "qm",
            ExperimentSpec::Deriv { .. } => "deriv",
            ExperimentSpec::Mixing { .. } => "mixing",
            ExperimentSpec::NestedArm { .. } => "nested_arm",
            ExperimentSpec::Translation { .. } => "translation",
            ExperimentSpec::GreenTail { .. } => "green_tail",
            ExperimentSpec::Decoupling { .. } => "decoupling",
            ExperimentSpec::Oracle { .. } => "oracle",
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            ExperimentSpec::Constants { name, .. }
            | ExperimentSpec::Static { name, .. }
            | ExperimentSpec::Pair { name, .. }
            | ExperimentSpec::ArmTable { name, .. }
            | ExperimentSpec::Sweep { name, .. }
            | ExperimentSpec::Qm { name, .. }
            | ExperimentSpec::Deriv { name, .. }
            | ExperimentSpec::Mixing { name, .. }
            | ExperimentSpec::NestedArm { name, .. }
            | ExperimentSpec::Translation { name, .. }
            | ExperimentSpec::GreenTail { name, .. }
            | ExperimentSpec::Decoupling { name, .. }
            | ExperimentSpec::Oracle { name, .. } => name.as_deref(),
        }
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses a config; syntax and schema errors carry the line number.
pub fn parse_config(src: &str) -> Result<ExperimentConfig> {
    toml::from_str(src).map_err(|e| {
        let msg = e.message().trim().to_string();
        match e.span() {
            Some(sp) => Error::Config(format!("line {}: {msg}", line_of(src, sp.start))),
            None => Error::Config(msg),
        }
    })
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub beta: f64,
    pub n: Option<u32>,
    pub m: Option<u32>,
    pub k: Option<u32>,
    pub t: Option<f64>,
    pub event: String,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl From<&EstimateRecord> for CsvRow {
    fn from(r: &EstimateRecord) -> Self {
        let event = match &r.event_t {
            Some(b) => format!("{} -> {b}", r.event),
            None => r.event.clone(),
        };
        CsvRow {
            beta: r.beta,
            n: r.n,
            m: r.m,
            k: r.k,
            t: r.t,
            event,
            trials: r.trials,
            successes: r.successes,
            p_hat: r.p_hat,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            seed: r.master_seed,
        }
    }
}

/// Writes rows (with header) in the fixed column order.
pub fn write_csv<W: Write>(w: W, rows: &[CsvRow]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected CSV header: {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    rd.deserialize().map(|r| r.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub report: String,
    pub csv_rows: usize,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub version: String,
    pub replicas: u64,
    pub threads: usize,
    pub wall_time_secs: f64,
    pub csv: Option<String>,
    pub experiments: Vec<ManifestEntry>,
}

struct Outcome {
    report: serde_json::Value,
    rows: Vec<CsvRow>,
    table: Option<ArmTable>,
}

fn parse_event(s: &str) -> Result<EventSpec> {
    s.parse()
}

fn parse_region(s: &Option<String>) -> Result<Option<Region>> {
    s.as_deref().map(str::parse).transpose()
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn rows_of<'a>(recs: impl IntoIterator<Item = &'a EstimateRecord>) -> Vec<CsvRow> {
    recs.into_iter().map(CsvRow::from).collect()
}

fn run_one(spec: &ExperimentSpec, base: &McConfig, tables: &[(String, ArmTable)]) -> Result<Outcome> {
    let mc = |trials: u64| McConfig { trials, ..base.clone() };
    let out = match spec {
        ExperimentSpec::Constants { beta, big_m, .. } => {
            let c = constants(ModelParams::new(*beta)?, big_m.unwrap_or(DEFAULT_M))?;
            Outcome { report: json(&c), rows: vec![], table: None }
        }
        ExperimentSpec::Static { event, beta, trials, frame, .. } => {
            let r = estimate_static(&parse_event(event)?, parse_region(frame)?, *beta, &mc(*trials))?;
            Outcome { rows: rows_of([&r]), report: json(&r), table: None }
        }
        ExperimentSpec::Pair { event, event_t, time0_only, beta, t, trials, frame, .. } => {
            let a = parse_event(event)?;
            let mode = match (event_t, time0_only) {
                (Some(_), true) => return Err(Error::Config("event_t and time0_only are exclusive".into())),
                (Some(b), false) => PairMode::Mixed(parse_event(b)?),
                (None, true) => PairMode::Time0Only,
                (None, false) => PairMode::Same,
            };
            let r = estimate_pair(&a, &mode, *beta, *t, parse_region(frame)?, &mc(*trials))?;
            Outcome { rows: rows_of([&r]), report: json(&r), table: None }
        }
        ExperimentSpec::ArmTable { beta, ns, trials, .. } => {
            let tb = arm_table(*beta, ns, &mc(*trials))?;
            let eps: Vec<_> = tb.rows.iter().map(|r| (r.n, tb.epsilon(r.n))).collect();
            let report = serde_json::json!({ "table": tb, "epsilon": eps, "loglog_slope": tb.loglog_slope() });
            Outcome { rows: rows_of(tb.rows.iter().map(|r| &r.alpha)), report, table: Some(tb) }
        }
        ExperimentSpec::Sweep { beta, ns, times, scaled_times, table, trials, .. } => {
            let (axis, tb) = match (times, scaled_times) {
                (Some(ts), None) => (TimeAxis::Absolute(ts.clone()), None),
                (None, Some(ss)) => {
                    let tb = match table {
                        Some(name) => tables.iter().rev().find(|(n, _)| n == name),
                        None => tables.last(),
                    }
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "scaled sweep needs an earlier arm_table{}",
                            table.as_ref().map_or(String::new(), |n| format!(" named `{n}`"))
                        ))
                    })?;
                    (TimeAxis::Scaled(ss.clone()), Some(&tb.1))
                }
                _ => return Err(Error::Config("sweep needs exactly one of `times` and `scaled_times`".into())),
            };
            let res = cross_sweep(*beta, ns, &axis, tb, &mc(*trials))?;
            Outcome { rows: rows_of(res.cells.iter().map(|c| &c.estimate)), report: json(&res), table: None }
        }
        ExperimentSpec::Qm { beta, t, triples, trials, .. } => {
            let tr: Vec<_> = triples.iter().map(|a| (a[0], a[1], a[2])).collect();
            let rep = qm_report(*beta, *t, &tr, &mc(*trials))?;
            let rows = rows_of(rep.rows.iter().flat_map(|r| [&r.pi_km, &r.pi_mn, &r.pi_kn]).flatten());
            Outcome { rows, report: json(&rep), table: None }
        }
        ExperimentSpec::Deriv { beta, n, t, fd_trials, fd_step, coupled_trials, pivotal_trials, .. } => {
            let mut dc = DerivConfig::new(base.seed);
            dc.replicas = base.replicas;
            dc.fd_trials = fd_trials.unwrap_or(dc.fd_trials);
            dc.fd_step = fd_step.unwrap_or(dc.fd_step);
            dc.coupled_trials = coupled_trials.unwrap_or(dc.coupled_trials);
            dc.pivotal_trials = pivotal_trials.unwrap_or(dc.pivotal_trials);
            let rep = derivative_report(*beta, *n, *t, &dc)?;
            Outcome { rows: rows_of([&rep.pi_n]), report: json(&rep), table: None }
        }
        ExperimentSpec::Mixing { beta, inner, delta, a, b, t, frame, trials, .. } => {
            let rep = mixing_ratio_report(
                *beta,
                &inner.parse()?,
                *delta,
                &parse_event(a)?,
                &parse_event(b)?,
                *t,
                parse_region(frame)?,
                &mc(*trials),
            )?;
            let mut ab = rep.p_ab.clone();
            ab.event = format!("{} & {}", rep.event_a, rep.event_b);
            let rows = rows_of([&rep.p_a, &rep.p_b, &ab]);
            Outcome { rows, report: json(&rep), table: None }
        }
        ExperimentSpec::NestedArm { beta, m, n, t, trials, .. } => {
            Outcome { report: json(&nested_one_arm(*beta, *m, *n, *t, &mc(*trials))?), rows: vec![], table: None }
        }
        ExperimentSpec::Translation { beta, event, x, n, m, t, trials, .. } => {
            let x: SiteCoord = x.parse()?;
            let rep = translation_report(*beta, &parse_event(event)?, x, *n, *m, *t, &mc(*trials))?;
            let rows = rows_of([&rep.shifted, &rep.local]);
            Outcome { rows, report: json(&rep), table: None }
        }
        ExperimentSpec::GreenTail { n, t, lambdas, trials, .. } => {
            let rep = green_tail(*n, *t, lambdas, &mc(*trials))?;
            let rows = rep
                .rows
                .iter()
                .map(|r| {
                    let (lo, hi) = r.estimate.wilson95();
                    CsvRow {
                        beta: 0.0,
                        n: Some(*n),
                        m: None,
                        k: None,
                        t: Some(*t),
                        event: format!("green:lambda={}", r.lambda),
                        trials: r.estimate.trials,
                        successes: r.estimate.successes,
                        p_hat: r.p_hat,
                        ci_low: lo,
                        ci_high: hi,
                        seed: base.seed,
                    }
                })
                .collect();
            Outcome { rows, report: json(&rep), table: None }
        }
        ExperimentSpec::Decoupling { beta, n, t, tau_cut, trials, .. } => {
            let cut = match tau_cut {
                Some(c) => *c,
                None => constants(ModelParams::new(*beta)?, DEFAULT_M)?.tau,
            };
            Outcome { report: json(&decoupling_report(*beta, *n, *t, cut, &mc(*trials))?), rows: vec![], table: None }
        }
        ExperimentSpec::Oracle { beta, t_small, .. } => {
            let t_small = match t_small {
                Some(t) => *t,
                None => constants(ModelParams::new(*beta)?, DEFAULT_M)?.tau,
            };
            Outcome { report: json(&run_exactness_suite(*beta, t_small)?), rows: vec![], table: None }
        }
    };
    Ok(out)
}

fn file_stem(i: usize, spec: &ExperimentSpec) -> String {
    let name: String = spec
        .name()
        .unwrap_or(spec.kind())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{i:02}-{name}")
}

/// Runs every experiment of `src` and writes the artifacts into `out_dir`.
pub fn run_experiment_str(src: &str, out_dir: &Path, seed: u64) -> Result<Manifest> {
    let start = Instant::now();
    let cfg = parse_config(src)?;
    let method: SamplerMethod = match &cfg.method {
        Some(m) => m.parse()?,
        None => SamplerMethod::default(),
    };
    let replicas = cfg.replicas.unwrap_or(DEFAULT_REPLICAS);
    fs::create_dir_all(out_dir)?;

    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut tables: Vec<(String, ArmTable)> = Vec::new();
    for (i, sp) in cfg.experiments.iter().enumerate() {
        let line = line_of(src, sp.span().start);
        let spec = sp.get_ref();
        let t0 = Instant::now();
        let label = spec.name().map_or_else(|| format!("experiment {i}"), |n| format!("experiment {n}"));
        let eseed = derive_seed(seed, &label);
        let base = McConfig { trials: 1, seed: eseed, replicas, method: method.clone() };
        log::info!("experiment {i} ({}) starting", spec.kind());
        let mut out =
            run_one(spec, &base, &tables).map_err(|e| Error::Config(format!("line {line}: experiment {i} ({}): {e}", spec.kind())))?;
        // the CSV carries the run's master seed; per-experiment seeds are in the manifest
        out.rows.iter_mut().for_each(|r| r.seed = seed);
        let stem = file_stem(i, spec);
        let report = format!("{stem}.json");
        let doc = serde_json::json!({ "kind": spec.kind(), "config": spec, "seed": eseed, "report": out.report });
        fs::write(out_dir.join(&report), serde_json::to_string_pretty(&doc)? + "\n")?;
        if let Some(tb) = out.table {
            tables.push((spec.name().unwrap_or("").to_string(), tb));
        }
        entries.push(ManifestEntry {
            index: i,
            name: spec.name().unwrap_or(spec.kind()).to_string(),
            kind: spec.kind().to_string(),
            seed: eseed,
            report,
            csv_rows: out.rows.len(),
            wall_time_secs: t0.elapsed().as_secs_f64(),
        });
        rows.extend(out.rows);
    }
    let csv = if cfg.experiments.is_empty() {
        None
    } else {
        write_csv(fs::File::create(out_dir.join(CSV_FILE))?, &rows)?;
        Some(CSV_FILE.to_string())
    };
    let manifest = Manifest {
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        replicas,
        threads: rayon::current_num_threads(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        csv,
        experiments: entries,
    };
    fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn run_experiment(config: &Path, out_dir: &Path, seed: u64) -> Result<Manifest> {
    let src = fs::read_to_string(config)?;
    run_experiment_str(&src, out_dir, seed)
}

/// Default artifact directory for a config: `<stem>-out` next to it.
pub fn default_out_dir(config: &Path) -> PathBuf {
    let stem = config.file_stem().map_or_else(|| "experiment".into(), |s| s.to_string_lossy().into_owned());
    config.with_file_name(format!("{stem}-out"))
}
