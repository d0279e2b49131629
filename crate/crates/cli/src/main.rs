use std::io;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tri_ising::dynamics::{constants, DEFAULT_M};
use tri_ising::events::EventSpec;
use tri_ising::harness::estimate::{estimate_pair, estimate_static, McConfig, PairMode, DEFAULT_REPLICAS};
use tri_ising::harness::experiment::{default_out_dir, run_experiment, write_csv, CsvRow};
use tri_ising::harness::reports::{
    arm_table, cross_sweep, derivative_report, mixing_ratio_report, qm_report, ArmTable, DerivConfig, TimeAxis,
};
use tri_ising::harness::{init_threads, THREADS_ENV};
use tri_ising::oracle::run_exactness_suite;
use tri_ising::{ModelParams, Region};

#[derive(Parser)]
#[command(name = "tri-ising", version, about = "Ising heat-bath dynamics on the triangular lattice")]
struct Cli {
    /// Worker threads (defaults to $TRI_ISING_THREADS, then the core count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Mc {
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REPLICAS)]
    replicas: u64,
    /// cluster, exact, burnin or burnin:<sweeps>
    #[arg(long, default_value = "cluster")]
    method: String,
    /// Print JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

impl Mc {
    fn config(&self) -> Result<McConfig> {
        Ok(McConfig { trials: self.trials, seed: self.seed, replicas: self.replicas, method: self.method.parse()? })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print a, c_FE and tau for a given beta.
    Constants {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_M)]
        big_m: f64,
    },
    /// Estimate the equilibrium probability of an event.
    Static {
        #[arg(long)]
        event: EventSpec,
        #[arg(long)]
        beta: f64,
        /// Dynamics region, e.g. rhombus:0,0,16 (default: twice the event scale).
        #[arg(long)]
        frame: Option<Region>,
        #[command(flatten)]
        mc: Mc,
    },
    /// Estimate P(σ_0 ∈ A, σ_t ∈ B).
    Pair {
        #[arg(long)]
        event: EventSpec,
        /// Event at time t (default: same as --event).
        #[arg(long, conflicts_with = "time0_only")]
        event_t: Option<EventSpec>,
        #[arg(long)]
        time0_only: bool,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        frame: Option<Region>,
        #[command(flatten)]
        mc: Mc,
    },
    /// Four-arm probabilities alpha_n and eps_n.
    ArmTable {
        #[arg(long)]
        beta: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<u32>,
        #[command(flatten)]
        mc: Mc,
    },
    /// Two-time crossing probabilities over an (n, t) grid.
    Sweep {
        #[arg(long)]
        beta: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<u32>,
        #[arg(long, value_delimiter = ',', conflicts_with = "scaled_times")]
        times: Option<Vec<f64>>,
        /// Times in units of eps_n; needs --table.
        #[arg(long, value_delimiter = ',', requires = "table")]
        scaled_times: Option<Vec<f64>>,
        /// Arm table JSON written by `arm-table --json`.
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        mc: Mc,
    },
    /// Quasi-multiplicativity ratios for (k,m,n) triples.
    Qm {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        t: f64,
        /// k,m,n (repeatable)
        #[arg(long = "triple", value_parser = parse_triple, required = true)]
        triples: Vec<(u32, u32, u32)>,
        #[command(flatten)]
        mc: Mc,
    },
    /// Derivative of the two-time crossing probability, three ways.
    Deriv {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        fd_trials: Option<u64>,
        #[arg(long)]
        fd_step: Option<f64>,
        #[arg(long)]
        coupled_trials: Option<u64>,
        #[arg(long)]
        pivotal_trials: Option<u64>,
    },
    /// Decoupling ratio P(A)P(B)/P(A∩B) for two-time events.
    Mixing {
        #[arg(long)]
        beta: f64,
        /// Region carrying A, e.g. rhombus:0,0,4.
        #[arg(long)]
        inner: Region,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        a: EventSpec,
        #[arg(long)]
        b: EventSpec,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        frame: Option<Region>,
        #[command(flatten)]
        mc: Mc,
    },
    /// Exact checks on small regions.
    Oracle {
        #[arg(long)]
        beta: f64,
        /// Time for the short-time checks (default: tau).
        #[arg(long)]
        t_small: Option<f64>,
    },
    /// Run a TOML experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Artifact directory (default: <config stem>-out next to the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_triple(s: &str) -> std::result::Result<(u32, u32, u32), String> {
    let v: Vec<u32> =
        s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad triple `{s}`"))).collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [k, m, n] => Ok((k, m, n)),
        _ => Err(format!("expected k,m,n, got `{s}`")),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn print_rows(rows: Vec<CsvRow>) -> Result<()> {
    write_csv(io::stdout().lock(), &rows)?;
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads).with_context(|| format!("reading {THREADS_ENV}"))?;
    match cli.cmd {
        Cmd::Constants { beta, big_m } => print_json(&constants(ModelParams::new(beta)?, big_m)?),
        Cmd::Static { event, beta, frame, mc } => {
            let r = estimate_static(&event, frame, beta, &mc.config()?)?;
            if mc.json {
                print_json(&r)
            } else {
                print_rows(vec![CsvRow::from(&r)])
            }
        }
        Cmd::Pair { event, event_t, time0_only, beta, t, frame, mc } => {
            let mode = match (event_t, time0_only) {
                (Some(b), _) => PairMode::Mixed(b),
                (None, true) => PairMode::Time0Only,
                (None, false) => PairMode::Same,
            };
            let r = estimate_pair(&event, &mode, beta, t, frame, &mc.config()?)?;
            if mc.json {
                print_json(&r)
            } else {
                print_rows(vec![CsvRow::from(&r)])
            }
        }
        Cmd::ArmTable { beta, ns, mc } => {
            let tb = arm_table(beta, &ns, &mc.config()?)?;
            if mc.json {
                print_json(&tb)
            } else {
                for r in &tb.rows {
                    log::info!("n={} eps={:?}", r.n, tb.epsilon(r.n));
                }
                print_rows(tb.rows.iter().map(|r| CsvRow::from(&r.alpha)).collect())
            }
        }
        Cmd::Sweep { beta, ns, times, scaled_times, table, mc } => {
            let table: Option<ArmTable> = match &table {
                Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?),
                None => None,
            };
            let axis = match (times, scaled_times) {
                (Some(ts), None) => TimeAxis::Absolute(ts),
                (None, Some(ss)) => TimeAxis::Scaled(ss),
                _ => bail!("give exactly one of --times and --scaled-times"),
            };
            let res = cross_sweep(beta, &ns, &axis, table.as_ref(), &mc.config()?)?;
            if mc.json {
                print_json(&res)
            } else {
                print_rows(res.cells.iter().map(|c| CsvRow::from(&c.estimate)).collect())
            }
        }
        Cmd::Qm { beta, t, triples, mc } => print_json(&qm_report(beta, t, &triples, &mc.config()?)?),
        Cmd::Deriv { beta, n, t, seed, fd_trials, fd_step, coupled_trials, pivotal_trials } => {
            let mut dc = DerivConfig::new(seed);
            dc.fd_trials = fd_trials.unwrap_or(dc.fd_trials);
            dc.fd_step = fd_step.unwrap_or(dc.fd_step);
            dc.coupled_trials = coupled_trials.unwrap_or(dc.coupled_trials);
            dc.pivotal_trials = pivotal_trials.unwrap_or(dc.pivotal_trials);
            print_json(&derivative_report(beta, n, t, &dc)?)
        }
        Cmd::Mixing { beta, inner, delta, a, b, t, frame, mc } => {
            print_json(&mixing_ratio_report(beta, &inner, delta, &a, &b, t, frame, &mc.config()?)?)
        }
        Cmd::Oracle { beta, t_small } => {
            let t_small = match t_small {
                Some(t) => t,
                None => constants(ModelParams::new(beta)?, DEFAULT_M)?.tau,
            };
            let recs = run_exactness_suite(beta, t_small)?;
            let failed = recs.iter().filter(|r| !r.pass).count();
            print_json(&recs)?;
            if failed > 0 {
                bail!("{failed} oracle checks failed");
            }
            Ok(())
        }
        Cmd::Run { config, seed, out } => {
            let out = out.unwrap_or_else(|| default_out_dir(&config));
            let m = run_experiment(&config, &out, seed)?;
            eprintln!("{} experiments, artifacts in {}", m.experiments.len(), out.display());
            Ok(())
        }
    }
}
