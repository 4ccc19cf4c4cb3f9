//! Command implementations behind the `routerplace` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::annealer::{anneal, AnnealingSchedule};
use crate::distributed::run_distributed;
use crate::error::{Error, Result};
use crate::network::{NetworkState, NodeId, NodeRole};
use crate::scenario::{self, Scenario};
use crate::trace::{write_atomic, write_surface, write_trace, Surface, Trace};

#[derive(Debug, Parser)]
#[command(name = "routerplace", version, about = "Robotic router placement for max-min SINR")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a scenario and write its trace and report.
    Simulate(SimulateArgs),
    /// Sample the global cost with two robots slid along their flows.
    Scan(ScanArgs),
    /// Rerun the two-flow noise sweep and tabulate the final link SINRs.
    Table3(Table3Args),
    /// List the shipped scenarios, or print one.
    Scenarios {
        /// Print this scenario's TOML instead of listing names.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Centralized,
    Distributed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::Distributed => "distributed",
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct SimulateArgs {
    /// Scenario file, or the name of a shipped scenario.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Annealing iterations, or the controller's iteration cap.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Record every n-th iteration in the trace (the first and last are
    /// always kept).
    #[arg(long, default_value_t = 1)]
    pub trace_stride: u64,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub scenario: String,
    /// Two robot node ids from different flows, e.g. `2,4`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub robots: Vec<u32>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Surface file to write.
    #[arg(long, default_value = "surface.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Table3Args {
    /// Table file to write.
    #[arg(long, default_value = "table3.csv")]
    pub out: PathBuf,
    /// Overrides each scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub flow: usize,
    pub link: usize,
    pub tx: NodeId,
    pub rx: NodeId,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub iterations: u64,
    pub final_global_cost: f64,
    pub flow_costs: Vec<f64>,
    pub links: Vec<LinkReport>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub final_state: NetworkState,
    #[serde(skip)]
    pub trace_path: PathBuf,
}

/// Per-link SINRs of `state`, recomputed from scratch.
pub fn link_reports(sc: &Scenario, state: &NetworkState) -> Result<Vec<LinkReport>> {
    sc.topology
        .all_links()
        .map(|l| {
            Ok(LinkReport {
                flow: l.flow_id,
                link: l.index,
                tx: l.tx_node,
                rx: l.rx_node,
                sinr: sc.topology.link_sinr_in_state(l, state, &sc.params)?,
            })
        })
        .collect()
}

fn keep(iteration: u64, last: u64, stride: u64) -> bool {
    iteration == 0 || iteration == last || iteration.is_multiple_of(stride.max(1))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<RunReport> {
    let started = Instant::now();
    let doc = scenario::resolve(&args.scenario)?;
    let mut sc = doc.build()?;
    let seed = args.seed.unwrap_or(sc.seed);
    if let Some(n) = args.iterations {
        sc.schedule.iterations = n;
        sc.controller.max_iterations = n;
    }

    let mut trace = Trace::new(sc.topology.flow_count());
    trace.push_state(0, &sc.initial, &sc.topology.flow_costs(&sc.initial, &sc.params)?);
    let (final_state, iterations) = match args.mode {
        Mode::Centralized => {
            let out = anneal(&sc.initial, &sc.schedule, &sc.params, &sc.topology, seed)?;
            let last = out.trace.records.len() as u64;
            for r in &out.trace.records {
                if keep(r.iteration, last, args.trace_stride) {
                    trace.push_state(r.iteration, &r.state, &r.flow_costs);
                }
            }
            (out.best, last)
        }
        Mode::Distributed => {
            let out = run_distributed(
                &sc.initial,
                &sc.params,
                &sc.controller,
                &sc.mobility,
                &sc.topology,
                seed,
            )?;
            let last = out.trace.records.len() as u64;
            for r in &out.trace.records {
                if keep(r.iteration, last, args.trace_stride) {
                    trace.push_state(r.iteration, &r.state, &r.flow_costs);
                }
            }
            (out.final_state, last)
        }
    };

    let links = link_reports(&sc, &final_state)?;
    let flow_costs = sc.topology.flow_costs(&final_state, &sc.params)?;
    let final_global_cost = flow_costs.iter().copied().fold(f64::INFINITY, f64::min);

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let stem = format!("{}_{}", sc.name, args.mode.as_str());
    let trace_path = args.out.join(format!("{stem}_trace.csv"));
    write_trace(&trace, &trace_path)?;

    let report = RunReport {
        scenario: sc.name.clone(),
        mode: args.mode,
        seed,
        iterations,
        final_global_cost,
        flow_costs,
        links,
        wall_time_s: started.elapsed().as_secs_f64(),
        final_state,
        trace_path,
    };
    let text = toml::to_string(&report).map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&args.out.join(format!("{stem}_report.toml")), text.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub surface: Surface,
    pub peaks: Vec<(usize, usize, f64)>,
}

/// Evenly spaced samples of `[0, 1]`; a single sample sits at the midpoint.
pub fn unit_samples(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Global cost with robot `a` at fraction `t_a` of its flow's tx->rx segment
/// and robot `b` at `t_b`; every other node stays at its initial position.
pub fn scan_surface(sc: &Scenario, a: NodeId, b: NodeId, samples: usize) -> Result<Surface> {
    if samples == 0 {
        return Err(Error::validation("samples", "must be >= 1"));
    }
    for id in [a, b] {
        if sc.topology.role(id)? != NodeRole::Robot {
            return Err(Error::validation("robots", format!("node {id} is not a robot")));
        }
    }
    let (fa, fb) = (sc.topology.flow_of(a)?, sc.topology.flow_of(b)?);
    if fa == fb {
        return Err(Error::validation(
            "robots",
            format!("nodes {a} and {b} are both in flow {fa}"),
        ));
    }
    let segment = |flow_id: usize| -> Result<_> {
        let f = sc.topology.flow(flow_id)?;
        Ok((sc.initial.position(f.tx)?, sc.initial.position(f.rx)?))
    };
    let (sa, sb) = (segment(fa)?, segment(fb)?);
    let ts = unit_samples(samples);

    let values = ts
        .par_iter()
        .map(|&ta| {
            let mut state = sc.initial.clone();
            state.set_position(a, sa.0.lerp(&sa.1, ta));
            ts.iter()
                .map(|&tb| {
                    state.set_position(b, sb.0.lerp(&sb.1, tb));
                    sc.topology.global_cost(&state, &sc.params)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Surface::new(ts.clone(), ts, values)
}

pub fn cmd_scan(args: &ScanArgs) -> Result<ScanReport> {
    let sc = scenario::resolve(&args.scenario)?.build()?;
    let [a, b] = args.robots[..] else {
        return Err(Error::validation("robots", "expected exactly two node ids"));
    };
    let surface = scan_surface(&sc, NodeId(a), NodeId(b), args.samples)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_surface(&surface, &args.out)?;
    let peaks = surface.strict_local_maxima();
    Ok(ScanReport { surface, peaks })
}

/// Shipped scenario and reference common link SINR for each noise row.
pub const TABLE3_ROWS: [(&str, f64, f64); 6] = [
    ("two_flow_table3_noise0_6", 0.6, 0.0327),
    ("two_flow_table3_noise1", 1.0, 0.0200),
    ("two_flow_table3_noise2", 2.0, 0.0108),
    ("two_flow_table3_noise3", 3.0, 0.0073),
    ("two_flow_table3_noise4", 4.0, 0.0055),
    ("two_flow_table3_noise10", 10.0, 0.0022),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Table3Result {
    pub scenario: String,
    pub noise: f64,
    pub target: f64,
    pub links: Vec<LinkReport>,
}

impl Table3Result {
    pub fn min(&self) -> f64 {
        self.links.iter().map(|l| l.sinr).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.links.iter().map(|l| l.sinr).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(max - min) / min` over the links.
    pub fn spread(&self) -> f64 {
        (self.max() - self.min()) / self.min()
    }

    /// Largest relative deviation of any link from the target.
    pub fn worst_deviation(&self) -> f64 {
        self.links
            .iter()
            .map(|l| ((l.sinr - self.target) / self.target).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs the annealer on one shipped scenario.
pub fn anneal_shipped(
    name: &str,
    seed: Option<u64>,
    schedule: Option<AnnealingSchedule>,
) -> Result<(Scenario, NetworkState)> {
    let doc = scenario::shipped(name)
        .ok_or_else(|| Error::validation("scenario", format!("no shipped scenario {name}")))??;
    let sc = doc.build()?;
    let schedule = schedule.unwrap_or(sc.schedule);
    let out = anneal(
        &sc.initial,
        &schedule,
        &sc.params,
        &sc.topology,
        seed.unwrap_or(sc.seed),
    )?;
    Ok((sc, out.best))
}

pub fn table3(seed: Option<u64>) -> Result<Vec<Table3Result>> {
    TABLE3_ROWS
        .par_iter()
        .map(|&(name, noise, target)| {
            let (sc, best) = anneal_shipped(name, seed, None)?;
            Ok(Table3Result {
                scenario: name.to_string(),
                noise,
                target,
                links: link_reports(&sc, &best)?,
            })
        })
        .collect()
}

pub fn write_table3(rows: &[Table3Result], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["noise".to_string(), "target".to_string()];
    if let Some(first) = rows.first() {
        header.extend(first.links.iter().map(|l| format!("link_{}_{}", l.tx, l.rx)));
    }
    header.extend(["min", "max", "spread", "within_10pct", "equal_within_2pct"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![format!("{}", r.noise), format!("{}", r.target)];
        rec.extend(r.links.iter().map(|l| crate::trace::fmt_real(l.sinr)));
        rec.push(crate::trace::fmt_real(r.min()));
        rec.push(crate::trace::fmt_real(r.max()));
        rec.push(crate::trace::fmt_real(r.spread()));
        rec.push((r.worst_deviation() <= 0.10).to_string());
        rec.push((r.spread() <= 0.02).to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn cmd_table3(args: &Table3Args) -> Result<Vec<Table3Result>> {
    let rows = table3(args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_table3(&rows, &args.out)?;
    Ok(rows)
}

/// Process exit status for an error: 3 parse, 4 validation, 5 runtime.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse(_) => 3,
        Error::Validation { .. } | Error::UnknownNode(_) | Error::UnknownFlow(_) | Error::MissingPosition(_) => 4,
        Error::UndefinedDenominator | Error::Io { .. } | Error::Csv(_) => 5,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => {
            let r = cmd_simulate(args)?;
            println!(
                "{} [{}] seed {} iterations {}: global min SINR {:.6} ({:.2}s)",
                r.scenario,
                r.mode.as_str(),
                r.seed,
                r.iterations,
                r.final_global_cost,
                r.wall_time_s
            );
            for l in &r.links {
                println!(
                    "  flow {} link {} ({} -> {}): {:.6}",
                    l.flow, l.link, l.tx, l.rx, l.sinr
                );
            }
            println!("trace: {}", r.trace_path.display());
        }
        Command::Scan(args) => {
            let r = cmd_scan(args)?;
            if let Some((i, j, v)) = r.surface.max() {
                println!(
                    "max {:.6} at ({:.3}, {:.3})",
                    v, r.surface.axis_a[i], r.surface.axis_b[j]
                );
            }
            println!("{} strict interior local maxima", r.peaks.len());
            for (i, j, v) in &r.peaks {
                println!("  ({:.3}, {:.3}): {:.6}", r.surface.axis_a[*i], r.surface.axis_b[*j], v);
            }
            println!("surface: {}", args.out.display());
        }
        Command::Table3(args) => {
            let rows = cmd_table3(args)?;
            println!(
                "{:>6} {:>8} {:>9} {:>9} {:>8}",
                "noise", "target", "min", "max", "spread"
            );
            for r in &rows {
                println!(
                    "{:>6} {:>8.4} {:>9.5} {:>9.5} {:>7.2}%",
                    r.noise,
                    r.target,
                    r.min(),
                    r.max(),
                    100.0 * r.spread()
                );
            }
            println!("table: {}", args.out.display());
        }
        Command::Scenarios { show } => match show {
            Some(name) => {
                let src = scenario::shipped_source(name)
                    .ok_or_else(|| Error::validation("scenario", format!("no shipped scenario {name}")))?;
                print!("{src}");
            }
            None => {
                for n in scenario::shipped_names() {
                    println!("{n}");
                }
            }
        },
    }
    Ok(())
}

/// Parses the process arguments and runs the command.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
