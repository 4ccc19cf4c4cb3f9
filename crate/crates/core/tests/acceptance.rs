//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use routerplace::annealer::{anneal, metropolis_accept};
use routerplace::cli::{
    anneal_shipped, cmd_scan, cmd_simulate, cmd_table3, Mode, ScanArgs, SimulateArgs, Table3Args, TABLE3_ROWS,
};
use routerplace::distributed::run_distributed;
use routerplace::scenario;
use routerplace::NodeId;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

fn table3_reproduction() -> Check {
    let rows = routerplace::cli::table3(None).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &rows {
        let row_ok = r.worst_deviation() <= 0.10 && r.spread() <= 0.02;
        ok &= row_ok;
        parts.push(format!(
            "noise {}: {:.5} vs {} (dev {:.1}%, spread {:.2}%)",
            r.noise,
            r.min(),
            r.target,
            100.0 * r.worst_deviation(),
            100.0 * r.spread()
        ));
    }
    verdict(ok, parts.join("; "))
}

fn initial_condition_independence() -> Check {
    let noise = 1.0;
    let mut costs = Vec::new();
    for (name, _, _) in TABLE3_ROWS {
        let mut sc = scenario::shipped(name)
            .unwrap()
            .map_err(|e| e.to_string())?
            .build()
            .map_err(|e| e.to_string())?;
        sc.params.p_n = noise;
        let out = anneal(&sc.initial, &sc.schedule, &sc.params, &sc.topology, sc.seed).map_err(|e| e.to_string())?;
        costs.push(out.best_cost);
    }
    let s = spread(&costs);
    verdict(
        costs.len() >= 4 && s <= 0.05,
        format!(
            "{} starts at noise {noise}: costs {:.5?}, spread {:.2}%",
            costs.len(),
            costs,
            100.0 * s
        ),
    )
}

fn centralized_distributed_agreement() -> Check {
    let (sc, best) = anneal_shipped("two_flow_table3_noise1", None, None).map_err(|e| e.to_string())?;
    let central = sc.topology.global_cost(&best, &sc.params).map_err(|e| e.to_string())?;
    let out = run_distributed(
        &sc.initial,
        &sc.params,
        &sc.controller,
        &sc.mobility,
        &sc.topology,
        sc.seed,
    )
    .map_err(|e| e.to_string())?;
    let dist = sc
        .topology
        .global_cost(&out.final_state, &sc.params)
        .map_err(|e| e.to_string())?;
    let gap = rel_err(dist, central);
    verdict(
        out.trace.converged && gap <= 0.02,
        format!(
            "annealer {central:.5}, distributed {dist:.5} after {} iterations, gap {:.2}%",
            out.trace.records.len(),
            100.0 * gap
        ),
    )
}

fn non_convex_surface(dir: &Path) -> Check {
    let args = ScanArgs {
        scenario: "two_flow_scan".into(),
        robots: vec![2, 5],
        samples: 101,
        out: dir.join("surface.csv"),
    };
    let r = cmd_scan(&args).map_err(|e| e.to_string())?;
    let mut heights: Vec<f64> = r.peaks.iter().map(|p| p.2).collect();
    heights.sort_by(f64::total_cmp);
    let distinct = heights.windows(2).filter(|w| rel_err(w[1], w[0]) > 1e-9).count() + usize::from(!heights.is_empty());
    verdict(
        r.peaks.len() >= 2 && distinct >= 2,
        format!(
            "{} strict maxima, {distinct} distinct heights, highest {:.5}, lowest {:.5}",
            r.peaks.len(),
            heights.last().unwrap_or(&0.0),
            heights.first().unwrap_or(&0.0)
        ),
    )
}

fn four_flow_symmetry() -> Check {
    let sc = scenario::shipped("four_flow_static")
        .unwrap()
        .map_err(|e| e.to_string())?
        .build()
        .map_err(|e| e.to_string())?;
    let out = run_distributed(
        &sc.initial,
        &sc.params,
        &sc.controller,
        &sc.mobility,
        &sc.topology,
        sc.seed,
    )
    .map_err(|e| e.to_string())?;
    let c = sc
        .topology
        .flow_costs(&out.final_state, &sc.params)
        .map_err(|e| e.to_string())?;
    let (a, b) = (
        rel_err(c[0], c[1]).max(rel_err(c[1], c[0])),
        rel_err(c[2], c[3]).max(rel_err(c[3], c[2])),
    );
    verdict(
        out.trace.converged && a <= 0.05 && b <= 0.05,
        format!(
            "flow costs {:.5?} after {} iterations; |1-2| {:.2}%, |3-4| {:.2}%",
            c,
            out.trace.records.len(),
            100.0 * a,
            100.0 * b
        ),
    )
}

fn mobility_tracking() -> Check {
    let sc = scenario::shipped("four_flow_mobile")
        .unwrap()
        .map_err(|e| e.to_string())?
        .build()
        .map_err(|e| e.to_string())?;
    let out = run_distributed(
        &sc.initial,
        &sc.params,
        &sc.controller,
        &sc.mobility,
        &sc.topology,
        sc.seed,
    )
    .map_err(|e| e.to_string())?;
    let recs = &out.trace.records;
    let start = sc.mobility.start_iteration;
    let before: Vec<_> = recs.iter().filter(|r| r.iteration < start).collect();
    let after: Vec<_> = recs.iter().filter(|r| r.iteration >= start).collect();
    let settled_before = before.last().is_some_and(|r| !r.robots_moved || r.cycle_detected);
    let frozen_before = before
        .windows(2)
        .rev()
        .take(5)
        .all(|w| w[0].flow_costs == w[1].flow_costs);
    let restarts: Vec<u64> = recs.iter().filter(|r| r.restarted).map(|r| r.iteration).collect();
    let resumed = restarts.iter().all(|&t| {
        recs.iter()
            .any(|r| r.iteration > t && r.iteration <= t + 2 && r.robots_moved)
    });
    let moving = after.iter().filter(|r| r.robots_moved).count();
    let mut distinct = Vec::new();
    for f in 0..sc.topology.flow_count() {
        let mut v: Vec<f64> = after.iter().map(|r| r.flow_costs[f]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        distinct.push(v.len());
    }
    let ok = settled_before
        && frozen_before
        && !restarts.is_empty()
        && resumed
        && moving > 0
        && distinct.iter().all(|&n| n > 1);
    verdict(
        ok,
        format!(
            "settled before iteration {start}: {settled_before}; restarts at {restarts:?}; robots moved in {moving}/{} later iterations; distinct per-flow costs {distinct:?}",
            after.len()
        ),
    )
}

fn oracle_equivalence() -> Check {
    let mut rng = rng(0xacce55);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let net = random_net(&mut rng, 4, 3, 20.0);
        let p = params(
            rng.gen_range(0.2..5.0),
            rng.gen_range(0.2..5.0),
            rng.gen_range(0.0..3.0),
        );
        worst = worst.max(worst_oracle_error(&net, &p));
    }
    let topo = cross([(-5.0, 0.0), (5.0, 0.0), (0.0, 5.0), (0.0, -5.0)]).topology();
    let table: [&[u32]; 6] = [
        &[3, 5, 6, 7],
        &[1, 5, 6, 7],
        &[1, 2, 5, 6, 7],
        &[1, 2, 3, 7],
        &[1, 2, 3, 5],
        &[1, 2, 3, 5, 6],
    ];
    let table_ok = topo.all_links().zip(table).all(|(l, want)| {
        let got: Vec<u32> = topo
            .interferers_of(l)
            .map(|ids| ids.iter().map(|n: &NodeId| n.0).collect())
            .unwrap_or_default();
        got == want
    });
    verdict(
        worst <= 1e-12 && table_ok,
        format!("1000 random states, worst relative error {worst:.2e}; interferer table match: {table_ok}"),
    )
}

fn metropolis_statistics() -> Check {
    let mut rng = rng(0x3e7);
    let trials = 100_000;
    let t = 0.05;
    let hits = (0..trials)
        .filter(|_| metropolis_accept(0.5, 0.5 - t, t, &mut rng))
        .count();
    let freq = hits as f64 / trials as f64;
    let want = (-1.0f64).exp();
    verdict(
        (freq - want).abs() <= 0.01,
        format!("frequency {freq:.4} vs {want:.4} over {trials} trials"),
    )
}

fn run_all_commands(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    for (name, mode) in [
        ("two_flow_table3_noise1", Mode::Centralized),
        ("two_flow_table3_noise1", Mode::Distributed),
        ("four_flow_mobile", Mode::Distributed),
    ] {
        let args = SimulateArgs {
            scenario: name.into(),
            mode,
            seed: Some(11),
            iterations: None,
            out: dir.to_path_buf(),
            trace_stride: 1,
        };
        cmd_simulate(&args).map_err(|e| e.to_string())?;
    }
    let scan = ScanArgs {
        scenario: "two_flow_scan".into(),
        robots: vec![2, 5],
        samples: 41,
        out: dir.join("surface.csv"),
    };
    cmd_scan(&scan).map_err(|e| e.to_string())?;
    cmd_table3(&Table3Args {
        out: dir.join("table3.csv"),
        seed: Some(11),
    })
    .map_err(|e| e.to_string())?;

    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            files.push((name, fs::read(&path).map_err(|e| e.to_string())?));
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_all_commands(a.path())?;
    let second = run_all_commands(b.path())?;
    let same = first == second;
    let names: Vec<_> = first.iter().map(|f| f.0.as_str()).collect();
    verdict(
        same && first.len() == 5,
        format!("{} output files compared: {}", first.len(), names.join(", ")),
    )
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("table3 reproduction", Box::new(table3_reproduction)),
        (
            "initial-condition independence",
            Box::new(initial_condition_independence),
        ),
        (
            "centralized/distributed agreement",
            Box::new(centralized_distributed_agreement),
        ),
        ("non-convex surface", Box::new(|| non_convex_surface(scratch.path()))),
        ("four-flow symmetry", Box::new(four_flow_symmetry)),
        ("mobility tracking", Box::new(mobility_tracking)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("metropolis statistics", Box::new(metropolis_statistics)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = check();
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
