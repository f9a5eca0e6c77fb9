use anyhow::Result;
use dexsim::chain::ExecOrder;
use dexsim::harness::{replay_roots, run_checked, CheckReport, ScenarioConfig};
use rayon::prelude::*;

use crate::{FuzzArgs, Orders, Outcome};

struct SeedRun {
    seed: u64,
    /// One report per execution order, generation order first.
    reports: Vec<(ExecOrder, CheckReport)>,
    committed: usize,
    rejected: usize,
}

fn one(config: &ScenarioConfig, orders: Orders) -> SeedRun {
    let first = run_checked(config).expect("config validated");
    let mut reports = vec![(config.order, first.report.clone())];
    if orders == Orders::Both {
        let other = config.order.other();
        reports.push((other, replay_roots(config, &first, other).report));
    }
    SeedRun {
        seed: config.seed,
        reports,
        committed: first.committed_blocks(),
        rejected: first.rejected_attempts(),
    }
}

pub fn fuzz(a: FuzzArgs) -> Result<Outcome> {
    let mut base = a.gen.config()?;
    match a.order {
        Orders::Dfs => base.order = ExecOrder::DepthFirst,
        Orders::Bfs => base.order = ExecOrder::BreadthFirst,
        Orders::Both => {}
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build()?;
    let first_seed = base.seed;
    let runs: Vec<SeedRun> = pool.install(|| {
        (0..a.runs)
            .into_par_iter()
            .map(|i| one(&ScenarioConfig { seed: first_seed.wrapping_add(i), ..base.clone() }, a.order))
            .collect()
    });

    let mut report = CheckReport::default();
    let (mut committed, mut rejected) = (0, 0);
    for r in &runs {
        for (_, rep) in &r.reports {
            report.merge(rep);
        }
        committed += r.committed;
        rejected += r.rejected;
    }
    let orders: Vec<_> = crate::orders(a.order).iter().map(ToString::to_string).collect();
    println!(
        "fuzz: {} seeds from {}, {} blocks, order {}, mutation {}",
        a.runs,
        first_seed,
        base.blocks,
        orders.join("+"),
        base.mutation.map_or("none".to_string(), |m| m.to_string()),
    );
    println!("committed blocks {committed}, rejected attempts {rejected}");
    print!("{report}");
    if report.passed() {
        return Ok(Outcome::Ok);
    }
    let failing = runs
        .iter()
        .find_map(|r| r.reports.iter().find(|(_, rep)| !rep.passed()).map(|(o, rep)| (r.seed, *o, rep)));
    if let Some((seed, under, rep)) = failing {
        let prefix = rep
            .entries
            .values()
            .filter_map(|e| e.first.as_ref()?.replay)
            .map(|r| r.prefix)
            .min()
            .unwrap_or(0);
        let mut cmd = format!("dexsim replay --seed {seed} --prefix {prefix} --order {} --under {under}", base.order);
        if let Some(m) = base.mutation {
            cmd.push_str(&format!(" --mutation {m}"));
        }
        if let Some(p) = &a.gen.config {
            cmd.push_str(&format!(" --config {}", p.display()));
        }
        println!("reproduce: {cmd}");
    }
    Ok(Outcome::CheckFailed)
}
