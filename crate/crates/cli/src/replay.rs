use anyhow::{bail, Result};
use clap::Args;
use dexsim::chain::ExecOrder;
use dexsim::harness::{replay_captured, run_captured, Capture, ScenarioConfig};

use crate::{GenArgs, Outcome};

#[derive(Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    gen: GenArgs,
    /// Number of generated blocks to rerun; the last one is shown in detail.
    #[arg(long)]
    prefix: usize,
    /// Order the trace was generated under.
    #[arg(long, default_value = "dfs")]
    order: ExecOrder,
    /// Order to re-execute the generated root actions under (default: `--order`).
    #[arg(long)]
    under: Option<ExecOrder>,
}

pub fn replay(a: ReplayArgs) -> Result<Outcome> {
    let full = a.gen.config()?;
    if a.prefix > full.blocks {
        bail!("prefix {} is beyond the trace ({} blocks)", a.prefix, full.blocks);
    }
    let config = ScenarioConfig { blocks: a.prefix, order: a.order, ..full };
    // Prefix 0 shows the wiring block.
    let capture = match a.prefix.checked_sub(1) {
        Some(last) => Capture::FromBlock(last),
        None => Capture::Everything,
    };
    let under = a.under.unwrap_or(a.order);
    let trace = if under == a.order {
        run_captured(&config, capture)?
    } else {
        let generated = run_captured(&config, Capture::Nothing)?;
        replay_captured(&config, &generated, under, capture)
    };

    println!("replay: seed {} prefix {} order {} under {}", config.seed, a.prefix, a.order, under);
    let mut base: Option<&dexsim::ChainState> = None;
    for snap in &trace.snapshots {
        match &snap.executed {
            None => {
                println!("{}: block queued", snap.at);
                base = Some(&snap.state);
                continue;
            }
            Some(action) => println!("{}: {action}", snap.at),
        }
        if let Some(prev) = base {
            for line in diff(&prev.dump(), &snap.state.dump()) {
                println!("    {line}");
            }
        }
        base = Some(&snap.state);
    }
    if let Some(block) = trace.blocks.last() {
        for attempt in &block.attempts {
            match &attempt.outcome {
                Ok(()) => println!("attempt committed"),
                Err(kind) => println!("attempt rejected: {kind}"),
            }
        }
    }
    print!("{}", trace.report);
    Ok(if trace.report.passed() { Outcome::Ok } else { Outcome::CheckFailed })
}

/// Lines only in `old` (`-`) or only in `new` (`+`). Dumps are sorted by
/// key, so a set difference is enough.
fn diff(old: &str, new: &str) -> Vec<String> {
    use std::collections::BTreeSet;
    let a: BTreeSet<&str> = old.lines().filter(|l| !l.starts_with("event ")).collect();
    let b: BTreeSet<&str> = new.lines().filter(|l| !l.starts_with("event ")).collect();
    let mut out: Vec<String> = a.difference(&b).map(|l| format!("- {l}")).collect();
    out.extend(b.difference(&a).map(|l| format!("+ {l}")));
    out
}
