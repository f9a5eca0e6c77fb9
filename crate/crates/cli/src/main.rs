//! `dexsim`: run scripted scenarios, fuzz random traces, replay failures.
//!
//! Exit codes: 0 ok, 1 bad input or I/O, 2 an invariant failed,
//! 3 a block was rejected under `run --strict-blocks`.

mod fuzz;
mod replay;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dexsim::chain::ExecOrder;
use dexsim::contracts::Mutation;
use dexsim::harness::{Checker, ScenarioConfig};
use dexsim::scenario::Scenario;
use dexsim::trace::write_jsonl;

#[derive(Parser)]
#[command(name = "dexsim", version, about = "Message-passing chain simulator with a Dexter2 exchange")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a TOML scenario.
    Run(RunArgs),
    /// Generate random traces and check every invariant on them.
    Fuzz(FuzzArgs),
    /// Regenerate one trace up to a block and show what each action changed.
    Replay(replay::ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "dfs")]
    order: ExecOrder,
    /// Write JSONL trace records here (`-` for stdout).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Check invariants at every step.
    #[arg(long)]
    check: bool,
    /// Exit with 3 if any block is rejected.
    #[arg(long)]
    strict_blocks: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Orders {
    Both,
    Dfs,
    Bfs,
}

/// Generation settings shared by `fuzz` and `replay`. Flags override the
/// config file.
#[derive(Args)]
pub struct GenArgs {
    /// First seed.
    #[arg(long, env = "SIM_SEED")]
    seed: Option<u64>,
    /// Generated blocks per trace, bootstrap included.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long, value_parser = parse_mutation)]
    mutation: Option<Mutation>,
    /// TOML generator config.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl GenArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ScenarioConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(b) = self.blocks {
            c.blocks = b;
        }
        if self.mutation.is_some() {
            c.mutation = self.mutation;
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_mutation(s: &str) -> Result<Mutation, String> {
    s.parse()
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, default_value_t = 100)]
    runs: u64,
    #[arg(long, value_enum, default_value = "both")]
    order: Orders,
    /// Worker threads (0: one per core). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

/// Failures that map to a specific exit code.
#[derive(Debug)]
pub enum Outcome {
    Ok,
    CheckFailed,
    Rejected,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.cmd {
        Cmd::Run(a) => run(a),
        Cmd::Fuzz(a) => fuzz::fuzz(a),
        Cmd::Replay(a) => replay::replay(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(2),
        Ok(Outcome::Rejected) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(a: RunArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let scenario = Scenario::parse(&text).with_context(|| format!("in {}", a.scenario.display()))?;
    let mut checker = a.check.then(|| Checker::new(None));
    let run = scenario.run(a.order, checker.as_mut())?;

    let records = run.records(a.order);
    match a.trace_out.as_deref() {
        Some(p) if p.as_os_str() == "-" => write_jsonl(&mut io::stdout().lock(), &records)?,
        Some(p) => {
            let mut out = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            write_jsonl(&mut out, &records)?;
            out.flush()?;
        }
        None => {}
    }
    // Keep stdout clean for `--trace-out -`.
    let mut info: Box<dyn Write> = match a.trace_out.as_deref() {
        Some(p) if p.as_os_str() == "-" => Box::new(io::stderr()),
        _ => Box::new(io::stdout()),
    };
    for b in &run.blocks {
        match &b.outcome {
            Ok(()) => writeln!(info, "block {}: committed, {} events", b.index, b.log.len())?,
            Err(e) => writeln!(info, "block {}: rejected: {}", b.index, e.kind)?,
        }
    }
    if let Some(c) = checker {
        let report = c.finish();
        write!(info, "{report}")?;
        if !report.passed() {
            return Ok(Outcome::CheckFailed);
        }
    }
    if a.strict_blocks && run.rejected() > 0 {
        writeln!(info, "{} block(s) rejected", run.rejected())?;
        return Ok(Outcome::Rejected);
    }
    Ok(Outcome::Ok)
}

pub fn orders(o: Orders) -> &'static [ExecOrder] {
    match o {
        Orders::Both => &ExecOrder::BOTH,
        Orders::Dfs => &[ExecOrder::DepthFirst],
        Orders::Bfs => &[ExecOrder::BreadthFirst],
    }
}
