use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// Every property the harness checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    /// Calls received by B from A are exactly the transactions A sent to B.
    IncomingOutgoing,
    /// `xtzPool` equals the exchange balance minus its pending outgoing tez.
    TezPool,
    /// The exchange never attempts to send more tez than it holds.
    NoOverdraft,
    /// Liquidity supply equals its initial pool plus admin mints and burns.
    LqtCondition,
    /// `lqtTotal` equals its initial value plus emitted mints and burns.
    MainCounter,
    /// With no mint/burn pending, `lqtTotal` equals the liquidity supply.
    LqtSupply,
    /// The composed and direct forms of `LqtSupply` agree.
    Decomposition,
    /// Trades never decrease `tokenPool * xtzPool`.
    ConstantProduct,
    /// Executed trades and liquidity moves respect their min/max/deadline.
    Bounds,
    /// Liquidity moves never dilute the pool value of a share.
    ShareValue,
    /// The liquidity ledger matches an independent replay of its history.
    Fa12Ledger,
    /// A rejected block leaves the chain state untouched.
    Atomicity,
}

impl Invariant {
    pub const ALL: [Invariant; 12] = [
        Invariant::IncomingOutgoing,
        Invariant::TezPool,
        Invariant::NoOverdraft,
        Invariant::LqtCondition,
        Invariant::MainCounter,
        Invariant::LqtSupply,
        Invariant::Decomposition,
        Invariant::ConstantProduct,
        Invariant::Bounds,
        Invariant::ShareValue,
        Invariant::Fa12Ledger,
        Invariant::Atomicity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Invariant::IncomingOutgoing => "incoming_outgoing",
            Invariant::TezPool => "tez_pool",
            Invariant::NoOverdraft => "no_overdraft",
            Invariant::LqtCondition => "lqt_condition",
            Invariant::MainCounter => "main_counter",
            Invariant::LqtSupply => "lqt_supply",
            Invariant::Decomposition => "decomposition",
            Invariant::ConstantProduct => "constant_product",
            Invariant::Bounds => "bounds",
            Invariant::ShareValue => "share_value",
            Invariant::Fa12Ledger => "fa12_ledger",
            Invariant::Atomicity => "atomicity",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a checker found wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub expected: String,
    pub actual: String,
}

impl Violation {
    pub fn new(subject: impl Into<String>, expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        Violation {
            subject: subject.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

/// Where a check ran. `block` is `None` for the wiring block of a
/// generated trace; `step` 0 is the freshly queued block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Location {
    pub block: Option<usize>,
    pub step: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.block {
            Some(b) => write!(f, "block {b} step {}", self.step),
            None => write!(f, "wiring step {}", self.step),
        }
    }
}

/// Seed and number of generated blocks that reproduce a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Replay {
    pub seed: u64,
    pub prefix: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub at: Location,
    pub violation: Violation,
    pub replay: Option<Replay>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub checks: u64,
    pub failures: u64,
    pub first: Option<Counterexample>,
}

impl Entry {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Per-invariant outcome of one or more runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub runs: u64,
    pub entries: BTreeMap<Invariant, Entry>,
}

impl CheckReport {
    pub fn new() -> Self {
        CheckReport {
            runs: 1,
            entries: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, inv: Invariant, at: Location, seed: Option<u64>, result: Result<(), Violation>) {
        let entry = self.entries.entry(inv).or_default();
        entry.checks += 1;
        if let Err(violation) = result {
            entry.failures += 1;
            if entry.first.is_none() {
                entry.first = Some(Counterexample {
                    at,
                    violation,
                    replay: seed.map(|seed| Replay {
                        seed,
                        prefix: at.block.map_or(0, |b| b + 1),
                    }),
                });
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.entries.values().all(Entry::passed)
    }

    pub fn entry(&self, inv: Invariant) -> Option<&Entry> {
        self.entries.get(&inv)
    }

    pub fn failed(&self, inv: Invariant) -> bool {
        self.entry(inv).is_some_and(|e| !e.passed())
    }

    pub fn failing(&self) -> impl Iterator<Item = (Invariant, &Entry)> {
        self.entries.iter().filter(|(_, e)| !e.passed()).map(|(i, e)| (*i, e))
    }

    /// Folds `other` in. The earliest counterexample of `self` wins.
    pub fn merge(&mut self, other: &CheckReport) {
        self.runs += other.runs;
        for (inv, e) in &other.entries {
            let mine = self.entries.entry(*inv).or_default();
            mine.checks += e.checks;
            mine.failures += e.failures;
            if mine.first.is_none() {
                mine.first = e.first.clone();
            }
        }
    }

    pub fn merged<'a>(reports: impl IntoIterator<Item = &'a CheckReport>) -> CheckReport {
        let mut out = CheckReport::default();
        for r in reports {
            out.merge(r);
        }
        out
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "runs: {}", self.runs)?;
        for (inv, e) in &self.entries {
            let verdict = if e.passed() { "PASS" } else { "FAIL" };
            write!(f, "{verdict} {inv:<17} checks={} failures={}", e.checks, e.failures)?;
            if let Some(c) = &e.first {
                write!(
                    f,
                    "\n     first at {}: {}: expected {}, got {}",
                    c.at, c.violation.subject, c.violation.expected, c.violation.actual
                )?;
                if let Some(r) = c.replay {
                    write!(f, "\n     replay: --seed {} --prefix {}", r.seed, r.prefix)?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_counterexample_is_kept() {
        let mut r = CheckReport::new();
        let at = |b| Location { block: Some(b), step: 1 };
        r.record(Invariant::TezPool, at(0), Some(7), Ok(()));
        r.record(Invariant::TezPool, at(3), Some(7), Err(Violation::new("x", 1, 2)));
        r.record(Invariant::TezPool, at(4), Some(7), Err(Violation::new("y", 1, 2)));
        let e = r.entry(Invariant::TezPool).unwrap();
        assert_eq!((e.checks, e.failures), (3, 2));
        let c = e.first.as_ref().unwrap();
        assert_eq!(c.violation.subject, "x");
        assert_eq!(c.replay, Some(Replay { seed: 7, prefix: 4 }));
        assert!(!r.passed());
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = CheckReport::new();
        a.record(Invariant::Bounds, Location { block: None, step: 0 }, None, Ok(()));
        let mut b = CheckReport::new();
        b.record(Invariant::Bounds, Location { block: None, step: 0 }, None, Err(Violation::new("z", 0, 1)));
        let m = CheckReport::merged([&a, &b]);
        assert_eq!(m.runs, 2);
        assert_eq!(m.entry(Invariant::Bounds).unwrap().failures, 1);
        assert!(m.to_string().contains("FAIL bounds"));
    }
}
