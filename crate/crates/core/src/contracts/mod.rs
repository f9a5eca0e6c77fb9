//! The Dexter2 contracts and the FA2 token they trade against.

pub mod cpmm;
pub mod fa12;
pub mod fa2;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contract::{erase, ContractRef};

/// Single-line faults that can be injected into the exchange contracts.
/// Used to check that the invariant checkers notice broken code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// `default` accepts tez without crediting `xtzPool`.
    SkipDefaultCredit,
    /// `xtz_to_token` ignores `minTokensBought`.
    DropMinTokensGuard,
    /// `add_liquidity` rounds the token deposit down.
    FloorTokensDeposited,
    /// FA1.2 `transfer` by a spender leaves the allowance untouched.
    SkipAllowanceDecrement,
    /// FA1.2 `mint_or_burn` accepts any caller.
    AnyoneMintsOrBurns,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::SkipDefaultCredit,
        Mutation::DropMinTokensGuard,
        Mutation::FloorTokensDeposited,
        Mutation::SkipAllowanceDecrement,
        Mutation::AnyoneMintsOrBurns,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mutation::SkipDefaultCredit => "skip_default_credit",
            Mutation::DropMinTokensGuard => "drop_min_tokens_guard",
            Mutation::FloorTokensDeposited => "floor_tokens_deposited",
            Mutation::SkipAllowanceDecrement => "skip_allowance_decrement",
            Mutation::AnyoneMintsOrBurns => "anyone_mints_or_burns",
        }
    }

    pub fn affects_cpmm(&self) -> bool {
        matches!(
            self,
            Mutation::SkipDefaultCredit | Mutation::DropMinTokensGuard | Mutation::FloorTokensDeposited
        )
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mutation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mutation `{s}`"))
    }
}

pub fn cpmm_code(mutation: Option<Mutation>) -> ContractRef {
    erase(cpmm::Cpmm::new(mutation.filter(Mutation::affects_cpmm)))
}

pub fn fa12_code(mutation: Option<Mutation>) -> ContractRef {
    erase(fa12::Fa12::new(mutation.filter(|m| !m.affects_cpmm())))
}

pub fn fa2_code() -> ContractRef {
    erase(fa2::Fa2)
}

/// Looks up contract code by the short names used in scenario files
/// (`cpmm`, `fa12`, `fa2`) or by full code name.
pub fn code_by_name(name: &str) -> Option<ContractRef> {
    match name {
        "cpmm" | cpmm::NAME => Some(cpmm_code(None)),
        "fa12" | fa12::NAME => Some(fa12_code(None)),
        "fa2" | fa2::NAME => Some(fa2_code()),
        _ => {
            let (base, m) = name.split_once('!')?;
            let m: Mutation = m.parse().ok()?;
            match base {
                "cpmm" | cpmm::NAME if m.affects_cpmm() => Some(cpmm_code(Some(m))),
                "fa12" | fa12::NAME if !m.affects_cpmm() => Some(fa12_code(Some(m))),
                _ => None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        assert_eq!(code_by_name("cpmm").unwrap().name(), "dexter2_cpmm");
        assert_eq!(code_by_name("fa12").unwrap().name(), "dexter2_fa12");
        assert_eq!(code_by_name("fa2").unwrap().name(), "fa2_ref");
        assert_eq!(
            code_by_name("cpmm!skip_default_credit").unwrap().name(),
            "dexter2_cpmm!skip_default_credit"
        );
        assert!(code_by_name("cpmm!anyone_mints_or_burns").is_none());
        assert!(code_by_name("nope").is_none());
        for m in Mutation::ALL {
            assert_eq!(m.as_str().parse::<Mutation>().unwrap(), m);
        }
    }
}
