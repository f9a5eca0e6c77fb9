//! Scripted scenarios: TOML files listing blocks of root actions.
//!
//! ```toml
//! users = [{ name = "alice", balance = 1000000 }]
//!
//! [[block]]
//! [[block.action]]
//! type = "deploy"
//! from = "alice"
//! name = "token"
//! contract = "fa2"
//! setup = "{(@alice, 0) => 500}"
//! ```
//!
//! Users get `@u1`, `@u2`, ... in declaration order. Deployed contracts are
//! bound to their `name` once their block commits. Payload text may refer
//! to any bound name as `@name`.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::str::FromStr;

use serde::Deserialize;

use crate::chain::{Action, ActionBody, BlockError, ChainState, ExecOrder, SetupError};
use crate::contract::ContractRef;
use crate::contracts::code_by_name;
use crate::harness::Checker;
use crate::payload::Payload;
use crate::primitives::{Address, Tez};
use crate::trace::{block_records, TraceRecord};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub name: String,
    pub balance: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Deploy,
    Call,
    Transfer,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    #[serde(rename = "type")]
    pub kind: ActionKind,
    pub from: String,
    pub to: Option<String>,
    pub name: Option<String>,
    #[serde(default)]
    pub amount: u64,
    pub contract: Option<String>,
    pub setup: Option<String>,
    pub msg: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    #[serde(default, rename = "action")]
    pub actions: Vec<ActionSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub users: Vec<UserSpec>,
    /// Extra names for fixed addresses, e.g. `nobody = "@c0"`.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
    #[serde(default, rename = "block")]
    pub blocks: Vec<BlockSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Toml(String),
    #[error("name `{0}` is defined twice")]
    DuplicateName(String),
    #[error("alias `{name}`: {message}")]
    BadAlias { name: String, message: String },
    #[error("block {block} action {action}: {message}")]
    Action { block: usize, action: usize, message: String },
    #[error("block {block}: `{name}` is unbound because its deployment was rejected")]
    Unbound { block: usize, name: String },
    #[error(transparent)]
    Setup(#[from] SetupError),
}

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A parsed and statically checked scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    fixed: BTreeMap<String, Address>,
}

/// Outcome of one scripted block.
#[derive(Debug, Clone)]
pub struct BlockRun {
    pub index: usize,
    pub roots: Vec<Action>,
    /// The block's events in the final log; empty if it was rejected.
    pub log: Range<usize>,
    pub outcome: Result<(), BlockError>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub state: ChainState,
    pub blocks: Vec<BlockRun>,
    pub names: BTreeMap<String, Address>,
}

impl ScenarioRun {
    pub fn rejected(&self) -> usize {
        self.blocks.iter().filter(|b| b.outcome.is_err()).count()
    }

    /// Trace records of every block, in order.
    pub fn records(&self, order: ExecOrder) -> Vec<TraceRecord> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let outcome = b.outcome.as_ref().map(|_| ()).map_err(|e| &e.kind);
                block_records(b.index, order, &self.state, b.log.clone(), outcome)
            })
            .collect()
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Toml(e.to_string()))?;
        Self::new(file)
    }

    pub fn new(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let mut fixed = BTreeMap::new();
        let define = |name: &str, addr: Address, fixed: &mut BTreeMap<String, Address>| {
            if !valid_name(name) {
                return Err(ScenarioError::BadAlias { name: name.into(), message: "not an identifier".into() });
            }
            match fixed.insert(name.to_string(), addr) {
                Some(_) => Err(ScenarioError::DuplicateName(name.into())),
                None => Ok(()),
            }
        };
        for (i, u) in file.users.iter().enumerate() {
            define(&u.name, Address::user(i as u64 + 1), &mut fixed)?;
        }
        for (name, target) in &file.aliases {
            let addr = parse_address(target).ok_or_else(|| ScenarioError::BadAlias {
                name: name.clone(),
                message: format!("`{target}` is not an address"),
            })?;
            define(name, addr, &mut fixed)?;
        }
        let s = Scenario { file, fixed };
        s.check_names()?;
        Ok(s)
    }

    /// Every reference must name a user, an alias, a literal address or a
    /// contract deployed by an earlier action.
    fn check_names(&self) -> Result<(), ScenarioError> {
        let mut known: BTreeSet<String> = self.fixed.keys().cloned().collect();
        for (b, block) in self.file.blocks.iter().enumerate() {
            for (a, act) in block.actions.iter().enumerate() {
                let err = |message: String| ScenarioError::Action { block: b, action: a, message };
                let refer = |s: &str, known: &BTreeSet<String>| {
                    if known.contains(s) || parse_address(s).is_some() {
                        Ok(())
                    } else {
                        Err(err(format!("unknown name `{s}`")))
                    }
                };
                refer(&act.from, &known)?;
                // Distinct placeholders, so map keys naming different entities stay distinct.
                let dummy = |s: &str| known.iter().position(|k| k == s).map(|i| Address::contract(u64::MAX - i as u64));
                for text in [&act.setup, &act.msg].into_iter().flatten() {
                    Payload::parse_with(text, &dummy).map_err(|e| err(format!("payload: {e}")))?;
                }
                match act.kind {
                    ActionKind::Deploy => {
                        let contract = act.contract.as_deref().ok_or_else(|| err("deploy needs `contract`".into()))?;
                        code_by_name(contract).ok_or_else(|| err(format!("unknown contract `{contract}`")))?;
                        if act.setup.is_none() {
                            return Err(err("deploy needs `setup`".into()));
                        }
                        if act.to.is_some() || act.msg.is_some() {
                            return Err(err("deploy takes no `to` or `msg`".into()));
                        }
                        if let Some(name) = &act.name {
                            if !valid_name(name) {
                                return Err(err(format!("`{name}` is not an identifier")));
                            }
                            if !known.insert(name.clone()) {
                                return Err(ScenarioError::DuplicateName(name.clone()));
                            }
                        }
                    }
                    ActionKind::Call | ActionKind::Transfer => {
                        let to = act.to.as_deref().ok_or_else(|| err("needs `to`".into()))?;
                        refer(to, &known)?;
                        if act.contract.is_some() || act.setup.is_some() || act.name.is_some() {
                            return Err(err("only deploy takes `contract`, `setup` or `name`".into()));
                        }
                        match (act.kind, &act.msg) {
                            (ActionKind::Call, None) => return Err(err("call needs `msg`".into())),
                            (ActionKind::Transfer, Some(_)) => return Err(err("transfer takes no `msg`".into())),
                            _ => {}
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn genesis(&self) -> Result<ChainState, ScenarioError> {
        let users: Vec<_> = self
            .file
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| (Address::user(i as u64 + 1), Tez::from(u.balance)))
            .collect();
        Ok(ChainState::empty_chain(&users)?)
    }

    /// Resolves and executes every block in order. Rejected blocks are
    /// recorded; they do not stop the run. With a checker, every step and
    /// every committed state is checked.
    pub fn run(&self, order: ExecOrder, mut checker: Option<&mut Checker>) -> Result<ScenarioRun, ScenarioError> {
        let mut state = self.genesis()?;
        let mut names = self.fixed.clone();
        let mut blocks = Vec::new();
        for (b, block) in self.file.blocks.iter().enumerate() {
            let (roots, deployed) = self.resolve(b, block, &state, &names)?;
            let log_start = state.log().len();
            let result = state.add_block_observed(roots.clone(), order, &mut |view| {
                if let Some(c) = checker.as_deref_mut() {
                    c.on_step(Some(b), view);
                }
            });
            let outcome = match result {
                Ok(next) => {
                    if let Some(c) = checker.as_deref_mut() {
                        c.on_commit(Some(b), &next);
                    }
                    for (name, addr) in deployed {
                        let ok = matches!(next.deployment_info(&addr), Some(d) if d.at == addr);
                        debug_assert!(ok, "predicted deployment address");
                        names.insert(name, addr);
                    }
                    state = next;
                    Ok(())
                }
                Err(err) => {
                    if let Some(c) = checker.as_deref_mut() {
                        c.on_reject(Some(b), &state, &err);
                    }
                    Err(err)
                }
            };
            let log = log_start..state.log().len();
            blocks.push(BlockRun { index: b, roots, log, outcome });
        }
        Ok(ScenarioRun { state, blocks, names })
    }

    fn resolve(
        &self,
        b: usize,
        block: &BlockSpec,
        state: &ChainState,
        names: &BTreeMap<String, Address>,
    ) -> Result<Resolved, ScenarioError> {
        let mut local = names.clone();
        let mut next = state.next_contract_address().index;
        let mut roots = Vec::new();
        let mut deployed = Vec::new();
        for (a, act) in block.actions.iter().enumerate() {
            let err = |message: String| ScenarioError::Action { block: b, action: a, message };
            let lookup = |s: &str, local: &BTreeMap<String, Address>| {
                local
                    .get(s)
                    .copied()
                    .or_else(|| parse_address(s))
                    .ok_or_else(|| self.unbound(b, s))
            };
            let payload = |text: &str, local: &BTreeMap<String, Address>| {
                Payload::parse_with(text, &|s| local.get(s).copied()).map_err(|e| {
                    let bad = self.declared_deploy(&e.message);
                    bad.map_or_else(|| err(format!("payload: {e}")), |name| self.unbound(b, &name))
                })
            };
            let from = lookup(&act.from, &local)?;
            let amount = Tez::from(act.amount);
            let body = match act.kind {
                ActionKind::Deploy => {
                    let code: ContractRef = code_by_name(act.contract.as_deref().unwrap_or_default())
                        .ok_or_else(|| err("unknown contract".into()))?;
                    let setup = payload(act.setup.as_deref().unwrap_or_default(), &local)?;
                    let at = Address::contract(next);
                    next += 1;
                    if let Some(name) = &act.name {
                        local.insert(name.clone(), at);
                        deployed.push((name.clone(), at));
                    }
                    ActionBody::Deploy { amount, code, setup }
                }
                ActionKind::Call => ActionBody::Call {
                    to: lookup(act.to.as_deref().unwrap_or_default(), &local)?,
                    amount,
                    payload: payload(act.msg.as_deref().unwrap_or_default(), &local)?,
                },
                ActionKind::Transfer => ActionBody::Transfer {
                    to: lookup(act.to.as_deref().unwrap_or_default(), &local)?,
                    amount,
                },
            };
            roots.push(Action::user(from, body));
        }
        Ok((roots, deployed))
    }

    fn unbound(&self, block: usize, name: &str) -> ScenarioError {
        ScenarioError::Unbound { block, name: name.to_string() }
    }

    /// The deploy name an alias error refers to, if any.
    fn declared_deploy(&self, message: &str) -> Option<String> {
        self.file
            .blocks
            .iter()
            .flat_map(|b| &b.actions)
            .filter_map(|a| a.name.clone())
            .find(|n| message.ends_with(&format!("`@{n}`")))
    }
}

/// Root actions of a block and the names its deployments will bind.
type Resolved = (Vec<Action>, Vec<(String, Address)>);

/// `@u1`, `u1`, `@c3` or `c3`.
fn parse_address(s: &str) -> Option<Address> {
    let s = s.strip_prefix('@').unwrap_or(s);
    Address::from_str(&format!("@{s}")).ok()
}
