//! The execution environment: balances, deployed contracts, the pending
//! action queue and the executed-event log.
//!
//! A [`ChainState`] is a value. [`ChainState::add_block`] returns a new
//! state and never mutates its input, so a rejected block hands back the
//! untouched pre-block state.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contract::ContractRef;
use crate::payload::Payload;
use crate::primitives::{Address, Tez};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Chain {
    pub chain_height: u64,
    pub current_slot: u64,
    pub finalized_height: u64,
}

/// Data about the call being executed. `contract_balance` already includes
/// `amount`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallContext {
    pub origin: Address,
    pub from: Address,
    pub contract_address: Address,
    pub contract_balance: Tez,
    pub amount: Tez,
}

#[derive(Clone)]
pub enum ActionBody {
    Transfer {
        to: Address,
        amount: Tez,
    },
    /// A call to a user address is only valid with a `unit` payload and is
    /// then delivered as a plain transfer.
    Call {
        to: Address,
        amount: Tez,
        payload: Payload,
    },
    Deploy {
        amount: Tez,
        code: ContractRef,
        setup: Payload,
    },
}

impl ActionBody {
    pub fn amount(&self) -> &Tez {
        match self {
            ActionBody::Transfer { amount, .. }
            | ActionBody::Call { amount, .. }
            | ActionBody::Deploy { amount, .. } => amount,
        }
    }

    pub fn target(&self) -> Option<Address> {
        match self {
            ActionBody::Transfer { to, .. } | ActionBody::Call { to, .. } => Some(*to),
            ActionBody::Deploy { .. } => None,
        }
    }

    pub fn payload(&self) -> Option<&Payload> {
        match self {
            ActionBody::Call { payload, .. } => Some(payload),
            _ => None,
        }
    }
}

impl fmt::Debug for ActionBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionBody::Transfer { to, amount } => write!(f, "Transfer({to}, {amount})"),
            ActionBody::Call {
                to,
                amount,
                payload,
            } => write!(f, "Call({to}, {amount}, {payload})"),
            ActionBody::Deploy {
                amount,
                code,
                setup,
            } => write!(f, "Deploy({}, {amount}, {setup})", code.name()),
        }
    }
}

impl PartialEq for ActionBody {
    fn eq(&self, other: &Self) -> bool {
        use ActionBody::*;
        match (self, other) {
            (Transfer { to: a, amount: x }, Transfer { to: b, amount: y }) => a == b && x == y,
            (
                Call {
                    to: a,
                    amount: x,
                    payload: p,
                },
                Call {
                    to: b,
                    amount: y,
                    payload: q,
                },
            ) => a == b && x == y && p == q,
            (
                Deploy {
                    amount: x,
                    code: c,
                    setup: s,
                },
                Deploy {
                    amount: y,
                    code: d,
                    setup: t,
                },
            ) => x == y && c.name() == d.name() && s == t,
            _ => false,
        }
    }
}

impl Eq for ActionBody {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub origin: Address,
    pub from: Address,
    pub body: ActionBody,
}

impl Action {
    /// A root action sent by a user.
    pub fn user(from: Address, body: ActionBody) -> Self {
        Action {
            origin: from,
            from,
            body,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            ActionBody::Transfer { to, amount } => write!(f, "{} -> {to} transfer {amount}", self.from),
            ActionBody::Call { to, amount, payload } => write!(f, "{} -> {to} call {amount} {payload}", self.from),
            ActionBody::Deploy { amount, code, setup } => {
                write!(f, "{} deploy {} {amount} {setup}", self.from, code.name())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeployEvent {
    pub at: Address,
    pub by: Address,
    pub amount: Tez,
    pub code: String,
    pub setup: Payload,
}

/// An executed transfer or call. `payload` is `None` for plain transfers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxEvent {
    pub from: Address,
    pub to: Address,
    pub amount: Tez,
    pub payload: Option<Payload>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Deployed(DeployEvent),
    Tx(TxEvent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecOrder {
    #[serde(rename = "dfs")]
    DepthFirst,
    #[serde(rename = "bfs")]
    BreadthFirst,
}

impl ExecOrder {
    pub const BOTH: [ExecOrder; 2] = [ExecOrder::DepthFirst, ExecOrder::BreadthFirst];

    pub fn other(self) -> Self {
        match self {
            ExecOrder::DepthFirst => ExecOrder::BreadthFirst,
            ExecOrder::BreadthFirst => ExecOrder::DepthFirst,
        }
    }
}

impl FromStr for ExecOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dfs" => Ok(ExecOrder::DepthFirst),
            "bfs" => Ok(ExecOrder::BreadthFirst),
            _ => Err(format!("unknown order `{s}` (expected dfs or bfs)")),
        }
    }
}

impl fmt::Display for ExecOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecOrder::DepthFirst => "dfs",
            ExecOrder::BreadthFirst => "bfs",
        })
    }
}

/// Why a single action could not be executed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FailureReason {
    #[error("{addr} holds {available} but must pay {needed}")]
    InsufficientBalance {
        addr: Address,
        needed: Tez,
        available: Tez,
    },
    #[error("no contract deployed at {0}")]
    NoContract(Address),
    #[error("call with a non-unit payload to user address {0}")]
    CallToUser(Address),
    #[error("contract at {0} rejected the call")]
    ContractRejected(Address),
    #[error("contract init rejected the deployment")]
    InitRejected,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlockErrorKind {
    #[error("action {step} (from root action {root}) failed: {reason}")]
    ActionFailed {
        root: usize,
        step: usize,
        reason: FailureReason,
    },
    #[error("root action {index} is not sent by its user origin")]
    InvalidRoot { index: usize },
}

/// A rejected block. `state` is the input state, unchanged.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{kind}")]
pub struct BlockError {
    pub kind: BlockErrorKind,
    pub state: Box<ChainState>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetupError {
    #[error("address {0} listed twice")]
    DuplicateAddress(Address),
    #[error("initial account {0} is not a user address")]
    ContractAddress(Address),
}

/// What an execution observer sees: the state right after `executed` ran
/// (or, for step 0, the freshly queued block before anything ran).
pub struct StepView<'a> {
    pub step: usize,
    pub root: Option<usize>,
    pub executed: Option<&'a Action>,
    pub state: &'a ChainState,
}

#[derive(Clone)]
pub struct ChainState {
    chain: Chain,
    balances: BTreeMap<Address, Tez>,
    contracts: BTreeMap<Address, ContractRef>,
    states: BTreeMap<Address, Payload>,
    queue: VecDeque<Action>,
    queue_roots: VecDeque<usize>,
    log: Vec<Event>,
    // Indices into `log`, kept separately from it: calls delivered to each
    // contract, and transfers/calls emitted by each address.
    received: BTreeMap<Address, Vec<usize>>,
    sent: BTreeMap<Address, Vec<usize>>,
    next_contract: u64,
    minted: Tez,
}

impl ChainState {
    pub fn empty_chain(initial_users: &[(Address, Tez)]) -> Result<Self, SetupError> {
        let mut balances = BTreeMap::new();
        let mut minted = Tez::zero();
        for (addr, amount) in initial_users {
            if !addr.is_user() {
                return Err(SetupError::ContractAddress(*addr));
            }
            if balances.insert(*addr, amount.clone()).is_some() {
                return Err(SetupError::DuplicateAddress(*addr));
            }
            minted += amount;
        }
        Ok(ChainState {
            chain: Chain::default(),
            balances,
            contracts: BTreeMap::new(),
            states: BTreeMap::new(),
            queue: VecDeque::new(),
            queue_roots: VecDeque::new(),
            log: Vec::new(),
            received: BTreeMap::new(),
            sent: BTreeMap::new(),
            next_contract: 1,
            minted,
        })
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn env_balance(&self, addr: &Address) -> Tez {
        self.balances.get(addr).cloned().unwrap_or_default()
    }

    pub fn balances(&self) -> &BTreeMap<Address, Tez> {
        &self.balances
    }

    pub fn contract_state(&self, addr: &Address) -> Option<&Payload> {
        self.states.get(addr)
    }

    pub fn contract_code(&self, addr: &Address) -> Option<&ContractRef> {
        self.contracts.get(addr)
    }

    pub fn contract_addresses(&self) -> impl Iterator<Item = &Address> {
        self.contracts.keys()
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn queue(&self) -> &VecDeque<Action> {
        &self.queue
    }

    /// Total tez ever credited from outside the chain.
    pub fn minted(&self) -> &Tez {
        &self.minted
    }

    pub fn total_balance(&self) -> Tez {
        self.balances.values().cloned().sum()
    }

    /// Credits a user account from outside the chain (faucet).
    pub fn fund(&mut self, addr: Address, amount: &Tez) -> Result<(), SetupError> {
        if !addr.is_user() {
            return Err(SetupError::ContractAddress(addr));
        }
        *self.balances.entry(addr).or_default() += amount;
        self.minted += amount;
        Ok(())
    }

    /// The address the next deployment will receive.
    pub fn next_contract_address(&self) -> Address {
        Address::contract(self.next_contract)
    }

    pub fn deployment_info(&self, addr: &Address) -> Option<&DeployEvent> {
        self.log.iter().find_map(|e| match e {
            Event::Deployed(d) if d.at == *addr => Some(d),
            _ => None,
        })
    }

    /// Executed calls delivered to `to` whose sender was `from`.
    pub fn incoming_calls(&self, from: &Address, to: &Address) -> Vec<&TxEvent> {
        self.indexed_txs(self.received.get(to))
            .filter(|tx| tx.from == *from)
            .collect()
    }

    /// Executed transfers and calls emitted by `from` towards `to`.
    pub fn outgoing_txs(&self, from: &Address, to: &Address) -> Vec<&TxEvent> {
        self.indexed_txs(self.sent.get(from))
            .filter(|tx| tx.to == *to)
            .collect()
    }

    fn indexed_txs<'a>(
        &'a self,
        indices: Option<&'a Vec<usize>>,
    ) -> impl Iterator<Item = &'a TxEvent> + 'a {
        indices
            .into_iter()
            .flatten()
            .filter_map(move |&i| match &self.log[i] {
                Event::Tx(tx) => Some(tx),
                Event::Deployed(_) => None,
            })
    }

    /// Pending actions emitted by `from`. Non-empty only mid-block.
    pub fn outgoing_acts(&self, from: &Address) -> Vec<&Action> {
        self.queue.iter().filter(|a| a.from == *from).collect()
    }

    pub fn add_block(&self, roots: Vec<Action>, order: ExecOrder) -> Result<ChainState, BlockError> {
        self.add_block_observed(roots, order, &mut |_| {})
    }

    /// Like [`add_block`](Self::add_block), reporting every intermediate
    /// state to `observer`. Observed states of a rejected block are not
    /// reachable states.
    pub fn add_block_observed(
        &self,
        roots: Vec<Action>,
        order: ExecOrder,
        observer: &mut dyn FnMut(&StepView<'_>),
    ) -> Result<ChainState, BlockError> {
        let reject = |kind| BlockError {
            kind,
            state: Box::new(self.clone()),
        };
        for (index, a) in roots.iter().enumerate() {
            if !a.origin.is_user() || a.from != a.origin {
                return Err(reject(BlockErrorKind::InvalidRoot { index }));
            }
        }

        let mut next = self.clone();
        next.chain.finalized_height = next.chain.chain_height;
        next.chain.chain_height += 1;
        next.chain.current_slot += 1;
        next.queue_roots.extend(0..roots.len());
        next.queue.extend(roots);
        observer(&StepView {
            step: 0,
            root: None,
            executed: None,
            state: &next,
        });

        let mut step = 0;
        while let Some(action) = next.queue.pop_front() {
            let root = next.queue_roots.pop_front().unwrap_or_default();
            step += 1;
            let emitted = match next.execute_action(&action) {
                Ok(e) => e,
                Err(reason) => {
                    return Err(reject(BlockErrorKind::ActionFailed {
                        root,
                        step: step - 1,
                        reason,
                    }))
                }
            };
            let emitted = emitted.into_iter().map(|body| Action {
                origin: action.origin,
                // Only receive emits actions, so the emitter is the target.
                from: action.body.target().unwrap_or(action.from),
                body,
            });
            match order {
                ExecOrder::DepthFirst => {
                    let emitted: Vec<_> = emitted.collect();
                    for a in emitted.into_iter().rev() {
                        next.queue.push_front(a);
                        next.queue_roots.push_front(root);
                    }
                }
                ExecOrder::BreadthFirst => {
                    for a in emitted {
                        next.queue.push_back(a);
                        next.queue_roots.push_back(root);
                    }
                }
            }
            observer(&StepView {
                step,
                root: Some(root),
                executed: Some(&action),
                state: &next,
            });
        }
        Ok(next)
    }

    fn debit(&mut self, addr: Address, amount: &Tez) -> Result<(), FailureReason> {
        let available = self.env_balance(&addr);
        let rest = available
            .checked_sub(amount)
            .ok_or(FailureReason::InsufficientBalance {
                addr,
                needed: amount.clone(),
                available,
            })?;
        self.balances.insert(addr, rest);
        Ok(())
    }

    fn credit(&mut self, addr: Address, amount: &Tez) {
        *self.balances.entry(addr).or_default() += amount;
    }

    fn push_tx(&mut self, tx: TxEvent, delivered: bool) {
        let idx = self.log.len();
        self.sent.entry(tx.from).or_default().push(idx);
        if delivered {
            self.received.entry(tx.to).or_default().push(idx);
        }
        self.log.push(Event::Tx(tx));
    }

    /// Runs one action and returns the bodies it emitted.
    fn execute_action(&mut self, action: &Action) -> Result<Vec<ActionBody>, FailureReason> {
        match &action.body {
            ActionBody::Transfer { to, amount } => self.deliver(action, *to, amount, None),
            ActionBody::Call {
                to,
                amount,
                payload,
            } => {
                if to.is_user() {
                    if *payload != Payload::Unit {
                        return Err(FailureReason::CallToUser(*to));
                    }
                    self.deliver(action, *to, amount, None)
                } else {
                    self.deliver(action, *to, amount, Some(payload))
                }
            }
            ActionBody::Deploy {
                amount,
                code,
                setup,
            } => {
                self.debit(action.from, amount)?;
                let at = Address::contract(self.next_contract);
                self.next_contract += 1;
                self.credit(at, amount);
                let ctx = CallContext {
                    origin: action.origin,
                    from: action.from,
                    contract_address: at,
                    contract_balance: self.env_balance(&at),
                    amount: amount.clone(),
                };
                let state = code
                    .init(&self.chain, &ctx, setup)
                    .ok_or(FailureReason::InitRejected)?;
                self.contracts.insert(at, code.clone());
                self.states.insert(at, state);
                self.log.push(Event::Deployed(DeployEvent {
                    at,
                    by: action.from,
                    amount: amount.clone(),
                    code: code.name().to_string(),
                    setup: setup.clone(),
                }));
                Ok(Vec::new())
            }
        }
    }

    fn deliver(
        &mut self,
        action: &Action,
        to: Address,
        amount: &Tez,
        msg: Option<&Payload>,
    ) -> Result<Vec<ActionBody>, FailureReason> {
        let code = if to.is_contract() {
            Some(
                self.contracts
                    .get(&to)
                    .cloned()
                    .ok_or(FailureReason::NoContract(to))?,
            )
        } else {
            None
        };
        self.debit(action.from, amount)?;
        self.credit(to, amount);
        self.push_tx(
            TxEvent {
                from: action.from,
                to,
                amount: amount.clone(),
                payload: msg.cloned(),
            },
            code.is_some(),
        );
        let Some(code) = code else {
            return Ok(Vec::new());
        };
        let ctx = CallContext {
            origin: action.origin,
            from: action.from,
            contract_address: to,
            contract_balance: self.env_balance(&to),
            amount: amount.clone(),
        };
        let state = &self.states[&to];
        let (new_state, emitted) = code
            .receive(&self.chain, &ctx, state, msg)
            .ok_or(FailureReason::ContractRejected(to))?;
        self.states.insert(to, new_state);
        Ok(emitted)
    }

    /// Deterministic textual rendering of the whole state.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let c = &self.chain;
        let _ = writeln!(
            out,
            "chain height={} slot={} finalized={} next={} minted={}",
            c.chain_height, c.current_slot, c.finalized_height, self.next_contract, self.minted
        );
        for (a, b) in &self.balances {
            let _ = writeln!(out, "balance {a} {b}");
        }
        for (a, code) in &self.contracts {
            let _ = writeln!(out, "contract {a} {} {}", code.name(), self.states[a]);
        }
        for a in &self.queue {
            let _ = writeln!(out, "queued {} {} {:?}", a.origin, a.from, a.body);
        }
        for e in &self.log {
            let _ = writeln!(out, "event {e:?}");
        }
        out
    }

    /// SHA-256 of [`dump`](Self::dump), hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.dump().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Every address the state knows about.
    pub fn known_addresses(&self) -> BTreeSet<Address> {
        self.balances
            .keys()
            .chain(self.contracts.keys())
            .copied()
            .collect()
    }
}

impl fmt::Debug for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

impl PartialEq for ChainState {
    fn eq(&self, other: &Self) -> bool {
        self.dump() == other.dump()
    }
}

impl Eq for ChainState {}
