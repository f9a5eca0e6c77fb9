//! Invariant checkers. Each is a pure function of chain states; [`Checker`]
//! runs them over an execution and collects a [`CheckReport`].

use std::collections::BTreeMap;

use crate::chain::{Action, ActionBody, BlockError, ChainState, Event, StepView, TxEvent};
use crate::contracts::cpmm::{self, CpmmMsg, CpmmSetup, CpmmState, DexterMsg};
use crate::contracts::fa12::{self, minted_and_burned, Fa12Setup, Fa12State};
use crate::payload::Codec;
use crate::primitives::{Address, Int, Nat, Tez};

use super::fa12_model::Fa12Model;
use super::report::{CheckReport, Invariant, Location, Violation};

/// A deployed exchange, as found on chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub main: Address,
    pub token: Address,
    /// `None` until `set_lqt_address` has run.
    pub lqt: Option<Address>,
    /// `lqtTotal` the exchange was deployed with.
    pub initial_lqt_total: Nat,
}

/// A liquidity token verified to belong to its exchange: the exchange is
/// its admin and both started from the same amount of liquidity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub main: Address,
    pub lqt: Address,
    pub initial: Nat,
}

pub fn is_cpmm(code: &str) -> bool {
    code == cpmm::NAME || code.strip_prefix(cpmm::NAME).is_some_and(|r| r.starts_with('!'))
}

pub fn is_fa12(code: &str) -> bool {
    code == fa12::NAME || code.strip_prefix(fa12::NAME).is_some_and(|r| r.starts_with('!'))
}

pub fn decode_at<T: Codec>(state: &ChainState, addr: &Address) -> Option<T> {
    T::decode(state.contract_state(addr)?)
}

pub fn discover_exchanges(state: &ChainState) -> Vec<Exchange> {
    let mut out = Vec::new();
    for e in state.log() {
        let Event::Deployed(d) = e else { continue };
        if !is_cpmm(&d.code) {
            continue;
        }
        let (Some(setup), Some(s)) = (CpmmSetup::decode(&d.setup), decode_at::<CpmmState>(state, &d.at)) else {
            continue;
        };
        out.push(Exchange {
            main: d.at,
            token: s.token_address,
            lqt: (!s.lqt_address.is_null()).then_some(s.lqt_address),
            initial_lqt_total: setup.lqt_total,
        });
    }
    out
}

pub fn pairing(state: &ChainState, ex: &Exchange) -> Option<Pairing> {
    let lqt = ex.lqt?;
    let d = state.deployment_info(&lqt)?;
    if !is_fa12(&d.code) {
        return None;
    }
    let setup = Fa12Setup::decode(&d.setup)?;
    (setup.admin == ex.main && setup.initial_pool == ex.initial_lqt_total).then_some(Pairing {
        main: ex.main,
        lqt,
        initial: setup.initial_pool,
    })
}

fn undecodable(addr: &Address) -> Violation {
    Violation::new(format!("state of {addr}"), "a decodable state", "garbage")
}

fn pending_amount<'a>(acts: impl IntoIterator<Item = &'a Action>) -> Tez {
    acts.into_iter().map(|a| a.body.amount().clone()).sum()
}

fn describe(txs: &[&TxEvent]) -> String {
    format!("{} txs", txs.len())
}

/// Calls received by `b` from `a`, calls `a` sent to `b`, and the full log
/// filtered by hand must be the same sequence.
pub fn check_incoming_outgoing(state: &ChainState, a: &Address, b: &Address) -> Result<(), Violation> {
    let oracle: Vec<&TxEvent> = state
        .log()
        .iter()
        .filter_map(|e| match e {
            Event::Tx(tx) if tx.from == *a && tx.to == *b => Some(tx),
            _ => None,
        })
        .collect();
    let incoming = state.incoming_calls(a, b);
    let outgoing = state.outgoing_txs(a, b);
    let subject = format!("{a} -> {b}");
    if incoming != outgoing {
        return Err(Violation::new(subject, format!("incoming = outgoing ({})", describe(&outgoing)), describe(&incoming)));
    }
    if outgoing != oracle {
        return Err(Violation::new(subject + " vs log", describe(&oracle), describe(&outgoing)));
    }
    Ok(())
}

/// `xtzPool` plus the tez the exchange has queued for sending equals its
/// balance; on committed states nothing is queued, so the two are equal.
pub fn check_tez_pool(state: &ChainState, main: &Address, committed: bool) -> Result<(), Violation> {
    let s: CpmmState = decode_at(state, main).ok_or_else(|| undecodable(main))?;
    let balance = state.env_balance(main);
    let pending = pending_amount(state.outgoing_acts(main));
    if committed && s.xtz_pool != balance.0 {
        return Err(Violation::new(format!("xtzPool of {main}"), &balance, &s.xtz_pool));
    }
    if &s.xtz_pool + &pending.0 != balance.0 {
        return Err(Violation::new(
            format!("xtzPool of {main} + pending {pending}"),
            &balance,
            &s.xtz_pool + &pending.0,
        ));
    }
    Ok(())
}

/// The next action to run, if sent by an exchange, is covered by its balance.
pub fn check_no_overdraft(state: &ChainState, mains: &[Address]) -> Result<(), Violation> {
    let Some(head) = state.queue().front() else {
        return Ok(());
    };
    if !mains.contains(&head.from) {
        return Ok(());
    }
    let balance = state.env_balance(&head.from);
    let amount = head.body.amount();
    if *amount > balance {
        return Err(Violation::new(format!("payment by {}", head.from), format!("at most {balance}"), amount));
    }
    Ok(())
}

fn mint_sum<'a>(payloads: impl IntoIterator<Item = Option<&'a crate::payload::Payload>>) -> Int {
    payloads
        .into_iter()
        .filter_map(|p| minted_and_burned(p?))
        .sum()
}

/// Liquidity supply = initial pool + every mint/burn its admin executed.
pub fn check_lqt_condition(state: &ChainState, p: &Pairing) -> Result<(), Violation> {
    let s: Fa12State = decode_at(state, &p.lqt).ok_or_else(|| undecodable(&p.lqt))?;
    let delta = mint_sum(state.incoming_calls(&s.admin, &p.lqt).into_iter().map(|tx| tx.payload.as_ref()));
    let expected = Int::from(p.initial.clone()) + delta;
    if Int::from(s.total_supply.clone()) != expected {
        return Err(Violation::new(format!("total_supply of {}", p.lqt), expected, &s.total_supply));
    }
    Ok(())
}

/// `lqtTotal` = initial + mints/burns sent to the liquidity token + those
/// still queued.
pub fn check_main_counter(state: &ChainState, p: &Pairing) -> Result<(), Violation> {
    let s: CpmmState = decode_at(state, &p.main).ok_or_else(|| undecodable(&p.main))?;
    let sent = mint_sum(state.outgoing_txs(&p.main, &p.lqt).into_iter().map(|tx| tx.payload.as_ref()));
    let queued = mint_sum(
        state
            .outgoing_acts(&p.main)
            .into_iter()
            .filter(|a| a.body.target() == Some(p.lqt))
            .map(|a| a.body.payload()),
    );
    let expected = Int::from(p.initial.clone()) + sent + queued;
    if Int::from(s.lqt_total.clone()) != expected {
        return Err(Violation::new(format!("lqtTotal of {}", p.main), expected, &s.lqt_total));
    }
    Ok(())
}

fn main_to_lqt_pending(state: &ChainState, p: &Pairing) -> bool {
    state
        .outgoing_acts(&p.main)
        .iter()
        .any(|a| a.body.target() == Some(p.lqt))
}

/// Direct form: with no exchange action towards the liquidity token pending,
/// `lqtTotal` = total supply. `None` when the premise does not hold.
pub fn check_lqt_supply(state: &ChainState, p: &Pairing) -> Option<Result<(), Violation>> {
    if main_to_lqt_pending(state, p) {
        return None;
    }
    let main: Option<CpmmState> = decode_at(state, &p.main);
    let lqt: Option<Fa12State> = decode_at(state, &p.lqt);
    let (Some(main), Some(lqt)) = (main, lqt) else {
        return Some(Err(Violation::new("pair states", "decodable", "garbage")));
    };
    Some(if main.lqt_total == lqt.total_supply {
        Ok(())
    } else {
        Err(Violation::new(
            format!("lqtTotal of {} vs supply of {}", p.main, p.lqt),
            &lqt.total_supply,
            &main.lqt_total,
        ))
    })
}

/// The same conclusion derived from its parts: the main counter, the
/// liquidity condition and incoming = outgoing for the pair, with the
/// admin being the exchange and equal starting liquidity.
pub fn check_lqt_supply_composed(state: &ChainState, p: &Pairing) -> Option<Result<(), Violation>> {
    if main_to_lqt_pending(state, p) {
        return None;
    }
    let premise = |name: &str, r: Result<(), Violation>| {
        r.map_err(|v| Violation::new(format!("premise {name}"), "holds", format!("{}: {} vs {}", v.subject, v.expected, v.actual)))
    };
    let admin = decode_at::<Fa12State>(state, &p.lqt).map(|s| s.admin);
    Some((|| {
        premise("main_counter", check_main_counter(state, p))?;
        premise("lqt_condition", check_lqt_condition(state, p))?;
        premise("incoming_outgoing", check_incoming_outgoing(state, &p.main, &p.lqt))?;
        if admin != Some(p.main) {
            return Err(Violation::new("premise admin", p.main, format!("{admin:?}")));
        }
        Ok(())
    })())
}

fn diff(a: &Nat, b: &Nat) -> Int {
    Int::from(a.clone()) - Int::from(b.clone())
}

fn cpmm_call(action: &Action) -> Option<(Address, CpmmMsg)> {
    match &action.body {
        ActionBody::Call { to, payload, .. } => Some((*to, CpmmMsg::decode(payload)?)),
        _ => None,
    }
}

/// `tokenPool * xtzPool` never decreases across a trade.
pub fn check_constant_product(pre: &CpmmState, post: &CpmmState) -> Result<(), Violation> {
    let (k, k2) = (pre.product(), post.product());
    if k2 < k {
        return Err(Violation::new("tokenPool * xtzPool", format!(">= {k}"), k2));
    }
    Ok(())
}

/// The executed entrypoint honoured its slippage limits and deadline.
pub fn check_bounds(pre: &CpmmState, msg: &DexterMsg, post: &CpmmState, slot: u64) -> Result<(), Violation> {
    let at_least = |what: &str, got: Int, min: &Nat| {
        if got < Int::from(min.clone()) {
            Err(Violation::new(what, format!(">= {min}"), got))
        } else {
            Ok(())
        }
    };
    let live = |deadline: u64| {
        if deadline <= slot {
            Err(Violation::new("deadline", format!("> {slot}"), deadline))
        } else {
            Ok(())
        }
    };
    match msg {
        DexterMsg::XtzToToken(p) => {
            live(p.deadline)?;
            at_least("tokens bought", diff(&pre.token_pool, &post.token_pool), &p.min_tokens_bought)
        }
        DexterMsg::TokenToXtz(p) => {
            live(p.deadline)?;
            at_least("xtz bought", diff(&pre.xtz_pool, &post.xtz_pool), &p.min_xtz_bought.0)
        }
        DexterMsg::TokenToToken(p) => live(p.deadline),
        DexterMsg::AddLiquidity(p) => {
            live(p.deadline)?;
            at_least("lqt minted", diff(&post.lqt_total, &pre.lqt_total), &p.min_lqt_minted)?;
            let deposited = diff(&post.token_pool, &pre.token_pool);
            if deposited > Int::from(p.max_tokens_deposited.clone()) {
                return Err(Violation::new("tokens deposited", format!("<= {}", p.max_tokens_deposited), deposited));
            }
            Ok(())
        }
        DexterMsg::RemoveLiquidity(p) => {
            live(p.deadline)?;
            at_least("xtz withdrawn", diff(&pre.xtz_pool, &post.xtz_pool), &p.min_xtz_withdrawn.0)?;
            at_least("tokens withdrawn", diff(&pre.token_pool, &post.token_pool), &p.min_tokens_withdrawn)
        }
        _ => Ok(()),
    }
}

/// Adding or removing liquidity never lowers the pool value per share:
/// `pool' * lqt >= pool * lqt'` for both pools.
pub fn check_share_value(pre: &CpmmState, post: &CpmmState) -> Result<(), Violation> {
    for (name, before, after) in [
        ("tokenPool", &pre.token_pool, &post.token_pool),
        ("xtzPool", &pre.xtz_pool, &post.xtz_pool),
    ] {
        let lhs = after * &pre.lqt_total;
        let rhs = before * &post.lqt_total;
        if lhs < rhs {
            return Err(Violation::new(
                format!("{name} per share ({before}/{} -> {after}/{})", pre.lqt_total, post.lqt_total),
                format!(">= {rhs}"),
                lhs,
            ));
        }
    }
    Ok(())
}

/// Replays every call the liquidity token executed through the reference
/// model and compares the result with its stored state.
pub fn check_fa12_ledger(state: &ChainState, lqt: &Address) -> Result<(), Violation> {
    let subject = format!("ledger of {lqt}");
    let setup = state
        .deployment_info(lqt)
        .and_then(|d| Fa12Setup::decode(&d.setup))
        .ok_or_else(|| undecodable(lqt))?;
    let mut model = Fa12Model::new(&setup).map_err(|e| Violation::new(&subject, "model in range", e))?;
    for e in state.log() {
        if let Event::Tx(tx) = e {
            if tx.to == *lqt {
                model
                    .apply(tx)
                    .map_err(|e| Violation::new(&subject, "only valid calls executed", format!("{e} ({tx:?})")))?;
            }
        }
    }
    let s: Fa12State = decode_at(state, lqt).ok_or_else(|| undecodable(lqt))?;
    match model.diff(&s).first() {
        None => Ok(()),
        Some(d) => Err(Violation::new(subject, "state equal to the model", d)),
    }
}

/// Checks every state property of a committed state: everything that does
/// not need the preceding step.
pub fn check_state(state: &ChainState) -> CheckReport {
    let mut c = Checker::new(None);
    c.on_commit(None, state);
    c.finish()
}

/// Runs the checkers over an execution, fed step by step.
pub struct Checker {
    seed: Option<u64>,
    report: CheckReport,
    exchanges: Vec<Exchange>,
    pairings: Vec<Pairing>,
    contracts: usize,
    mains: BTreeMap<Address, CpmmState>,
}

impl Checker {
    pub fn new(seed: Option<u64>) -> Self {
        Checker {
            seed,
            report: CheckReport::new(),
            exchanges: Vec::new(),
            pairings: Vec::new(),
            contracts: 0,
            mains: BTreeMap::new(),
        }
    }

    fn record(&mut self, inv: Invariant, at: Location, r: Result<(), Violation>) {
        self.report.record(inv, at, self.seed, r);
    }

    fn refresh(&mut self, state: &ChainState, target: Option<Address>) {
        let count = state.contract_addresses().count();
        let stale = count != self.contracts || self.exchanges.iter().any(|e| e.lqt.is_none() && Some(e.main) == target);
        if stale {
            self.contracts = count;
            self.exchanges = discover_exchanges(state);
            self.pairings = self.exchanges.iter().filter_map(|e| pairing(state, e)).collect();
            self.mains = self
                .exchanges
                .iter()
                .filter_map(|e| Some((e.main, decode_at(state, &e.main)?)))
                .collect();
        }
    }

    pub fn on_step(&mut self, block: Option<usize>, view: &StepView<'_>) {
        let at = Location { block, step: view.step };
        let state = view.state;
        let target = view.executed.and_then(|a| a.body.target());
        if view.step == 0 {
            // The cache may hold states of a rejected block.
            self.contracts = usize::MAX;
            self.refresh(state, None);
        }
        let before = target.and_then(|t| self.mains.get(&t).cloned());
        self.refresh(state, target);

        if let (Some(action), Some(pre)) = (view.executed, before) {
            if let Some((main, CpmmMsg::Other(msg))) = cpmm_call(action) {
                match decode_at::<CpmmState>(state, &main) {
                    Some(post) => {
                        let wrapped = CpmmMsg::Other(msg.clone());
                        if cpmm::is_trade(&wrapped) {
                            self.record(Invariant::ConstantProduct, at, check_constant_product(&pre, &post));
                        }
                        let slot = state.chain().current_slot;
                        self.record(Invariant::Bounds, at, check_bounds(&pre, &msg, &post, slot));
                        if matches!(msg, DexterMsg::AddLiquidity(_) | DexterMsg::RemoveLiquidity(_)) {
                            self.record(Invariant::ShareValue, at, check_share_value(&pre, &post));
                        }
                        self.mains.insert(main, post);
                    }
                    None => self.record(Invariant::Bounds, at, Err(undecodable(&main))),
                }
            } else if let Some(post) = target.and_then(|t| Some((t, decode_at::<CpmmState>(state, &t)?))) {
                if let Some(slot) = self.mains.get_mut(&post.0) {
                    *slot = post.1;
                }
            }
        }

        let mains: Vec<Address> = self.exchanges.iter().map(|e| e.main).collect();
        for m in &mains {
            self.record(Invariant::TezPool, at, check_tez_pool(state, m, false));
        }
        self.record(Invariant::NoOverdraft, at, check_no_overdraft(state, &mains));
        for p in self.pairings.clone() {
            self.pair_checks(state, &p, at);
        }
    }

    fn pair_checks(&mut self, state: &ChainState, p: &Pairing, at: Location) {
        self.record(Invariant::LqtCondition, at, check_lqt_condition(state, p));
        self.record(Invariant::MainCounter, at, check_main_counter(state, p));
        let direct = check_lqt_supply(state, p);
        let composed = check_lqt_supply_composed(state, p);
        if let Some(d) = &direct {
            self.record(Invariant::LqtSupply, at, d.clone());
        }
        let agree = match (&direct, &composed) {
            (Some(d), Some(c)) if d.is_ok() != c.is_ok() => Err(Violation::new(
                format!("lqt supply of {}", p.lqt),
                format!("direct {}", if d.is_ok() { "pass" } else { "fail" }),
                format!("composed {}", if c.is_ok() { "pass" } else { "fail" }),
            )),
            _ => Ok(()),
        };
        if direct.is_some() {
            self.record(Invariant::Decomposition, at, agree);
        }
    }

    /// Properties of committed states. Also runs every per-step state check.
    pub fn on_commit(&mut self, block: Option<usize>, state: &ChainState) {
        let at = Location { block, step: 0 };
        self.contracts = usize::MAX;
        self.refresh(state, None);
        let contracts: Vec<Address> = state.contract_addresses().copied().collect();
        for a in &contracts {
            for b in &contracts {
                self.record(Invariant::IncomingOutgoing, at, check_incoming_outgoing(state, a, b));
            }
        }
        for ex in self.exchanges.clone() {
            self.record(Invariant::TezPool, at, check_tez_pool(state, &ex.main, true));
        }
        for p in self.pairings.clone() {
            self.pair_checks(state, &p, at);
            self.record(Invariant::Fa12Ledger, at, check_fa12_ledger(state, &p.lqt));
        }
    }

    /// A rejected block must hand back its input state untouched.
    pub fn on_reject(&mut self, block: Option<usize>, before: &ChainState, err: &BlockError) {
        let at = Location { block, step: 0 };
        let r = if err.state.dump() == before.dump() && err.state.digest() == before.digest() {
            Ok(())
        } else {
            Err(Violation::new("state after rejected block", before.digest(), err.state.digest()))
        };
        self.record(Invariant::Atomicity, at, r);
    }

    pub fn report(&self) -> &CheckReport {
        &self.report
    }

    pub fn finish(self) -> CheckReport {
        self.report
    }
}
