//! Random trace generation over wired exchanges.

use num_traits::ToPrimitive;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::chain::{Action, ActionBody, BlockErrorKind, ChainState, ExecOrder};
use crate::contracts::cpmm::{self, CpmmSetup, CpmmState, DexterMsg};
use crate::contracts::fa12::{Fa12Msg, Fa12Setup, Fa12State};
use crate::contracts::fa2::{self, Fa2Setup, Fa2State};
use crate::contracts::{cpmm_code, fa12_code, fa2_code};
use crate::payload::{Codec, Payload};
use crate::primitives::{Address, Int, Nat, Tez};

use super::checks::{decode_at, Checker};
use super::config::{ConfigError, ScenarioConfig};
use super::report::{CheckReport, Location};

/// Addresses of one wired exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wired {
    pub token: Address,
    pub main: Address,
    pub lqt: Address,
}

pub const MANAGER: Address = Address::user(1);

/// One attempt at committing a block.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub roots: Vec<Action>,
    /// Index of the action added to make the block fail, if any.
    pub injected: Option<usize>,
    pub outcome: Result<(), BlockErrorKind>,
}

/// A block of the trace. `index` is `None` for the wiring block. A block
/// whose injected failure was rejected is retried once without it.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    pub index: Option<usize>,
    pub attempts: Vec<Attempt>,
    /// Exchange states once the block is settled, in wiring order.
    pub pools: Vec<CpmmState>,
}

impl BlockRecord {
    pub fn committed(&self) -> bool {
        self.attempts.iter().any(|a| a.outcome.is_ok())
    }
}

/// The chain state right after one executed action.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub at: Location,
    pub executed: Option<Action>,
    pub state: ChainState,
}

/// Which blocks keep per-action snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capture {
    Nothing,
    Everything,
    FromBlock(usize),
}

impl Capture {
    fn wants(&self, block: Option<usize>) -> bool {
        match (self, block) {
            (Capture::Nothing, _) => false,
            (Capture::Everything, _) => true,
            (Capture::FromBlock(n), Some(b)) => b >= *n,
            (Capture::FromBlock(_), None) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub order: ExecOrder,
    pub exchanges: Vec<Wired>,
    pub blocks: Vec<BlockRecord>,
    pub snapshots: Vec<Snapshot>,
    pub state: ChainState,
    /// Empty unless the trace ran with checks.
    pub report: CheckReport,
}

impl Trace {
    /// Generated blocks that committed, wiring excluded.
    pub fn committed_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.index.is_some() && b.committed()).count()
    }

    pub fn rejected_attempts(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| &b.attempts)
            .filter(|a| a.outcome.is_err())
            .count()
    }

    /// Root actions of every attempt, in execution order.
    pub fn root_blocks(&self) -> Vec<(Option<usize>, Vec<Action>)> {
        self.blocks
            .iter()
            .flat_map(|b| b.attempts.iter().map(|a| (b.index, a.roots.clone())))
            .collect()
    }
}

struct Runner {
    state: ChainState,
    order: ExecOrder,
    capture: Capture,
    checker: Option<Checker>,
    exchanges: Vec<Wired>,
    blocks: Vec<BlockRecord>,
    snapshots: Vec<Snapshot>,
}

impl Runner {
    fn exec(&mut self, block: Option<usize>, roots: Vec<Action>, injected: Option<usize>) -> bool {
        let capture = self.capture.wants(block);
        let checker = &mut self.checker;
        let snapshots = &mut self.snapshots;
        let result = self.state.add_block_observed(roots.clone(), self.order, &mut |view| {
            if let Some(c) = checker.as_mut() {
                c.on_step(block, view);
            }
            if capture {
                snapshots.push(Snapshot {
                    at: Location { block, step: view.step },
                    executed: view.executed.cloned(),
                    state: view.state.clone(),
                });
            }
        });
        let outcome = match result {
            Ok(next) => {
                if let Some(c) = self.checker.as_mut() {
                    c.on_commit(block, &next);
                }
                self.state = next;
                Ok(())
            }
            Err(err) => {
                if let Some(c) = self.checker.as_mut() {
                    c.on_reject(block, &self.state, &err);
                }
                Err(err.kind)
            }
        };
        let ok = outcome.is_ok();
        let attempt = Attempt { roots, injected, outcome };
        match self.blocks.last_mut() {
            Some(last) if last.index == block && !last.attempts.is_empty() && last.pools.is_empty() => {
                last.attempts.push(attempt)
            }
            _ => self.blocks.push(BlockRecord {
                index: block,
                attempts: vec![attempt],
                pools: Vec::new(),
            }),
        }
        ok
    }

    fn settle(&mut self) {
        let pools = self
            .exchanges
            .iter()
            .filter_map(|w| decode_at(&self.state, &w.main))
            .collect();
        if let Some(last) = self.blocks.last_mut() {
            last.pools = pools;
        }
    }

    fn finish(self) -> Trace {
        Trace {
            order: self.order,
            exchanges: self.exchanges,
            blocks: self.blocks,
            snapshots: self.snapshots,
            state: self.state,
            report: self.checker.map(Checker::finish).unwrap_or_default(),
        }
    }
}

fn block_rng(seed: u64, block: Option<usize>) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block.map_or(0, |b| b as u64 + 1));
    rng
}

fn user(i: usize) -> Address {
    Address::user(i as u64)
}

/// The initial state: funded users, nothing deployed.
pub fn genesis(config: &ScenarioConfig) -> ChainState {
    let users: Vec<_> = (1..=config.users)
        .map(|i| (user(i), Tez::from(config.ranges.user_tez)))
        .collect();
    ChainState::empty_chain(&users).expect("distinct user addresses")
}

struct Plan {
    wired: Vec<Wired>,
    roots: Vec<Action>,
    /// Initial `(xtz, tokens)` per exchange.
    pools: Vec<(u64, u64)>,
}

fn wiring_plan(config: &ScenarioConfig, state: &ChainState) -> Plan {
    let mut rng = block_rng(config.seed, None);
    let r = &config.ranges;
    let mut next = state.next_contract_address().index;
    let mut wired = Vec::new();
    let mut roots = Vec::new();
    let mut pools = Vec::new();
    let call = |to, msg: DexterMsg| Action::user(MANAGER, ActionBody::Call { to, amount: Tez::zero(), payload: cpmm::CpmmMsg::Other(msg).encode() });
    for _ in 0..config.exchanges {
        let w = Wired {
            token: Address::contract(next),
            main: Address::contract(next + 1),
            lqt: Address::contract(next + 2),
        };
        next += 3;
        let xtz = rng.gen_range(r.pool_min..=r.pool_max);
        let tokens = rng.gen_range(r.pool_min..=r.pool_max);
        let ledger = (1..=config.users)
            .map(|i| ((user(i), Nat::from(0u8)), Nat::from(r.user_tokens)))
            .collect();
        let lqt_total = Nat::from(xtz);
        let deploy = |code, setup: Payload| Action::user(MANAGER, ActionBody::Deploy { amount: Tez::zero(), code, setup });
        roots.push(deploy(fa2_code(), Fa2Setup { ledger }.encode()));
        roots.push(deploy(
            cpmm_code(config.mutation),
            CpmmSetup { lqt_total: lqt_total.clone(), manager: MANAGER, token_address: w.token, token_id: Nat::from(0u8) }.encode(),
        ));
        roots.push(deploy(
            fa12_code(config.mutation),
            Fa12Setup { admin: w.main, lqt_provider: MANAGER, initial_pool: lqt_total }.encode(),
        ));
        roots.push(call(w.main, DexterMsg::SetLqtAddress { addr: w.lqt }));
        wired.push(w);
        pools.push((xtz, tokens));
    }
    Plan { wired, roots, pools }
}

/// Seeds each pool: a tez donation, a token transfer, then a pool refresh.
fn bootstrap_roots(plan: &Plan) -> Vec<Action> {
    let mut roots = Vec::new();
    for (w, (xtz, tokens)) in plan.wired.iter().zip(&plan.pools) {
        roots.push(Action::user(MANAGER, ActionBody::Transfer { to: w.main, amount: Tez::from(*xtz) }));
        roots.push(Action::user(MANAGER, fa2::transfer_call(w.token, MANAGER, w.main, &Nat::from(0u8), Nat::from(*tokens))));
        roots.push(Action::user(
            MANAGER,
            ActionBody::Call { to: w.main, amount: Tez::zero(), payload: cpmm::CpmmMsg::Other(DexterMsg::UpdateTokenPool).encode() },
        ));
    }
    roots
}

fn u64_of(n: &Nat) -> u64 {
    n.to_u64().unwrap_or(u64::MAX)
}

/// What the generator knows about the chain when building a block.
struct View<'a> {
    config: &'a ScenarioConfig,
    state: &'a ChainState,
    wired: &'a [Wired],
    slot: u64,
}

impl View<'_> {
    fn pool(&self, i: usize) -> Option<CpmmState> {
        decode_at(self.state, &self.wired[i].main)
    }
    fn tokens(&self, i: usize, who: Address) -> u64 {
        decode_at::<Fa2State>(self.state, &self.wired[i].token).map_or(0, |s| u64_of(&s.balance(who, &Nat::from(0u8))))
    }
    fn lqt(&self, i: usize) -> Option<Fa12State> {
        decode_at(self.state, &self.wired[i].lqt)
    }
    fn tez(&self, who: Address) -> u64 {
        u64_of(&self.state.env_balance(&who).0)
    }
}

/// Mostly small, occasionally zero, up to `max`; drawn by magnitude so that
/// tiny and large values both show up.
fn amount(rng: &mut ChaCha8Rng, max: u64) -> u64 {
    if max == 0 || rng.gen_bool(0.05) {
        return 0;
    }
    let digits = max.ilog10();
    let cap = 10u64.saturating_pow(rng.gen_range(0..=digits + 1)).min(max);
    rng.gen_range(1..=cap)
}

/// A slippage limit around `expected`: sometimes none, sometimes just out
/// of reach.
fn min_limit(rng: &mut ChaCha8Rng, expected: &Nat) -> Nat {
    if rng.gen_bool(0.3) {
        return Nat::from(0u8);
    }
    let pct = rng.gen_range(80u32..=102);
    let tight = expected * pct / 100u32;
    if pct > 100 && tight == *expected {
        tight + 1u32
    } else {
        tight
    }
}

fn max_limit(rng: &mut ChaCha8Rng, expected: &Nat) -> Nat {
    let pct = rng.gen_range(98u32..=150);
    expected * pct / 100u32
}

impl View<'_> {
    fn deadline(&self, rng: &mut ChaCha8Rng) -> u64 {
        if rng.gen_bool(0.03) {
            self.slot
        } else {
            self.slot + rng.gen_range(1..=20)
        }
    }

    fn call_main(&self, from: Address, i: usize, amount: u64, msg: DexterMsg) -> Action {
        Action::user(
            from,
            ActionBody::Call { to: self.wired[i].main, amount: Tez::from(amount), payload: cpmm::CpmmMsg::Other(msg).encode() },
        )
    }

    fn call_lqt(&self, from: Address, i: usize, msg: Fa12Msg) -> Action {
        Action::user(from, ActionBody::Call { to: self.wired[i].lqt, amount: Tez::zero(), payload: msg.encode() })
    }

    fn random_user(&self, rng: &mut ChaCha8Rng) -> Address {
        user(rng.gen_range(1..=self.config.users))
    }

    fn action(&self, rng: &mut ChaCha8Rng, kind: usize) -> Action {
        let max = self.config.ranges.max_amount;
        let u = self.random_user(rng);
        let to = self.random_user(rng);
        let i = rng.gen_range(0..self.wired.len());
        let pool = self.pool(i);
        let zero = Nat::from(0u8);
        match kind {
            0 => {
                let a = amount(rng, max.min(self.tez(u)));
                let (minted, deposited) = pool
                    .as_ref()
                    .and_then(|p| cpmm::add_liquidity_amounts(&Nat::from(a), p))
                    .unwrap_or_default();
                let msg = DexterMsg::AddLiquidity(cpmm::AddLiquidity {
                    owner: to,
                    min_lqt_minted: min_limit(rng, &minted),
                    max_tokens_deposited: max_limit(rng, &deposited),
                    deadline: self.deadline(rng),
                });
                self.call_main(u, i, a, msg)
            }
            1 => {
                let held = self.lqt(i).map_or(0, |s| u64_of(&s.balance(&u)));
                let burned = Nat::from(amount(rng, held + held / 10));
                let (xtz, tokens) = pool
                    .as_ref()
                    .and_then(|p| cpmm::remove_liquidity_amounts(&burned, p))
                    .unwrap_or_default();
                let msg = DexterMsg::RemoveLiquidity(cpmm::RemoveLiquidity {
                    to,
                    lqt_burned: burned,
                    min_xtz_withdrawn: Tez(min_limit(rng, &xtz)),
                    min_tokens_withdrawn: min_limit(rng, &tokens),
                    deadline: self.deadline(rng),
                });
                self.call_main(u, i, 0, msg)
            }
            2 => {
                let a = amount(rng, max.min(self.tez(u)));
                let out = pool
                    .as_ref()
                    .and_then(|p| cpmm::xtz_to_token_output(&Nat::from(a), &p.xtz_pool, &p.token_pool))
                    .unwrap_or_default();
                let msg = DexterMsg::XtzToToken(cpmm::XtzToToken {
                    to,
                    min_tokens_bought: min_limit(rng, &out),
                    deadline: self.deadline(rng),
                });
                self.call_main(u, i, a, msg)
            }
            3 => {
                let sold = Nat::from(amount(rng, max.min(self.tokens(i, u))));
                let out = pool
                    .as_ref()
                    .and_then(|p| cpmm::token_to_xtz_output(&sold, &p.xtz_pool, &p.token_pool))
                    .unwrap_or_default();
                let msg = DexterMsg::TokenToXtz(cpmm::TokenToXtz {
                    to,
                    tokens_sold: sold,
                    min_xtz_bought: Tez(min_limit(rng, &out)),
                    deadline: self.deadline(rng),
                });
                self.call_main(u, i, 0, msg)
            }
            4 => {
                let j = rng.gen_range(0..self.wired.len());
                let sold = Nat::from(amount(rng, max.min(self.tokens(i, u))));
                let out = pool
                    .as_ref()
                    .zip(self.pool(j))
                    .and_then(|(p, q)| {
                        let xtz = cpmm::token_to_xtz_output(&sold, &p.xtz_pool, &p.token_pool)?;
                        cpmm::xtz_to_token_output(&xtz, &q.xtz_pool, &q.token_pool)
                    })
                    .unwrap_or_default();
                let msg = DexterMsg::TokenToToken(cpmm::TokenToToken {
                    output_dexter: self.wired[j].main,
                    to,
                    tokens_sold: sold,
                    min_tokens_bought: min_limit(rng, &out),
                    deadline: self.deadline(rng),
                });
                self.call_main(u, i, 0, msg)
            }
            5 => self.call_main(u, i, 0, DexterMsg::UpdateTokenPool),
            6 => Action::user(
                u,
                ActionBody::Transfer { to: self.wired[i].main, amount: Tez::from(amount(rng, max.min(self.tez(u)))) },
            ),
            7 => {
                let v = amount(rng, max.min(self.tokens(i, u)));
                Action::user(u, fa2::transfer_call(self.wired[i].token, u, self.wired[i].main, &zero, Nat::from(v)))
            }
            8 => {
                let v = amount(rng, self.tokens(i, u));
                Action::user(u, fa2::transfer_call(self.wired[i].token, u, to, &zero, Nat::from(v)))
            }
            9 => {
                let held = self.lqt(i).map_or(0, |s| u64_of(&s.balance(&u)));
                let value = Nat::from(amount(rng, held));
                self.call_lqt(u, i, Fa12Msg::Transfer { from: u, to, value })
            }
            10 => {
                let owner = if rng.gen_bool(0.5) { MANAGER } else { u };
                let lqt = self.lqt(i);
                let held = lqt.as_ref().map_or(0, |s| u64_of(&s.balance(&owner)));
                let current = lqt.as_ref().map_or(zero.clone(), |s| s.allowance(&owner, &to));
                let value = if rng.gen_bool(if current == zero { 0.1 } else { 0.7 }) {
                    zero
                } else {
                    Nat::from(amount(rng, held.max(1)))
                };
                self.call_lqt(owner, i, Fa12Msg::Approve { spender: to, value })
            }
            11 => {
                let lqt = self.lqt(i);
                let grants: Vec<((Address, Address), Nat)> =
                    lqt.as_ref().map(|s| s.allowances.clone().into_iter().collect()).unwrap_or_default();
                let ((owner, spender), allowed) = grants
                    .choose(rng)
                    .cloned()
                    .unwrap_or(((u, to), zero));
                let held = lqt.as_ref().map_or(0, |s| u64_of(&s.balance(&owner)));
                let cap = u64_of(&allowed).min(held);
                let value = Nat::from(amount(rng, cap + cap / 20));
                self.call_lqt(spender, i, Fa12Msg::Transfer { from: owner, to: self.random_user(rng), value })
            }
            12 => {
                let q = amount(rng, max) as i64;
                let quantity = if rng.gen_bool(0.5) { Int::from(q) } else { Int::from(-q) };
                self.call_lqt(u, i, Fa12Msg::MintOrBurn { quantity, target: to })
            }
            _ => {
                let from = if rng.gen_bool(0.5) { MANAGER } else { u };
                self.call_main(from, i, 0, DexterMsg::SetBaker { freeze_baker: rng.gen_bool(0.3) })
            }
        }
    }

    /// An action that fails whatever the contracts do.
    fn failing(&self, rng: &mut ChaCha8Rng) -> Action {
        let u = self.random_user(rng);
        let i = rng.gen_range(0..self.wired.len());
        match rng.gen_range(0..3) {
            0 => self.call_main(
                u,
                i,
                1,
                DexterMsg::XtzToToken(cpmm::XtzToToken { to: u, min_tokens_bought: Nat::from(0u8), deadline: self.slot }),
            ),
            1 => {
                let total = self.pool(i).map_or(Nat::from(0u8), |p| p.lqt_total);
                self.call_main(
                    u,
                    i,
                    0,
                    DexterMsg::RemoveLiquidity(cpmm::RemoveLiquidity {
                        to: u,
                        lqt_burned: total + 1u32,
                        min_xtz_withdrawn: Tez::zero(),
                        min_tokens_withdrawn: Nat::from(0u8),
                        deadline: self.slot + 5,
                    }),
                )
            }
            _ => Action::user(u, ActionBody::Transfer { to: self.random_user(rng), amount: Tez::from(self.tez(u) + 1) }),
        }
    }
}

fn random_block(config: &ScenarioConfig, state: &ChainState, wired: &[Wired], index: usize) -> (Vec<Action>, Option<usize>) {
    let mut rng = block_rng(config.seed, Some(index));
    let view = View { config, state, wired, slot: state.chain().current_slot + 1 };
    let weights = WeightedIndex::new(config.weights.table()).expect("validated weights");
    let n = rng.gen_range(1..=config.max_actions);
    let mut roots: Vec<Action> = (0..n)
        .map(|_| {
            let kind = weights.sample(&mut rng);
            view.action(&mut rng, kind)
        })
        .collect();
    let injected = rng.gen_bool(config.failure_rate).then(|| {
        let at = rng.gen_range(0..=roots.len());
        roots.insert(at, view.failing(&mut rng));
        at
    });
    (roots, injected)
}

fn drive(config: &ScenarioConfig, capture: Capture, check: bool) -> Result<Trace, ConfigError> {
    config.validate()?;
    let state = genesis(config);
    let plan = wiring_plan(config, &state);
    let mut run = Runner {
        state,
        order: config.order,
        capture,
        checker: check.then(|| Checker::new(Some(config.seed))),
        exchanges: plan.wired.clone(),
        blocks: Vec::new(),
        snapshots: Vec::new(),
    };
    run.exec(None, plan.roots.clone(), None);
    run.settle();
    for b in 0..config.blocks {
        let (roots, injected) = if b == 0 {
            (bootstrap_roots(&plan), None)
        } else {
            random_block(config, &run.state, &plan.wired, b)
        };
        if !run.exec(Some(b), roots.clone(), injected) {
            if let Some(k) = injected {
                let mut retry = roots;
                retry.remove(k);
                run.exec(Some(b), retry, None);
            }
        }
        run.settle();
    }
    Ok(run.finish())
}

/// Wires the exchanges, then runs `config.blocks` generated blocks, keeping
/// a snapshot after every executed action.
pub fn gen_trace(config: &ScenarioConfig) -> Result<Trace, ConfigError> {
    drive(config, Capture::Everything, false)
}

/// Generates a trace and checks every invariant along the way.
pub fn run_checked(config: &ScenarioConfig) -> Result<Trace, ConfigError> {
    drive(config, Capture::Nothing, true)
}

/// Like [`run_checked`], keeping snapshots as `capture` says.
pub fn run_captured(config: &ScenarioConfig, capture: Capture) -> Result<Trace, ConfigError> {
    drive(config, capture, true)
}

/// Re-executes the root actions of `trace` under `order`, with checks.
pub fn replay_roots(config: &ScenarioConfig, trace: &Trace, order: ExecOrder) -> Trace {
    replay_captured(config, trace, order, Capture::Nothing)
}

/// Like [`replay_roots`], keeping snapshots as `capture` says.
pub fn replay_captured(config: &ScenarioConfig, trace: &Trace, order: ExecOrder, capture: Capture) -> Trace {
    let mut run = Runner {
        state: genesis(config),
        order,
        capture,
        checker: Some(Checker::new(Some(config.seed))),
        exchanges: trace.exchanges.clone(),
        blocks: Vec::new(),
        snapshots: Vec::new(),
    };
    for block in &trace.blocks {
        for attempt in &block.attempts {
            run.exec(block.index, attempt.roots.clone(), attempt.injected);
        }
        run.settle();
    }
    run.finish()
}

/// Generates under `config.order`, replays the same root actions under the
/// other order, and checks both runs. Final states may differ.
pub fn check_order_robustness(config: &ScenarioConfig) -> Result<CheckReport, ConfigError> {
    let first = run_checked(config)?;
    let second = replay_roots(config, &first, config.order.other());
    let mut report = first.report.clone();
    report.merge(&second.report);
    Ok(report)
}
