//! The Dexter2 main contract: a constant-product market maker between tez
//! and one FA2 token, with an FA1.2 liquidity token tracking pool shares.
//!
//! Every entrypoint returns `None` on failure. Trades charge a 0.3% fee
//! (`997 / 1000`). The contract accepts the FA2 receiver envelope: its own
//! messages arrive wrapped in `other_msg(..)`, the `balance_of` callback
//! arrives as `receive_balance_of(..)`.

use num_traits::Zero;

use super::fa12::Fa12Msg;
use super::fa2::{self, BalanceResponse, RECEIVE_BALANCE_OF};
use super::Mutation;
use crate::arith::{amount_to_nat, ceildiv_opt, div_opt, sub_opt};
use crate::chain::{ActionBody, CallContext, Chain};
use crate::contract::{throw_if, Outcome, TypedContract};
use crate::payload::{unwrap_receiver, wrap_receiver, Codec, Payload, RecordReader};
use crate::primitives::{Address, Int, Nat, Tez};

pub const NAME: &str = "dexter2_cpmm";

const FEE_NUM: u32 = 997;
const FEE_DEN: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpmmState {
    pub token_pool: Nat,
    pub xtz_pool: Nat,
    pub lqt_total: Nat,
    pub self_is_updating_token_pool: bool,
    pub freeze_baker: bool,
    pub manager: Address,
    pub token_address: Address,
    pub token_id: Nat,
    /// `Address::NULL` until `set_lqt_address` runs.
    pub lqt_address: Address,
}

impl CpmmState {
    /// The constant-product value `tokenPool * xtzPool`.
    pub fn product(&self) -> Nat {
        &self.token_pool * &self.xtz_pool
    }
}

impl Codec for CpmmState {
    fn encode(&self) -> Payload {
        Payload::record([
            ("tokenPool", self.token_pool.encode()),
            ("xtzPool", self.xtz_pool.encode()),
            ("lqtTotal", self.lqt_total.encode()),
            ("selfIsUpdatingTokenPool", self.self_is_updating_token_pool.encode()),
            ("freezeBaker", self.freeze_baker.encode()),
            ("manager", self.manager.encode()),
            ("tokenAddress", self.token_address.encode()),
            ("tokenId", self.token_id.encode()),
            ("lqtAddress", self.lqt_address.encode()),
        ])
    }

    fn decode(p: &Payload) -> Option<Self> {
        let mut r = RecordReader::new(p)?;
        let s = CpmmState {
            token_pool: r.field("tokenPool")?,
            xtz_pool: r.field("xtzPool")?,
            lqt_total: r.field("lqtTotal")?,
            self_is_updating_token_pool: r.field("selfIsUpdatingTokenPool")?,
            freeze_baker: r.field("freezeBaker")?,
            manager: r.field("manager")?,
            token_address: r.field("tokenAddress")?,
            token_id: r.field("tokenId")?,
            lqt_address: r.field("lqtAddress")?,
        };
        r.finish(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpmmSetup {
    pub lqt_total: Nat,
    pub manager: Address,
    pub token_address: Address,
    pub token_id: Nat,
}

impl Codec for CpmmSetup {
    fn encode(&self) -> Payload {
        Payload::record([
            ("lqtTotal_", self.lqt_total.encode()),
            ("manager_", self.manager.encode()),
            ("tokenAddress_", self.token_address.encode()),
            ("tokenId_", self.token_id.encode()),
        ])
    }

    fn decode(p: &Payload) -> Option<Self> {
        let mut r = RecordReader::new(p)?;
        let s = CpmmSetup {
            lqt_total: r.field("lqtTotal_")?,
            manager: r.field("manager_")?,
            token_address: r.field("tokenAddress_")?,
            token_id: r.field("tokenId_")?,
        };
        r.finish(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddLiquidity {
    pub owner: Address,
    pub min_lqt_minted: Nat,
    pub max_tokens_deposited: Nat,
    pub deadline: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoveLiquidity {
    pub to: Address,
    pub lqt_burned: Nat,
    pub min_xtz_withdrawn: Tez,
    pub min_tokens_withdrawn: Nat,
    pub deadline: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XtzToToken {
    pub to: Address,
    pub min_tokens_bought: Nat,
    pub deadline: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenToXtz {
    pub to: Address,
    pub tokens_sold: Nat,
    pub min_xtz_bought: Tez,
    pub deadline: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenToToken {
    pub output_dexter: Address,
    pub to: Address,
    pub tokens_sold: Nat,
    pub min_tokens_bought: Nat,
    pub deadline: u64,
}

/// The exchange's own entrypoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DexterMsg {
    AddLiquidity(AddLiquidity),
    RemoveLiquidity(RemoveLiquidity),
    XtzToToken(XtzToToken),
    TokenToXtz(TokenToXtz),
    TokenToToken(TokenToToken),
    UpdateTokenPool,
    SetBaker { freeze_baker: bool },
    SetManager { new_manager: Address },
    SetLqtAddress { addr: Address },
    Default,
}

/// Everything the main contract accepts: the FA2 `balance_of` callback or
/// one of its own entrypoints inside the receiver envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpmmMsg {
    BalanceCallback(Vec<BalanceResponse>),
    Other(DexterMsg),
}

fn deadline(d: u64) -> Payload {
    Payload::nat(d)
}

fn read_deadline(r: &mut RecordReader<'_>) -> Option<u64> {
    let n: Nat = r.field("deadline")?;
    u64::try_from(n).ok()
}

impl Codec for DexterMsg {
    fn encode(&self) -> Payload {
        let (tag, arg) = match self {
            DexterMsg::AddLiquidity(p) => (
                "add_liquidity",
                Payload::record([
                    ("owner", p.owner.encode()),
                    ("minLqtMinted", p.min_lqt_minted.encode()),
                    ("maxTokensDeposited", p.max_tokens_deposited.encode()),
                    ("deadline", deadline(p.deadline)),
                ]),
            ),
            DexterMsg::RemoveLiquidity(p) => (
                "remove_liquidity",
                Payload::record([
                    ("to", p.to.encode()),
                    ("lqtBurned", p.lqt_burned.encode()),
                    ("minXtzWithdrawn", p.min_xtz_withdrawn.encode()),
                    ("minTokensWithdrawn", p.min_tokens_withdrawn.encode()),
                    ("deadline", deadline(p.deadline)),
                ]),
            ),
            DexterMsg::XtzToToken(p) => (
                "xtz_to_token",
                Payload::record([
                    ("to", p.to.encode()),
                    ("minTokensBought", p.min_tokens_bought.encode()),
                    ("deadline", deadline(p.deadline)),
                ]),
            ),
            DexterMsg::TokenToXtz(p) => (
                "token_to_xtz",
                Payload::record([
                    ("to", p.to.encode()),
                    ("tokensSold", p.tokens_sold.encode()),
                    ("minXtzBought", p.min_xtz_bought.encode()),
                    ("deadline", deadline(p.deadline)),
                ]),
            ),
            DexterMsg::TokenToToken(p) => (
                "token_to_token",
                Payload::record([
                    ("outputDexter", p.output_dexter.encode()),
                    ("to", p.to.encode()),
                    ("tokensSold", p.tokens_sold.encode()),
                    ("minTokensBought", p.min_tokens_bought.encode()),
                    ("deadline", deadline(p.deadline)),
                ]),
            ),
            DexterMsg::UpdateTokenPool => ("update_token_pool", Payload::Unit),
            DexterMsg::SetBaker { freeze_baker } => (
                "set_baker",
                Payload::record([("freezeBaker", freeze_baker.encode())]),
            ),
            DexterMsg::SetManager { new_manager } => (
                "set_manager",
                Payload::record([("newManager", new_manager.encode())]),
            ),
            DexterMsg::SetLqtAddress { addr } => (
                "set_lqt_address",
                Payload::record([("addr", addr.encode())]),
            ),
            DexterMsg::Default => ("default", Payload::Unit),
        };
        Payload::tag(tag, arg)
    }

    fn decode(p: &Payload) -> Option<Self> {
        let (tag, arg) = p.as_tag()?;
        match tag {
            "update_token_pool" => return <()>::decode(arg).map(|_| DexterMsg::UpdateTokenPool),
            "default" => return <()>::decode(arg).map(|_| DexterMsg::Default),
            _ => {}
        }
        let mut r = RecordReader::new(arg)?;
        let msg = match tag {
            "add_liquidity" => DexterMsg::AddLiquidity(AddLiquidity {
                owner: r.field("owner")?,
                min_lqt_minted: r.field("minLqtMinted")?,
                max_tokens_deposited: r.field("maxTokensDeposited")?,
                deadline: read_deadline(&mut r)?,
            }),
            "remove_liquidity" => DexterMsg::RemoveLiquidity(RemoveLiquidity {
                to: r.field("to")?,
                lqt_burned: r.field("lqtBurned")?,
                min_xtz_withdrawn: r.field("minXtzWithdrawn")?,
                min_tokens_withdrawn: r.field("minTokensWithdrawn")?,
                deadline: read_deadline(&mut r)?,
            }),
            "xtz_to_token" => DexterMsg::XtzToToken(XtzToToken {
                to: r.field("to")?,
                min_tokens_bought: r.field("minTokensBought")?,
                deadline: read_deadline(&mut r)?,
            }),
            "token_to_xtz" => DexterMsg::TokenToXtz(TokenToXtz {
                to: r.field("to")?,
                tokens_sold: r.field("tokensSold")?,
                min_xtz_bought: r.field("minXtzBought")?,
                deadline: read_deadline(&mut r)?,
            }),
            "token_to_token" => DexterMsg::TokenToToken(TokenToToken {
                output_dexter: r.field("outputDexter")?,
                to: r.field("to")?,
                tokens_sold: r.field("tokensSold")?,
                min_tokens_bought: r.field("minTokensBought")?,
                deadline: read_deadline(&mut r)?,
            }),
            "set_baker" => DexterMsg::SetBaker {
                freeze_baker: r.field("freezeBaker")?,
            },
            "set_manager" => DexterMsg::SetManager {
                new_manager: r.field("newManager")?,
            },
            "set_lqt_address" => DexterMsg::SetLqtAddress {
                addr: r.field("addr")?,
            },
            _ => return None,
        };
        r.finish(msg)
    }
}

impl Codec for CpmmMsg {
    fn encode(&self) -> Payload {
        match self {
            CpmmMsg::BalanceCallback(responses) => fa2::balance_callback(responses),
            CpmmMsg::Other(m) => wrap_receiver(m.encode()),
        }
    }

    fn decode(p: &Payload) -> Option<Self> {
        if let Some(inner) = unwrap_receiver(p) {
            return DexterMsg::decode(inner).map(CpmmMsg::Other);
        }
        match p.as_tag()? {
            (RECEIVE_BALANCE_OF, arg) => Vec::decode(arg).map(CpmmMsg::BalanceCallback),
            _ => None,
        }
    }
}

impl From<DexterMsg> for CpmmMsg {
    fn from(m: DexterMsg) -> Self {
        CpmmMsg::Other(m)
    }
}

/// Tokens bought for `amount` mutez: `amount*997*tokenPool / (xtzPool*1000 + amount*997)`.
pub fn xtz_to_token_output(amount: &Nat, xtz_pool: &Nat, token_pool: &Nat) -> Option<Nat> {
    let fee_in = amount * FEE_NUM;
    div_opt(&(&fee_in * token_pool), &(xtz_pool * FEE_DEN + &fee_in))
}

/// Mutez bought for `tokens_sold`: the mirror image of [`xtz_to_token_output`].
pub fn token_to_xtz_output(tokens_sold: &Nat, xtz_pool: &Nat, token_pool: &Nat) -> Option<Nat> {
    let fee_in = tokens_sold * FEE_NUM;
    div_opt(&(&fee_in * xtz_pool), &(token_pool * FEE_DEN + &fee_in))
}

/// `(lqt_minted, tokens_deposited)` for depositing `amount` mutez.
pub fn add_liquidity_amounts(amount: &Nat, state: &CpmmState) -> Option<(Nat, Nat)> {
    let minted = div_opt(&(amount * &state.lqt_total), &state.xtz_pool)?;
    let deposited = ceildiv_opt(&(amount * &state.token_pool), &state.xtz_pool)?;
    Some((minted, deposited))
}

/// `(xtz_withdrawn, tokens_withdrawn)` for burning `burned` liquidity.
pub fn remove_liquidity_amounts(burned: &Nat, state: &CpmmState) -> Option<(Nat, Nat)> {
    let xtz = div_opt(&(burned * &state.xtz_pool), &state.lqt_total)?;
    let tokens = div_opt(&(burned * &state.token_pool), &state.lqt_total)?;
    Some((xtz, tokens))
}

fn mint_or_burn_call(lqt: Address, quantity: Int, target: Address) -> ActionBody {
    ActionBody::Call {
        to: lqt,
        amount: Tez::zero(),
        payload: Fa12Msg::MintOrBurn { quantity, target }.encode(),
    }
}

pub struct Cpmm {
    mutation: Option<Mutation>,
    name: String,
}

impl Cpmm {
    pub fn new(mutation: Option<Mutation>) -> Self {
        let name = match mutation {
            Some(m) => format!("{NAME}!{m}"),
            None => NAME.to_string(),
        };
        Cpmm { mutation, name }
    }

    fn mutated(&self, m: Mutation) -> bool {
        self.mutation == Some(m)
    }

    fn fresh(chain: &Chain, deadline: u64) -> Option<()> {
        throw_if(deadline <= chain.current_slot)
    }

    fn unpaid(ctx: &CallContext) -> Option<()> {
        throw_if(!ctx.amount.is_zero())
    }

    fn live(state: &CpmmState) -> Option<()> {
        throw_if(state.self_is_updating_token_pool)
    }

    pub fn add_liquidity(&self, chain: &Chain, ctx: &CallContext, state: &CpmmState, p: AddLiquidity) -> Outcome<CpmmState> {
        Self::live(state)?;
        Self::fresh(chain, p.deadline)?;
        throw_if(state.lqt_address.is_null())?;
        let amount = amount_to_nat(&ctx.amount);
        let lqt_minted = div_opt(&(&amount * &state.lqt_total), &state.xtz_pool)?;
        let tokens_deposited = if self.mutated(Mutation::FloorTokensDeposited) {
            div_opt(&(&amount * &state.token_pool), &state.xtz_pool)?
        } else {
            ceildiv_opt(&(&amount * &state.token_pool), &state.xtz_pool)?
        };
        throw_if(tokens_deposited > p.max_tokens_deposited)?;
        throw_if(lqt_minted < p.min_lqt_minted)?;
        let mut next = state.clone();
        next.xtz_pool += &amount;
        next.token_pool += &tokens_deposited;
        next.lqt_total += &lqt_minted;
        let ops = vec![
            fa2::transfer_call(state.token_address, ctx.from, ctx.contract_address, &state.token_id, tokens_deposited),
            mint_or_burn_call(state.lqt_address, Int::from(lqt_minted), p.owner),
        ];
        Some((next, ops))
    }

    pub fn remove_liquidity(&self, chain: &Chain, ctx: &CallContext, state: &CpmmState, p: RemoveLiquidity) -> Outcome<CpmmState> {
        Self::live(state)?;
        Self::fresh(chain, p.deadline)?;
        Self::unpaid(ctx)?;
        throw_if(state.lqt_address.is_null())?;
        let xtz_withdrawn = div_opt(&(&p.lqt_burned * &state.xtz_pool), &state.lqt_total)?;
        let tokens_withdrawn = div_opt(&(&p.lqt_burned * &state.token_pool), &state.lqt_total)?;
        throw_if(xtz_withdrawn < p.min_xtz_withdrawn.0)?;
        throw_if(tokens_withdrawn < p.min_tokens_withdrawn)?;
        let mut next = state.clone();
        next.lqt_total = sub_opt(&state.lqt_total, &p.lqt_burned)?;
        next.xtz_pool = sub_opt(&state.xtz_pool, &xtz_withdrawn)?;
        next.token_pool = sub_opt(&state.token_pool, &tokens_withdrawn)?;
        let ops = vec![
            mint_or_burn_call(state.lqt_address, -Int::from(p.lqt_burned), ctx.from),
            fa2::transfer_call(state.token_address, ctx.contract_address, p.to, &state.token_id, tokens_withdrawn),
            ActionBody::Transfer {
                to: p.to,
                amount: Tez(xtz_withdrawn),
            },
        ];
        Some((next, ops))
    }

    pub fn xtz_to_token(&self, chain: &Chain, ctx: &CallContext, state: &CpmmState, p: XtzToToken) -> Outcome<CpmmState> {
        Self::live(state)?;
        Self::fresh(chain, p.deadline)?;
        let amount = amount_to_nat(&ctx.amount);
        let tokens_bought = xtz_to_token_output(&amount, &state.xtz_pool, &state.token_pool)?;
        if !self.mutated(Mutation::DropMinTokensGuard) {
            throw_if(tokens_bought < p.min_tokens_bought)?;
        }
        let new_token_pool = sub_opt(&state.token_pool, &tokens_bought)?;
        let mut next = state.clone();
        next.xtz_pool += &amount;
        next.token_pool = new_token_pool;
        let op = fa2::transfer_call(state.token_address, ctx.contract_address, p.to, &state.token_id, tokens_bought);
        Some((next, vec![op]))
    }

    /// Shared first leg of `token_to_xtz` and `token_to_token`.
    fn sell_tokens(chain: &Chain, ctx: &CallContext, state: &CpmmState, tokens_sold: &Nat, deadline: u64) -> Option<(CpmmState, Nat)> {
        Self::live(state)?;
        Self::fresh(chain, deadline)?;
        Self::unpaid(ctx)?;
        let xtz_bought = token_to_xtz_output(tokens_sold, &state.xtz_pool, &state.token_pool)?;
        let mut next = state.clone();
        next.xtz_pool = sub_opt(&state.xtz_pool, &xtz_bought)?;
        next.token_pool += tokens_sold;
        Some((next, xtz_bought))
    }

    pub fn token_to_xtz(&self, chain: &Chain, ctx: &CallContext, state: &CpmmState, p: TokenToXtz) -> Outcome<CpmmState> {
        let (next, xtz_bought) = Self::sell_tokens(chain, ctx, state, &p.tokens_sold, p.deadline)?;
        throw_if(xtz_bought < p.min_xtz_bought.0)?;
        let ops = vec![
            fa2::transfer_call(state.token_address, ctx.from, ctx.contract_address, &state.token_id, p.tokens_sold),
            ActionBody::Transfer {
                to: p.to,
                amount: Tez(xtz_bought),
            },
        ];
        Some((next, ops))
    }

    pub fn token_to_token(&self, chain: &Chain, ctx: &CallContext, state: &CpmmState, p: TokenToToken) -> Outcome<CpmmState> {
        let (next, xtz_bought) = Self::sell_tokens(chain, ctx, state, &p.tokens_sold, p.deadline)?;
        let forward = CpmmMsg::Other(DexterMsg::XtzToToken(XtzToToken {
            to: p.to,
            min_tokens_bought: p.min_tokens_bought,
            deadline: p.deadline,
        }));
        let ops = vec![
            fa2::transfer_call(state.token_address, ctx.from, ctx.contract_address, &state.token_id, p.tokens_sold),
            ActionBody::Call {
                to: p.output_dexter,
                amount: Tez(xtz_bought),
                payload: forward.encode(),
            },
        ];
        Some((next, ops))
    }

    pub fn update_token_pool(&self, ctx: &CallContext, state: &CpmmState) -> Outcome<CpmmState> {
        Self::unpaid(ctx)?;
        throw_if(ctx.from != ctx.origin)?;
        Self::live(state)?;
        let mut next = state.clone();
        next.self_is_updating_token_pool = true;
        let request = fa2::Fa2Msg::BalanceOf {
            requests: vec![(ctx.contract_address, state.token_id.clone())],
            callback: ctx.contract_address,
        };
        let op = ActionBody::Call {
            to: state.token_address,
            amount: Tez::zero(),
            payload: request.encode(),
        };
        Some((next, vec![op]))
    }

    pub fn update_token_pool_internal(&self, ctx: &CallContext, state: &CpmmState, responses: Vec<BalanceResponse>) -> Outcome<CpmmState> {
        Self::unpaid(ctx)?;
        throw_if(!state.self_is_updating_token_pool)?;
        throw_if(ctx.from != state.token_address)?;
        let key = (ctx.contract_address, state.token_id.clone());
        let (_, balance) = responses.into_iter().find(|(req, _)| *req == key)?;
        let mut next = state.clone();
        next.token_pool = balance;
        next.self_is_updating_token_pool = false;
        Some((next, Vec::new()))
    }

    fn manager_only(ctx: &CallContext, state: &CpmmState) -> Option<()> {
        Self::unpaid(ctx)?;
        throw_if(ctx.from != state.manager)
    }

    pub fn default_entry(&self, ctx: &CallContext, state: &CpmmState) -> Outcome<CpmmState> {
        Self::live(state)?;
        let mut next = state.clone();
        if !self.mutated(Mutation::SkipDefaultCredit) {
            next.xtz_pool += amount_to_nat(&ctx.amount);
        }
        Some((next, Vec::new()))
    }
}

impl TypedContract for Cpmm {
    type Setup = CpmmSetup;
    type State = CpmmState;
    type Msg = CpmmMsg;

    fn name(&self) -> &str {
        &self.name
    }

    fn init(&self, _: &Chain, ctx: &CallContext, setup: &CpmmSetup) -> Option<CpmmState> {
        throw_if(!ctx.amount.is_zero())?;
        Some(CpmmState {
            token_pool: Nat::zero(),
            xtz_pool: Nat::zero(),
            lqt_total: setup.lqt_total.clone(),
            self_is_updating_token_pool: false,
            freeze_baker: false,
            manager: setup.manager,
            token_address: setup.token_address,
            token_id: setup.token_id.clone(),
            lqt_address: Address::NULL,
        })
    }

    fn receive(&self, chain: &Chain, ctx: &CallContext, state: &CpmmState, msg: Option<CpmmMsg>) -> Outcome<CpmmState> {
        let msg = match msg {
            None => return self.default_entry(ctx, state),
            Some(CpmmMsg::BalanceCallback(r)) => return self.update_token_pool_internal(ctx, state, r),
            Some(CpmmMsg::Other(m)) => m,
        };
        match msg {
            DexterMsg::AddLiquidity(p) => self.add_liquidity(chain, ctx, state, p),
            DexterMsg::RemoveLiquidity(p) => self.remove_liquidity(chain, ctx, state, p),
            DexterMsg::XtzToToken(p) => self.xtz_to_token(chain, ctx, state, p),
            DexterMsg::TokenToXtz(p) => self.token_to_xtz(chain, ctx, state, p),
            DexterMsg::TokenToToken(p) => self.token_to_token(chain, ctx, state, p),
            DexterMsg::UpdateTokenPool => self.update_token_pool(ctx, state),
            DexterMsg::SetBaker { freeze_baker } => {
                Self::manager_only(ctx, state)?;
                throw_if(state.freeze_baker)?;
                let mut next = state.clone();
                next.freeze_baker = freeze_baker;
                // No delegation action: bakers are outside the model.
                Some((next, Vec::new()))
            }
            DexterMsg::SetManager { new_manager } => {
                Self::manager_only(ctx, state)?;
                let mut next = state.clone();
                next.manager = new_manager;
                Some((next, Vec::new()))
            }
            DexterMsg::SetLqtAddress { addr } => {
                Self::manager_only(ctx, state)?;
                throw_if(!state.lqt_address.is_null())?;
                let mut next = state.clone();
                next.lqt_address = addr;
                Some((next, Vec::new()))
            }
            DexterMsg::Default => self.default_entry(ctx, state),
        }
    }
}

/// Is `msg` one of the three trading entrypoints?
pub fn is_trade(msg: &CpmmMsg) -> bool {
    matches!(
        msg,
        CpmmMsg::Other(DexterMsg::XtzToToken(_) | DexterMsg::TokenToXtz(_) | DexterMsg::TokenToToken(_))
    )
}

#[cfg(test)]
mod tests;
