//! The liquidity token: an FA1.2 ledger whose admin (the exchange) may
//! mint and burn.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::Mutation;
use crate::arith::{int_add_nat, sub_opt};
use crate::chain::{ActionBody, CallContext, Chain};
use crate::contract::{throw_if, Outcome, TypedContract};
use crate::payload::{Codec, Payload, RecordReader};
use crate::primitives::{Address, Int, Nat, Tez};

pub const NAME: &str = "dexter2_fa12";

pub const RECEIVE_TOTAL_SUPPLY: &str = "receive_total_supply";
pub const RECEIVE_BALANCE: &str = "receive_balance";
pub const RECEIVE_ALLOWANCE: &str = "receive_allowance";

/// Ledger state. Absent entries mean zero; zero entries are pruned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fa12State {
    pub tokens: BTreeMap<Address, Nat>,
    pub allowances: BTreeMap<(Address, Address), Nat>,
    pub admin: Address,
    pub total_supply: Nat,
}

impl Fa12State {
    pub fn balance(&self, owner: &Address) -> Nat {
        self.tokens.get(owner).cloned().unwrap_or_default()
    }

    pub fn allowance(&self, owner: &Address, spender: &Address) -> Nat {
        self.allowances
            .get(&(*owner, *spender))
            .cloned()
            .unwrap_or_default()
    }

    fn set_balance(&mut self, owner: Address, value: Nat) {
        if value.is_zero() {
            self.tokens.remove(&owner);
        } else {
            self.tokens.insert(owner, value);
        }
    }

    fn set_allowance(&mut self, owner: Address, spender: Address, value: Nat) {
        if value.is_zero() {
            self.allowances.remove(&(owner, spender));
        } else {
            self.allowances.insert((owner, spender), value);
        }
    }
}

impl Codec for Fa12State {
    fn encode(&self) -> Payload {
        Payload::record([
            ("tokens", self.tokens.encode()),
            ("allowances", self.allowances.encode()),
            ("admin", self.admin.encode()),
            ("total_supply", self.total_supply.encode()),
        ])
    }
    fn decode(p: &Payload) -> Option<Self> {
        let mut r = RecordReader::new(p)?;
        let s = Fa12State {
            tokens: r.field("tokens")?,
            allowances: r.field("allowances")?,
            admin: r.field("admin")?,
            total_supply: r.field("total_supply")?,
        };
        r.finish(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fa12Setup {
    pub admin: Address,
    pub lqt_provider: Address,
    pub initial_pool: Nat,
}

impl Codec for Fa12Setup {
    fn encode(&self) -> Payload {
        Payload::record([
            ("admin_", self.admin.encode()),
            ("lqt_provider", self.lqt_provider.encode()),
            ("initial_pool", self.initial_pool.encode()),
        ])
    }
    fn decode(p: &Payload) -> Option<Self> {
        let mut r = RecordReader::new(p)?;
        let s = Fa12Setup {
            admin: r.field("admin_")?,
            lqt_provider: r.field("lqt_provider")?,
            initial_pool: r.field("initial_pool")?,
        };
        r.finish(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fa12Msg {
    Transfer {
        from: Address,
        to: Address,
        value: Nat,
    },
    Approve {
        spender: Address,
        value: Nat,
    },
    MintOrBurn {
        quantity: Int,
        target: Address,
    },
    GetAllowance {
        owner: Address,
        spender: Address,
        callback: Address,
    },
    GetBalance {
        owner: Address,
        callback: Address,
    },
    GetTotalSupply {
        callback: Address,
    },
}

impl Codec for Fa12Msg {
    fn encode(&self) -> Payload {
        let (tag, fields) = match self {
            Fa12Msg::Transfer { from, to, value } => (
                "transfer",
                vec![("from", from.encode()), ("to", to.encode()), ("value", value.encode())],
            ),
            Fa12Msg::Approve { spender, value } => (
                "approve",
                vec![("spender", spender.encode()), ("value", value.encode())],
            ),
            Fa12Msg::MintOrBurn { quantity, target } => (
                "mint_or_burn",
                vec![("quantity", quantity.encode()), ("target", target.encode())],
            ),
            Fa12Msg::GetAllowance {
                owner,
                spender,
                callback,
            } => (
                "get_allowance",
                vec![
                    ("owner", owner.encode()),
                    ("spender", spender.encode()),
                    ("callback", callback.encode()),
                ],
            ),
            Fa12Msg::GetBalance { owner, callback } => (
                "get_balance",
                vec![("owner", owner.encode()), ("callback", callback.encode())],
            ),
            Fa12Msg::GetTotalSupply { callback } => {
                ("get_total_supply", vec![("callback", callback.encode())])
            }
        };
        Payload::tag(tag, Payload::record(fields))
    }

    fn decode(p: &Payload) -> Option<Self> {
        let (tag, arg) = p.as_tag()?;
        let mut r = RecordReader::new(arg)?;
        let msg = match tag {
            "transfer" => Fa12Msg::Transfer {
                from: r.field("from")?,
                to: r.field("to")?,
                value: r.field("value")?,
            },
            "approve" => Fa12Msg::Approve {
                spender: r.field("spender")?,
                value: r.field("value")?,
            },
            "mint_or_burn" => Fa12Msg::MintOrBurn {
                quantity: r.field("quantity")?,
                target: r.field("target")?,
            },
            "get_allowance" => Fa12Msg::GetAllowance {
                owner: r.field("owner")?,
                spender: r.field("spender")?,
                callback: r.field("callback")?,
            },
            "get_balance" => Fa12Msg::GetBalance {
                owner: r.field("owner")?,
                callback: r.field("callback")?,
            },
            "get_total_supply" => Fa12Msg::GetTotalSupply {
                callback: r.field("callback")?,
            },
            _ => return None,
        };
        r.finish(msg)
    }
}

/// Signed supply change carried by a payload, if it is a `mint_or_burn` call.
pub fn minted_and_burned(payload: &Payload) -> Option<Int> {
    match Fa12Msg::decode(payload)? {
        Fa12Msg::MintOrBurn { quantity, .. } => Some(quantity),
        _ => None,
    }
}

fn view(callback: Address, tag: &str, value: Nat) -> ActionBody {
    ActionBody::Call {
        to: callback,
        amount: Tez::zero(),
        payload: Payload::tag(tag, Payload::Nat(value)),
    }
}

pub struct Fa12 {
    mutation: Option<Mutation>,
    name: String,
}

impl Fa12 {
    pub fn new(mutation: Option<Mutation>) -> Self {
        let name = match mutation {
            Some(m) => format!("{NAME}!{m}"),
            None => NAME.to_string(),
        };
        Fa12 { mutation, name }
    }

    fn mutated(&self, m: Mutation) -> bool {
        self.mutation == Some(m)
    }

    fn transfer(&self, ctx: &CallContext, state: &Fa12State, from: Address, to: Address, value: Nat) -> Option<Fa12State> {
        let mut next = state.clone();
        if ctx.from != from {
            let left = sub_opt(&next.allowance(&from, &ctx.from), &value)?;
            if !self.mutated(Mutation::SkipAllowanceDecrement) {
                next.set_allowance(from, ctx.from, left);
            }
        }
        let from_balance = sub_opt(&next.balance(&from), &value)?;
        next.set_balance(from, from_balance);
        let to_balance = next.balance(&to) + value;
        next.set_balance(to, to_balance);
        Some(next)
    }
}

impl TypedContract for Fa12 {
    type Setup = Fa12Setup;
    type State = Fa12State;
    type Msg = Fa12Msg;

    fn name(&self) -> &str {
        &self.name
    }

    fn init(&self, _: &Chain, ctx: &CallContext, setup: &Fa12Setup) -> Option<Fa12State> {
        throw_if(!ctx.amount.is_zero())?;
        let mut state = Fa12State {
            tokens: BTreeMap::new(),
            allowances: BTreeMap::new(),
            admin: setup.admin,
            total_supply: setup.initial_pool.clone(),
        };
        state.set_balance(setup.lqt_provider, setup.initial_pool.clone());
        Some(state)
    }

    fn receive(
        &self,
        _: &Chain,
        ctx: &CallContext,
        state: &Fa12State,
        msg: Option<Fa12Msg>,
    ) -> Outcome<Fa12State> {
        throw_if(!ctx.amount.is_zero())?;
        match msg? {
            Fa12Msg::Transfer { from, to, value } => {
                Some((self.transfer(ctx, state, from, to, value)?, Vec::new()))
            }
            Fa12Msg::Approve { spender, value } => {
                // Changing a non-zero allowance to another non-zero value is
                // refused; it must go through zero first.
                let current = state.allowance(&ctx.from, &spender);
                throw_if(!current.is_zero() && !value.is_zero())?;
                let mut next = state.clone();
                next.set_allowance(ctx.from, spender, value);
                Some((next, Vec::new()))
            }
            Fa12Msg::MintOrBurn { quantity, target } => {
                throw_if(ctx.from != state.admin && !self.mutated(Mutation::AnyoneMintsOrBurns))?;
                let mut next = state.clone();
                let balance = int_add_nat(&next.balance(&target), &quantity)?;
                next.total_supply = int_add_nat(&state.total_supply, &quantity)?;
                next.set_balance(target, balance);
                Some((next, Vec::new()))
            }
            Fa12Msg::GetAllowance {
                owner,
                spender,
                callback,
            } => Some((
                state.clone(),
                vec![view(callback, RECEIVE_ALLOWANCE, state.allowance(&owner, &spender))],
            )),
            Fa12Msg::GetBalance { owner, callback } => Some((
                state.clone(),
                vec![view(callback, RECEIVE_BALANCE, state.balance(&owner))],
            )),
            Fa12Msg::GetTotalSupply { callback } => Some((
                state.clone(),
                vec![view(callback, RECEIVE_TOTAL_SUPPLY, state.total_supply.clone())],
            )),
        }
    }
}
