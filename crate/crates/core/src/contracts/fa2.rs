//! Minimal FA2 token: single-transfer and `balance_of` only.
//!
//! Operator permissions are not modelled. A user may move only their own
//! tokens; a contract may move anyone's (exchanges pull deposits this way).

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::arith::sub_opt;
use crate::chain::{ActionBody, CallContext, Chain};
use crate::contract::{throw_if, Outcome, TypedContract};
use crate::payload::{Codec, Payload, RecordReader};
use crate::primitives::{Address, Nat, Tez};

pub const NAME: &str = "fa2_ref";

/// Callback tag understood by FA2 receivers.
pub const RECEIVE_BALANCE_OF: &str = "receive_balance_of";

pub type Ledger = BTreeMap<(Address, Nat), Nat>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fa2State {
    pub ledger: Ledger,
}

impl Fa2State {
    pub fn balance(&self, owner: Address, token_id: &Nat) -> Nat {
        self.ledger
            .get(&(owner, token_id.clone()))
            .cloned()
            .unwrap_or_default()
    }

    fn set(&mut self, owner: Address, token_id: &Nat, value: Nat) {
        let key = (owner, token_id.clone());
        if value.is_zero() {
            self.ledger.remove(&key);
        } else {
            self.ledger.insert(key, value);
        }
    }
}

impl Codec for Fa2State {
    fn encode(&self) -> Payload {
        Payload::record([("ledger", self.ledger.encode())])
    }
    fn decode(p: &Payload) -> Option<Self> {
        let mut r = RecordReader::new(p)?;
        let ledger = r.field("ledger")?;
        r.finish(Fa2State { ledger })
    }
}

/// Initial ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fa2Setup {
    pub ledger: Ledger,
}

impl Codec for Fa2Setup {
    fn encode(&self) -> Payload {
        self.ledger.encode()
    }
    fn decode(p: &Payload) -> Option<Self> {
        Some(Fa2Setup {
            ledger: Ledger::decode(p)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fa2Transfer {
    pub from: Address,
    pub to: Address,
    pub token_id: Nat,
    pub value: Nat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fa2Msg {
    Transfer(Fa2Transfer),
    BalanceOf {
        requests: Vec<(Address, Nat)>,
        callback: Address,
    },
}

impl Codec for Fa2Msg {
    fn encode(&self) -> Payload {
        match self {
            Fa2Msg::Transfer(t) => Payload::tag(
                "transfer",
                Payload::record([
                    ("from", t.from.encode()),
                    ("to", t.to.encode()),
                    ("tokenId", t.token_id.encode()),
                    ("value", t.value.encode()),
                ]),
            ),
            Fa2Msg::BalanceOf { requests, callback } => Payload::tag(
                "balance_of",
                Payload::record([("requests", requests.encode()), ("callback", callback.encode())]),
            ),
        }
    }

    fn decode(p: &Payload) -> Option<Self> {
        let (tag, arg) = p.as_tag()?;
        let mut r = RecordReader::new(arg)?;
        match tag {
            "transfer" => {
                let t = Fa2Transfer {
                    from: r.field("from")?,
                    to: r.field("to")?,
                    token_id: r.field("tokenId")?,
                    value: r.field("value")?,
                };
                r.finish(Fa2Msg::Transfer(t))
            }
            "balance_of" => {
                let requests = r.field("requests")?;
                let callback = r.field("callback")?;
                r.finish(Fa2Msg::BalanceOf { requests, callback })
            }
            _ => None,
        }
    }
}

/// One `balance_of` answer: `((owner, tokenId), balance)`.
pub type BalanceResponse = ((Address, Nat), Nat);

pub fn balance_callback(responses: &[BalanceResponse]) -> Payload {
    Payload::tag(RECEIVE_BALANCE_OF, responses.to_vec().encode())
}

/// The call that moves `value` units of `token_id` on `token`.
pub fn transfer_call(token: Address, from: Address, to: Address, token_id: &Nat, value: Nat) -> ActionBody {
    ActionBody::Call {
        to: token,
        amount: Tez::zero(),
        payload: Fa2Msg::Transfer(Fa2Transfer {
            from,
            to,
            token_id: token_id.clone(),
            value,
        })
        .encode(),
    }
}

pub struct Fa2;

impl TypedContract for Fa2 {
    type Setup = Fa2Setup;
    type State = Fa2State;
    type Msg = Fa2Msg;

    fn name(&self) -> &str {
        NAME
    }

    fn init(&self, _: &Chain, ctx: &CallContext, setup: &Fa2Setup) -> Option<Fa2State> {
        throw_if(!ctx.amount.is_zero())?;
        let ledger = setup
            .ledger
            .iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Some(Fa2State { ledger })
    }

    fn receive(
        &self,
        _: &Chain,
        ctx: &CallContext,
        state: &Fa2State,
        msg: Option<Fa2Msg>,
    ) -> Outcome<Fa2State> {
        throw_if(!ctx.amount.is_zero())?;
        match msg? {
            Fa2Msg::Transfer(t) => {
                throw_if(ctx.from.is_user() && ctx.from != t.from)?;
                let mut next = state.clone();
                let from_balance = sub_opt(&next.balance(t.from, &t.token_id), &t.value)?;
                next.set(t.from, &t.token_id, from_balance);
                let to_balance = next.balance(t.to, &t.token_id) + &t.value;
                next.set(t.to, &t.token_id, to_balance);
                Some((next, Vec::new()))
            }
            Fa2Msg::BalanceOf { requests, callback } => {
                let responses: Vec<BalanceResponse> = requests
                    .into_iter()
                    .map(|(owner, id)| {
                        let bal = state.balance(owner, &id);
                        ((owner, id), bal)
                    })
                    .collect();
                let call = ActionBody::Call {
                    to: callback,
                    amount: Tez::zero(),
                    payload: balance_callback(&responses),
                };
                Some((state.clone(), vec![call]))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> Address {
        Address::user(1)
    }
    fn b() -> Address {
        Address::user(2)
    }

    fn ctx(from: Address) -> CallContext {
        CallContext {
            origin: from,
            from,
            contract_address: Address::contract(1),
            contract_balance: Tez::zero(),
            amount: Tez::zero(),
        }
    }

    fn state(entries: &[(Address, u64)]) -> Fa2State {
        Fa2State {
            ledger: entries
                .iter()
                .map(|(o, v)| ((*o, Nat::from(0u8)), Nat::from(*v)))
                .collect(),
        }
    }

    fn transfer(value: u64) -> Fa2Msg {
        Fa2Msg::Transfer(Fa2Transfer {
            from: a(),
            to: b(),
            token_id: Nat::from(0u8),
            value: Nat::from(value),
        })
    }

    #[test]
    fn transfer_moves_tokens() {
        let (s, ops) = Fa2
            .receive(&Chain::default(), &ctx(a()), &state(&[(a(), 100)]), Some(transfer(40)))
            .unwrap();
        assert_eq!(s, state(&[(a(), 60), (b(), 40)]));
        assert!(ops.is_empty());
    }

    #[test]
    fn transfer_underflow_fails() {
        assert!(Fa2
            .receive(&Chain::default(), &ctx(a()), &state(&[(a(), 100)]), Some(transfer(200)))
            .is_none());
    }

    #[test]
    fn zero_transfer_succeeds() {
        let s0 = state(&[(a(), 100)]);
        let (s, _) = Fa2
            .receive(&Chain::default(), &ctx(a()), &s0, Some(transfer(0)))
            .unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn users_cannot_move_others_tokens() {
        assert!(Fa2
            .receive(&Chain::default(), &ctx(b()), &state(&[(a(), 100)]), Some(transfer(1)))
            .is_none());
        let mut c = ctx(Address::contract(5));
        c.origin = b();
        assert!(Fa2
            .receive(&Chain::default(), &c, &state(&[(a(), 100)]), Some(transfer(1)))
            .is_some());
    }

    #[test]
    fn balance_of_echoes_ledger() {
        let main = Address::contract(2);
        let s0 = Fa2State {
            ledger: [((main, Nat::from(0u8)), Nat::from(42u8))].into(),
        };
        let msg = Fa2Msg::BalanceOf {
            requests: vec![(main, Nat::from(0u8)), (a(), Nat::from(0u8))],
            callback: main,
        };
        let (s, ops) = Fa2.receive(&Chain::default(), &ctx(main), &s0, Some(msg)).unwrap();
        assert_eq!(s, s0);
        assert_eq!(
            ops,
            vec![ActionBody::Call {
                to: main,
                amount: Tez::zero(),
                payload: Payload::parse("receive_balance_of([((@c2, 0), 42); ((@u1, 0), 0)])").unwrap(),
            }]
        );
    }

    #[test]
    fn msg_round_trip() {
        for m in [
            transfer(5),
            Fa2Msg::BalanceOf {
                requests: vec![(a(), Nat::from(3u8))],
                callback: Address::contract(1),
            },
        ] {
            assert_eq!(Fa2Msg::decode(&m.encode()), Some(m));
        }
    }
}
