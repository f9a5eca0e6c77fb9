//! Reference model of the liquidity token, replayed from the transaction log.
//!
//! Deliberately written apart from the contract: plain `u128` arithmetic and
//! hash maps, one rule per entrypoint.

use std::collections::HashMap;

use num_traits::ToPrimitive;

use crate::chain::TxEvent;
use crate::contracts::fa12::{Fa12Msg, Fa12Setup, Fa12State};
use crate::payload::Codec;
use crate::primitives::{Address, Nat};

#[derive(Debug, Clone, Default)]
pub struct Fa12Model {
    admin: Option<Address>,
    supply: u128,
    balances: HashMap<Address, u128>,
    allowances: HashMap<(Address, Address), u128>,
}

fn small(n: &Nat) -> Result<u128, String> {
    n.to_u128().ok_or_else(|| format!("{n} exceeds the model range"))
}

impl Fa12Model {
    pub fn new(setup: &Fa12Setup) -> Result<Self, String> {
        let pool = small(&setup.initial_pool)?;
        let mut m = Fa12Model {
            admin: Some(setup.admin),
            supply: pool,
            ..Default::default()
        };
        m.balances.insert(setup.lqt_provider, pool);
        Ok(m)
    }

    /// Applies one executed call. `Err` means the call should have failed.
    pub fn apply(&mut self, tx: &TxEvent) -> Result<(), String> {
        if !tx.amount.is_zero() {
            return Err("paid call accepted".into());
        }
        let payload = tx.payload.as_ref().ok_or("plain transfer accepted")?;
        let msg = Fa12Msg::decode(payload).ok_or("unknown message accepted")?;
        let sender = tx.from;
        match msg {
            Fa12Msg::Transfer { from, to, value } => {
                let value = small(&value)?;
                if sender != from {
                    let a = self.allowances.entry((from, sender)).or_default();
                    if *a < value {
                        return Err(format!("transfer of {value} above allowance {a}"));
                    }
                    *a -= value;
                }
                let b = self.balances.entry(from).or_default();
                if *b < value {
                    return Err(format!("transfer of {value} above balance {b}"));
                }
                *b -= value;
                *self.balances.entry(to).or_default() += value;
            }
            Fa12Msg::Approve { spender, value } => {
                let value = small(&value)?;
                let a = self.allowances.entry((sender, spender)).or_default();
                if *a > 0 && value > 0 {
                    return Err("non-zero allowance overwritten".into());
                }
                *a = value;
            }
            Fa12Msg::MintOrBurn { quantity, target } => {
                if Some(sender) != self.admin {
                    return Err(format!("mint_or_burn by non-admin {sender}"));
                }
                let q = quantity.to_i128().ok_or("quantity exceeds the model range")?;
                let b = self.balances.entry(target).or_default();
                let nb = (*b as i128).checked_add(q).filter(|v| *v >= 0).ok_or("burn below zero")?;
                let ns = (self.supply as i128).checked_add(q).filter(|v| *v >= 0).ok_or("supply below zero")?;
                *b = nb as u128;
                self.supply = ns as u128;
            }
            Fa12Msg::GetAllowance { .. } | Fa12Msg::GetBalance { .. } | Fa12Msg::GetTotalSupply { .. } => {}
        }
        Ok(())
    }

    /// Differences against the contract's stored state, one line each.
    pub fn diff(&self, state: &Fa12State) -> Vec<String> {
        let mut out = Vec::new();
        if Some(state.admin) != self.admin {
            out.push(format!("admin {} vs model {:?}", state.admin, self.admin));
        }
        if state.total_supply.to_u128() != Some(self.supply) {
            out.push(format!("total_supply {} vs model {}", state.total_supply, self.supply));
        }
        let balances: Vec<_> = self.balances.iter().filter(|(_, v)| **v > 0).collect();
        if balances.len() != state.tokens.len() {
            out.push(format!("{} holders vs model {}", state.tokens.len(), balances.len()));
        }
        for (who, v) in balances {
            if state.balance(who).to_u128() != Some(*v) {
                out.push(format!("balance of {who} {} vs model {v}", state.balance(who)));
            }
        }
        let allowances: Vec<_> = self.allowances.iter().filter(|(_, v)| **v > 0).collect();
        if allowances.len() != state.allowances.len() {
            out.push(format!("{} allowances vs model {}", state.allowances.len(), allowances.len()));
        }
        for ((owner, spender), v) in allowances {
            if state.allowance(owner, spender).to_u128() != Some(*v) {
                out.push(format!(
                    "allowance {owner}->{spender} {} vs model {v}",
                    state.allowance(owner, spender)
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{Int, Tez};

    const ADMIN: Address = Address::contract(2);
    const A: Address = Address::user(1);
    const B: Address = Address::user(2);

    fn tx(from: Address, msg: Fa12Msg) -> TxEvent {
        TxEvent {
            from,
            to: Address::contract(3),
            amount: Tez::zero(),
            payload: Some(msg.encode()),
        }
    }

    fn model() -> Fa12Model {
        Fa12Model::new(&Fa12Setup {
            admin: ADMIN,
            lqt_provider: A,
            initial_pool: Nat::from(100u8),
        })
        .unwrap()
    }

    #[test]
    fn spender_uses_up_allowance() {
        let mut m = model();
        m.apply(&tx(A, Fa12Msg::Approve { spender: B, value: Nat::from(30u8) })).unwrap();
        let spend = Fa12Msg::Transfer { from: A, to: B, value: Nat::from(20u8) };
        m.apply(&tx(B, spend.clone())).unwrap();
        assert_eq!(m.allowances[&(A, B)], 10);
        assert!(m.apply(&tx(B, spend)).is_err());
    }

    #[test]
    fn only_admin_mints() {
        let mut m = model();
        let mint = Fa12Msg::MintOrBurn { quantity: Int::from(5), target: B };
        assert!(m.apply(&tx(A, mint.clone())).is_err());
        m.apply(&tx(ADMIN, mint)).unwrap();
        assert_eq!(m.supply, 105);
        let burn = Fa12Msg::MintOrBurn { quantity: Int::from(-6), target: B };
        assert!(m.apply(&tx(ADMIN, burn)).is_err());
    }
}
