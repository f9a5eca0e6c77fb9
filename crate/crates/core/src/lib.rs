//! A desk-scale smart-contract execution simulator with an executable
//! Dexter2 exchange (constant-product market maker, FA1.2 liquidity token,
//! FA2 reference token) and trace invariant checkers.

pub mod arith;
pub mod chain;
pub mod contracts;
pub mod harness;
pub mod contract;
pub mod payload;
pub mod primitives;
pub mod scenario;
pub mod trace;

pub use chain::{Action, ActionBody, CallContext, Chain, ChainState, Event, ExecOrder, TxEvent};
pub use payload::{Codec, Payload};
pub use primitives::{Address, Int, Nat, Tez};
