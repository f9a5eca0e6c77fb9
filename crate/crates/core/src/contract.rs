//! The init/receive contract abstraction.
//!
//! Contracts are written against [`TypedContract`] with their own setup,
//! state and message types, then erased to [`Contract`] (payload in,
//! payload out) by [`Erased`] so the chain can host them side by side.

use std::fmt;
use std::sync::Arc;

use crate::chain::{ActionBody, CallContext, Chain};
use crate::payload::{Codec, Payload};

/// Result of a successful `receive`: the new state and the emitted actions.
pub type Outcome<S> = Option<(S, Vec<ActionBody>)>;

/// A deployed contract's code. Both functions must be deterministic.
pub trait Contract: Send + Sync {
    /// Stable identifier of the code, used in traces and state comparisons.
    fn name(&self) -> &str;

    fn init(&self, chain: &Chain, ctx: &CallContext, setup: &Payload) -> Option<Payload>;

    fn receive(
        &self,
        chain: &Chain,
        ctx: &CallContext,
        state: &Payload,
        msg: Option<&Payload>,
    ) -> Outcome<Payload>;
}

pub type ContractRef = Arc<dyn Contract>;

impl fmt::Debug for dyn Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.name())
    }
}

pub trait TypedContract: Send + Sync {
    type Setup: Codec;
    type State: Codec;
    type Msg: Codec;

    fn name(&self) -> &str;

    fn init(&self, chain: &Chain, ctx: &CallContext, setup: &Self::Setup) -> Option<Self::State>;

    fn receive(
        &self,
        chain: &Chain,
        ctx: &CallContext,
        state: &Self::State,
        msg: Option<Self::Msg>,
    ) -> Outcome<Self::State>;
}

/// Payload-level view of a typed contract. Undecodable setups, states or
/// messages make the call fail.
pub struct Erased<C>(pub C);

impl<C: TypedContract> Contract for Erased<C> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn init(&self, chain: &Chain, ctx: &CallContext, setup: &Payload) -> Option<Payload> {
        let setup = C::Setup::decode(setup)?;
        self.0.init(chain, ctx, &setup).map(|s| s.encode())
    }

    fn receive(
        &self,
        chain: &Chain,
        ctx: &CallContext,
        state: &Payload,
        msg: Option<&Payload>,
    ) -> Outcome<Payload> {
        let state = C::State::decode(state)?;
        let msg = match msg {
            Some(p) => Some(C::Msg::decode(p)?),
            None => None,
        };
        self.0
            .receive(chain, ctx, &state, msg)
            .map(|(s, acts)| (s.encode(), acts))
    }
}

pub fn erase<C: TypedContract + 'static>(contract: C) -> ContractRef {
    Arc::new(Erased(contract))
}

/// Fails the enclosing contract call when `cond` holds.
pub(crate) fn throw_if(cond: bool) -> Option<()> {
    (!cond).then_some(())
}
