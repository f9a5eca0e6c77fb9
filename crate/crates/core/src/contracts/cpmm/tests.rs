use super::*;
use crate::contracts::fa2::{Fa2Msg, Fa2Transfer};
use proptest::prelude::*;

const USER: Address = Address::user(1);
const OTHER: Address = Address::user(2);
const TOKEN: Address = Address::contract(1);
const MAIN: Address = Address::contract(2);
const LQT: Address = Address::contract(3);
const MAIN2: Address = Address::contract(5);

fn n(v: u64) -> Nat {
    Nat::from(v)
}

/// Independent evaluation of the trade formula in u128.
fn oracle_out(input: u128, in_pool: u128, out_pool: u128) -> u128 {
    input * 997 * out_pool / (in_pool * 1000 + input * 997)
}

fn chain(slot: u64) -> Chain {
    Chain {
        chain_height: slot,
        current_slot: slot,
        finalized_height: slot.saturating_sub(1),
    }
}

fn ctx(from: Address, amount: u64) -> CallContext {
    CallContext {
        origin: from,
        from,
        contract_address: MAIN,
        contract_balance: Tez::from(amount),
        amount: Tez::from(amount),
    }
}

fn pools(xtz: u64, token: u64, lqt: u64) -> CpmmState {
    CpmmState {
        token_pool: n(token),
        xtz_pool: n(xtz),
        lqt_total: n(lqt),
        self_is_updating_token_pool: false,
        freeze_baker: false,
        manager: USER,
        token_address: TOKEN,
        token_id: n(0),
        lqt_address: LQT,
    }
}

fn run(state: &CpmmState, ctx: &CallContext, msg: DexterMsg) -> Outcome<CpmmState> {
    Cpmm::new(None).receive(&chain(1), ctx, state, Some(CpmmMsg::Other(msg)))
}

fn token_transfer(from: Address, to: Address, value: u64) -> ActionBody {
    ActionBody::Call {
        to: TOKEN,
        amount: Tez::zero(),
        payload: Fa2Msg::Transfer(Fa2Transfer { from, to, token_id: n(0), value: n(value) }).encode(),
    }
}

fn xtt(min: u64, deadline: u64) -> DexterMsg {
    DexterMsg::XtzToToken(XtzToToken { to: OTHER, min_tokens_bought: n(min), deadline })
}

#[test]
fn init_sets_empty_pools() {
    let setup = CpmmSetup { lqt_total: n(100), manager: USER, token_address: TOKEN, token_id: n(0) };
    let s = Cpmm::new(None).init(&chain(0), &ctx(USER, 0), &setup).unwrap();
    assert_eq!((s.xtz_pool.clone(), s.token_pool.clone(), s.lqt_total.clone()), (n(0), n(0), n(100)));
    assert!(!s.self_is_updating_token_pool);
    assert!(s.lqt_address.is_null());
    assert!(Cpmm::new(None).init(&chain(0), &ctx(USER, 1), &setup).is_none());
}

#[test]
fn xtz_to_token_worked_example() {
    assert_eq!(oracle_out(100, 1000, 1000), 90);
    let (s, ops) = run(&pools(1000, 1000, 10), &ctx(USER, 100), xtt(90, 5)).unwrap();
    assert_eq!((s.xtz_pool.clone(), s.token_pool.clone()), (n(1100), n(910)));
    assert_eq!(ops, vec![token_transfer(MAIN, OTHER, 90)]);
    assert!(n(1000 * 1000) <= s.product());
    assert_eq!(s.product(), n(1_001_000));
}

#[test]
fn xtz_to_token_failures() {
    let base = pools(1000, 1000, 10);
    assert!(run(&base, &ctx(USER, 100), xtt(91, 5)).is_none());
    assert!(run(&base, &ctx(USER, 100), xtt(0, 1)).is_none(), "deadline equal to slot is stale");
    let mut updating = base.clone();
    updating.self_is_updating_token_pool = true;
    assert!(run(&updating, &ctx(USER, 100), xtt(0, 5)).is_none());
    assert!(run(&pools(0, 0, 0), &ctx(USER, 0), xtt(0, 5)).is_none(), "zero divisor");
}

#[test]
fn token_to_xtz_worked_example() {
    let msg = |sold, min| {
        DexterMsg::TokenToXtz(TokenToXtz { to: OTHER, tokens_sold: n(sold), min_xtz_bought: Tez::from(min), deadline: 5 })
    };
    let (s, ops) = run(&pools(1000, 1000, 10), &ctx(USER, 0), msg(100, 90)).unwrap();
    assert_eq!((s.xtz_pool.clone(), s.token_pool.clone()), (n(910), n(1100)));
    assert_eq!(
        ops,
        vec![token_transfer(USER, MAIN, 100), ActionBody::Transfer { to: OTHER, amount: Tez::from(90) }]
    );
    assert!(run(&pools(1000, 1000, 10), &ctx(USER, 1), msg(100, 0)).is_none());
    assert!(run(&pools(1000, 1000, 10), &ctx(USER, 0), msg(100, 91)).is_none());
    let (s, ops) = run(&pools(1000, 1000, 10), &ctx(USER, 0), msg(0, 0)).unwrap();
    assert_eq!(s, pools(1000, 1000, 10));
    assert_eq!(ops[1], ActionBody::Transfer { to: OTHER, amount: Tez::zero() });
}

#[test]
fn token_to_token_forwards_to_output_exchange() {
    let p = TokenToToken { output_dexter: MAIN2, to: OTHER, tokens_sold: n(100), min_tokens_bought: n(80), deadline: 5 };
    let (s, ops) = run(&pools(1000, 1000, 10), &ctx(USER, 0), DexterMsg::TokenToToken(p.clone())).unwrap();
    assert_eq!((s.xtz_pool.clone(), s.token_pool.clone()), (n(910), n(1100)));
    let forward = CpmmMsg::Other(xtt(80, 5)).encode();
    assert_eq!(
        ops,
        vec![
            token_transfer(USER, MAIN, 100),
            ActionBody::Call { to: MAIN2, amount: Tez::from(90), payload: forward }
        ]
    );
    // The output exchange prices 90 mutez against its own pools.
    assert_eq!(oracle_out(90, 1000, 1000), 82);
    let mut out_ctx = ctx(MAIN, 90);
    out_ctx.origin = USER;
    out_ctx.contract_address = MAIN2;
    let (_, ops) = run(&pools(1000, 1000, 10), &out_ctx, xtt(80, 5)).unwrap();
    let ActionBody::Call { payload, .. } = &ops[0] else { panic!() };
    let Some(Fa2Msg::Transfer(t)) = Fa2Msg::decode(payload) else { panic!() };
    assert_eq!(t.value, n(82));

    let stale = TokenToToken { deadline: 1, ..p };
    assert!(run(&pools(1000, 1000, 10), &ctx(USER, 0), DexterMsg::TokenToToken(stale)).is_none());
}

fn add(max: u64, min: u64) -> DexterMsg {
    DexterMsg::AddLiquidity(AddLiquidity { owner: OTHER, min_lqt_minted: n(min), max_tokens_deposited: n(max), deadline: 5 })
}

#[test]
fn add_liquidity_worked_example() {
    // floor(100*10/1000) = 1, ceil(100*500/1000) = 50
    let (s, ops) = run(&pools(1000, 500, 10), &ctx(USER, 100), add(50, 1)).unwrap();
    assert_eq!(
        (s.xtz_pool.clone(), s.token_pool.clone(), s.lqt_total.clone()),
        (n(1100), n(550), n(11))
    );
    assert_eq!(
        ops,
        vec![
            token_transfer(USER, MAIN, 50),
            ActionBody::Call {
                to: LQT,
                amount: Tez::zero(),
                payload: Fa12Msg::MintOrBurn { quantity: Int::from(1), target: OTHER }.encode()
            }
        ]
    );
    assert!(run(&pools(1000, 500, 10), &ctx(USER, 100), add(49, 1)).is_none());
    assert!(run(&pools(1000, 500, 10), &ctx(USER, 100), add(50, 2)).is_none());
    let mut unpaired = pools(1000, 500, 10);
    unpaired.lqt_address = Address::NULL;
    assert!(run(&unpaired, &ctx(USER, 100), add(50, 1)).is_none());
    assert!(run(&pools(0, 0, 10), &ctx(USER, 100), add(50, 0)).is_none());
}

#[test]
fn add_liquidity_rounds_deposit_up() {
    // 100 * 501 / 1000 = 50.1 tokens
    let (s, _) = run(&pools(1000, 501, 10), &ctx(USER, 100), add(60, 0)).unwrap();
    assert_eq!(s.token_pool, n(552));
    let floor = Cpmm::new(Some(Mutation::FloorTokensDeposited));
    let (s, _) = floor
        .receive(&chain(1), &ctx(USER, 100), &pools(1000, 501, 10), Some(CpmmMsg::Other(add(60, 0))))
        .unwrap();
    assert_eq!(s.token_pool, n(551));
}

fn remove(burn: u64, min_xtz: u64, min_tokens: u64) -> DexterMsg {
    DexterMsg::RemoveLiquidity(RemoveLiquidity {
        to: OTHER,
        lqt_burned: n(burn),
        min_xtz_withdrawn: Tez::from(min_xtz),
        min_tokens_withdrawn: n(min_tokens),
        deadline: 5,
    })
}

#[test]
fn remove_liquidity_worked_example() {
    let (s, ops) = run(&pools(1000, 500, 10), &ctx(USER, 0), remove(2, 0, 0)).unwrap();
    assert_eq!((s.xtz_pool.clone(), s.token_pool.clone(), s.lqt_total.clone()), (n(800), n(400), n(8)));
    assert_eq!(
        ops,
        vec![
            ActionBody::Call {
                to: LQT,
                amount: Tez::zero(),
                payload: Fa12Msg::MintOrBurn { quantity: Int::from(-2), target: USER }.encode()
            },
            token_transfer(MAIN, OTHER, 100),
            ActionBody::Transfer { to: OTHER, amount: Tez::from(200) },
        ]
    );
    assert!(run(&pools(1000, 500, 10), &ctx(USER, 0), remove(11, 0, 0)).is_none());
    assert!(run(&pools(1000, 500, 10), &ctx(USER, 0), remove(2, 201, 0)).is_none());
    assert!(run(&pools(1000, 500, 10), &ctx(USER, 0), remove(2, 0, 101)).is_none());
    assert!(run(&pools(1000, 500, 10), &ctx(USER, 1), remove(2, 0, 0)).is_none());
    assert!(run(&pools(1000, 500, 0), &ctx(USER, 0), remove(0, 0, 0)).is_none());
    let (s, _) = run(&pools(1000, 500, 10), &ctx(USER, 0), remove(0, 0, 0)).unwrap();
    assert_eq!(s, pools(1000, 500, 10));
}

#[test]
fn update_token_pool_round() {
    let (s, ops) = run(&pools(10, 10, 10), &ctx(USER, 0), DexterMsg::UpdateTokenPool).unwrap();
    assert!(s.self_is_updating_token_pool);
    assert_eq!(
        ops,
        vec![ActionBody::Call {
            to: TOKEN,
            amount: Tez::zero(),
            payload: Fa2Msg::BalanceOf { requests: vec![(MAIN, n(0))], callback: MAIN }.encode()
        }]
    );
    assert!(run(&s, &ctx(USER, 0), DexterMsg::UpdateTokenPool).is_none(), "re-entry");
    let mut relayed = ctx(Address::contract(9), 0);
    relayed.origin = USER;
    assert!(run(&pools(10, 10, 10), &relayed, DexterMsg::UpdateTokenPool).is_none());

    let callback = |from: Address, state: &CpmmState, responses| {
        Cpmm::new(None).receive(&chain(1), &ctx(from, 0), state, Some(CpmmMsg::BalanceCallback(responses)))
    };
    let (done, ops) = callback(TOKEN, &s, vec![((MAIN, n(0)), n(42))]).unwrap();
    assert_eq!(done.token_pool, n(42));
    assert!(!done.self_is_updating_token_pool && ops.is_empty());
    assert!(callback(USER, &s, vec![((MAIN, n(0)), n(42))]).is_none());
    assert!(callback(TOKEN, &pools(10, 10, 10), vec![((MAIN, n(0)), n(42))]).is_none());
    assert!(callback(TOKEN, &s, vec![]).is_none());
}

#[test]
fn manager_entrypoints() {
    let mut fresh = pools(0, 0, 0);
    fresh.lqt_address = Address::NULL;
    let (s, ops) = run(&fresh, &ctx(USER, 0), DexterMsg::SetLqtAddress { addr: LQT }).unwrap();
    assert_eq!(s.lqt_address, LQT);
    assert!(ops.is_empty());
    assert!(run(&s, &ctx(USER, 0), DexterMsg::SetLqtAddress { addr: LQT }).is_none());
    assert!(run(&fresh, &ctx(OTHER, 0), DexterMsg::SetLqtAddress { addr: LQT }).is_none());

    assert!(run(&s, &ctx(OTHER, 0), DexterMsg::SetManager { new_manager: OTHER }).is_none());
    let (m, _) = run(&s, &ctx(USER, 0), DexterMsg::SetManager { new_manager: OTHER }).unwrap();
    assert_eq!(m.manager, OTHER);

    let (b, ops) = run(&s, &ctx(USER, 0), DexterMsg::SetBaker { freeze_baker: true }).unwrap();
    assert!(b.freeze_baker && ops.is_empty());
    assert!(run(&b, &ctx(USER, 0), DexterMsg::SetBaker { freeze_baker: false }).is_none());
    assert!(run(&s, &ctx(USER, 1), DexterMsg::SetBaker { freeze_baker: false }).is_none());
}

#[test]
fn default_entrypoint() {
    let c = Cpmm::new(None);
    let (s, ops) = c.receive(&chain(1), &ctx(USER, 5), &pools(10, 0, 0), None).unwrap();
    assert_eq!(s.xtz_pool, n(15));
    assert!(ops.is_empty());
    let (s, _) = c.receive(&chain(1), &ctx(USER, 0), &pools(10, 0, 0), None).unwrap();
    assert_eq!(s, pools(10, 0, 0));
    let mut updating = pools(10, 0, 0);
    updating.self_is_updating_token_pool = true;
    assert!(c.receive(&chain(1), &ctx(USER, 3), &updating, None).is_none());
    let (s, _) = run(&pools(10, 0, 0), &ctx(USER, 3), DexterMsg::Default).unwrap();
    assert_eq!(s.xtz_pool, n(13));
}

#[test]
fn envelope_decoding() {
    let wrapped = Payload::parse("other_msg(xtz_to_token([to(@u2); minTokensBought(90); deadline(5)]))").unwrap();
    assert_eq!(CpmmMsg::decode(&wrapped), Some(CpmmMsg::Other(xtt(90, 5))));
    let bare = Payload::parse("xtz_to_token([to(@u2); minTokensBought(90); deadline(5)])").unwrap();
    assert_eq!(CpmmMsg::decode(&bare), None);
    assert_eq!(CpmmMsg::decode(&Payload::parse("transfer(unit)").unwrap()), None);
    assert_eq!(
        CpmmMsg::decode(&Payload::parse("receive_balance_of([((@c2, 0), 7)])").unwrap()),
        Some(CpmmMsg::BalanceCallback(vec![((MAIN, n(0)), n(7))]))
    );
    assert_eq!(
        CpmmMsg::decode(&Payload::parse("receive_total_supply(100)").unwrap()),
        None
    );
}

fn arb_addr() -> impl Strategy<Value = Address> {
    (any::<bool>(), 0u64..20).prop_map(|(u, i)| if u { Address::user(i) } else { Address::contract(i) })
}

fn arb_dexter_msg() -> impl Strategy<Value = DexterMsg> {
    let nat = any::<u64>().prop_map(n);
    prop_oneof![
        (arb_addr(), nat.clone(), nat.clone(), any::<u64>()).prop_map(|(owner, a, b, deadline)| {
            DexterMsg::AddLiquidity(AddLiquidity { owner, min_lqt_minted: a, max_tokens_deposited: b, deadline })
        }),
        (arb_addr(), nat.clone(), any::<u64>(), nat.clone(), any::<u64>()).prop_map(|(to, b, x, t, deadline)| {
            DexterMsg::RemoveLiquidity(RemoveLiquidity {
                to,
                lqt_burned: b,
                min_xtz_withdrawn: Tez::from(x),
                min_tokens_withdrawn: t,
                deadline,
            })
        }),
        (arb_addr(), nat.clone(), any::<u64>())
            .prop_map(|(to, m, deadline)| DexterMsg::XtzToToken(XtzToToken { to, min_tokens_bought: m, deadline })),
        (arb_addr(), nat.clone(), any::<u64>(), any::<u64>()).prop_map(|(to, s, m, deadline)| {
            DexterMsg::TokenToXtz(TokenToXtz { to, tokens_sold: s, min_xtz_bought: Tez::from(m), deadline })
        }),
        (arb_addr(), arb_addr(), nat.clone(), nat, any::<u64>()).prop_map(|(o, to, s, m, deadline)| {
            DexterMsg::TokenToToken(TokenToToken { output_dexter: o, to, tokens_sold: s, min_tokens_bought: m, deadline })
        }),
        Just(DexterMsg::UpdateTokenPool),
        any::<bool>().prop_map(|freeze_baker| DexterMsg::SetBaker { freeze_baker }),
        arb_addr().prop_map(|new_manager| DexterMsg::SetManager { new_manager }),
        arb_addr().prop_map(|addr| DexterMsg::SetLqtAddress { addr }),
        Just(DexterMsg::Default),
    ]
}

proptest! {
    #[test]
    fn messages_round_trip(m in arb_dexter_msg()) {
        let msg = CpmmMsg::Other(m);
        let p = msg.encode();
        prop_assert_eq!(CpmmMsg::decode(&p), Some(msg.clone()));
        prop_assert_eq!(CpmmMsg::decode(&Payload::parse(&p.to_string()).unwrap()), Some(msg));
    }

    #[test]
    fn state_round_trip(x in any::<u64>(), t in any::<u64>(), l in any::<u64>(), flag in any::<bool>(), lqt in arb_addr()) {
        let mut s = pools(x, t, l);
        s.self_is_updating_token_pool = flag;
        s.lqt_address = lqt;
        prop_assert_eq!(CpmmState::decode(&s.encode()), Some(s));
    }

    #[test]
    fn trades_never_shrink_the_product(
        xtz in 1u64..1_000_000_000,
        token in 1u64..1_000_000_000,
        amount in 0u64..1_000_000_000,
    ) {
        let before = pools(xtz, token, 10);
        if let Some((s, _)) = run(&before, &ctx(USER, amount), xtt(0, 5)) {
            prop_assert!(s.product() >= before.product());
            prop_assert_eq!(s.token_pool, n(token) - n(oracle_out(amount as u128, xtz as u128, token as u128) as u64));
        }
        let sell = DexterMsg::TokenToXtz(TokenToXtz { to: OTHER, tokens_sold: n(amount), min_xtz_bought: Tez::zero(), deadline: 5 });
        if let Some((s, _)) = run(&before, &ctx(USER, 0), sell) {
            prop_assert!(s.product() >= before.product());
        }
    }

    #[test]
    fn liquidity_round_trips_never_lose_pool_value(
        xtz in 1u64..1_000_000_000,
        token in 0u64..1_000_000_000,
        lqt in 1u64..1_000_000_000,
        amount in 0u64..1_000_000_000,
    ) {
        let before = pools(xtz, token, lqt);
        let (s, _) = run(&before, &ctx(USER, amount), add(u64::MAX, 0)).unwrap();
        // value per share never drops: pool * lqt_before >= pool_before * lqt
        prop_assert!(&s.token_pool * &before.lqt_total >= &before.token_pool * &s.lqt_total);
        prop_assert!(&s.xtz_pool * &before.lqt_total >= &before.xtz_pool * &s.lqt_total);
    }
}
