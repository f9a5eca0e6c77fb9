use dexsim::chain::{Action, ActionBody, ExecOrder};
use dexsim::contracts::cpmm::{CpmmMsg, CpmmState, DexterMsg, XtzToToken};
use dexsim::contracts::Mutation;
use dexsim::harness::checks::{check_constant_product, check_share_value, check_tez_pool, decode_at};
use dexsim::harness::gen::MANAGER;
use dexsim::harness::*;
use dexsim::{Address, Codec, Nat, Tez};

fn config(seed: u64) -> ScenarioConfig {
    ScenarioConfig { seed, ..Default::default() }
}

/// Pools of exactly (1000 mutez, 1000 tokens) once the bootstrap block ran.
fn thousand_pools() -> ScenarioConfig {
    ScenarioConfig {
        blocks: 1,
        exchanges: 1,
        ranges: Ranges { pool_min: 1000, pool_max: 1000, ..Default::default() },
        ..Default::default()
    }
}

fn pool(t: &Trace, i: usize) -> CpmmState {
    decode_at(&t.state, &t.exchanges[i].main).unwrap()
}

#[test]
fn wiring_only_trace_passes_with_empty_pools() {
    for order in ExecOrder::BOTH {
        let c = ScenarioConfig { blocks: 0, order, ..Default::default() };
        let t = run_checked(&c).unwrap();
        assert!(t.report.passed(), "{}", t.report);
        assert_eq!(t.blocks.len(), 1);
        assert_eq!(t.state.log().len(), 6 + 2, "six deployments and two set_lqt_address calls");
        for (i, w) in t.exchanges.iter().enumerate() {
            let s = pool(&t, i);
            assert_eq!(s.xtz_pool, Nat::from(0u8));
            assert_eq!(t.state.env_balance(&w.main), Tez::zero());
            assert_eq!(s.lqt_address, w.lqt);
        }
        assert!(check_state(&t.state).passed());
        assert!(check_order_robustness(&c).unwrap().passed());
    }
}

#[test]
fn bootstrap_block_fills_the_pools() {
    let t = run_checked(&thousand_pools()).unwrap();
    assert!(t.report.passed(), "{}", t.report);
    let s = pool(&t, 0);
    assert_eq!((s.xtz_pool.clone(), s.token_pool.clone(), s.lqt_total.clone()), (1000u32.into(), 1000u32.into(), 1000u32.into()));
    assert!(!s.self_is_updating_token_pool);
}

#[test]
fn one_trade_keeps_pool_equal_to_balance() {
    let t = run_checked(&thousand_pools()).unwrap();
    let main = t.exchanges[0].main;
    let trade = Action::user(
        Address::user(2),
        ActionBody::Call {
            to: main,
            amount: Tez::from(100),
            payload: CpmmMsg::Other(DexterMsg::XtzToToken(XtzToToken {
                to: Address::user(2),
                min_tokens_bought: Nat::from(90u8),
                deadline: 100,
            }))
            .encode(),
        },
    );
    for order in ExecOrder::BOTH {
        let next = t.state.add_block(vec![trade.clone()], order).unwrap();
        let s: CpmmState = decode_at(&next, &main).unwrap();
        assert_eq!(s.xtz_pool, Nat::from(1100u32));
        assert_eq!(next.env_balance(&main), Tez::from(1100));
        // 100*997*1000 / (1000*1000 + 100*997) = 90.66...
        assert_eq!(s.token_pool, Nat::from(910u32));
        check_tez_pool(&next, &main, true).unwrap();
        assert!(check_state(&next).passed());
    }
}

#[test]
fn fixed_seed_is_deterministic() {
    let a = run_checked(&config(11)).unwrap();
    let b = run_checked(&config(11)).unwrap();
    assert_eq!(a.state.digest(), b.state.digest());
    assert_eq!(a.report, b.report);
    let c = run_checked(&config(12)).unwrap();
    assert_ne!(a.state.digest(), c.state.digest());
}

#[test]
fn prefix_replay_matches_the_full_run() {
    let full = gen_trace(&ScenarioConfig { blocks: 8, ..config(5) }).unwrap();
    let prefix = gen_trace(&ScenarioConfig { blocks: 4, ..config(5) }).unwrap();
    assert_eq!(prefix.blocks.len(), 5);
    for (x, y) in full.blocks.iter().zip(&prefix.blocks) {
        assert_eq!(x.attempts.len(), y.attempts.len());
        for (a, b) in x.attempts.iter().zip(&y.attempts) {
            assert_eq!(a.roots, b.roots);
            assert_eq!(a.outcome, b.outcome);
        }
        assert_eq!(x.pools, y.pools);
    }
}

#[test]
fn default_weights_produce_trades() {
    let t = gen_trace(&config(3)).unwrap();
    let trades = t
        .snapshots
        .iter()
        .filter_map(|s| match &s.executed.as_ref()?.body {
            ActionBody::Call { payload, .. } => CpmmMsg::decode(payload),
            _ => None,
        })
        .filter(dexsim::contracts::cpmm::is_trade)
        .count();
    assert!(trades >= 1);
    assert!(t.committed_blocks() >= 1);
}

#[test]
fn injected_failures_are_rejected_and_retried() {
    let c = ScenarioConfig { failure_rate: 1.0, blocks: 6, ..config(8) };
    let t = run_checked(&c).unwrap();
    assert!(t.report.entry(Invariant::Atomicity).unwrap().checks >= 5);
    assert!(t.report.passed(), "{}", t.report);
    for b in t.blocks.iter().skip(2) {
        let first = &b.attempts[0];
        assert!(first.injected.is_some());
        assert!(first.outcome.is_err());
        assert_eq!(b.attempts.len(), 2);
        assert!(b.attempts[1].injected.is_none());
    }
}

#[test]
fn correct_contracts_pass_under_both_orders() {
    for seed in 0..25 {
        let r = check_order_robustness(&config(seed)).unwrap();
        assert!(r.passed(), "seed {seed}\n{r}");
        for inv in Invariant::ALL {
            assert!(r.entry(inv).is_some_and(|e| e.checks > 0), "{inv} never checked for seed {seed}");
        }
    }
}

fn caught(m: Mutation) -> (u64, CheckReport) {
    (0..200)
        .find_map(|seed| {
            let r = check_order_robustness(&ScenarioConfig { mutation: Some(m), ..config(seed) }).unwrap();
            (!r.passed()).then_some((seed, r))
        })
        .unwrap_or_else(|| panic!("{m} never caught"))
}

#[test]
fn every_mutation_is_caught_by_its_checker() {
    let expected = [
        (Mutation::SkipDefaultCredit, Invariant::TezPool),
        (Mutation::DropMinTokensGuard, Invariant::Bounds),
        (Mutation::FloorTokensDeposited, Invariant::ShareValue),
        (Mutation::SkipAllowanceDecrement, Invariant::Fa12Ledger),
        (Mutation::AnyoneMintsOrBurns, Invariant::LqtCondition),
    ];
    for (m, inv) in expected {
        let (seed, r) = caught(m);
        assert!(r.failed(inv), "{m} (seed {seed}) not flagged by {inv}:\n{r}");
        let first = r.entry(inv).unwrap().first.as_ref().unwrap();
        assert_eq!(first.replay.unwrap().seed, seed);
    }
}

#[test]
fn counterexample_replays_to_the_same_failure() {
    let (seed, r) = caught(Mutation::SkipDefaultCredit);
    let c = r.entry(Invariant::TezPool).unwrap().first.clone().unwrap();
    let replay = c.replay.unwrap();
    let cfg = ScenarioConfig {
        mutation: Some(Mutation::SkipDefaultCredit),
        blocks: replay.prefix,
        ..config(seed)
    };
    let again = run_checked(&cfg).unwrap();
    assert_eq!(again.report.entry(Invariant::TezPool).unwrap().first.as_ref().unwrap().at, c.at);
}

#[test]
fn step_checkers_flag_bad_transitions() {
    let s = |x: u32, t: u32, l: u32| CpmmState {
        token_pool: t.into(),
        xtz_pool: x.into(),
        lqt_total: l.into(),
        self_is_updating_token_pool: false,
        freeze_baker: false,
        manager: MANAGER,
        token_address: Address::contract(1),
        token_id: Nat::from(0u8),
        lqt_address: Address::contract(3),
    };
    assert!(check_constant_product(&s(1000, 1000, 10), &s(1100, 910, 10)).is_ok());
    assert!(check_constant_product(&s(1000, 1000, 10), &s(1100, 900, 10)).is_err());
    // Floor of 50.1 deposited tokens for one share dilutes the other ten.
    assert!(check_share_value(&s(1000, 501, 10), &s(1100, 552, 11)).is_ok());
    assert!(check_share_value(&s(1000, 501, 10), &s(1100, 551, 11)).is_err());
}
