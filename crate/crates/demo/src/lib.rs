//! Browser bindings. Every export takes plain strings and numbers and
//! returns a JSON string; amounts are decimal strings since they are
//! unbounded.

use dexsim::chain::ExecOrder;
use dexsim::contracts::cpmm::{token_to_xtz_output, xtz_to_token_output, CpmmState};
use dexsim::contracts::Mutation;
use dexsim::harness::{run_checked, CheckReport, Checker, ScenarioConfig};
use dexsim::scenario::Scenario;
use dexsim::Nat;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

pub const EXAMPLE_SCENARIO: &str = include_str!("../../../scenarios/six_contract.toml");

fn nat(name: &str, s: &str) -> Result<Nat, String> {
    s.trim().parse().map_err(|_| format!("{name}: `{s}` is not a natural number"))
}

/// Output of both trade directions for `points` inputs spread evenly over
/// `1..=max_in`.
pub fn swap_curve(xtz_pool: &str, token_pool: &str, max_in: &str, points: u32) -> Result<Value, String> {
    let (x, t, max) = (nat("xtz_pool", xtz_pool)?, nat("token_pool", token_pool)?, nat("max_in", max_in)?);
    if points < 2 || max == Nat::from(0u8) {
        return Err("need at least 2 points and a positive max_in".into());
    }
    let mut xtz_in = Vec::new();
    let mut tokens_in = Vec::new();
    let mut last = None;
    for i in 1..=points {
        let input = (&max * Nat::from(i)) / Nat::from(points);
        if input == Nat::from(0u8) || last.as_ref() == Some(&input) {
            continue;
        }
        let row = |out: Option<Nat>| json!({ "in": input.to_string(), "out": out.map(|o| o.to_string()) });
        xtz_in.push(row(xtz_to_token_output(&input, &x, &t)));
        tokens_in.push(row(token_to_xtz_output(&input, &x, &t)));
        last = Some(input);
    }
    Ok(json!({ "xtz_to_token": xtz_in, "token_to_xtz": tokens_in }))
}

fn pool_json(s: &CpmmState) -> Value {
    json!({
        "xtz": s.xtz_pool.to_string(),
        "tokens": s.token_pool.to_string(),
        "lqt": s.lqt_total.to_string(),
    })
}

fn report_json(r: &CheckReport) -> Value {
    let rows: Vec<Value> = r
        .entries
        .iter()
        .map(|(inv, e)| {
            json!({
                "invariant": inv.as_str(),
                "checks": e.checks,
                "failures": e.failures,
                "first": e.first.as_ref().map(|c| format!("{}: {} expected {} got {}", c.at, c.violation.subject, c.violation.expected, c.violation.actual)),
            })
        })
        .collect();
    json!({ "passed": r.passed(), "invariants": rows })
}

/// Pools after every block of one checked random trace.
pub fn campaign(seed: u64, blocks: usize, order: &str, mutation: &str) -> Result<Value, String> {
    let order: ExecOrder = order.parse()?;
    let mutation = match mutation.trim() {
        "" | "none" => None,
        m => Some(m.parse::<Mutation>()?),
    };
    let config = ScenarioConfig { seed, blocks, order, mutation, ..Default::default() };
    let trace = run_checked(&config).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = trace
        .blocks
        .iter()
        .map(|b| {
            json!({
                "block": b.index,
                "committed": b.committed(),
                "attempts": b.attempts.len(),
                "pools": b.pools.iter().map(pool_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(json!({ "blocks": rows, "report": report_json(&trace.report) }))
}

/// Runs scenario text with checks and returns its trace records.
pub fn scenario(text: &str, order: &str) -> Result<Value, String> {
    let order: ExecOrder = order.parse()?;
    let scenario = Scenario::parse(text).map_err(|e| e.to_string())?;
    let mut checker = Checker::new(None);
    let run = scenario.run(order, Some(&mut checker)).map_err(|e| e.to_string())?;
    let records = run.records(order);
    let blocks: Vec<Value> = run
        .blocks
        .iter()
        .map(|b| json!({ "block": b.index, "rejected": b.outcome.as_ref().err().map(|e| e.kind.to_string()) }))
        .collect();
    Ok(json!({
        "blocks": blocks,
        "records": serde_json::to_value(&records).map_err(|e| e.to_string())?,
        "names": run.names.iter().map(|(k, v)| (k.clone(), Value::String(v.to_string()))).collect::<serde_json::Map<_, _>>(),
        "report": report_json(&checker.finish()),
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = swapCurve)]
pub fn swap_curve_js(xtz_pool: &str, token_pool: &str, max_in: &str, points: u32) -> Result<String, JsError> {
    to_js(swap_curve(xtz_pool, token_pool, max_in, points))
}

#[wasm_bindgen(js_name = campaign)]
pub fn campaign_js(seed: u32, blocks: u32, order: &str, mutation: &str) -> Result<String, JsError> {
    to_js(campaign(seed.into(), blocks as usize, order, mutation))
}

#[wasm_bindgen(js_name = runScenario)]
pub fn scenario_js(text: &str, order: &str) -> Result<String, JsError> {
    to_js(scenario(text, order))
}

#[wasm_bindgen(js_name = exampleScenario)]
pub fn example_scenario() -> String {
    EXAMPLE_SCENARIO.to_string()
}
