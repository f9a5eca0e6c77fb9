use dexsim_demo::{campaign, scenario, swap_curve, EXAMPLE_SCENARIO};

#[test]
fn curve_matches_the_hand_computed_trade() {
    let v = swap_curve("1000", "1000", "100", 10).unwrap();
    let last = v["xtz_to_token"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["in"], "100");
    // 100*997*1000 / (1000*1000 + 100*997) = 90.66
    assert_eq!(last["out"], "90");
    let outs: Vec<u64> = v["token_to_xtz"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["out"].as_str().unwrap().parse().unwrap())
        .collect();
    assert!(outs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn empty_pool_quotes_zero() {
    let v = swap_curve("0", "0", "10", 2).unwrap();
    assert_eq!(v["xtz_to_token"][0]["out"], "0");
    assert!(swap_curve("x", "1", "1", 2).is_err());
    assert!(swap_curve("1", "1", "1", 1).is_err());
}

#[test]
fn campaign_reports_pools_per_block() {
    let v = campaign(4, 6, "bfs", "none").unwrap();
    let blocks = v["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 7);
    assert_eq!(blocks[1]["pools"].as_array().unwrap().len(), 2);
    assert_eq!(v["report"]["passed"], true);
    let m = campaign(0, 4, "dfs", "skip_default_credit").unwrap();
    assert_eq!(m["report"]["passed"], false);
    assert!(campaign(0, 4, "sideways", "none").is_err());
}

#[test]
fn example_scenario_runs_clean() {
    let v = scenario(EXAMPLE_SCENARIO, "dfs").unwrap();
    assert_eq!(v["report"]["passed"], true);
    assert_eq!(v["blocks"].as_array().unwrap().len(), 3);
    assert_eq!(v["names"]["dex_a"], "@c2");
    let text = v["records"].to_string();
    assert!(text.contains("value(82)"));
    assert!(scenario("users = 1", "dfs").is_err());
}
