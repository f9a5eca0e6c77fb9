use serde::{Deserialize, Serialize};

use crate::chain::ExecOrder;
use crate::contracts::Mutation;

/// Relative frequency of each generated user action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub add_liquidity: u32,
    pub remove_liquidity: u32,
    pub xtz_to_token: u32,
    pub token_to_xtz: u32,
    pub token_to_token: u32,
    pub update_token_pool: u32,
    /// Bare tez transfer to an exchange (its `default` entrypoint).
    pub donate: u32,
    /// FA2 transfer straight into an exchange, outside any entrypoint.
    pub token_donation: u32,
    pub token_transfer: u32,
    pub lqt_transfer: u32,
    pub lqt_approve: u32,
    /// FA1.2 transfer by a spender against an allowance.
    pub lqt_spend: u32,
    /// `mint_or_burn` sent by a user, which the liquidity token must refuse.
    pub lqt_mint_or_burn: u32,
    pub set_baker: u32,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            add_liquidity: 8,
            remove_liquidity: 6,
            xtz_to_token: 12,
            token_to_xtz: 10,
            token_to_token: 8,
            update_token_pool: 3,
            donate: 3,
            token_donation: 2,
            token_transfer: 2,
            lqt_transfer: 3,
            lqt_approve: 4,
            lqt_spend: 4,
            lqt_mint_or_burn: 2,
            set_baker: 1,
        }
    }
}

impl Weights {
    pub(crate) fn table(&self) -> [u32; 14] {
        [
            self.add_liquidity,
            self.remove_liquidity,
            self.xtz_to_token,
            self.token_to_xtz,
            self.token_to_token,
            self.update_token_pool,
            self.donate,
            self.token_donation,
            self.token_transfer,
            self.lqt_transfer,
            self.lqt_approve,
            self.lqt_spend,
            self.lqt_mint_or_burn,
            self.set_baker,
        ]
    }
}

/// Value ranges, in mutez and token units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ranges {
    pub user_tez: u64,
    pub user_tokens: u64,
    /// Initial pools are drawn from `pool_min..=pool_max`.
    pub pool_min: u64,
    pub pool_max: u64,
    /// Upper bound for a single generated amount.
    pub max_amount: u64,
}

impl Default for Ranges {
    fn default() -> Self {
        Ranges {
            user_tez: 1_000_000_000_000,
            user_tokens: 1_000_000_000_000,
            pool_min: 1_000,
            pool_max: 1_000_000_000,
            max_amount: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub blocks: usize,
    pub users: usize,
    pub exchanges: usize,
    pub max_actions: usize,
    /// Chance that a block gets one extra action built to fail.
    pub failure_rate: f64,
    pub order: ExecOrder,
    pub mutation: Option<Mutation>,
    pub weights: Weights,
    pub ranges: Ranges,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            blocks: 10,
            users: 4,
            exchanges: 2,
            max_actions: 5,
            failure_rate: 0.2,
            order: ExecOrder::DepthFirst,
            mutation: None,
            weights: Weights::default(),
            ranges: Ranges::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("all action weights are zero")]
    NoWeights,
    #[error("need at least 2 users, got {0}")]
    TooFewUsers(usize),
    #[error("need at least 1 exchange")]
    NoExchange,
    #[error("max_actions must be positive")]
    NoActions,
    #[error("failure_rate {0} is not in [0, 1]")]
    FailureRate(f64),
    #[error("pool range {0}..={1} is empty or starts at zero")]
    PoolRange(u64, u64),
    #[error("invalid config: {0}")]
    Parse(String),
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.weights.table().iter().all(|w| *w == 0) {
            return Err(ConfigError::NoWeights);
        }
        if self.users < 2 {
            return Err(ConfigError::TooFewUsers(self.users));
        }
        if self.exchanges == 0 {
            return Err(ConfigError::NoExchange);
        }
        if self.max_actions == 0 {
            return Err(ConfigError::NoActions);
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err(ConfigError::FailureRate(self.failure_rate));
        }
        let r = &self.ranges;
        if r.pool_min == 0 || r.pool_min > r.pool_max {
            return Err(ConfigError::PoolRange(r.pool_min, r.pool_max));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}
