//! Scenario configuration (JSON). Unknown keys are rejected everywhere.
//!
//! ```json
//! {
//!   "master_seed": 7,
//!   "blocks": 200,
//!   "miner": {"fraction": 0.3, "strategy": {"kind": "bit_bias", "bit_index": 0, "desired_value": true}},
//!   "producers": [
//!     {"name": "alice", "strategy": {"kind": "honest", "interval_blocks": 4}},
//!     {"name": "bob", "strategy": {"kind": "withholder", "predicate": {"bit": 0, "value": true}}, "chain_length": 500}
//!   ],
//!   "contract": {"kind": "lighthouse", "deregister_delay": 10, "hash": "sha3-256", "timestamp_rule": "printed"},
//!   "customers": {"reads_at": [150], "keeper_interval": null},
//!   "owner": {"name": "owner", "deregister_stalled": true},
//!   "outputs": {"pulses": "pulses.jsonl", "events": "events.jsonl", "blocks": "blocks.jsonl"}
//! }
//! ```

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::error::ConfigError;
use crate::adversary::{MinerStrategy, ProducerStrategy};
use crate::hashcore::HashFn;
use crate::ledger::{
    MinerPool, DEFAULT_BLOCK_INTERVAL_SECS, DEFAULT_DISCARD_CAP, DEFAULT_GENESIS_TIME,
};
use crate::lighthouse::{
    ContractConfig, TimestampRule, DEFAULT_DEREGISTER_DELAY, DEFAULT_STALL_AFTER_BLOCKS,
};
use crate::seeds::derive_seed;

fn default_genesis_time() -> i64 {
    DEFAULT_GENESIS_TIME
}

fn default_interval() -> f64 {
    DEFAULT_BLOCK_INTERVAL_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub master_seed: u64,
    /// Number of blocks mined after genesis.
    pub blocks: u64,
    #[serde(default = "default_genesis_time")]
    pub genesis_time: i64,
    #[serde(default = "default_interval")]
    pub block_interval_secs: f64,
    #[serde(default)]
    pub miner: MinerConfig,
    pub producers: Vec<ProducerConfig>,
    #[serde(default)]
    pub contract: ContractSection,
    #[serde(default)]
    pub customers: CustomerConfig,
    #[serde(default)]
    pub owner: OwnerConfig,
    /// End the run early once this many combined pulses exist.
    #[serde(default)]
    pub stop_after_pulses: Option<u64>,
    #[serde(default)]
    pub outputs: OutputPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerConfig {
    #[serde(default)]
    pub fraction: f64,
    #[serde(default = "honest_mining")]
    pub strategy: MinerStrategy,
    #[serde(default = "default_discard_cap")]
    pub discard_cap: u64,
}

fn honest_mining() -> MinerStrategy {
    MinerStrategy::HonestMining
}

fn default_discard_cap() -> u64 {
    DEFAULT_DISCARD_CAP
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            fraction: 0.0,
            strategy: MinerStrategy::HonestMining,
            discard_cap: DEFAULT_DISCARD_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerConfig {
    pub name: String,
    pub strategy: ProducerStrategy,
    /// Defaults to the most values the strategy can reveal in the run.
    #[serde(default)]
    pub chain_length: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    #[default]
    Lighthouse,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractSection {
    pub kind: ContractKind,
    pub hash: HashFn,
    pub deregister_delay: u64,
    pub timestamp_rule: TimestampRule,
    pub stall_after_blocks: u64,
}

impl Default for ContractSection {
    fn default() -> Self {
        ContractSection {
            kind: ContractKind::Lighthouse,
            hash: HashFn::default(),
            deregister_delay: DEFAULT_DEREGISTER_DELAY,
            timestamp_rule: TimestampRule::default(),
            stall_after_blocks: DEFAULT_STALL_AFTER_BLOCKS,
        }
    }
}

impl ContractSection {
    pub fn contract_config(&self) -> ContractConfig {
        ContractConfig {
            hash_fn: self.hash,
            deregister_delay: self.deregister_delay,
            timestamp_rule: self.timestamp_rule,
            stall_after_blocks: self.stall_after_blocks,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomerConfig {
    /// Blocks in which a customer retrieves the latest pulse.
    pub reads_at: Vec<u64>,
    /// A keeper retrieves the latest pulse every this many blocks.
    pub keeper_interval: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OwnerConfig {
    pub name: String,
    /// Request deregistration of every producer named in a stall report.
    pub deregister_stalled: bool,
}

impl Default for OwnerConfig {
    fn default() -> Self {
        OwnerConfig {
            name: "owner".to_string(),
            deregister_stalled: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub pulses: Option<String>,
    pub events: Option<String>,
    pub blocks: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, super::ExperimentError> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn hash_fn(&self) -> HashFn {
        self.contract.hash
    }

    pub fn miner_pool(&self) -> MinerPool {
        MinerPool {
            coalition_fraction: self.miner.fraction,
            coalition_strategy: self.miner.strategy.clone(),
            block_interval_secs: self.block_interval_secs,
            rng_seed: derive_seed(self.master_seed, "miners", &[]),
            discard_cap: self.miner.discard_cap,
        }
    }

    /// Values a producer may need: the registration value plus one reveal
    /// per `min_gap` blocks.
    pub fn required_chain_length(&self, producer: &ProducerConfig) -> u64 {
        1 + self.blocks.div_ceil(producer.strategy.min_gap())
    }

    pub fn chain_length(&self, producer: &ProducerConfig) -> u64 {
        producer
            .chain_length
            .unwrap_or_else(|| self.required_chain_length(producer))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.blocks == 0 {
            return Err(ConfigError::new("blocks", "must be at least 1"));
        }
        if !self.block_interval_secs.is_finite() || self.block_interval_secs < 0.0 {
            return Err(ConfigError::new(
                "block_interval_secs",
                "must be finite and non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.miner.fraction) {
            return Err(ConfigError::new("miner.fraction", "must be within [0, 1]"));
        }
        if self.miner.discard_cap == 0 {
            return Err(ConfigError::new("miner.discard_cap", "must be at least 1"));
        }
        self.miner
            .strategy
            .validate()
            .map_err(|e| ConfigError::new("miner.strategy", e.to_string()))?;
        if self.producers.is_empty() {
            return Err(ConfigError::new(
                "producers",
                "at least one producer is required",
            ));
        }

        let mut names = HashSet::new();
        let mut clone_groups: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
        for (i, p) in self.producers.iter().enumerate() {
            let field = |f: &str| format!("producers[{i}].{f}");
            if p.name.is_empty()
                || p.name
                    .chars()
                    .any(|c| c.is_whitespace() || c == ',' || c == '=')
            {
                return Err(ConfigError::new(
                    field("name"),
                    "must be non-empty without whitespace, ',' or '='",
                ));
            }
            if p.name == self.owner.name {
                return Err(ConfigError::new(
                    field("name"),
                    "collides with the owner name",
                ));
            }
            if !names.insert(p.name.as_str()) {
                return Err(ConfigError::new(
                    field("name"),
                    format!("duplicate producer name {:?}", p.name),
                ));
            }
            p.strategy
                .validate()
                .map_err(|e| ConfigError::new(field("strategy"), e.to_string()))?;
            if let Some(n) = p.chain_length {
                let need = self.required_chain_length(p);
                if n < need {
                    return Err(ConfigError::new(
                        field("chain_length"),
                        format!("{n} is shorter than the {need} values the strategy may reveal"),
                    ));
                }
            }
            if let ProducerStrategy::CloneCoalition {
                shared_seed,
                member_count,
            } = p.strategy
            {
                let entry = clone_groups.entry(shared_seed).or_insert((member_count, 0));
                if entry.0 != member_count {
                    return Err(ConfigError::new(
                        field("strategy.member_count"),
                        "members sharing a seed disagree on member_count",
                    ));
                }
                entry.1 += 1;
            }
        }
        for (seed, (declared, actual)) in clone_groups {
            if declared != actual {
                return Err(ConfigError::new(
                    "producers",
                    format!(
                        "clone coalition with shared_seed {seed} declares {declared} members but {actual} are configured"
                    ),
                ));
            }
        }
        let clone_lengths: Vec<_> = self
            .producers
            .iter()
            .filter_map(|p| match p.strategy {
                ProducerStrategy::CloneCoalition { shared_seed, .. } => {
                    Some((shared_seed, self.chain_length(p)))
                }
                _ => None,
            })
            .collect();
        for (seed, len) in &clone_lengths {
            if clone_lengths.iter().any(|(s, l)| s == seed && l != len) {
                return Err(ConfigError::new(
                    "producers",
                    format!("clone coalition {seed} members must share one chain_length"),
                ));
            }
        }

        if let MinerStrategy::ProducerColluder { producers, .. } = &self.miner.strategy {
            for (i, name) in producers.iter().enumerate() {
                if !names.contains(name.as_str()) {
                    return Err(ConfigError::new(
                        format!("miner.strategy.producers[{i}]"),
                        format!("unknown producer {name:?}"),
                    ));
                }
            }
        }
        if self.contract.kind == ContractKind::Single && self.producers.len() != 1 {
            return Err(ConfigError::new(
                "contract.kind",
                "the single-producer contract takes exactly one producer",
            ));
        }
        if self.customers.keeper_interval == Some(0) {
            return Err(ConfigError::new(
                "customers.keeper_interval",
                "must be at least 1",
            ));
        }
        if self.stop_after_pulses == Some(0) {
            return Err(ConfigError::new("stop_after_pulses", "must be at least 1"));
        }
        if self.owner.name.is_empty() {
            return Err(ConfigError::new("owner.name", "must be non-empty"));
        }
        Ok(())
    }
}
