//! Wire types for the lighthouse HTTP/JSON service.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/health` | | [`Health`] |
//! | POST | `/v1/scenarios/run` | `ScenarioConfig` | `ScenarioOutput` |
//! | POST | `/v1/bias` | [`BiasRequest`] | `BiasReport` |
//! | POST | `/v1/naive-demo` | [`NaiveRequest`] | `NaiveReport` |
//! | POST | `/v1/verify` | [`VerifyRequest`] | `Verdict` |
//! | POST | `/v1/sessions` | [`SessionConfig`] | [`SessionState`] |
//! | GET | `/v1/sessions/:id` | | [`SessionState`] |
//! | DELETE | `/v1/sessions/:id` | | 204 |
//! | POST | `/v1/sessions/:id/transactions` | `Tx` | [`SessionState`] |
//! | POST | `/v1/sessions/:id/advance` | [`AdvanceRequest`] | [`AdvanceResponse`] |
//! | GET | `/v1/sessions/:id/pulses` | | `[LighthousePulse]` |
//! | GET | `/v1/sessions/:id/pulses/latest` | | `LighthousePulse` |
//! | GET | `/v1/sessions/:id/pulses/:index` | | `LighthousePulse` |
//! | GET | `/v1/sessions/:id/logs` | | [`SessionLogs`] |
//!
//! Errors come back as [`ErrorBody`] with a 4xx/5xx status.

use lighthouse_core::adversary::MinerStrategy;
use lighthouse_core::experiments::{BiasMode, ContractSection, Tx};
use lighthouse_core::ledger::{
    BlockSummary, DEFAULT_BLOCK_INTERVAL_SECS, DEFAULT_DISCARD_CAP, DEFAULT_GENESIS_TIME,
};
use lighthouse_core::lighthouse::{BeaconPulse, LighthousePulse};
use lighthouse_core::Digest;
use serde::{Deserialize, Serialize};

pub use lighthouse_core::experiments::{
    BiasReport, NaiveReport, ScenarioConfig, ScenarioOutput, Verdict,
};

/// Most blocks a single `advance` call may mine.
pub const MAX_ADVANCE_BLOCKS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasRequest {
    pub fractions: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    pub mode: BiasMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaiveRequest {
    pub k_attempts: u32,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub pulse_log: String,
    pub event_log: String,
    pub block_log: String,
}

/// An interactive contract on its own simulated chain. Every contract call
/// is queued as a transaction and takes effect in the next mined block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    pub genesis_time: i64,
    pub block_interval_secs: f64,
    pub miner_fraction: f64,
    /// Colluding strategies get no producer knowledge in a session.
    pub miner_strategy: MinerStrategy,
    pub discard_cap: u64,
    pub contract: ContractSection,
    pub owner: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            seed: 0,
            genesis_time: DEFAULT_GENESIS_TIME,
            block_interval_secs: DEFAULT_BLOCK_INTERVAL_SECS,
            miner_fraction: 0.0,
            miner_strategy: MinerStrategy::HonestMining,
            discard_cap: DEFAULT_DISCARD_CAP,
            contract: ContractSection::default(),
            owner: "owner".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducerInfo {
    pub name: String,
    pub index: u64,
    pub last_v: Digest,
    pub registered_block: u64,
    pub pulsed_this_round: bool,
    pub deregister_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: u64,
    pub tip: BlockSummary,
    pub target_block: u64,
    pub cached_target_hash: Option<Digest>,
    pub last_pulse_block: u64,
    pub pulses: u64,
    pub queued: Vec<Tx>,
    pub producers: Vec<ProducerInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvanceRequest {
    pub blocks: u64,
}

impl Default for AdvanceRequest {
    fn default() -> Self {
        AdvanceRequest { blocks: 1 }
    }
}

/// What happened to one queued transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TxResult {
    Registered,
    DeregisterScheduled {
        effective_block: u64,
    },
    Rejected {
        reason: String,
    },
    Invalid {
        reason: String,
    },
    Pulsed {
        beacon: BeaconPulse,
        lighthouse: Option<LighthousePulse>,
    },
    Read {
        latest: Option<LighthousePulse>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedTx {
    pub block: u64,
    pub tx: Tx,
    pub result: TxResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvanceResponse {
    pub applied: Vec<AppliedTx>,
    pub discarded_blocks: u64,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLogs {
    pub pulse_log: String,
    pub event_log: String,
    pub block_log: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// The request body or a parameter is malformed or out of range.
    InvalidInput,
    NotFound,
    /// Valid input, but the simulation could not complete (e.g. livelock).
    SimulationFailed,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    /// Offending field, dotted path, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_config_defaults() {
        let c: SessionConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, SessionConfig::default());
        assert!(serde_json::from_str::<SessionConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn tx_result_tagging() {
        let r = TxResult::Rejected {
            reason: "broken_link".into(),
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"status":"rejected","reason":"broken_link"}"#
        );
    }

    #[test]
    fn error_body_omits_missing_field() {
        let e = ErrorBody {
            kind: ErrorKind::NotFound,
            field: None,
            message: "no session 3".into(),
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"kind":"not_found","message":"no session 3"}"#
        );
    }
}
