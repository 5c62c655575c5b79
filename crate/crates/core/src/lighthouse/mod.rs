//! The beacon contract.
//!
//! [`Lighthouse`] runs any number of producers in lockstep and combines their
//! per-round beacon outputs by XOR. [`SingleBeacon`] is the one-producer
//! contract on its own; with one producer both emit identical pulse streams.

mod multi;
mod single;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hashcore::{Digest, HashFn};
use crate::ledger::ChainView;

pub use multi::Lighthouse;
pub use single::SingleBeacon;

pub const DEFAULT_DEREGISTER_DELAY: u64 = 10;
pub const DEFAULT_STALL_AFTER_BLOCKS: u64 = 256;

/// How a beacon pulse's timestamp is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampRule {
    /// `T = min(timestamp(B(R_y)), U)`.
    #[default]
    Printed,
    /// `T = min(U_prev, timestamp(block of V_prev))`, using the producer's
    /// previous accepted message.
    Prose,
}

impl TimestampRule {
    pub fn as_str(self) -> &'static str {
        match self {
            TimestampRule::Printed => "printed",
            TimestampRule::Prose => "prose",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractConfig {
    #[serde(rename = "hash")]
    pub hash_fn: HashFn,
    pub deregister_delay: u64,
    pub timestamp_rule: TimestampRule,
    /// Blocks after the target hash becomes public before an incomplete round
    /// is reported as stalled.
    pub stall_after_blocks: u64,
}

impl Default for ContractConfig {
    fn default() -> Self {
        ContractConfig {
            hash_fn: HashFn::default(),
            deregister_delay: DEFAULT_DEREGISTER_DELAY,
            timestamp_rule: TimestampRule::default(),
            stall_after_blocks: DEFAULT_STALL_AFTER_BLOCKS,
        }
    }
}

/// One producer's contribution to a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconPulse {
    pub producer: String,
    /// Position of `V` counted from the registration value (index 1).
    pub index: u64,
    #[serde(rename = "V")]
    pub v: Digest,
    #[serde(rename = "R")]
    pub r: Digest,
    #[serde(rename = "T")]
    pub t: i64,
    /// The producer's claimed send time.
    #[serde(rename = "U")]
    pub u: i64,
    pub block_used: u64,
}

/// A combined output. Serializes to one line of the pulse log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LighthousePulse {
    pub round: u64,
    #[serde(rename = "R_L")]
    pub r_l: Digest,
    #[serde(rename = "T_L")]
    pub t_l: i64,
    pub block: u64,
    pub beacons: Vec<BeaconPulse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    NotOwner,
    UnknownProducer,
    AlreadyRegistered,
    BrokenLink,
    DeregisterPending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidReason {
    /// Processed before the round's target block was strictly in the past.
    TooEarly,
    /// Target block hash not readable.
    HashUnavailable,
    /// Lockstep: this producer already pulsed in the open round.
    AlreadyPulsed,
    /// Registered after the round's target block was mined.
    NotYetParticipating,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NotOwner => "not_owner",
            RejectReason::UnknownProducer => "unknown_producer",
            RejectReason::AlreadyRegistered => "already_registered",
            RejectReason::BrokenLink => "broken_link",
            RejectReason::DeregisterPending => "deregister_pending",
        }
    }
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::TooEarly => "too_early",
            InvalidReason::HashUnavailable => "hash_unavailable",
            InvalidReason::AlreadyPulsed => "already_pulsed",
            InvalidReason::NotYetParticipating => "not_yet_participating",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ContractDeployed,
    ProducerRegistered,
    ProducerDeregistered,
    MessageRejected(RejectReason),
    MessageInvalid(InvalidReason),
    HashExpired,
    RoundStalled,
    ZeroCombinedRefused,
    PulseEmitted,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ContractDeployed => "ContractDeployed",
            EventKind::ProducerRegistered => "ProducerRegistered",
            EventKind::ProducerDeregistered => "ProducerDeregistered",
            EventKind::MessageRejected(_) => "MessageRejected",
            EventKind::MessageInvalid(_) => "MessageInvalid",
            EventKind::HashExpired => "HashExpired",
            EventKind::RoundStalled => "RoundStalled",
            EventKind::ZeroCombinedRefused => "ZeroCombinedRefused",
            EventKind::PulseEmitted => "PulseEmitted",
        }
    }
}

/// Entry of the contract's public error/activity log.
///
/// `detail` is a space separated list of `key=value` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractEvent {
    pub block: u64,
    pub kind: EventKind,
    pub detail: String,
}

impl ContractEvent {
    pub fn record(&self) -> EventRecord {
        EventRecord {
            block: self.block,
            event: self.kind.name().to_string(),
            detail: self.detail.clone(),
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub block: u64,
    pub event: String,
    pub detail: String,
}

impl EventRecord {
    /// Value of `key` in the detail string.
    pub fn field(&self, key: &str) -> Option<&str> {
        detail_field(&self.detail, key)
    }
}

pub fn detail_field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail.split(' ').find_map(|kv| {
        let (k, v) = kv.split_once('=')?;
        (k == key).then_some(v)
    })
}

/// Comma separated list as used in `pending=` and `contributors=`.
pub fn detail_list(value: &str) -> Vec<&str> {
    value.split(',').filter(|s| !s.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageOutcome {
    Rejected(RejectReason),
    AcceptedInvalid(InvalidReason),
    Pulsed {
        beacon: BeaconPulse,
        lighthouse: Option<LighthousePulse>,
    },
}

/// Public per-producer state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProducerStatus {
    pub last_v: Digest,
    pub index: u64,
    pub registered_block: u64,
    pub pulsed_this_round: bool,
    pub deregister_at: Option<u64>,
}

/// Operations shared by both contracts, as seen by producers, customers and
/// the owner.
pub trait BeaconContract {
    fn config(&self) -> &ContractConfig;
    fn owner(&self) -> &str;

    fn register_producer(
        &mut self,
        caller: &str,
        producer: &str,
        v: Digest,
        u: i64,
        view: &ChainView,
    ) -> Result<(), RejectReason>;

    /// Returns the block at which the producer will be removed.
    fn request_deregister(
        &mut self,
        caller: &str,
        producer: &str,
        view: &ChainView,
    ) -> Result<u64, RejectReason>;

    /// Any activity: cache the target hash if readable, expire it if lost,
    /// apply due deregistrations and report stalls.
    fn touch(&mut self, view: &ChainView);

    fn submit_message(
        &mut self,
        sender: &str,
        v: Digest,
        u: i64,
        view: &ChainView,
    ) -> MessageOutcome;

    fn get_pulse(&mut self, index: usize, view: &ChainView) -> Option<LighthousePulse>;
    fn get_latest(&mut self, view: &ChainView) -> Option<LighthousePulse>;

    fn history(&self) -> &[LighthousePulse];
    fn events(&self) -> &[ContractEvent];
    fn target_block(&self) -> u64;
    fn cached_target_hash(&self) -> Option<Digest>;
    fn last_pulse_block(&self) -> u64;
    fn producer_status(&self, producer: &str) -> Option<ProducerStatus>;
    fn producer_names(&self) -> Vec<String>;
}

pub(crate) fn deployed_detail(owner: &str, config: &ContractConfig, target: u64) -> String {
    let hash = match config.hash_fn {
        HashFn::Sha3_256 => "sha3-256",
        HashFn::Keccak256 => "keccak256",
    };
    format!(
        "owner={owner} hash={hash} timestamp_rule={} target={target}",
        config.timestamp_rule.as_str()
    )
}
