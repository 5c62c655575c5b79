//! Public randomness from a set of possibly malicious producers and a
//! simulated proof-of-work ledger.
//!
//! * [`hashcore`]: digests, the pluggable hash and Merlin (reverse hash) chains.
//! * [`ledger`]: block production with a coalition that may discard blocks.
//! * [`lighthouse`]: the beacon contract state machine.
//! * [`adversary`]: producer and miner strategies.
//! * [`experiments`]: scenarios, bias studies, log verification.

pub mod adversary;
pub mod experiments;
pub mod hashcore;
pub mod ledger;
pub mod lighthouse;
pub mod seeds;

pub use hashcore::{hash, Digest, HashFn, MerlinChain};
