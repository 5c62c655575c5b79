//! Simulated proof-of-work ledger.
//!
//! Each block is the outcome of a competition between a coalition holding a
//! fraction `F` of the hash power and everyone else. The coalition may throw
//! away blocks it mined; outside miners always publish. Forks are not
//! modelled: a competition yields exactly one published block.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::adversary::{miner_decide, MinerDecision, MinerKnowledge, MinerStrategy};
use crate::hashcore::{Digest, HashFn};
use crate::seeds::{self, SimRng};

/// Number of past block hashes the contract can read, counting the tip.
pub const BLOCKHASH_WINDOW: u64 = 256;
pub const DEFAULT_BLOCK_INTERVAL_SECS: f64 = 15.0;
pub const DEFAULT_DISCARD_CAP: u64 = 10_000;
pub const DEFAULT_GENESIS_TIME: i64 = 1_500_000_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LedgerError {
    #[error("coalition fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("block interval {0} must be finite and non-negative")]
    InvalidInterval(f64),
    #[error("livelock: {discards} consecutive candidates for block {number} discarded")]
    Livelock { number: u64, discards: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub number: u64,
    pub parent_hash: Digest,
    pub hash: Digest,
    pub timestamp: i64,
    pub nonce: u64,
    pub txs: Vec<Vec<u8>>,
}

impl Block {
    pub fn genesis(hash_fn: HashFn, timestamp: i64) -> Self {
        Self::seal(hash_fn, 0, Digest::ZERO, timestamp, 0, Vec::new())
    }

    pub fn seal(
        hash_fn: HashFn,
        number: u64,
        parent_hash: Digest,
        timestamp: i64,
        nonce: u64,
        txs: Vec<Vec<u8>>,
    ) -> Self {
        let hash = Self::compute_hash(hash_fn, number, &parent_hash, timestamp, nonce, &txs);
        Block {
            number,
            parent_hash,
            hash,
            timestamp,
            nonce,
            txs,
        }
    }

    /// `H(parent ∥ number_be ∥ timestamp_be ∥ nonce_be ∥ H(len_be ∥ tx ∥ …))`
    pub fn compute_hash(
        hash_fn: HashFn,
        number: u64,
        parent_hash: &Digest,
        timestamp: i64,
        nonce: u64,
        txs: &[Vec<u8>],
    ) -> Digest {
        let tx_commitment = tx_commitment(hash_fn, txs);
        hash_fn.digest_parts(&[
            parent_hash.as_bytes(),
            &number.to_be_bytes(),
            &timestamp.to_be_bytes(),
            &nonce.to_be_bytes(),
            tx_commitment.as_bytes(),
        ])
    }

    pub fn verify_hash(&self, hash_fn: HashFn) -> bool {
        Self::compute_hash(
            hash_fn,
            self.number,
            &self.parent_hash,
            self.timestamp,
            self.nonce,
            &self.txs,
        ) == self.hash
    }

    pub fn summary(&self) -> BlockSummary {
        BlockSummary {
            number: self.number,
            hash: self.hash,
            timestamp: self.timestamp,
        }
    }
}

fn tx_commitment(hash_fn: HashFn, txs: &[Vec<u8>]) -> Digest {
    let mut buf = Vec::new();
    for tx in txs {
        buf.extend_from_slice(&(tx.len() as u64).to_be_bytes());
        buf.extend_from_slice(tx);
    }
    hash_fn.digest(&buf)
}

/// Public per-block record written to block logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSummary {
    pub number: u64,
    #[serde(rename = "hash_hex")]
    pub hash: Digest,
    pub timestamp: i64,
}

/// The contract's bounded window onto the chain.
///
/// Resolvable block numbers are `[tip - 255, tip]` (clamped at genesis).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainView {
    tip_number: u64,
    tip_timestamp: i64,
    // front is the oldest resolvable block
    recent: VecDeque<Digest>,
}

impl ChainView {
    fn new(genesis: &Block) -> Self {
        let mut recent = VecDeque::with_capacity(BLOCKHASH_WINDOW as usize);
        recent.push_back(genesis.hash);
        ChainView {
            tip_number: genesis.number,
            tip_timestamp: genesis.timestamp,
            recent,
        }
    }

    /// Builds a view from the tail of a chain; `blocks` must be consecutive.
    pub fn from_blocks(blocks: &[Block]) -> Option<Self> {
        let tip = blocks.last()?;
        let skip = blocks.len().saturating_sub(BLOCKHASH_WINDOW as usize);
        Some(ChainView {
            tip_number: tip.number,
            tip_timestamp: tip.timestamp,
            recent: blocks[skip..].iter().map(|b| b.hash).collect(),
        })
    }

    fn push(&mut self, block: &Block) {
        debug_assert_eq!(block.number, self.tip_number + 1);
        if self.recent.len() as u64 == BLOCKHASH_WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back(block.hash);
        self.tip_number = block.number;
        self.tip_timestamp = block.timestamp;
    }

    pub fn tip_number(&self) -> u64 {
        self.tip_number
    }

    pub fn tip_timestamp(&self) -> i64 {
        self.tip_timestamp
    }

    pub fn oldest_resolvable(&self) -> u64 {
        self.tip_number + 1 - self.recent.len() as u64
    }

    pub fn resolvable_count(&self) -> usize {
        self.recent.len()
    }

    /// Hash of block `k`, or `None` when `k` is in the future or has
    /// fallen out of the window.
    pub fn block_hash(&self, k: u64) -> Option<Digest> {
        if k > self.tip_number || k < self.oldest_resolvable() {
            return None;
        }
        self.recent
            .get((k - self.oldest_resolvable()) as usize)
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerPool {
    pub coalition_fraction: f64,
    pub coalition_strategy: MinerStrategy,
    pub block_interval_secs: f64,
    pub rng_seed: u64,
    pub discard_cap: u64,
}

impl MinerPool {
    pub fn honest(rng_seed: u64) -> Self {
        MinerPool {
            coalition_fraction: 0.0,
            coalition_strategy: MinerStrategy::HonestMining,
            block_interval_secs: DEFAULT_BLOCK_INTERVAL_SECS,
            rng_seed,
            discard_cap: DEFAULT_DISCARD_CAP,
        }
    }

    pub fn with_coalition(mut self, fraction: f64, strategy: MinerStrategy) -> Self {
        self.coalition_fraction = fraction;
        self.coalition_strategy = strategy;
        self
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if !(0.0..=1.0).contains(&self.coalition_fraction) {
            return Err(LedgerError::InvalidFraction(self.coalition_fraction));
        }
        if !self.block_interval_secs.is_finite() || self.block_interval_secs < 0.0 {
            return Err(LedgerError::InvalidInterval(self.block_interval_secs));
        }
        Ok(())
    }
}

/// Outcome of one block competition.
#[derive(Debug, Clone, PartialEq)]
pub struct Competition {
    pub block: Block,
    /// Candidates the coalition mined and threw away before `block`.
    pub discarded: u64,
    pub coalition_won: bool,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    hash_fn: HashFn,
    pool: MinerPool,
    rng: SimRng,
    interval: Option<Exp<f64>>,
    blocks: Vec<Block>,
    view: ChainView,
    total_discards: u64,
}

impl Ledger {
    pub fn new(hash_fn: HashFn, pool: MinerPool, genesis_time: i64) -> Result<Self, LedgerError> {
        pool.validate()?;
        let interval = if pool.block_interval_secs > 0.0 {
            Some(
                Exp::new(1.0 / pool.block_interval_secs)
                    .map_err(|_| LedgerError::InvalidInterval(pool.block_interval_secs))?,
            )
        } else {
            None
        };
        let genesis = Block::genesis(hash_fn, genesis_time);
        let view = ChainView::new(&genesis);
        Ok(Ledger {
            hash_fn,
            rng: seeds::rng(pool.rng_seed),
            pool,
            interval,
            blocks: vec![genesis],
            view,
            total_discards: 0,
        })
    }

    pub fn hash_fn(&self) -> HashFn {
        self.hash_fn
    }

    pub fn pool(&self) -> &MinerPool {
        &self.pool
    }

    pub fn view(&self) -> &ChainView {
        &self.view
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("ledger always has genesis")
    }

    pub fn block(&self, number: u64) -> Option<&Block> {
        self.blocks.get(number as usize)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn total_discards(&self) -> u64 {
        self.total_discards
    }

    pub fn summaries(&self) -> impl Iterator<Item = BlockSummary> + '_ {
        self.blocks.iter().map(Block::summary)
    }

    /// Run one competition for the block after the tip without appending it.
    ///
    /// Every sub-round the coalition wins with probability `F`. A coalition
    /// block is published only if its strategy accepts the hash; otherwise it
    /// is discarded and mining restarts. Outside blocks are always published.
    pub fn mine_competition(
        &mut self,
        timestamp: i64,
        txs: Vec<Vec<u8>>,
        knowledge: &MinerKnowledge,
    ) -> Result<Competition, LedgerError> {
        let parent = self.tip().hash;
        let number = self.tip().number + 1;
        let fraction = self.pool.coalition_fraction;
        let commitment = tx_commitment(self.hash_fn, &txs);
        let mut discarded = 0u64;
        loop {
            let nonce: u64 = self.rng.gen();
            let coalition_won = self.rng.gen::<f64>() < fraction;
            let hash = self.hash_fn.digest_parts(&[
                parent.as_bytes(),
                &number.to_be_bytes(),
                &timestamp.to_be_bytes(),
                &nonce.to_be_bytes(),
                commitment.as_bytes(),
            ]);
            let publish = !coalition_won
                || miner_decide(&self.pool.coalition_strategy, number, &hash, knowledge)
                    == MinerDecision::Publish;
            if publish {
                let block = Block {
                    number,
                    parent_hash: parent,
                    hash,
                    timestamp,
                    nonce,
                    txs,
                };
                return Ok(Competition {
                    block,
                    discarded,
                    coalition_won,
                });
            }
            discarded += 1;
            if discarded >= self.pool.discard_cap {
                self.total_discards += discarded;
                return Err(LedgerError::Livelock {
                    number,
                    discards: discarded,
                });
            }
        }
    }

    /// Mine and append the next block.
    pub fn advance(
        &mut self,
        txs: Vec<Vec<u8>>,
        knowledge: &MinerKnowledge,
    ) -> Result<Competition, LedgerError> {
        let timestamp = self.tip().timestamp + self.next_interval();
        let competition = self.mine_competition(timestamp, txs, knowledge)?;
        self.total_discards += competition.discarded;
        self.view.push(&competition.block);
        self.blocks.push(competition.block.clone());
        Ok(competition)
    }

    fn next_interval(&mut self) -> i64 {
        match &self.interval {
            // whole seconds, never zero so timestamps strictly increase
            Some(exp) => (exp.sample(&mut self.rng).round() as i64).max(1),
            None => 0,
        }
    }
}
