//! Deterministic scenario engine.
//!
//! Each step mines one block. Before mining, the owner, producers and
//! customers decide on transactions against the current tip; the coalition
//! mines with whatever knowledge its strategy grants; the contract then
//! processes the block's transactions in order against the new tip.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::config::{ContractKind, ProducerConfig, ScenarioConfig};
use super::error::ExperimentError;
use super::logs::to_jsonl;
use crate::adversary::{
    producer_act, MinerKnowledge, MinerStrategy, ProducerStrategy, ProducerView,
};
use crate::hashcore::{ChainCheckpoint, Digest, MerlinChain};
use crate::ledger::Ledger;
use crate::lighthouse::{detail_list, BeaconContract, EventKind, Lighthouse, SingleBeacon};
use crate::seeds::derive_digest;

const CUSTOMER: &str = "customer";

/// A contract call carried in a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tx", rename_all = "snake_case")]
pub enum Tx {
    Register {
        caller: String,
        producer: String,
        v: Digest,
        u: i64,
    },
    Reveal {
        sender: String,
        v: Digest,
        u: i64,
    },
    Read {
        customer: String,
    },
    Deregister {
        caller: String,
        producer: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub blocks: u64,
    pub pulses: u64,
    pub invalid_messages: u64,
    pub rejected_messages: u64,
    pub hash_expired: u64,
    pub round_stalls: u64,
    pub zero_refusals: u64,
    pub deregistrations: u64,
    pub discarded_blocks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioOutput {
    pub pulse_log: String,
    pub event_log: String,
    pub block_log: String,
    pub summary: ScenarioSummary,
    /// Offsite backups of every producer's chain at the end of the run.
    pub checkpoints: BTreeMap<String, ChainCheckpoint>,
}

struct ProducerState {
    config: ProducerConfig,
    chain: MerlinChain,
    last_send_block: u64,
}

pub struct Simulation {
    config: ScenarioConfig,
    ledger: Ledger,
    contract: Box<dyn BeaconContract + Send>,
    producers: Vec<ProducerState>,
    deregister_requested: HashSet<String>,
    events_seen: usize,
    reads_at: BTreeSet<u64>,
}

impl Simulation {
    /// Validates the config, mines genesis, deploys the contract and
    /// registers every producer with the first value of its chain.
    pub fn new(config: ScenarioConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let hash_fn = config.hash_fn();
        let ledger = Ledger::new(hash_fn, config.miner_pool(), config.genesis_time)?;
        let contract_config = config.contract.contract_config();
        let owner = config.owner.name.clone();
        let mut contract: Box<dyn BeaconContract + Send> = match config.contract.kind {
            ContractKind::Lighthouse => Box::new(Lighthouse::deploy(
                owner.clone(),
                contract_config,
                ledger.view(),
            )),
            ContractKind::Single => Box::new(SingleBeacon::deploy(
                owner.clone(),
                contract_config,
                ledger.view(),
            )),
        };

        let mut producers = Vec::with_capacity(config.producers.len());
        for p in &config.producers {
            let seed = match p.strategy {
                ProducerStrategy::CloneCoalition { shared_seed, .. } => {
                    derive_digest(shared_seed, "clone-chain", &[])
                }
                _ => derive_digest(
                    config.master_seed,
                    &format!("producer-chain/{}", p.name),
                    &[],
                ),
            };
            let mut chain = MerlinChain::build_with(hash_fn, seed, config.chain_length(p))?;
            let (_, first) = chain.next()?;
            let view = ledger.view();
            contract
                .register_producer(&owner, &p.name, first, view.tip_timestamp(), view)
                .expect("owner registers distinct validated names");
            producers.push(ProducerState {
                config: p.clone(),
                chain,
                last_send_block: view.tip_number(),
            });
        }
        let reads_at = config.customers.reads_at.iter().copied().collect();
        Ok(Simulation {
            config,
            ledger,
            contract,
            producers,
            deregister_requested: HashSet::new(),
            events_seen: 0,
            reads_at,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn contract(&self) -> &dyn BeaconContract {
        self.contract.as_ref()
    }

    pub fn tip(&self) -> u64 {
        self.ledger.view().tip_number()
    }

    pub fn finished(&self) -> bool {
        self.tip() >= self.config.blocks
            || self
                .config
                .stop_after_pulses
                .is_some_and(|n| self.contract.history().len() as u64 >= n)
    }

    pub fn checkpoint(&self, producer: &str) -> Option<ChainCheckpoint> {
        self.producers
            .iter()
            .find(|p| p.config.name == producer)
            .map(|p| p.chain.checkpoint())
    }

    fn decide(&mut self) -> Vec<Tx> {
        let view = self.ledger.view();
        let landing = view.tip_number() + 1;
        let mut txs = Vec::new();

        if self.config.owner.deregister_stalled {
            for e in &self.contract.events()[self.events_seen..] {
                if e.kind != EventKind::RoundStalled {
                    continue;
                }
                let record = e.record();
                for name in detail_list(record.field("pending").unwrap_or("")) {
                    if self.deregister_requested.insert(name.to_string()) {
                        txs.push(Tx::Deregister {
                            caller: self.config.owner.name.clone(),
                            producer: name.to_string(),
                        });
                    }
                }
            }
        }
        self.events_seen = self.contract.events().len();

        let target_block = self.contract.target_block();
        for p in &mut self.producers {
            let Some(status) = self.contract.producer_status(&p.config.name) else {
                continue;
            };
            let pview = ProducerView {
                hash_fn: self.config.hash_fn(),
                tip_number: view.tip_number(),
                tip_timestamp: view.tip_timestamp(),
                target_block,
                target_hash: if view.tip_number() >= target_block {
                    view.block_hash(target_block)
                } else {
                    None
                },
                last_pulse_block: self.contract.last_pulse_block(),
                pulsed_this_round: status.pulsed_this_round,
                last_send_block: p.last_send_block,
            };
            if let Some((v, u)) = producer_act(&p.config.strategy, &pview, &mut p.chain) {
                p.last_send_block = landing;
                txs.push(Tx::Reveal {
                    sender: p.config.name.clone(),
                    v,
                    u,
                });
            }
        }

        let keeper_due = self
            .config
            .customers
            .keeper_interval
            .is_some_and(|k| landing.is_multiple_of(k));
        if self.reads_at.contains(&landing) || keeper_due {
            txs.push(Tx::Read {
                customer: CUSTOMER.to_string(),
            });
        }
        txs
    }

    fn knowledge(&self) -> MinerKnowledge {
        let next_values = match &self.config.miner.strategy {
            MinerStrategy::ProducerColluder { producers, .. } => producers
                .iter()
                .filter_map(|name| {
                    let p = self.producers.iter().find(|p| &p.config.name == name)?;
                    p.chain.peek().map(|(_, v)| v)
                })
                .collect(),
            _ => Vec::new(),
        };
        MinerKnowledge {
            hash_fn: self.config.hash_fn(),
            target_block: Some(self.contract.target_block()),
            next_values,
        }
    }

    /// Mine one block and apply its transactions.
    pub fn step(&mut self) -> Result<(), ExperimentError> {
        let txs = self.decide();
        let knowledge = self.knowledge();
        let encoded = txs
            .iter()
            .map(|tx| serde_json::to_vec(tx).expect("tx serializes"))
            .collect();
        self.ledger.advance(encoded, &knowledge)?;
        let view = self.ledger.view().clone();
        for tx in txs {
            match tx {
                Tx::Reveal { sender, v, u } => {
                    self.contract.submit_message(&sender, v, u, &view);
                }
                Tx::Read { .. } => {
                    self.contract.get_latest(&view);
                }
                Tx::Deregister { caller, producer } => {
                    let _ = self.contract.request_deregister(&caller, &producer, &view);
                }
                Tx::Register {
                    caller,
                    producer,
                    v,
                    u,
                } => {
                    let _ = self
                        .contract
                        .register_producer(&caller, &producer, v, u, &view);
                }
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<(), ExperimentError> {
        while !self.finished() {
            self.step()?;
        }
        Ok(())
    }

    pub fn summary(&self) -> ScenarioSummary {
        let count = |name: &str| {
            self.contract
                .events()
                .iter()
                .filter(|e| e.kind.name() == name)
                .count() as u64
        };
        ScenarioSummary {
            blocks: self.tip(),
            pulses: self.contract.history().len() as u64,
            invalid_messages: count("MessageInvalid"),
            rejected_messages: count("MessageRejected"),
            hash_expired: count("HashExpired"),
            round_stalls: count("RoundStalled"),
            zero_refusals: count("ZeroCombinedRefused"),
            deregistrations: count("ProducerDeregistered"),
            discarded_blocks: self.ledger.total_discards(),
        }
    }

    pub fn output(&self) -> ScenarioOutput {
        let events: Vec<_> = self.contract.events().iter().map(|e| e.record()).collect();
        let blocks: Vec<_> = self.ledger.summaries().collect();
        ScenarioOutput {
            pulse_log: to_jsonl(self.contract.history()),
            event_log: to_jsonl(&events),
            block_log: to_jsonl(&blocks),
            summary: self.summary(),
            checkpoints: self
                .producers
                .iter()
                .map(|p| (p.config.name.clone(), p.chain.checkpoint()))
                .collect(),
        }
    }
}

/// Validate, run to completion and render the logs.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput, ExperimentError> {
    let mut sim = Simulation::new(config.clone())?;
    sim.run()?;
    Ok(sim.output())
}
