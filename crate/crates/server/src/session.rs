use lighthouse_api::{
    AdvanceResponse, AppliedTx, ProducerInfo, SessionConfig, SessionLogs, SessionState, TxResult,
};
use lighthouse_core::adversary::MinerKnowledge;
use lighthouse_core::experiments::{to_jsonl, ConfigError, ContractKind, Tx};
use lighthouse_core::ledger::{Ledger, LedgerError, MinerPool};
use lighthouse_core::lighthouse::{BeaconContract, Lighthouse, MessageOutcome, SingleBeacon};
use lighthouse_core::seeds::derive_seed;

pub struct Session {
    id: u64,
    ledger: Ledger,
    contract: Box<dyn BeaconContract + Send>,
    queued: Vec<Tx>,
}

impl Session {
    pub fn new(id: u64, config: &SessionConfig) -> Result<Self, ConfigError> {
        config
            .miner_strategy
            .validate()
            .map_err(|e| ConfigError::new("miner_strategy", e.to_string()))?;
        if config.owner.is_empty() {
            return Err(ConfigError::new("owner", "must be non-empty"));
        }
        let pool = MinerPool {
            coalition_fraction: config.miner_fraction,
            coalition_strategy: config.miner_strategy.clone(),
            block_interval_secs: config.block_interval_secs,
            rng_seed: derive_seed(config.seed, "miners", &[]),
            discard_cap: config.discard_cap,
        };
        let ledger = Ledger::new(config.contract.hash, pool, config.genesis_time).map_err(|e| {
            let field = match e {
                LedgerError::InvalidFraction(_) => "miner_fraction",
                LedgerError::InvalidInterval(_) => "block_interval_secs",
                _ => "discard_cap",
            };
            ConfigError::new(field, e.to_string())
        })?;
        let contract_config = config.contract.contract_config();
        let contract: Box<dyn BeaconContract + Send> = match config.contract.kind {
            ContractKind::Lighthouse => Box::new(Lighthouse::deploy(
                config.owner.clone(),
                contract_config,
                ledger.view(),
            )),
            ContractKind::Single => Box::new(SingleBeacon::deploy(
                config.owner.clone(),
                contract_config,
                ledger.view(),
            )),
        };
        Ok(Session {
            id,
            ledger,
            contract,
            queued: Vec::new(),
        })
    }

    pub fn contract(&self) -> &dyn BeaconContract {
        self.contract.as_ref()
    }

    pub fn enqueue(&mut self, tx: Tx) {
        self.queued.push(tx);
    }

    pub fn state(&self) -> SessionState {
        let producers = self
            .contract
            .producer_names()
            .into_iter()
            .filter_map(|name| {
                let s = self.contract.producer_status(&name)?;
                Some(ProducerInfo {
                    name,
                    index: s.index,
                    last_v: s.last_v,
                    registered_block: s.registered_block,
                    pulsed_this_round: s.pulsed_this_round,
                    deregister_at: s.deregister_at,
                })
            })
            .collect();
        SessionState {
            id: self.id,
            tip: self.ledger.tip().summary(),
            target_block: self.contract.target_block(),
            cached_target_hash: self.contract.cached_target_hash(),
            last_pulse_block: self.contract.last_pulse_block(),
            pulses: self.contract.history().len() as u64,
            queued: self.queued.clone(),
            producers,
        }
    }

    /// Mine `blocks` blocks; queued transactions go into the first one.
    pub fn advance(&mut self, blocks: u64) -> Result<AdvanceResponse, LedgerError> {
        let before = self.ledger.total_discards();
        let mut applied = Vec::new();
        for _ in 0..blocks {
            let txs = std::mem::take(&mut self.queued);
            let knowledge = MinerKnowledge {
                hash_fn: self.ledger.hash_fn(),
                target_block: Some(self.contract.target_block()),
                next_values: Vec::new(),
            };
            let encoded = txs
                .iter()
                .map(|tx| serde_json::to_vec(tx).expect("tx serializes"))
                .collect();
            self.ledger.advance(encoded, &knowledge)?;
            let view = self.ledger.view().clone();
            let block = view.tip_number();
            for tx in txs {
                let c = &mut self.contract;
                let result = match &tx {
                    Tx::Register {
                        caller,
                        producer,
                        v,
                        u,
                    } => match c.register_producer(caller, producer, *v, *u, &view) {
                        Ok(()) => TxResult::Registered,
                        Err(r) => TxResult::Rejected {
                            reason: r.to_string(),
                        },
                    },
                    Tx::Deregister { caller, producer } => {
                        match c.request_deregister(caller, producer, &view) {
                            Ok(at) => TxResult::DeregisterScheduled {
                                effective_block: at,
                            },
                            Err(r) => TxResult::Rejected {
                                reason: r.to_string(),
                            },
                        }
                    }
                    Tx::Reveal { sender, v, u } => match c.submit_message(sender, *v, *u, &view) {
                        MessageOutcome::Rejected(r) => TxResult::Rejected {
                            reason: r.to_string(),
                        },
                        MessageOutcome::AcceptedInvalid(r) => TxResult::Invalid {
                            reason: r.to_string(),
                        },
                        MessageOutcome::Pulsed { beacon, lighthouse } => {
                            TxResult::Pulsed { beacon, lighthouse }
                        }
                    },
                    Tx::Read { .. } => TxResult::Read {
                        latest: c.get_latest(&view),
                    },
                };
                applied.push(AppliedTx { block, tx, result });
            }
        }
        Ok(AdvanceResponse {
            applied,
            discarded_blocks: self.ledger.total_discards() - before,
            state: self.state(),
        })
    }

    pub fn logs(&self) -> SessionLogs {
        let events: Vec<_> = self.contract.events().iter().map(|e| e.record()).collect();
        let blocks: Vec<_> = self.ledger.summaries().collect();
        SessionLogs {
            pulse_log: to_jsonl(self.contract.history()),
            event_log: to_jsonl(&events),
            block_log: to_jsonl(&blocks),
        }
    }
}
