use super::{
    deployed_detail, BeaconContract, BeaconPulse, ContractConfig, ContractEvent, EventKind,
    InvalidReason, LighthousePulse, MessageOutcome, ProducerStatus, RejectReason, TimestampRule,
};
use crate::hashcore::{link_ok, Digest};
use crate::ledger::ChainView;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Producer {
    address: String,
    v: Digest,
    u: i64,
    v_time: i64,
    index: u64,
    registered_block: u64,
    deregister_at: Option<u64>,
}

/// Single-producer contract: every valid message immediately yields a pulse
/// `R_x = H(V_x ∥ BH(B(R_y)+1))`. Pulses use the same record type as the
/// multi-producer contract with exactly one beacon.
#[derive(Debug, Clone)]
pub struct SingleBeacon {
    owner: String,
    config: ContractConfig,
    producer: Option<Producer>,
    // B(R_y) and its timestamp
    last_block: u64,
    last_time: i64,
    // block whose hash the next pulse uses
    hash_block: u64,
    hash: Option<Digest>,
    stall_reported: bool,
    pulses: Vec<LighthousePulse>,
    log: Vec<ContractEvent>,
}

impl SingleBeacon {
    pub fn deploy(owner: impl Into<String>, config: ContractConfig, view: &ChainView) -> Self {
        let owner = owner.into();
        let detail = deployed_detail(&owner, &config, view.tip_number() + 1);
        SingleBeacon {
            owner,
            config,
            producer: None,
            last_block: view.tip_number(),
            last_time: view.tip_timestamp(),
            hash_block: view.tip_number() + 1,
            hash: None,
            stall_reported: false,
            pulses: Vec::new(),
            log: vec![ContractEvent {
                block: view.tip_number(),
                kind: EventKind::ContractDeployed,
                detail,
            }],
        }
    }

    fn log(&mut self, block: u64, kind: EventKind, detail: String) {
        self.log.push(ContractEvent {
            block,
            kind,
            detail,
        });
    }

    fn rejected(&mut self, block: u64, reason: RejectReason, detail: String) -> RejectReason {
        self.log(
            block,
            EventKind::MessageRejected(reason),
            format!("reason={reason} {detail}"),
        );
        reason
    }

    fn reset_hash(&mut self, block: u64) {
        self.hash_block = block;
        self.hash = None;
        self.stall_reported = false;
    }

    fn waiting_on(&self) -> String {
        match &self.producer {
            Some(p) if p.registered_block < self.hash_block => p.address.clone(),
            _ => String::new(),
        }
    }
}

impl BeaconContract for SingleBeacon {
    fn config(&self) -> &ContractConfig {
        &self.config
    }

    fn owner(&self) -> &str {
        &self.owner
    }

    fn register_producer(
        &mut self,
        caller: &str,
        producer: &str,
        v: Digest,
        u: i64,
        view: &ChainView,
    ) -> Result<(), RejectReason> {
        self.touch(view);
        let block = view.tip_number();
        if caller != self.owner {
            return Err(self.rejected(
                block,
                RejectReason::NotOwner,
                format!("caller={caller} producer={producer}"),
            ));
        }
        if self.producer.is_some() {
            return Err(self.rejected(
                block,
                RejectReason::AlreadyRegistered,
                format!("producer={producer}"),
            ));
        }
        // An empty contract has no open round to join; start one.
        self.reset_hash(block + 1);
        self.producer = Some(Producer {
            address: producer.to_string(),
            v,
            u,
            v_time: view.tip_timestamp(),
            index: 1,
            registered_block: block,
            deregister_at: None,
        });
        self.log(
            block,
            EventKind::ProducerRegistered,
            format!("producer={producer} index=1 v={v}"),
        );
        Ok(())
    }

    fn request_deregister(
        &mut self,
        caller: &str,
        producer: &str,
        view: &ChainView,
    ) -> Result<u64, RejectReason> {
        self.touch(view);
        let block = view.tip_number();
        if caller != self.owner {
            return Err(self.rejected(
                block,
                RejectReason::NotOwner,
                format!("caller={caller} producer={producer}"),
            ));
        }
        let at = block + self.config.deregister_delay;
        let outcome = match self.producer.as_mut() {
            Some(p) if p.address == producer => {
                if p.deregister_at.is_some() {
                    Err(RejectReason::DeregisterPending)
                } else {
                    p.deregister_at = Some(at);
                    Ok(at)
                }
            }
            _ => Err(RejectReason::UnknownProducer),
        };
        outcome.map_err(|reason| self.rejected(block, reason, format!("producer={producer}")))
    }

    fn touch(&mut self, view: &ChainView) {
        let block = view.tip_number();
        if let Some(p) = &self.producer {
            if p.deregister_at.is_some_and(|at| at <= block) {
                let detail = format!("producer={}", p.address);
                self.producer = None;
                self.log(block, EventKind::ProducerDeregistered, detail);
            }
        }
        if self.hash.is_none() {
            match view.block_hash(self.hash_block) {
                Some(h) => self.hash = Some(h),
                None if self.hash_block <= block => {
                    let detail = format!(
                        "target={} pending={} reset_target={}",
                        self.hash_block,
                        self.waiting_on(),
                        block + 1
                    );
                    self.reset_hash(block + 1);
                    self.log(block, EventKind::HashExpired, detail);
                }
                None => {}
            }
        }
        if self.hash.is_some()
            && !self.stall_reported
            && block >= self.hash_block + self.config.stall_after_blocks
        {
            let pending = self.waiting_on();
            if !pending.is_empty() {
                self.stall_reported = true;
                self.log(
                    block,
                    EventKind::RoundStalled,
                    format!("target={} pending={pending}", self.hash_block),
                );
            }
        }
    }

    fn submit_message(
        &mut self,
        sender: &str,
        v: Digest,
        u: i64,
        view: &ChainView,
    ) -> MessageOutcome {
        self.touch(view);
        let block = view.tip_number();
        let hash_fn = self.config.hash_fn;

        let registered = matches!(&self.producer, Some(p) if p.address == sender);
        if !registered {
            return MessageOutcome::Rejected(self.rejected(
                block,
                RejectReason::UnknownProducer,
                format!("producer={sender} v={v}"),
            ));
        }
        let p = self.producer.as_mut().expect("registered");
        if !link_ok(hash_fn, &p.v, &v) {
            return MessageOutcome::Rejected(self.rejected(
                block,
                RejectReason::BrokenLink,
                format!("producer={sender} v={v}"),
            ));
        }
        let prev_u = p.u;
        let prev_time = p.v_time;
        p.v = v;
        p.u = u;
        p.v_time = view.tip_timestamp();
        p.index += 1;
        let index = p.index;
        let late_registration = p.registered_block >= self.hash_block;

        // B(V_x) >= B(R_y) + 2, and BH(B(R_y) + 1) must be readable.
        let reason = if late_registration {
            Some(InvalidReason::NotYetParticipating)
        } else if self.hash.is_none() {
            Some(InvalidReason::HashUnavailable)
        } else if block <= self.hash_block {
            Some(InvalidReason::TooEarly)
        } else {
            None
        };
        if let Some(reason) = reason {
            self.log(
                block,
                EventKind::MessageInvalid(reason),
                format!("reason={reason} producer={sender} index={index} v={v}"),
            );
            return MessageOutcome::AcceptedInvalid(reason);
        }

        let bh = self.hash.expect("checked");
        let r = hash_fn.digest_parts(&[v.as_bytes(), bh.as_bytes()]);
        let t = match self.config.timestamp_rule {
            TimestampRule::Printed => std::cmp::min(self.last_time, u),
            TimestampRule::Prose => std::cmp::min(prev_u, prev_time),
        };
        let beacon = BeaconPulse {
            producer: sender.to_string(),
            index,
            v,
            r,
            t,
            u,
            block_used: self.hash_block,
        };
        let pulse = LighthousePulse {
            round: self.pulses.len() as u64,
            r_l: r,
            t_l: t,
            block,
            beacons: vec![beacon.clone()],
        };
        self.last_block = block;
        self.last_time = view.tip_timestamp();
        self.reset_hash(block + 1);
        self.log(
            block,
            EventKind::PulseEmitted,
            format!("round={} r_l={}", pulse.round, pulse.r_l),
        );
        self.pulses.push(pulse.clone());
        MessageOutcome::Pulsed {
            beacon,
            lighthouse: Some(pulse),
        }
    }

    fn get_pulse(&mut self, index: usize, view: &ChainView) -> Option<LighthousePulse> {
        self.touch(view);
        self.pulses.get(index).cloned()
    }

    fn get_latest(&mut self, view: &ChainView) -> Option<LighthousePulse> {
        self.touch(view);
        self.pulses.last().cloned()
    }

    fn history(&self) -> &[LighthousePulse] {
        &self.pulses
    }

    fn events(&self) -> &[ContractEvent] {
        &self.log
    }

    fn target_block(&self) -> u64 {
        self.hash_block
    }

    fn cached_target_hash(&self) -> Option<Digest> {
        self.hash
    }

    fn last_pulse_block(&self) -> u64 {
        self.last_block
    }

    fn producer_status(&self, producer: &str) -> Option<ProducerStatus> {
        self.producer
            .as_ref()
            .filter(|p| p.address == producer)
            .map(|p| ProducerStatus {
                last_v: p.v,
                index: p.index,
                registered_block: p.registered_block,
                pulsed_this_round: false,
                deregister_at: p.deregister_at,
            })
    }

    fn producer_names(&self) -> Vec<String> {
        self.producer.iter().map(|p| p.address.clone()).collect()
    }
}
