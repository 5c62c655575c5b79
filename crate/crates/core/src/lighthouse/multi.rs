use std::collections::BTreeMap;

use super::{
    deployed_detail, BeaconContract, BeaconPulse, ContractConfig, ContractEvent, EventKind,
    InvalidReason, LighthousePulse, MessageOutcome, ProducerStatus, RejectReason, TimestampRule,
};
use crate::hashcore::{link_ok, Digest};
use crate::ledger::ChainView;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProducerRecord {
    pub address: String,
    pub last_v: Digest,
    pub last_u: i64,
    pub last_v_block: u64,
    pub last_v_time: i64,
    pub index: u64,
    pub registered_block: u64,
    pub pending_pulse: Option<BeaconPulse>,
    pub deregister_at: Option<u64>,
}

impl ProducerRecord {
    pub fn pulsed_this_round(&self) -> bool {
        self.pending_pulse.is_some()
    }
}

/// Multi-producer contract. Producers pulse in lockstep against a shared
/// target block hash; once every participating producer has pulsed, the
/// combined output `R_L = R_1 ⊕ … ⊕ R_m`, `T_L = max(T_i)` is published.
#[derive(Debug, Clone)]
pub struct Lighthouse {
    owner: String,
    config: ContractConfig,
    producers: BTreeMap<String, ProducerRecord>,
    last_pulse_block: u64,
    last_pulse_time: i64,
    target_block: u64,
    cached_target_hash: Option<Digest>,
    stall_reported: bool,
    history: Vec<LighthousePulse>,
    events: Vec<ContractEvent>,
}

impl Lighthouse {
    /// Deploy at the view's tip; the first round uses the next block's hash.
    pub fn deploy(owner: impl Into<String>, config: ContractConfig, view: &ChainView) -> Self {
        let owner = owner.into();
        let target_block = view.tip_number() + 1;
        let mut lh = Lighthouse {
            owner,
            config,
            producers: BTreeMap::new(),
            last_pulse_block: view.tip_number(),
            last_pulse_time: view.tip_timestamp(),
            target_block,
            cached_target_hash: None,
            stall_reported: false,
            history: Vec::new(),
            events: Vec::new(),
        };
        let detail = deployed_detail(&lh.owner, &lh.config, target_block);
        lh.emit(view.tip_number(), EventKind::ContractDeployed, detail);
        lh
    }

    pub fn producer(&self, name: &str) -> Option<&ProducerRecord> {
        self.producers.get(name)
    }

    /// Producers taking part in the open round: registered before its target
    /// block was mined.
    pub fn participants(&self) -> impl Iterator<Item = &ProducerRecord> {
        let target = self.target_block;
        self.producers
            .values()
            .filter(move |p| p.registered_block < target)
    }

    fn pending_names(&self) -> String {
        self.participants()
            .filter(|p| !p.pulsed_this_round())
            .map(|p| p.address.as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    fn emit(&mut self, block: u64, kind: EventKind, detail: String) {
        self.events.push(ContractEvent {
            block,
            kind,
            detail,
        });
    }

    fn reject(&mut self, view: &ChainView, reason: RejectReason, detail: String) -> RejectReason {
        self.emit(
            view.tip_number(),
            EventKind::MessageRejected(reason),
            format!("reason={reason} {detail}"),
        );
        reason
    }

    fn start_round(&mut self, target_block: u64) {
        self.target_block = target_block;
        self.cached_target_hash = None;
        self.stall_reported = false;
        for p in self.producers.values_mut() {
            p.pending_pulse = None;
        }
    }

    /// Publish the combined pulse if every participant has pulsed.
    pub fn try_combine(&mut self, view: &ChainView) -> Option<LighthousePulse> {
        let participants: Vec<&ProducerRecord> = self.participants().collect();
        if participants.is_empty() || participants.iter().any(|p| !p.pulsed_this_round()) {
            return None;
        }
        let beacons: Vec<BeaconPulse> = participants
            .iter()
            .filter_map(|p| p.pending_pulse.clone())
            .collect();
        let r_l = beacons.iter().fold(Digest::ZERO, |acc, b| acc ^ b.r);
        let t_l = beacons.iter().map(|b| b.t).max().expect("non-empty");
        let current = view.tip_number();
        if r_l.is_zero() {
            let contributors = beacons
                .iter()
                .map(|b| b.producer.as_str())
                .collect::<Vec<_>>()
                .join(",");
            self.start_round(current + 1);
            self.emit(
                current,
                EventKind::ZeroCombinedRefused,
                format!("contributors={contributors} reset_target={}", current + 1),
            );
            return None;
        }
        let pulse = LighthousePulse {
            round: self.history.len() as u64,
            r_l,
            t_l,
            block: current,
            beacons,
        };
        self.last_pulse_block = current;
        self.last_pulse_time = view.tip_timestamp();
        self.start_round(current + 1);
        self.emit(
            current,
            EventKind::PulseEmitted,
            format!("round={} r_l={}", pulse.round, pulse.r_l),
        );
        self.history.push(pulse.clone());
        Some(pulse)
    }
}

impl BeaconContract for Lighthouse {
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
        if caller != self.owner {
            return Err(self.reject(
                view,
                RejectReason::NotOwner,
                format!("caller={caller} producer={producer}"),
            ));
        }
        if self.producers.contains_key(producer) {
            return Err(self.reject(
                view,
                RejectReason::AlreadyRegistered,
                format!("producer={producer}"),
            ));
        }
        let current = view.tip_number();
        if self.participants().next().is_none() {
            // Nobody could ever complete the open round; start a fresh one.
            self.start_round(current + 1);
        }
        self.producers.insert(
            producer.to_string(),
            ProducerRecord {
                address: producer.to_string(),
                last_v: v,
                last_u: u,
                last_v_block: current,
                last_v_time: view.tip_timestamp(),
                index: 1,
                registered_block: current,
                pending_pulse: None,
                deregister_at: None,
            },
        );
        self.emit(
            current,
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
        if caller != self.owner {
            return Err(self.reject(
                view,
                RejectReason::NotOwner,
                format!("caller={caller} producer={producer}"),
            ));
        }
        let at = view.tip_number() + self.config.deregister_delay;
        match self.producers.get_mut(producer) {
            None => Err(self.reject(
                view,
                RejectReason::UnknownProducer,
                format!("producer={producer}"),
            )),
            Some(p) if p.deregister_at.is_some() => Err(self.reject(
                view,
                RejectReason::DeregisterPending,
                format!("producer={producer}"),
            )),
            Some(p) => {
                p.deregister_at = Some(at);
                Ok(at)
            }
        }
    }

    fn touch(&mut self, view: &ChainView) {
        let current = view.tip_number();

        let due: Vec<String> = self
            .producers
            .values()
            .filter(|p| p.deregister_at.is_some_and(|at| at <= current))
            .map(|p| p.address.clone())
            .collect();
        for name in &due {
            self.producers.remove(name);
            self.emit(
                current,
                EventKind::ProducerDeregistered,
                format!("producer={name}"),
            );
        }

        if self.cached_target_hash.is_none() {
            if let Some(h) = view.block_hash(self.target_block) {
                self.cached_target_hash = Some(h);
            } else if self.target_block <= current {
                let detail = format!(
                    "target={} pending={} reset_target={}",
                    self.target_block,
                    self.pending_names(),
                    current + 1
                );
                self.start_round(current + 1);
                self.emit(current, EventKind::HashExpired, detail);
            }
        }

        if !due.is_empty() {
            self.try_combine(view);
        }

        if self.cached_target_hash.is_some()
            && !self.stall_reported
            && current >= self.target_block + self.config.stall_after_blocks
        {
            let pending = self.pending_names();
            if !pending.is_empty() {
                self.stall_reported = true;
                self.emit(
                    current,
                    EventKind::RoundStalled,
                    format!("target={} pending={pending}", self.target_block),
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
        let hash_fn = self.config.hash_fn;
        let current = view.tip_number();
        let Some(rec) = self.producers.get_mut(sender) else {
            return MessageOutcome::Rejected(self.reject(
                view,
                RejectReason::UnknownProducer,
                format!("producer={sender} v={v}"),
            ));
        };
        if !link_ok(hash_fn, &rec.last_v, &v) {
            return MessageOutcome::Rejected(self.reject(
                view,
                RejectReason::BrokenLink,
                format!("producer={sender} v={v}"),
            ));
        }

        let (prev_u, prev_time) = (rec.last_u, rec.last_v_time);
        rec.last_v = v;
        rec.last_u = u;
        rec.last_v_block = current;
        rec.last_v_time = view.tip_timestamp();
        rec.index += 1;
        let index = rec.index;

        let invalid = if rec.registered_block >= self.target_block {
            Some(InvalidReason::NotYetParticipating)
        } else if rec.pulsed_this_round() {
            Some(InvalidReason::AlreadyPulsed)
        } else if self.cached_target_hash.is_none() {
            Some(InvalidReason::HashUnavailable)
        } else if current < self.target_block + 1 {
            Some(InvalidReason::TooEarly)
        } else {
            None
        };
        if let Some(reason) = invalid {
            self.emit(
                current,
                EventKind::MessageInvalid(reason),
                format!("reason={reason} producer={sender} index={index} v={v}"),
            );
            return MessageOutcome::AcceptedInvalid(reason);
        }

        let target_hash = self.cached_target_hash.expect("checked above");
        let r = hash_fn.combine(&v, &target_hash);
        let t = match self.config.timestamp_rule {
            TimestampRule::Printed => self.last_pulse_time.min(u),
            TimestampRule::Prose => prev_u.min(prev_time),
        };
        let beacon = BeaconPulse {
            producer: sender.to_string(),
            index,
            v,
            r,
            t,
            u,
            block_used: self.target_block,
        };
        self.producers
            .get_mut(sender)
            .expect("looked up above")
            .pending_pulse = Some(beacon.clone());
        let lighthouse = self.try_combine(view);
        MessageOutcome::Pulsed { beacon, lighthouse }
    }

    fn get_pulse(&mut self, index: usize, view: &ChainView) -> Option<LighthousePulse> {
        self.touch(view);
        self.history.get(index).cloned()
    }

    fn get_latest(&mut self, view: &ChainView) -> Option<LighthousePulse> {
        self.touch(view);
        self.history.last().cloned()
    }

    fn history(&self) -> &[LighthousePulse] {
        &self.history
    }

    fn events(&self) -> &[ContractEvent] {
        &self.events
    }

    fn target_block(&self) -> u64 {
        self.target_block
    }

    fn cached_target_hash(&self) -> Option<Digest> {
        self.cached_target_hash
    }

    fn last_pulse_block(&self) -> u64 {
        self.last_pulse_block
    }

    fn producer_status(&self, producer: &str) -> Option<ProducerStatus> {
        self.producers.get(producer).map(|p| ProducerStatus {
            last_v: p.last_v,
            index: p.index,
            registered_block: p.registered_block,
            pulsed_this_round: p.pulsed_this_round(),
            deregister_at: p.deregister_at,
        })
    }

    fn producer_names(&self) -> Vec<String> {
        self.producers.keys().cloned().collect()
    }
}
