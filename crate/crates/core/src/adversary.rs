//! Producer and miner strategies, honest and adversarial.
//!
//! Strategies are pure decision functions over a public view plus whatever
//! private knowledge the strategy is entitled to (its own Merlin chain, or a
//! colluding producer's next value).

use serde::{Deserialize, Serialize};

use crate::hashcore::{Digest, HashFn, MerlinChain};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("bit index {0} outside [0, 255]")]
    BitIndex(u16),
    #[error("interval must be at least 1 block")]
    ZeroInterval,
    #[error("clone coalition needs at least 2 members, got {0}")]
    CoalitionTooSmall(u32),
    #[error("producer colluder must name at least one producer whose next value it learns")]
    ColluderWithoutKnowledge,
}

/// `digest.bit(bit) == value`. Bits are numbered from the most significant
/// bit of the first byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigestPredicate {
    pub bit: u16,
    pub value: bool,
}

impl DigestPredicate {
    pub fn holds(&self, digest: &Digest) -> bool {
        digest.bit(self.bit) == self.value
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.bit > 255 {
            return Err(StrategyError::BitIndex(self.bit));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MinerStrategy {
    HonestMining,
    /// Discard any mined block whose hash has the wrong value at `bit_index`.
    BitBias {
        bit_index: u16,
        desired_value: bool,
    },
    /// Learns the named producers' next Merlin values, computes the beacon
    /// output each candidate for the target block would produce, and discards
    /// candidates the predicate rejects.
    ProducerColluder {
        producers: Vec<String>,
        predicate: DigestPredicate,
    },
    /// Discards everything it mines. Only useful to exercise livelock detection.
    DiscardAll,
}

impl MinerStrategy {
    pub fn validate(&self) -> Result<(), StrategyError> {
        match self {
            MinerStrategy::BitBias { bit_index, .. } if *bit_index > 255 => {
                Err(StrategyError::BitIndex(*bit_index))
            }
            MinerStrategy::ProducerColluder {
                producers,
                predicate,
            } => {
                if producers.is_empty() {
                    return Err(StrategyError::ColluderWithoutKnowledge);
                }
                predicate.validate()
            }
            _ => Ok(()),
        }
    }
}

/// What the coalition knows when judging a candidate block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MinerKnowledge {
    pub hash_fn: HashFn,
    /// Block whose hash feeds the next beacon round.
    pub target_block: Option<u64>,
    /// Next Merlin values leaked by colluding producers.
    pub next_values: Vec<Digest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinerDecision {
    Publish,
    Discard,
}

/// Decide whether the coalition publishes a block it just mined.
pub fn miner_decide(
    strategy: &MinerStrategy,
    number: u64,
    candidate_hash: &Digest,
    knowledge: &MinerKnowledge,
) -> MinerDecision {
    let publish = match strategy {
        MinerStrategy::HonestMining => true,
        MinerStrategy::DiscardAll => false,
        MinerStrategy::BitBias {
            bit_index,
            desired_value,
        } => candidate_hash.bit(*bit_index) == *desired_value,
        MinerStrategy::ProducerColluder { predicate, .. } => {
            if knowledge.target_block != Some(number) || knowledge.next_values.is_empty() {
                true
            } else {
                predicate.holds(&colluder_candidate(knowledge, candidate_hash))
            }
        }
    };
    if publish {
        MinerDecision::Publish
    } else {
        MinerDecision::Discard
    }
}

/// XOR of `H(V_i ∥ candidate)` over every leaked next value: the combined
/// output the candidate block would yield if the leaking producers were the
/// only contributors.
pub fn colluder_candidate(knowledge: &MinerKnowledge, candidate_hash: &Digest) -> Digest {
    knowledge.next_values.iter().fold(Digest::ZERO, |acc, v| {
        acc ^ knowledge.hash_fn.combine(v, candidate_hash)
    })
}

fn default_interval() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProducerStrategy {
    /// Reveal the next value every `interval_blocks` once the round's target
    /// block hash is public.
    Honest { interval_blocks: u64 },
    /// Predict the beacon output from the known next value and the published
    /// target hash, and withhold whenever the predicate rejects it.
    Withholder {
        predicate: DigestPredicate,
        #[serde(default = "default_interval")]
        interval_blocks: u64,
    },
    /// Wait until `delay_blocks` after the last combined pulse before revealing.
    Delayer { delay_blocks: u64 },
    /// Member of `member_count` producers sharing one chain seed.
    CloneCoalition { shared_seed: u64, member_count: u32 },
}

impl ProducerStrategy {
    pub fn validate(&self) -> Result<(), StrategyError> {
        match self {
            ProducerStrategy::Honest { interval_blocks }
            | ProducerStrategy::Withholder {
                interval_blocks, ..
            } if *interval_blocks == 0 => Err(StrategyError::ZeroInterval),
            ProducerStrategy::Withholder { predicate, .. } => predicate.validate(),
            ProducerStrategy::CloneCoalition { member_count, .. } if *member_count < 2 => {
                Err(StrategyError::CoalitionTooSmall(*member_count))
            }
            _ => Ok(()),
        }
    }

    /// Minimum spacing, in blocks, between two reveals.
    pub fn min_gap(&self) -> u64 {
        match self {
            ProducerStrategy::Honest { interval_blocks }
            | ProducerStrategy::Withholder {
                interval_blocks, ..
            } => *interval_blocks,
            _ => 1,
        }
    }
}

/// Public state a producer observes before deciding on its next message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProducerView {
    pub hash_fn: HashFn,
    pub tip_number: u64,
    pub tip_timestamp: i64,
    pub target_block: u64,
    /// `BH(target_block)` if it has been mined and is still readable.
    pub target_hash: Option<Digest>,
    pub last_pulse_block: u64,
    pub pulsed_this_round: bool,
    /// Block the producer's previous message landed in (registration counts).
    pub last_send_block: u64,
}

impl ProducerView {
    /// The block a message sent now would be processed in.
    pub fn landing_block(&self) -> u64 {
        self.tip_number + 1
    }

    /// The target hash is public and this producer still owes a pulse.
    fn round_open(&self) -> bool {
        !self.pulsed_this_round && self.tip_number >= self.target_block
    }

    fn gap_ok(&self, interval: u64) -> bool {
        self.landing_block().saturating_sub(self.last_send_block) >= interval
    }
}

/// Decide whether to reveal the next chain value. On `Some`, the value has
/// been released from `chain`. `U` is the producer's clock, i.e. the tip time.
pub fn producer_act(
    strategy: &ProducerStrategy,
    view: &ProducerView,
    chain: &mut MerlinChain,
) -> Option<(Digest, i64)> {
    if !view.round_open() {
        return None;
    }
    let (_, next) = chain.peek()?;
    let send = match strategy {
        ProducerStrategy::Honest { interval_blocks } => view.gap_ok(*interval_blocks),
        ProducerStrategy::CloneCoalition { .. } => true,
        ProducerStrategy::Delayer { delay_blocks } => {
            view.landing_block() >= view.last_pulse_block + delay_blocks
        }
        ProducerStrategy::Withholder {
            predicate,
            interval_blocks,
        } => {
            view.gap_ok(*interval_blocks)
                && match view.target_hash {
                    Some(target) => predicate.holds(&predict_output(view.hash_fn, &next, &target)),
                    // hash gone: revealing now just resets the round
                    None => true,
                }
        }
    };
    if !send {
        return None;
    }
    let (_, v) = chain.next().ok()?;
    Some((v, view.tip_timestamp))
}

/// The beacon output a reveal of `next` would produce against `target`.
pub fn predict_output(hash_fn: HashFn, next: &Digest, target: &Digest) -> Digest {
    hash_fn.combine(next, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashcore::hash;
    use crate::seeds::{random_digest, rng};

    fn view() -> ProducerView {
        ProducerView {
            hash_fn: HashFn::Sha3_256,
            tip_number: 10,
            tip_timestamp: 1000,
            target_block: 9,
            target_hash: Some(hash(b"target")),
            last_pulse_block: 8,
            pulsed_this_round: false,
            last_send_block: 8,
        }
    }

    #[test]
    fn honest_mining_always_publishes() {
        let k = MinerKnowledge::default();
        for i in 0..64u8 {
            let h = hash(&[i]);
            assert_eq!(
                miner_decide(&MinerStrategy::HonestMining, 1, &h, &k),
                MinerDecision::Publish
            );
        }
    }

    #[test]
    fn bit_bias_discards_mismatch() {
        let s = MinerStrategy::BitBias {
            bit_index: 3,
            desired_value: true,
        };
        let k = MinerKnowledge::default();
        for i in 0..64u8 {
            let h = hash(&[i]);
            let expected = if h.bit(3) {
                MinerDecision::Publish
            } else {
                MinerDecision::Discard
            };
            assert_eq!(miner_decide(&s, 5, &h, &k), expected);
        }
    }

    #[test]
    fn colluder_only_judges_target_block() {
        let v = hash(b"next");
        let s = MinerStrategy::ProducerColluder {
            producers: vec!["p".into()],
            predicate: DigestPredicate {
                bit: 0,
                value: true,
            },
        };
        let k = MinerKnowledge {
            hash_fn: HashFn::Sha3_256,
            target_block: Some(7),
            next_values: vec![v],
        };
        let mut seen_discard = false;
        for i in 0..64u8 {
            let h = hash(&[i]);
            assert_eq!(miner_decide(&s, 6, &h, &k), MinerDecision::Publish);
            let r = HashFn::Sha3_256.combine(&v, &h);
            let d = miner_decide(&s, 7, &h, &k);
            assert_eq!(d == MinerDecision::Publish, r.bit(0));
            seen_discard |= d == MinerDecision::Discard;
        }
        assert!(seen_discard);
    }

    #[test]
    fn strategy_validation() {
        assert_eq!(
            MinerStrategy::BitBias {
                bit_index: 256,
                desired_value: true
            }
            .validate(),
            Err(StrategyError::BitIndex(256))
        );
        assert_eq!(
            MinerStrategy::ProducerColluder {
                producers: vec![],
                predicate: DigestPredicate {
                    bit: 0,
                    value: true
                }
            }
            .validate(),
            Err(StrategyError::ColluderWithoutKnowledge)
        );
        assert_eq!(
            ProducerStrategy::CloneCoalition {
                shared_seed: 1,
                member_count: 1
            }
            .validate(),
            Err(StrategyError::CoalitionTooSmall(1))
        );
        assert_eq!(
            ProducerStrategy::Honest { interval_blocks: 0 }.validate(),
            Err(StrategyError::ZeroInterval)
        );
    }

    #[test]
    fn honest_respects_interval_and_round() {
        let mut chain = MerlinChain::build(hash(b"s"), 10).unwrap();
        chain.next().unwrap();
        let s = ProducerStrategy::Honest { interval_blocks: 4 };
        // landing 11, last send 8: gap 3
        assert_eq!(producer_act(&s, &view(), &mut chain), None);
        let v = ProducerView {
            last_send_block: 7,
            ..view()
        };
        let (value, u) = producer_act(&s, &v, &mut chain).unwrap();
        assert_eq!(value, chain.value(2).unwrap());
        assert_eq!(u, 1000);
        let pulsed = ProducerView {
            pulsed_this_round: true,
            last_send_block: 0,
            ..view()
        };
        assert_eq!(producer_act(&s, &pulsed, &mut chain), None);
        let early = ProducerView {
            target_block: 11,
            last_send_block: 0,
            ..view()
        };
        assert_eq!(producer_act(&s, &early, &mut chain), None);
    }

    #[test]
    fn delayer_waits_after_last_pulse() {
        let mut chain = MerlinChain::build(hash(b"d"), 10).unwrap();
        let s = ProducerStrategy::Delayer { delay_blocks: 300 };
        let v = ProducerView {
            tip_number: 298,
            target_block: 1,
            target_hash: None,
            last_pulse_block: 0,
            ..view()
        };
        assert_eq!(producer_act(&s, &v, &mut chain), None);
        let v = ProducerView {
            tip_number: 299,
            ..v
        };
        assert!(producer_act(&s, &v, &mut chain).is_some());
    }

    #[test]
    fn withholder_stalls_about_half_the_rounds() {
        // Monte Carlo over independent target hashes.
        let s = ProducerStrategy::Withholder {
            predicate: DigestPredicate {
                bit: 0,
                value: true,
            },
            interval_blocks: 1,
        };
        let mut r = rng(11);
        let rounds = 10_000;
        let mut stalls = 0;
        for _ in 0..rounds {
            let mut chain = MerlinChain::build(random_digest(&mut r), 2).unwrap();
            chain.next().unwrap();
            let target = random_digest(&mut r);
            let v = ProducerView {
                target_hash: Some(target),
                ..view()
            };
            let next = chain.peek().unwrap().1;
            match producer_act(&s, &v, &mut chain) {
                None => {
                    stalls += 1;
                    assert!(!predict_output(HashFn::Sha3_256, &next, &target).bit(0));
                }
                Some((sent, _)) => {
                    assert!(predict_output(HashFn::Sha3_256, &sent, &target).bit(0));
                }
            }
        }
        let freq = stalls as f64 / rounds as f64;
        // 3 sigma of a fair coin at n = 10^4 is 0.015
        assert!((freq - 0.5).abs() < 0.015, "stall frequency {freq}");
    }

    #[test]
    fn strategies_parse_from_json() {
        let s: ProducerStrategy =
            serde_json::from_str(r#"{"kind":"withholder","predicate":{"bit":0,"value":true}}"#)
                .unwrap();
        assert_eq!(s.min_gap(), 1);
        assert!(serde_json::from_str::<ProducerStrategy>(
            r#"{"kind":"honest","interval_blocks":2,"typo":1}"#
        )
        .is_err());
        let m: MinerStrategy =
            serde_json::from_str(r#"{"kind":"bit_bias","bit_index":0,"desired_value":true}"#)
                .unwrap();
        assert!(m.validate().is_ok());
    }
}
