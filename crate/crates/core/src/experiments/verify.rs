//! Offline recomputation of a published pulse history.
//!
//! The event log drives the replay: it fixes the hash function and timestamp
//! rule, who was registered when, every accepted value that did not produce
//! a pulse, and every round reset. Each pulse-log line is then checked
//! against what the contract must have computed from public data alone.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::error::ExperimentError;
use super::logs::parse_jsonl;
use crate::hashcore::{Digest, HashFn};
use crate::ledger::{BlockSummary, BLOCKHASH_WINDOW};
use crate::lighthouse::{detail_list, EventRecord, LighthousePulse, TimestampRule};

/// Longest gap between two accepted values of one producer the verifier will
/// walk through.
const MAX_LINK_GAP: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub round: Option<u64>,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub rounds_checked: u64,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{}: {} rounds checked, {} violations\n",
            if self.ok { "PASS" } else { "FAIL" },
            self.rounds_checked,
            self.violations.len()
        );
        for v in &self.violations {
            match v.round {
                Some(r) => out.push_str(&format!("  round {r}: {}: {}\n", v.field, v.message)),
                None => out.push_str(&format!("  {}: {}\n", v.field, v.message)),
            }
        }
        out
    }
}

struct Known {
    v: Digest,
    index: u64,
    registered_block: u64,
}

struct Replay<'a> {
    blocks: BTreeMap<u64, &'a BlockSummary>,
    hash_fn: HashFn,
    rule: TimestampRule,
    target: u64,
    last_pulse_time: i64,
    producers: BTreeMap<String, Known>,
    violations: Vec<Violation>,
}

impl<'a> Replay<'a> {
    fn fail(&mut self, round: Option<u64>, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            round,
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn timestamp(&self, block: u64) -> Option<i64> {
        self.blocks.get(&block).map(|b| b.timestamp)
    }

    /// Accept `v` as value number `index` of `producer`'s chain.
    fn advance_link(
        &mut self,
        round: Option<u64>,
        field: &str,
        producer: &str,
        index: u64,
        v: Digest,
    ) -> bool {
        let hash_fn = self.hash_fn;
        let Some(known) = self.producers.get(producer) else {
            self.fail(round, field, format!("unknown producer {producer:?}"));
            return false;
        };
        let (last_v, last_index) = (known.v, known.index);
        if index <= last_index || index - last_index > MAX_LINK_GAP {
            self.fail(
                round,
                field,
                format!("{producer}: index {index} does not follow {last_index}"),
            );
            return false;
        }
        let mut x = v;
        for _ in 0..index - last_index {
            x = hash_fn.digest(x.as_bytes());
        }
        if x != last_v {
            self.fail(
                round,
                field,
                format!("{producer}: value {v} does not hash back to the committed {last_v}"),
            );
            return false;
        }
        let known = self.producers.get_mut(producer).expect("looked up above");
        known.v = v;
        known.index = index;
        true
    }

    fn event(
        &mut self,
        e: &EventRecord,
        pulses: &mut std::slice::Iter<'_, LighthousePulse>,
        checked: &mut u64,
    ) {
        let missing = |name: &str| format!("{} at block {} lacks {name}", e.event, e.block);
        match e.event.as_str() {
            "ContractDeployed" => {
                match e.field("hash").map(|h| serde_json::from_value(h.into())) {
                    Some(Ok(h)) => self.hash_fn = h,
                    _ => self.fail(None, "events.hash", missing("a known hash")),
                }
                match e.field("timestamp_rule") {
                    Some("printed") => self.rule = TimestampRule::Printed,
                    Some("prose") => self.rule = TimestampRule::Prose,
                    _ => self.fail(
                        None,
                        "events.timestamp_rule",
                        missing("a known timestamp_rule"),
                    ),
                }
                match e.field("target").and_then(|t| t.parse().ok()) {
                    Some(t) => self.target = t,
                    None => self.fail(None, "events.target", missing("target")),
                }
                match self.timestamp(e.block) {
                    Some(t) => self.last_pulse_time = t,
                    None => self.fail(
                        None,
                        "blocks",
                        format!("deployment block {} missing", e.block),
                    ),
                }
            }
            "ProducerRegistered" => {
                let producer = e.field("producer");
                let v = e.field("v").and_then(|v| v.parse::<Digest>().ok());
                match (producer, v) {
                    (Some(p), Some(v)) => {
                        let target = self.target;
                        if !self.producers.values().any(|k| k.registered_block < target) {
                            self.target = e.block + 1;
                        }
                        self.producers.insert(
                            p.to_string(),
                            Known {
                                v,
                                index: 1,
                                registered_block: e.block,
                            },
                        );
                    }
                    _ => self.fail(None, "events.detail", missing("producer and v")),
                }
            }
            "ProducerDeregistered" => {
                if let Some(p) = e.field("producer") {
                    self.producers.remove(p);
                }
            }
            "MessageInvalid" => {
                let producer = e.field("producer").unwrap_or_default().to_string();
                let index = e.field("index").and_then(|i| i.parse::<u64>().ok());
                let v = e.field("v").and_then(|v| v.parse::<Digest>().ok());
                match (index, v) {
                    (Some(i), Some(v)) => {
                        self.advance_link(None, "events.v", &producer, i, v);
                    }
                    _ => self.fail(None, "events.detail", missing("index and v")),
                }
            }
            "HashExpired" => {
                if e.field("target").and_then(|t| t.parse::<u64>().ok()) != Some(self.target) {
                    self.fail(
                        None,
                        "events.target",
                        format!("expired target disagrees with {}", self.target),
                    );
                }
                if self.target + BLOCKHASH_WINDOW > e.block {
                    self.fail(
                        None,
                        "events.block",
                        format!(
                            "hash of block {} was still resolvable at {}",
                            self.target, e.block
                        ),
                    );
                }
                self.target = e.block + 1;
            }
            "ZeroCombinedRefused" => {
                // Contributors' values were accepted; later indices close the gap.
                self.target = e.block + 1;
            }
            "PulseEmitted" => {
                let round = e.field("round").and_then(|r| r.parse::<u64>().ok());
                let Some(pulse) = pulses.next() else {
                    self.fail(
                        round,
                        "pulses",
                        "event announces a pulse missing from the pulse log",
                    );
                    return;
                };
                *checked += 1;
                if round != Some(pulse.round) {
                    self.fail(
                        Some(pulse.round),
                        "round",
                        "disagrees with PulseEmitted event",
                    );
                }
                if e.field("r_l").and_then(|r| r.parse::<Digest>().ok()) != Some(pulse.r_l) {
                    self.fail(
                        Some(pulse.round),
                        "R_L",
                        "disagrees with PulseEmitted event",
                    );
                }
                if pulse.block != e.block {
                    self.fail(
                        Some(pulse.round),
                        "block",
                        format!("event was logged at block {}", e.block),
                    );
                }
                self.pulse(pulse);
            }
            _ => {}
        }
    }

    fn pulse(&mut self, pulse: &LighthousePulse) {
        let round = Some(pulse.round);
        let target = self.target;
        if pulse.block < target + 1 {
            self.fail(
                round,
                "block",
                format!("published at {} before target {} + 1", pulse.block, target),
            );
        }
        let target_hash = self.blocks.get(&target).map(|b| b.hash);
        if target_hash.is_none() {
            self.fail(round, "blocks", format!("target block {target} missing"));
        }
        let block_time = self.timestamp(pulse.block);
        if block_time.is_none() {
            self.fail(
                round,
                "blocks",
                format!("pulse block {} missing", pulse.block),
            );
        }

        let expected: Vec<&str> = self
            .producers
            .iter()
            .filter(|(_, k)| k.registered_block < target)
            .map(|(n, _)| n.as_str())
            .collect();
        let got: Vec<&str> = pulse.beacons.iter().map(|b| b.producer.as_str()).collect();
        if expected != got {
            let message = format!("contributors {got:?}, expected {expected:?}");
            self.fail(round, "beacons.producer", message);
        }

        for b in &pulse.beacons {
            if b.block_used != target {
                self.fail(
                    round,
                    "beacons.block_used",
                    format!(
                        "{} used {}, round target is {target}",
                        b.producer, b.block_used
                    ),
                );
            }
            if !self.advance_link(round, "beacons.V", &b.producer, b.index, b.v) {
                continue;
            }
            if let Some(h) = target_hash {
                if self.hash_fn.combine(&b.v, &h) != b.r {
                    self.fail(
                        round,
                        "beacons.R",
                        format!("{}: R is not hash(V ∥ target hash)", b.producer),
                    );
                }
            }
            match self.rule {
                TimestampRule::Printed => {
                    let t = self.last_pulse_time.min(b.u);
                    if b.t != t {
                        self.fail(
                            round,
                            "beacons.T",
                            format!("{}: T={} expected {t}", b.producer, b.t),
                        );
                    }
                }
                TimestampRule::Prose => {}
            }
            if let Some(bt) = block_time {
                if b.t > bt {
                    self.fail(
                        round,
                        "beacons.T",
                        format!("{}: T is after its block", b.producer),
                    );
                }
            }
        }

        let r_l = pulse.beacons.iter().fold(Digest::ZERO, |acc, b| acc ^ b.r);
        if r_l != pulse.r_l {
            self.fail(round, "R_L", "is not the XOR of the beacon outputs");
        }
        if pulse.r_l.is_zero() {
            self.fail(round, "R_L", "zero output must be refused");
        }
        match pulse.beacons.iter().map(|b| b.t).max() {
            Some(t) if t == pulse.t_l => {}
            Some(t) => self.fail(round, "T_L", format!("{} expected {t}", pulse.t_l)),
            None => self.fail(round, "beacons", "pulse without beacons"),
        }

        self.target = pulse.block + 1;
        if let Some(t) = block_time {
            self.last_pulse_time = t;
        }
    }
}

pub fn verify_log(
    pulses: &[LighthousePulse],
    events: &[EventRecord],
    blocks: &[BlockSummary],
) -> Verdict {
    let mut replay = Replay {
        blocks: BTreeMap::new(),
        hash_fn: HashFn::default(),
        rule: TimestampRule::default(),
        target: 0,
        last_pulse_time: 0,
        producers: BTreeMap::new(),
        violations: Vec::new(),
    };

    let mut seen = HashMap::new();
    for (i, b) in blocks.iter().enumerate() {
        if seen.insert(b.number, i).is_some() {
            replay.fail(None, "blocks", format!("block {} listed twice", b.number));
        }
        replay.blocks.insert(b.number, b);
    }
    let mut prev: Option<&BlockSummary> = None;
    for b in replay.blocks.values() {
        if let Some(p) = prev {
            if b.number == p.number + 1 && b.timestamp < p.timestamp {
                let message = format!("block {} is older than its parent", b.number);
                replay.violations.push(Violation {
                    round: None,
                    field: "blocks".into(),
                    message,
                });
            }
        }
        prev = Some(b);
    }

    match events.first() {
        Some(e) if e.event == "ContractDeployed" => {}
        _ => replay.fail(None, "events", "log does not start with ContractDeployed"),
    }

    for (i, p) in pulses.iter().enumerate() {
        if p.round != i as u64 {
            replay.fail(
                Some(p.round),
                "round",
                format!("line {} carries round {}", i + 1, p.round),
            );
        }
    }

    let mut iter = pulses.iter();
    let mut checked = 0;
    for e in events {
        replay.event(e, &mut iter, &mut checked);
    }
    let extra = iter.len();
    if extra > 0 {
        replay.fail(
            None,
            "pulses",
            format!("{extra} pulses without a PulseEmitted event"),
        );
    }

    let ok = replay.violations.is_empty();
    Verdict {
        ok,
        rounds_checked: checked,
        violations: replay.violations,
    }
}

/// Parse the three JSON-lines logs and verify them.
pub fn verify_log_text(
    pulse_log: &str,
    event_log: &str,
    block_log: &str,
) -> Result<Verdict, ExperimentError> {
    let pulses: Vec<LighthousePulse> = parse_jsonl(pulse_log)?;
    let events: Vec<EventRecord> = parse_jsonl(event_log)?;
    let blocks: Vec<BlockSummary> = parse_jsonl(block_log)?;
    Ok(verify_log(&pulses, &events, &blocks))
}

/// Block and pending producers of every `RoundStalled` event.
pub fn stalled_producers(events: &[EventRecord]) -> Vec<(u64, Vec<String>)> {
    events
        .iter()
        .filter(|e| e.event == "RoundStalled")
        .map(|e| {
            let names = detail_list(e.field("pending").unwrap_or(""))
                .into_iter()
                .map(str::to_string)
                .collect();
            (e.block, names)
        })
        .collect()
}

/// Pulse-log fields a single mutation may touch. `U` is left out: changing
/// it alters the output only when it becomes the smaller timestamp, and that
/// case already shows up as a wrong `T`.
pub const MUTABLE_FIELDS: [&str; 10] = [
    "round",
    "R_L",
    "T_L",
    "block",
    "beacons.producer",
    "beacons.index",
    "beacons.V",
    "beacons.R",
    "beacons.T",
    "beacons.block_used",
];

/// Change exactly one field of one pulse, returning a description of the
/// change. Does nothing and returns `None` if `pulses` is empty.
pub fn mutate_pulse<R: rand::Rng>(pulses: &mut [LighthousePulse], rng: &mut R) -> Option<String> {
    if pulses.is_empty() {
        return None;
    }
    let i = rng.gen_range(0..pulses.len());
    let field = MUTABLE_FIELDS[rng.gen_range(0..MUTABLE_FIELDS.len())];
    let p = &mut pulses[i];
    let j = rng.gen_range(0..p.beacons.len().max(1));
    let delta: i64 = if rng.gen() { 1 } else { -1 };
    let bump = |x: u64| x.wrapping_add_signed(delta);
    let bit = rng.gen_range(0..256u16);
    match field {
        "round" => p.round = bump(p.round),
        "R_L" => p.r_l = p.r_l.with_bit_flipped(bit),
        "T_L" => p.t_l += delta,
        "block" => p.block = bump(p.block),
        _ if p.beacons.is_empty() => p.round = bump(p.round),
        "beacons.producer" => p.beacons[j].producer.push('x'),
        "beacons.index" => p.beacons[j].index = bump(p.beacons[j].index),
        "beacons.V" => p.beacons[j].v = p.beacons[j].v.with_bit_flipped(bit),
        "beacons.R" => p.beacons[j].r = p.beacons[j].r.with_bit_flipped(bit),
        "beacons.T" => p.beacons[j].t += delta,
        _ => p.beacons[j].block_used = bump(p.beacons[j].block_used),
    }
    Some(format!("pulse {i}: {field}"))
}
