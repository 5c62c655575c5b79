//! How far a mining coalition can push one output bit.
//!
//! Trials are split into fixed-size batches; batch `j` at fraction `F` draws
//! from `derive_seed(seed, "bias/<mode>", [F.to_bits(), j])`, so results do
//! not depend on thread count or on the order fractions are listed in.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    ContractSection, CustomerConfig, MinerConfig, OutputPaths, OwnerConfig, ProducerConfig,
    ScenarioConfig,
};
use super::error::ExperimentError;
use super::scenario::Simulation;
use crate::adversary::{DigestPredicate, MinerKnowledge, MinerStrategy, ProducerStrategy};
use crate::hashcore::HashFn;
use crate::ledger::{
    Ledger, MinerPool, DEFAULT_BLOCK_INTERVAL_SECS, DEFAULT_DISCARD_CAP, DEFAULT_GENESIS_TIME,
};
use crate::seeds::derive_seed;

pub const MIN_BIAS_TRIALS: u64 = 10_000;
/// The coalition wants this bit to be 1.
pub const TARGET_BIT: u16 = 0;
const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    /// The target bit of each published block hash.
    RawBlockhash,
    /// The target bit of the combined output; miners bias block hashes
    /// without knowing the producer's next value.
    LighthouseNoCollusion,
    /// The target bit of the combined output; the producer leaks its next
    /// value and miners discard target blocks that yield the wrong bit.
    LighthouseFullCollusion,
}

impl BiasMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasMode::RawBlockhash => "raw-blockhash",
            BiasMode::LighthouseNoCollusion => "lighthouse-no-collusion",
            BiasMode::LighthouseFullCollusion => "lighthouse-full-collusion",
        }
    }
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw-blockhash" => Ok(BiasMode::RawBlockhash),
            "lighthouse-no-collusion" => Ok(BiasMode::LighthouseNoCollusion),
            "lighthouse-full-collusion" => Ok(BiasMode::LighthouseFullCollusion),
            other => Err(format!(
                "unknown mode {other:?} (expected raw-blockhash, lighthouse-no-collusion or lighthouse-full-collusion)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub fraction: f64,
    pub trials: u64,
    /// Trials whose target bit came out as desired.
    pub hits: u64,
    pub empirical_bias: f64,
    pub closed_form_bias: f64,
    pub std_error: f64,
    pub discarded_blocks: u64,
}

impl BiasRow {
    /// |empirical − closed form| in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            return if self.empirical_bias == self.closed_form_bias {
                0.0
            } else {
                f64::INFINITY
            };
        }
        (self.empirical_bias - self.closed_form_bias).abs() / self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub mode: BiasMode,
    pub seed: u64,
    pub target_bit: u16,
    pub rows: Vec<BiasRow>,
}

impl BiasReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "mode: {}  seed: {}  target bit: {}\n{:>8}  {:>9}  {:>9}  {:>11}  {:>9}  {:>9}\n",
            self.mode,
            self.seed,
            self.target_bit,
            "fraction",
            "trials",
            "empirical",
            "closed_form",
            "std_error",
            "discards"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>8.2}  {:>9}  {:>9.4}  {:>11.4}  {:>9.4}  {:>9}",
                r.fraction,
                r.trials,
                r.empirical_bias,
                r.closed_form_bias,
                r.std_error,
                r.discarded_blocks
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "fraction,trials,empirical_bias,closed_form_bias,std_error,discarded_blocks\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{}",
                r.fraction,
                r.trials,
                r.empirical_bias,
                r.closed_form_bias,
                r.std_error,
                r.discarded_blocks
            );
        }
        out
    }
}

/// `F / (2(2 − F))`: each sub-round ends with the desired bit with
/// probability `(1 − F)/2 + F/2` and restarts with probability `F/2`, so the
/// desired bit appears with probability `1/(2 − F)`.
pub fn closed_form_bias(fraction: f64) -> Result<f64, ExperimentError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ExperimentError::InvalidFraction(fraction));
    }
    Ok(fraction / (2.0 * (2.0 - fraction)))
}

pub fn bias_experiment(
    fractions: &[f64],
    trials: u64,
    seed: u64,
    mode: BiasMode,
) -> Result<BiasReport, ExperimentError> {
    if fractions.is_empty() {
        return Err(ExperimentError::EmptyFractions);
    }
    if trials < MIN_BIAS_TRIALS {
        return Err(ExperimentError::TooFewTrials {
            min: MIN_BIAS_TRIALS,
            got: trials,
        });
    }
    for &f in fractions {
        closed_form_bias(f)?;
    }
    let rows = fractions
        .iter()
        .map(|&f| bias_row(f, trials, seed, mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BiasReport {
        mode,
        seed,
        target_bit: TARGET_BIT,
        rows,
    })
}

fn bias_row(
    fraction: f64,
    trials: u64,
    seed: u64,
    mode: BiasMode,
) -> Result<BiasRow, ExperimentError> {
    let stream = format!("bias/{mode}");
    let batches = trials.div_ceil(BATCH);
    let results = (0..batches)
        .into_par_iter()
        .map(|j| {
            let n = BATCH.min(trials - j * BATCH);
            let batch_seed = derive_seed(seed, &stream, &[fraction.to_bits(), j]);
            match mode {
                BiasMode::RawBlockhash => raw_batch(fraction, n, batch_seed),
                _ => lighthouse_batch(fraction, n, batch_seed, mode),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hits: u64 = results.iter().map(|r| r.0).sum();
    let discarded_blocks: u64 = results.iter().map(|r| r.1).sum();
    let p = hits as f64 / trials as f64;
    let closed_form_bias = match mode {
        BiasMode::LighthouseNoCollusion => 0.0,
        _ => closed_form_bias(fraction)?,
    };
    Ok(BiasRow {
        fraction,
        trials,
        hits,
        empirical_bias: p - 0.5,
        closed_form_bias,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        discarded_blocks,
    })
}

fn bit_bias() -> MinerStrategy {
    MinerStrategy::BitBias {
        bit_index: TARGET_BIT,
        desired_value: true,
    }
}

/// Returns (hits, discards).
fn raw_batch(fraction: f64, n: u64, seed: u64) -> Result<(u64, u64), ExperimentError> {
    let pool = MinerPool::honest(seed).with_coalition(fraction, bit_bias());
    let mut ledger = Ledger::new(HashFn::Sha3_256, pool, DEFAULT_GENESIS_TIME)?;
    let knowledge = MinerKnowledge::default();
    let mut hits = 0;
    for _ in 0..n {
        let c = ledger.advance(Vec::new(), &knowledge)?;
        hits += u64::from(c.block.hash.bit(TARGET_BIT));
    }
    Ok((hits, ledger.total_discards()))
}

fn lighthouse_batch(
    fraction: f64,
    n: u64,
    seed: u64,
    mode: BiasMode,
) -> Result<(u64, u64), ExperimentError> {
    let strategy = match mode {
        BiasMode::LighthouseFullCollusion => MinerStrategy::ProducerColluder {
            producers: vec!["producer".to_string()],
            predicate: DigestPredicate {
                bit: TARGET_BIT,
                value: true,
            },
        },
        _ => bit_bias(),
    };
    let config = ScenarioConfig {
        master_seed: seed,
        // one round takes two blocks; leave slack
        blocks: 3 * n + 64,
        genesis_time: DEFAULT_GENESIS_TIME,
        block_interval_secs: DEFAULT_BLOCK_INTERVAL_SECS,
        miner: MinerConfig {
            fraction,
            strategy,
            discard_cap: DEFAULT_DISCARD_CAP,
        },
        producers: vec![ProducerConfig {
            name: "producer".to_string(),
            strategy: ProducerStrategy::Honest { interval_blocks: 1 },
            chain_length: None,
        }],
        contract: ContractSection::default(),
        customers: CustomerConfig::default(),
        owner: OwnerConfig::default(),
        stop_after_pulses: Some(n),
        outputs: OutputPaths::default(),
    };
    let mut sim = Simulation::new(config)?;
    sim.run()?;
    let history = sim.contract().history();
    debug_assert_eq!(history.len() as u64, n);
    let hits = history
        .iter()
        .take(n as usize)
        .filter(|p| p.r_l.bit(TARGET_BIT))
        .count() as u64;
    Ok((hits, sim.ledger().total_discards()))
}
