//! Combining a block hash with a value chosen after the hash is known.
//!
//! The producer sees `H`, then tries up to `k` fresh candidate values `V`
//! until `R = hash(H ∥ V)` has the target bit set. Without a prior
//! commitment nothing stops this.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::error::ExperimentError;
use crate::hashcore::HashFn;
use crate::seeds::{derive_seed, random_digest, rng};

const BATCH: u64 = 4096;
const TARGET_BIT: u16 = 0;
/// Above this the success probability is 1 to within f64 precision.
pub const MAX_ATTEMPTS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveReport {
    pub k_attempts: u32,
    pub trials: u64,
    pub hits: u64,
    pub empirical_bias: f64,
    pub expected_bias: f64,
    pub std_error: f64,
}

impl NaiveReport {
    pub fn to_table(&self) -> String {
        format!(
            "k_attempts: {}  trials: {}\nempirical bias: {:.4}\nexpected bias:  {:.4}\nstd error:      {:.4}\n",
            self.k_attempts, self.trials, self.empirical_bias, self.expected_bias, self.std_error
        )
    }
}

/// Success needs one of `k` fair bits to be 1, so the bit is 1 with
/// probability `1 − 2^−k` and the bias is `1/2 − 2^−k`.
pub fn naive_expected_bias(k_attempts: u32) -> f64 {
    0.5 - 0.5f64.powi(k_attempts as i32)
}

pub fn naive_combine_demo(
    k_attempts: u32,
    trials: u64,
    seed: u64,
) -> Result<NaiveReport, ExperimentError> {
    if k_attempts == 0 || k_attempts > MAX_ATTEMPTS {
        return Err(ExperimentError::InvalidAttempts);
    }
    if trials == 0 {
        return Err(ExperimentError::TooFewTrials { min: 1, got: 0 });
    }
    let hash_fn = HashFn::Sha3_256;
    let hits: u64 = (0..trials.div_ceil(BATCH))
        .into_par_iter()
        .map(|j| {
            let n = BATCH.min(trials - j * BATCH);
            let mut r = rng(derive_seed(
                seed,
                "naive-combine",
                &[u64::from(k_attempts), j],
            ));
            let mut hits = 0u64;
            for _ in 0..n {
                let h = random_digest(&mut r);
                let success = (0..k_attempts).any(|_| {
                    let v = random_digest(&mut r);
                    hash_fn.combine(&h, &v).bit(TARGET_BIT)
                });
                hits += u64::from(success);
            }
            hits
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(NaiveReport {
        k_attempts,
        trials,
        hits,
        empirical_bias: p - 0.5,
        expected_bias: naive_expected_bias(k_attempts),
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_values() {
        assert_eq!(naive_expected_bias(1), 0.0);
        assert_eq!(naive_expected_bias(2), 0.25);
        assert!((naive_expected_bias(20) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn one_attempt_is_fair() {
        let r = naive_combine_demo(1, 100_000, 11).unwrap();
        assert!(r.empirical_bias.abs() < 4.0 * r.std_error + 1e-9, "{r:?}");
    }

    #[test]
    fn two_attempts_hit_three_quarters() {
        let r = naive_combine_demo(2, 100_000, 12).unwrap();
        assert!((r.empirical_bias - 0.25).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn many_attempts_saturate() {
        let r = naive_combine_demo(20, 100_000, 13).unwrap();
        assert!(r.empirical_bias > 0.499, "{r:?}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(naive_combine_demo(0, 10, 1).is_err());
        assert!(naive_combine_demo(65, 10, 1).is_err());
        assert!(naive_combine_demo(1, 0, 1).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            naive_combine_demo(3, 10_000, 9).unwrap(),
            naive_combine_demo(3, 10_000, 9).unwrap()
        );
    }
}
