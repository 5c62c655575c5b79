//! Merlin chains: reverse hash chains released in index order.
//!
//! A chain of length `n` is built from a random seed `V_n` by repeated hashing,
//! `V_{x-1} = H(V_x)`, and then released starting with `V_1`. Every released
//! value is a commitment to the next one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::digest::{Digest, HashFn};

#[derive(Debug, thiserror::Error)]
pub enum MerlinError {
    #[error("chain length must be at least 1")]
    InvalidLength,
    #[error("merlin chain of length {length} is exhausted")]
    Exhausted { length: u64 },
    #[error("checkpoint released_up_to {released_up_to} exceeds chain length {length}")]
    CheckpointOutOfRange { released_up_to: u64, length: u64 },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerlinChain {
    hash_fn: HashFn,
    seed: Digest,
    // values[i] holds V_{i+1}
    values: Vec<Digest>,
    cursor: u64,
}

impl MerlinChain {
    pub fn build(seed: Digest, length: u64) -> Result<Self, MerlinError> {
        Self::build_with(HashFn::default(), seed, length)
    }

    pub fn build_with(hash_fn: HashFn, seed: Digest, length: u64) -> Result<Self, MerlinError> {
        if length == 0 {
            return Err(MerlinError::InvalidLength);
        }
        let n = usize::try_from(length).map_err(|_| MerlinError::InvalidLength)?;
        let mut values = vec![Digest::ZERO; n];
        values[n - 1] = seed;
        for i in (0..n - 1).rev() {
            values[i] = hash_fn.digest(values[i + 1].as_bytes());
        }
        Ok(MerlinChain {
            hash_fn,
            seed,
            values,
            cursor: 1,
        })
    }

    pub fn hash_fn(&self) -> HashFn {
        self.hash_fn
    }

    pub fn seed(&self) -> Digest {
        self.seed
    }

    pub fn len(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the next value to release; `len() + 1` once exhausted.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor > self.len()
    }

    pub fn released(&self) -> u64 {
        self.cursor - 1
    }

    /// `V_index` for `1 <= index <= len()`.
    pub fn value(&self, index: u64) -> Option<Digest> {
        if index == 0 {
            return None;
        }
        self.values.get((index - 1) as usize).copied()
    }

    /// The value `next()` would return, without releasing it.
    pub fn peek(&self) -> Option<(u64, Digest)> {
        self.value(self.cursor).map(|v| (self.cursor, v))
    }

    pub fn values(&self) -> &[Digest] {
        &self.values
    }

    /// Release the value under the cursor and advance.
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Result<(u64, Digest), MerlinError> {
        let out = self
            .peek()
            .ok_or(MerlinError::Exhausted { length: self.len() })?;
        self.cursor += 1;
        Ok(out)
    }

    pub fn checkpoint(&self) -> ChainCheckpoint {
        ChainCheckpoint {
            seed: self.seed,
            length: self.len(),
            released_up_to: self.released(),
        }
    }

    /// Rebuild a chain from its checkpoint with the cursor restored.
    pub fn recover(checkpoint: &ChainCheckpoint) -> Result<Self, MerlinError> {
        Self::recover_with(HashFn::default(), checkpoint)
    }

    pub fn recover_with(
        hash_fn: HashFn,
        checkpoint: &ChainCheckpoint,
    ) -> Result<Self, MerlinError> {
        if checkpoint.released_up_to > checkpoint.length {
            return Err(MerlinError::CheckpointOutOfRange {
                released_up_to: checkpoint.released_up_to,
                length: checkpoint.length,
            });
        }
        let mut chain = Self::build_with(hash_fn, checkpoint.seed, checkpoint.length)?;
        chain.cursor = checkpoint.released_up_to + 1;
        Ok(chain)
    }
}

/// True iff `prev == H(next)`, i.e. `next` is the value committed to by `prev`.
pub fn link_ok(hash_fn: HashFn, prev: &Digest, next: &Digest) -> bool {
    hash_fn.digest(next.as_bytes()) == *prev
}

/// Offsite backup of a chain: enough to rebuild every value and the cursor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainCheckpoint {
    #[serde(rename = "seed_hex")]
    pub seed: Digest,
    pub length: u64,
    pub released_up_to: u64,
}

impl ChainCheckpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MerlinError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MerlinError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MerlinError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashcore::hash;

    fn seed() -> Digest {
        let mut b = [0u8; 32];
        for (i, x) in b.iter_mut().enumerate() {
            *x = i as u8;
        }
        Digest::from_bytes(b)
    }

    #[test]
    fn single_link_chain() {
        let c = MerlinChain::build(seed(), 1).unwrap();
        assert_eq!(c.value(1), Some(seed()));
        assert_eq!(c.value(2), None);
        assert_eq!(c.value(0), None);
    }

    #[test]
    fn three_link_chain_matches_reference_sha3() {
        // Frozen from Python hashlib.sha3_256 over seed = bytes(range(32)).
        let c = MerlinChain::build(seed(), 3).unwrap();
        assert_eq!(c.value(3), Some(seed()));
        assert_eq!(
            c.value(2).unwrap().to_hex(),
            "050a48733bd5c2756ba95c5828cc83ee16fabcd3c086885b7744f84a0f9e0d94"
        );
        assert_eq!(
            c.value(1).unwrap().to_hex(),
            "215ebceb4bd92c00ad82cbf096ebc0656c18dde072d961510b9ec534463a3f0c"
        );
    }

    #[test]
    fn different_lengths_differ_at_index_one() {
        let a = MerlinChain::build(seed(), 4).unwrap();
        let b = MerlinChain::build(seed(), 5).unwrap();
        assert_ne!(a.value(1), b.value(1));
        assert_eq!(a.value(1), b.value(2));
    }

    #[test]
    fn zero_length_rejected() {
        assert!(matches!(
            MerlinChain::build(seed(), 0),
            Err(MerlinError::InvalidLength)
        ));
    }

    #[test]
    fn release_order_and_exhaustion() {
        let mut c = MerlinChain::build(seed(), 3).unwrap();
        let (i1, v1) = c.next().unwrap();
        assert_eq!(i1, 1);
        let (i2, v2) = c.next().unwrap();
        assert_eq!(i2, 2);
        assert_eq!(hash(v2.as_bytes()), v1);
        c.next().unwrap();
        assert!(c.is_exhausted());
        assert!(matches!(
            c.next(),
            Err(MerlinError::Exhausted { length: 3 })
        ));
    }

    #[test]
    fn link_checks() {
        let v = hash(b"link");
        assert!(link_ok(HashFn::Sha3_256, &hash(v.as_bytes()), &v));
        assert_ne!(hash(v.as_bytes()), v);
        assert!(!link_ok(HashFn::Sha3_256, &v, &v));
        let c = MerlinChain::build(seed(), 50).unwrap();
        for w in c.values().windows(2) {
            assert!(link_ok(HashFn::Sha3_256, &w[0], &w[1]));
        }
    }

    #[test]
    fn recover_restores_cursor() {
        let mut c = MerlinChain::build(seed(), 5).unwrap();
        c.next().unwrap();
        c.next().unwrap();
        let cp = c.checkpoint();
        assert_eq!(cp.released_up_to, 2);
        let mut r = MerlinChain::recover(&cp).unwrap();
        assert_eq!(r, c);
        assert_eq!(r.next().unwrap(), (3, c.value(3).unwrap()));
    }

    #[test]
    fn recover_fully_released_is_exhausted() {
        let cp = ChainCheckpoint {
            seed: seed(),
            length: 4,
            released_up_to: 4,
        };
        let r = MerlinChain::recover(&cp).unwrap();
        assert!(r.is_exhausted());
        let bad = ChainCheckpoint {
            released_up_to: 5,
            ..cp
        };
        assert!(matches!(
            MerlinChain::recover(&bad),
            Err(MerlinError::CheckpointOutOfRange { .. })
        ));
    }

    #[test]
    fn checkpoint_json_schema() {
        let cp = ChainCheckpoint {
            seed: seed(),
            length: 7,
            released_up_to: 3,
        };
        let json = cp.to_json();
        assert_eq!(
            json,
            format!(
                "{{\"seed_hex\":\"{}\",\"length\":7,\"released_up_to\":3}}",
                seed().to_hex()
            )
        );
        assert_eq!(ChainCheckpoint::from_json(&json).unwrap(), cp);
        assert!(ChainCheckpoint::from_json(&json.replace("length", "len")).is_err());
    }

    #[test]
    fn checkpoint_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        let mut c = MerlinChain::build(seed(), 9).unwrap();
        c.next().unwrap();
        c.checkpoint().save(&path).unwrap();
        let r = MerlinChain::recover(&ChainCheckpoint::load(&path).unwrap()).unwrap();
        assert_eq!(r, c);
    }
}
