use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Keccak256, Sha3_256};

/// Length in bytes of every value the protocol hashes or emits.
pub const DIGEST_LEN: usize = 32;

/// A 32-byte hash value. Rendered as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest([u8; DIGEST_LEN]);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DigestParseError {
    #[error("expected 64 hex characters, got {0}")]
    Length(usize),
    #[error("digest must be lowercase hex")]
    NotLowercase,
    #[error("invalid hex: {0}")]
    Hex(#[from] hex::FromHexError),
}

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub const fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; DIGEST_LEN]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, DigestParseError> {
        if s.len() != 2 * DIGEST_LEN {
            return Err(DigestParseError::Length(s.len()));
        }
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(DigestParseError::NotLowercase);
        }
        let mut out = [0u8; DIGEST_LEN];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }

    /// Bit `index` counted from the most significant bit of byte 0.
    ///
    /// Panics if `index >= 256`.
    pub fn bit(&self, index: u16) -> bool {
        assert!(index < 256, "bit index {index} out of range");
        let byte = self.0[(index / 8) as usize];
        (byte >> (7 - (index % 8))) & 1 == 1
    }

    pub fn with_bit_flipped(mut self, index: u16) -> Self {
        assert!(index < 256, "bit index {index} out of range");
        self.0[(index / 8) as usize] ^= 1 << (7 - (index % 8));
        self
    }
}

impl BitXor for Digest {
    type Output = Digest;

    fn bitxor(mut self, rhs: Digest) -> Digest {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a ^= b;
        }
        self
    }
}

impl From<[u8; DIGEST_LEN]> for Digest {
    fn from(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl FromStr for Digest {
    type Err = DigestParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Digest::from_hex(s)
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Hash function behind every commitment, beacon output and block hash.
///
/// `Sha3_256` is FIPS 202 SHA3-256. `Keccak256` is the pre-standard padding
/// variant used by Ethereum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashFn {
    #[default]
    Sha3_256,
    Keccak256,
}

impl HashFn {
    pub fn digest(self, input: &[u8]) -> Digest {
        self.digest_parts(&[input])
    }

    /// Hash of the concatenation of `parts`.
    pub fn digest_parts(self, parts: &[&[u8]]) -> Digest {
        match self {
            HashFn::Sha3_256 => finish::<Sha3_256>(parts),
            HashFn::Keccak256 => finish::<Keccak256>(parts),
        }
    }

    /// `hash(left ∥ right)` over two digests.
    pub fn combine(self, left: &Digest, right: &Digest) -> Digest {
        self.digest_parts(&[left.as_bytes(), right.as_bytes()])
    }
}

fn finish<H: sha3::Digest>(parts: &[&[u8]]) -> Digest {
    let mut hasher = H::new();
    for part in parts {
        hasher.update(part);
    }
    let out = hasher.finalize();
    let mut bytes = [0u8; DIGEST_LEN];
    bytes.copy_from_slice(&out);
    Digest(bytes)
}

/// SHA3-256 of `input`.
pub fn hash(input: &[u8]) -> Digest {
    HashFn::Sha3_256.digest(input)
}
