//! Hash primitive, digests and Merlin chains.

mod digest;
mod merlin;

pub use digest::{hash, Digest, DigestParseError, HashFn, DIGEST_LEN};
pub use merlin::{link_ok, ChainCheckpoint, MerlinChain, MerlinError};
