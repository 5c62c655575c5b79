use std::collections::HashSet;

use lighthouse_core::hashcore::{link_ok, ChainCheckpoint};
use lighthouse_core::seeds::{random_digest, rng};
use lighthouse_core::{hash, Digest, HashFn, MerlinChain};
use proptest::prelude::*;

fn digest_strategy() -> impl Strategy<Value = Digest> {
    any::<[u8; 32]>().prop_map(Digest::from_bytes)
}

proptest! {
    #[test]
    fn released_values_link_back(seed in digest_strategy(), len in 1u64..200) {
        let mut chain = MerlinChain::build(seed, len).unwrap();
        let (_, mut prev) = chain.next().unwrap();
        while let Ok((_, v)) = chain.next() {
            prop_assert!(link_ok(HashFn::Sha3_256, &prev, &v));
            prev = v;
        }
        prop_assert_eq!(prev, seed);
    }

    #[test]
    fn any_bit_flip_breaks_the_link(seed in digest_strategy(), bit in 0u16..256) {
        let mut chain = MerlinChain::build(seed, 8).unwrap();
        let (_, v1) = chain.next().unwrap();
        let (_, v2) = chain.next().unwrap();
        prop_assert!(!link_ok(HashFn::Sha3_256, &v1, &v2.with_bit_flipped(bit)));
    }

    #[test]
    fn checkpoint_recovery_is_exact(seed in digest_strategy(), len in 1u64..100, take in 0u64..100) {
        let mut chain = MerlinChain::build(seed, len).unwrap();
        for _ in 0..take.min(len) {
            chain.next().unwrap();
        }
        let text = chain.checkpoint().to_json();
        let recovered = MerlinChain::recover(&ChainCheckpoint::from_json(&text).unwrap()).unwrap();
        prop_assert_eq!(recovered.values(), chain.values());
        prop_assert_eq!(recovered.cursor(), chain.cursor());
        prop_assert_eq!(recovered.peek(), chain.peek());
    }

    #[test]
    fn hex_round_trip(d in digest_strategy()) {
        prop_assert_eq!(d.to_hex().parse::<Digest>().unwrap(), d);
    }
}

#[test]
fn successive_values_look_independent() {
    // Pairs (V_{x+1}, V_x): each bit of the earlier value should agree with
    // the same bit of the later one about half the time.
    let mut r = rng(77);
    let chains = 10_000;
    let mut agree = [0u32; 256];
    for _ in 0..chains {
        let mut chain = MerlinChain::build(random_digest(&mut r), 2).unwrap();
        let (_, a) = chain.next().unwrap();
        let (_, b) = chain.next().unwrap();
        for (bit, slot) in agree.iter_mut().enumerate() {
            *slot += u32::from(a.bit(bit as u16) == b.bit(bit as u16));
        }
    }
    for (bit, n) in agree.iter().enumerate() {
        let p = f64::from(*n) / chains as f64;
        assert!((p - 0.5).abs() < 0.02, "bit {bit}: {p}");
    }
}

#[test]
fn no_collisions_among_ten_thousand_chain_values() {
    let chain = MerlinChain::build(hash(b"scan"), 10_000).unwrap();
    let distinct: HashSet<_> = chain.values().iter().map(|d| d.to_hex()).collect();
    assert_eq!(distinct.len(), 10_000);
}
