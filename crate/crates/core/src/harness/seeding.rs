//! Per-replica random streams derived from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator each replica runs on.
pub type ReplicaRng = Xoshiro256PlusPlus;

/// Stream `replica` of `master`: a ChaCha8 keyed by the master seed, on its
/// own stream, seeds a fast xoshiro generator. Independent of scheduling.
pub fn replica_rng(master: u64, replica: u64) -> ReplicaRng {
    let mut key = ChaCha8Rng::seed_from_u64(master);
    key.set_stream(replica);
    ReplicaRng::from_rng(&mut key)
}

/// A master seed for a named sub-task, so independent estimates inside one
/// report do not share streams.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed with the master seed by splitmix64
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
