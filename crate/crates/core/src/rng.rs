//! Counter-based random streams.
//!
//! Every stochastic step draws from a stream keyed by `(seed, purpose tag,
//! indices...)`. Streams never depend on the order in which work is
//! scheduled, so serial and parallel runs produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Derives a 64-bit key from a seed, a purpose tag and a list of indices.
pub fn derive_key(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(tag_hash(tag)));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x51_7cc1_b727_220a)));
    }
    h
}

/// Independent ChaCha8 stream for `(seed, tag, indices)`.
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    let key = derive_key(seed, tag, indices);
    let mut bytes = [0u8; 32];
    let mut h = key;
    for chunk in bytes.chunks_exact_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Uniform value in `[-1, 1)` drawn directly from a hashed key.
pub fn signed_unit(seed: u64, tag: &str, indices: &[u64]) -> f64 {
    let bits = derive_key(seed, tag, indices) >> 11;
    (bits as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}
