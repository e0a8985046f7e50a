//! Deterministic randomness: seed derivation, stateless PRF draws, and
//! seeded ChaCha streams.
//!
//! Everything a protocol randomizes is derived from a single 64-bit session
//! seed plus fixed labels, so a run is reproducible byte-for-byte.

use rand_chacha::ChaCha20Rng;
use rand_core::{Rng, SeedableRng};

/// One step of the splitmix64 sequence.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a label into a new 64-bit seed.
pub fn mix(seed: u64, label: u64) -> u64 {
    let mut s = seed ^ label.rotate_left(17) ^ 0xA076_1D64_78BD_642F;
    let a = splitmix64(&mut s);
    let b = splitmix64(&mut s);
    a ^ b.rotate_left(32)
}

/// Expands a 64-bit seed to ChaCha key material.
pub fn expand_seed(seed: u64) -> [u8; 32] {
    let mut s = seed;
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    out
}

/// Seeded ChaCha20 stream for a (seed, label) pair.
pub fn chacha(seed: u64, label: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(expand_seed(mix(seed, label)))
}

/// Stateless PRF draw indexed by two keys.
pub fn prf_u64(seed: u64, a: u64, b: u64) -> u64 {
    let mut s = mix(seed, a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let x = splitmix64(&mut s);
    let y = splitmix64(&mut s);
    x ^ y.rotate_left(23)
}

/// Uniform in [0, 1) from 53 random bits.
pub fn u64_to_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in (0, 1], never zero; safe as a log argument.
pub fn u64_to_f64_open(x: u64) -> f64 {
    (((x >> 11) | 1) as f64) * (1.0 / (1u64 << 53) as f64)
}

/// Stateless uniform draw in [0, 1).
pub fn prf_f64(seed: u64, a: u64, b: u64) -> f64 {
    u64_to_f64(prf_u64(seed, a, b))
}

/// Next uniform f64 in [0, 1) from a stream.
pub fn next_f64(rng: &mut ChaCha20Rng) -> f64 {
    u64_to_f64(rng.next_u64())
}

/// Bernoulli draw from a stream.
pub fn next_bool(rng: &mut ChaCha20Rng, p: f64) -> bool {
    next_f64(rng) < p
}

/// Uniform index in [0, n).
pub fn next_index(rng: &mut ChaCha20Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    // Rejection sampling over a power-of-two envelope keeps the draw unbiased.
    let width = (n as u64).next_power_of_two();
    loop {
        let x = rng.next_u64() & (width - 1);
        if (x as usize) < n {
            return x as usize;
        }
    }
}

/// Samples an index proportional to the given nonnegative weights.
/// Returns `None` when every weight is zero.
pub fn next_weighted(rng: &mut ChaCha20Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut target = next_f64(rng) * total;
    for (i, &w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}
