//! Linear sketching primitives.
//!
//! All sketches here are linear maps of the input vector, so a sketch of a
//! linear combination equals the same combination of sketches. Protocols
//! exploit this to push sketches through the matrix product: sketching every
//! row of `B` lets the other party assemble the sketch of any row of `A*B`
//! by combining with its own coefficients.

mod blocked;
mod l0_sampler;
mod lp;

pub use blocked::{BlockedL2Sketch, BlockedL2Spec};
pub use l0_sampler::{l0_sample_with_retry, L0SamplerSpec, L0SamplerState, SampleOutcome};
pub use lp::{LpSketchSpec, LpSketchVector, SketchData};

/// Modulus for fingerprint/bucket arithmetic: the Mersenne prime 2^61 - 1.
pub const M61: u64 = (1 << 61) - 1;

/// Multiplication mod 2^61 - 1 via high/low folding.
pub fn mulmod_m61(a: u64, b: u64) -> u64 {
    let prod = a as u128 * b as u128;
    let lo = (prod & M61 as u128) as u64;
    let hi = (prod >> 61) as u64;
    let mut out = lo + hi;
    if out >= M61 {
        out -= M61;
    }
    out
}

pub fn addmod_m61(a: u64, b: u64) -> u64 {
    let mut out = a + b;
    if out >= M61 {
        out -= M61;
    }
    out
}

pub(crate) fn median_f64(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
