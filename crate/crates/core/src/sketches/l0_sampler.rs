//! l0 sampler: uniform draws from the support of a nonnegative vector.
//!
//! Classic construction: geometric subsampling levels, each summarized by a
//! 1-sparse recovery triple (value sum, index-weighted sum, prime-field
//! fingerprint), repeated independently. Sampling scans repetitions and
//! levels for a triple that verifies as 1-sparse and returns its index.
//! Failure is explicit; the fingerprint makes a wrong index about as likely
//! as a 2^-61 hash collision.

use super::{addmod_m61, mulmod_m61, M61};
use crate::error::{Error, Result};
use crate::rng;
use crate::wire::{WireReader, WireWriter};

const TAG_LEVEL: u64 = 0x6C30_6C76;
const TAG_FP: u64 = 0x6C30_6670;

/// Geometry and seed of an l0 sampler.
#[derive(Clone, Debug)]
pub struct L0SamplerSpec {
    pub input_dim: usize,
    pub seed: u64,
    /// Independent repetitions; the default gives a comfortably small
    /// failure rate at the dimensions this crate targets.
    pub reps: usize,
    pub levels: usize,
}

/// Linear state: one recovery triple per (repetition, level).
#[derive(Clone, Debug, PartialEq)]
pub struct L0SamplerState {
    sums: Vec<u128>,
    isums: Vec<u128>,
    fps: Vec<u64>,
}

/// Outcome of a sampling attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleOutcome {
    /// Verified support index, uniform over the support.
    Index(usize),
    /// The vector is zero.
    Empty,
    /// No repetition verified; retry with a fresh seed.
    Fail,
}

impl L0SamplerSpec {
    pub fn new(input_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be positive".into()));
        }
        let levels = (usize::BITS - (input_dim - 1).leading_zeros()) as usize + 1;
        let reps = 2 * levels + 6;
        Ok(Self {
            input_dim,
            seed,
            reps,
            levels,
        })
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps.max(1);
        self
    }

    fn slots(&self) -> usize {
        self.reps * self.levels
    }

    fn depth(&self, t: usize, i: usize) -> usize {
        let h = rng::prf_u64(self.seed, TAG_LEVEL, (t as u64) << 32 | i as u64);
        (h.trailing_zeros() as usize).min(self.levels - 1)
    }

    fn tag(&self, i: usize) -> u64 {
        rng::prf_u64(self.seed, TAG_FP, i as u64) % (M61 - 1) + 1
    }

    pub fn apply(&self, x: &[(usize, u64)]) -> Result<L0SamplerState> {
        let mut state = L0SamplerState {
            sums: vec![0u128; self.slots()],
            isums: vec![0u128; self.slots()],
            fps: vec![0u64; self.slots()],
        };
        for &(i, v) in x {
            if i >= self.input_dim {
                return Err(Error::IndexOutOfRange(format!(
                    "coordinate {i} outside dim {}",
                    self.input_dim
                )));
            }
            if v == 0 {
                continue;
            }
            let tag = self.tag(i);
            let vm = v % M61;
            for t in 0..self.reps {
                let depth = self.depth(t, i);
                for level in 0..=depth {
                    let s = t * self.levels + level;
                    state.sums[s] += v as u128;
                    state.isums[s] += i as u128 * v as u128;
                    state.fps[s] = addmod_m61(state.fps[s], mulmod_m61(vm, tag));
                }
            }
        }
        Ok(state)
    }

    /// Nonnegative integer combination of states.
    pub fn combine(&self, terms: &[(u64, &L0SamplerState)]) -> Result<L0SamplerState> {
        let mut out = L0SamplerState {
            sums: vec![0u128; self.slots()],
            isums: vec![0u128; self.slots()],
            fps: vec![0u64; self.slots()],
        };
        for &(w, st) in terms {
            if st.sums.len() != out.sums.len() {
                return Err(Error::DimensionMismatch("sampler state length".into()));
            }
            if w == 0 {
                continue;
            }
            let wm = w % M61;
            if w == 1 {
                for s in 0..out.sums.len() {
                    out.sums[s] += st.sums[s];
                    out.isums[s] += st.isums[s];
                    out.fps[s] = addmod_m61(out.fps[s], st.fps[s]);
                }
            } else {
                for s in 0..out.sums.len() {
                    out.sums[s] += w as u128 * st.sums[s];
                    out.isums[s] += w as u128 * st.isums[s];
                    out.fps[s] = addmod_m61(out.fps[s], mulmod_m61(wm, st.fps[s]));
                }
            }
        }
        Ok(out)
    }

    /// Attempts to recover one support index.
    pub fn sample(&self, state: &L0SamplerState) -> SampleOutcome {
        // Level 0 of any repetition sees the whole (nonnegative) vector.
        if state.sums[0] == 0 {
            return SampleOutcome::Empty;
        }
        for t in 0..self.reps {
            for level in 0..self.levels {
                let s = t * self.levels + level;
                let sum = state.sums[s];
                if sum == 0 {
                    continue;
                }
                if state.isums[s] % sum != 0 {
                    continue;
                }
                let idx = (state.isums[s] / sum) as usize;
                if idx >= self.input_dim {
                    continue;
                }
                let expect = mulmod_m61((sum % M61 as u128) as u64, self.tag(idx));
                if expect == state.fps[s] {
                    return SampleOutcome::Index(idx);
                }
            }
        }
        SampleOutcome::Fail
    }
}

impl L0SamplerState {
    /// True exactly when the summarized vector is zero (values are
    /// nonnegative, so the level-0 sum is the l1 norm).
    pub fn is_zero(&self) -> bool {
        self.sums[0] == 0
    }

    /// Wire encoding with widths declared from public bounds.
    pub fn encode(&self, w: &mut WireWriter, sum_width: u32, isum_width: u32) -> Result<()> {
        for &s in &self.sums {
            w.put_uint(
                u64::try_from(s).map_err(|_| Error::Overflow("sampler sum"))?,
                sum_width,
            )?;
        }
        for &s in &self.isums {
            w.put_uint(
                u64::try_from(s).map_err(|_| Error::Overflow("sampler index sum"))?,
                isum_width,
            )?;
        }
        for &f in &self.fps {
            w.put_uint(f, 61)?;
        }
        Ok(())
    }

    pub fn decode(
        r: &mut WireReader,
        spec: &L0SamplerSpec,
        sum_width: u32,
        isum_width: u32,
    ) -> Result<L0SamplerState> {
        let slots = spec.slots();
        let sums = r.get_uints(slots, sum_width)?.into_iter().map(u128::from).collect();
        let isums = r
            .get_uints(slots, isum_width)?
            .into_iter()
            .map(u128::from)
            .collect();
        let fps = r.get_uints(slots, 61)?;
        Ok(L0SamplerState { sums, isums, fps })
    }
}

/// Vector-level convenience: sample with up to `retries` fresh seeds before
/// giving up.
pub fn l0_sample_with_retry(
    x: &[(usize, u64)],
    input_dim: usize,
    base_seed: u64,
    retries: usize,
) -> Result<SampleOutcome> {
    for attempt in 0..=retries {
        let spec = L0SamplerSpec::new(input_dim, rng::mix(base_seed, attempt as u64))?;
        let out = spec.sample(&spec.apply(x)?);
        if !matches!(out, SampleOutcome::Fail) {
            return Ok(out);
        }
    }
    Ok(SampleOutcome::Fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_support_is_found() {
        for seed in 0..50 {
            let spec = L0SamplerSpec::new(16, seed).unwrap();
            let st = spec.apply(&[(5, 1)]).unwrap();
            match spec.sample(&st) {
                SampleOutcome::Index(i) => assert_eq!(i, 5),
                SampleOutcome::Fail => {}
                SampleOutcome::Empty => panic!("nonzero vector reported empty"),
            }
        }
    }

    #[test]
    fn zero_vector_is_empty() {
        let spec = L0SamplerSpec::new(16, 3).unwrap();
        let st = spec.apply(&[]).unwrap();
        assert_eq!(spec.sample(&st), SampleOutcome::Empty);
    }

    #[test]
    fn returned_index_always_in_support_exhaustive() {
        // All binary vectors of length up to 12.
        for dim in 1..=12usize {
            for mask in 1u32..(1 << dim) {
                let x: Vec<(usize, u64)> = (0..dim)
                    .filter(|&i| mask >> i & 1 == 1)
                    .map(|i| (i, 1u64))
                    .collect();
                let spec = L0SamplerSpec::new(dim, mask as u64 * 31 + dim as u64).unwrap();
                match spec.sample(&spec.apply(&x).unwrap()) {
                    SampleOutcome::Index(i) => {
                        assert!(mask >> i & 1 == 1, "index {i} not in support {mask:b}")
                    }
                    SampleOutcome::Fail => {}
                    SampleOutcome::Empty => panic!("nonzero vector reported empty"),
                }
            }
        }
    }

    #[test]
    fn uniform_over_three_support_elements() {
        let x = [(2usize, 1u64), (5, 1), (7, 1)];
        let draws = 30_000;
        let mut counts = [0usize; 3];
        let mut fails = 0;
        for seed in 0..draws {
            match l0_sample_with_retry(&x, 10, seed as u64, 3).unwrap() {
                SampleOutcome::Index(2) => counts[0] += 1,
                SampleOutcome::Index(5) => counts[1] += 1,
                SampleOutcome::Index(7) => counts[2] += 1,
                SampleOutcome::Index(other) => panic!("index {other} outside support"),
                SampleOutcome::Fail => fails += 1,
                SampleOutcome::Empty => panic!("nonzero vector reported empty"),
            }
        }
        assert!(fails < draws / 100, "too many failures: {fails}");
        let succ = (draws - fails) as f64;
        for c in counts {
            let freq = c as f64 / succ;
            assert!(
                (freq - 1.0 / 3.0).abs() <= 0.02,
                "frequency {freq} off uniform"
            );
        }
    }

    #[test]
    fn combine_matches_direct_application() {
        let spec = L0SamplerSpec::new(20, 8).unwrap();
        let x = [(1usize, 2u64), (9, 1)];
        let y = [(3usize, 4u64), (9, 2)];
        let sum = [(1usize, 6u64), (3, 12), (9, 9)];
        let combined = spec
            .combine(&[(3, &spec.apply(&x).unwrap()), (3, &spec.apply(&y).unwrap())])
            .unwrap();
        assert_eq!(combined, spec.apply(&sum).unwrap());
    }
}
