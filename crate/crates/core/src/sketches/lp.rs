//! lp sketches for p in [0, 2].
//!
//! Three regimes behind one interface:
//! - p = 2: random-sign projections, estimated by a median of group means of
//!   squared coordinates
//! - p in (0, 2): p-stable projections (Chambers-Mallows-Stuck draws from
//!   the seed), estimated by the median absolute coordinate scaled by the
//!   median of the standard p-stable distribution
//! - p = 0: geometric subsampling of coordinates into small bucket arrays
//!   over a prime field, estimated by collision-corrected occupancy counting
//!
//! `estimate` returns the sum of p-th powers of the input (the nonzero count
//! for p = 0). Projection coordinates are held in the 32-bit fixed-point
//! format of the wire codec, so applying a sketch and summing sketches are
//! exact integer operations.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::{addmod_m61, median_f64, mulmod_m61, M61};
use crate::error::{Error, Result};
use crate::rng;
use crate::wire::FIXED_ONE;

/// Stable draws are clamped to this magnitude before quantization; far above
/// any median the estimator consults, far below the fixed-point range.
const STABLE_CLAMP: f64 = (1u64 << 22) as f64;

const TAG_THETA: u64 = 0x7468;
const TAG_W: u64 = 0x7767;
const TAG_SIGN: u64 = 0x7369;
const TAG_LEVEL: u64 = 0x6C76;
const TAG_BUCKET: u64 = 0x626B;
const TAG_MULT: u64 = 0x6D75;

/// Fraction of buckets allowed occupied before moving to a sparser level.
const OCCUPANCY_CEILING: f64 = 0.65;

/// Geometry and seed of an lp sketch.
#[derive(Clone, Debug)]
pub struct LpSketchSpec {
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
    pub input_dim: usize,
    pub seed: u64,
    /// Row-count constant; the default is far below worst-case theory and is
    /// validated empirically by the test suite.
    pub c_rows: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Zero,
    Stable,
    Sign,
}

/// Sketch of one vector under a given spec.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSketchVector {
    pub data: SketchData,
}

/// Dense fixed-point projection table (p > 0 sketches).
pub struct LpProjection {
    rows: usize,
    dim: usize,
    entries: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SketchData {
    /// Fixed-point projection coordinates (p > 0).
    Fixed(Vec<i64>),
    /// Prime-field bucket contents (p = 0).
    Buckets(Vec<u64>),
}

impl LpSketchSpec {
    pub fn new(p: f64, eps: f64, delta: f64, input_dim: usize, seed: u64) -> Result<Self> {
        Self::with_c(p, eps, delta, input_dim, seed, 6)
    }

    pub fn with_c(
        p: f64,
        eps: f64,
        delta: f64,
        input_dim: usize,
        seed: u64,
        c_rows: usize,
    ) -> Result<Self> {
        if !(0.0..=2.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p={p} outside [0, 2]")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps={eps} outside (0, 1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta={delta} outside (0, 1)"
            )));
        }
        if input_dim == 0 || c_rows == 0 {
            return Err(Error::InvalidParameter(
                "input_dim and c_rows must be positive".into(),
            ));
        }
        Ok(Self {
            p,
            eps,
            delta,
            input_dim,
            seed,
            c_rows,
        })
    }

    fn kind(&self) -> Kind {
        if self.p == 0.0 {
            Kind::Zero
        } else if self.p == 2.0 {
            Kind::Sign
        } else {
            Kind::Stable
        }
    }

    fn rep_factor(&self) -> usize {
        ((1.0 / self.delta).ln().ceil() as usize).max(1)
    }

    fn base_rows(&self) -> usize {
        self.c_rows * (1.0 / (self.eps * self.eps)).ceil() as usize
    }

    /// p in (0, 2): one flat bank of rows, median over all of them.
    fn stable_rows(&self) -> usize {
        (self.base_rows() * self.rep_factor()) | 1
    }

    /// p = 2: median of means over groups.
    fn sign_groups(&self) -> usize {
        self.rep_factor().max(3) | 1
    }

    fn sign_rows_per_group(&self) -> usize {
        self.base_rows()
    }

    /// p = 0: independent repetitions of a level-by-bucket array.
    fn zero_reps(&self) -> usize {
        (2 * self.rep_factor() + 1).max(5) | 1
    }

    fn zero_levels(&self) -> usize {
        (usize::BITS - (self.input_dim.max(1) - 1).leading_zeros()) as usize + 1
    }

    fn zero_buckets(&self) -> usize {
        self.base_rows().max(8)
    }

    /// Number of wire elements one sketch occupies.
    pub fn sketch_len(&self) -> usize {
        match self.kind() {
            Kind::Stable => self.stable_rows(),
            Kind::Sign => self.sign_groups() * self.sign_rows_per_group(),
            Kind::Zero => self.zero_reps() * self.zero_levels() * self.zero_buckets(),
        }
    }

    /// True when the sketch travels as prime-field buckets rather than
    /// fixed-point coordinates.
    pub fn uses_buckets(&self) -> bool {
        self.kind() == Kind::Zero
    }

    /// Materializes the projection matrix once; applying the sketch to many
    /// vectors through the table avoids regenerating identical draws.
    /// `None` for the bucket-based p = 0 sketch.
    pub fn projection(&self) -> Option<LpProjection> {
        if self.kind() == Kind::Zero {
            return None;
        }
        let rows = self.sketch_len();
        let dim = self.input_dim;
        let mut entries = vec![0i64; rows * dim];
        for r in 0..rows {
            for i in 0..dim {
                entries[r * dim + i] = self.projection_entry(r, i);
            }
        }
        Some(LpProjection { rows, dim, entries })
    }

    /// Applies the sketch through a pre-generated projection table.
    pub fn apply_with(&self, proj: &LpProjection, x: &[(usize, u64)]) -> Result<LpSketchVector> {
        if proj.dim != self.input_dim || proj.rows != self.sketch_len() {
            return Err(Error::DimensionMismatch("projection table shape".into()));
        }
        let mut coords = vec![0i128; proj.rows];
        for &(i, v) in x {
            if i >= self.input_dim {
                return Err(Error::IndexOutOfRange(format!(
                    "coordinate {i} outside dim {}",
                    self.input_dim
                )));
            }
            for (r, c) in coords.iter_mut().enumerate() {
                *c += v as i128 * proj.entries[r * proj.dim + i] as i128;
            }
        }
        let coords = coords
            .into_iter()
            .map(|c| i64::try_from(c).map_err(|_| Error::Overflow("sketch coordinate")))
            .collect::<Result<Vec<i64>>>()?;
        Ok(LpSketchVector {
            data: SketchData::Fixed(coords),
        })
    }

    /// Fixed-point entry of the projection matrix at (row, coordinate).
    fn projection_entry(&self, row: usize, i: usize) -> i64 {
        let key = (row * self.input_dim + i) as u64;
        match self.kind() {
            Kind::Sign => {
                if rng::prf_u64(self.seed, TAG_SIGN, key) & 1 == 0 {
                    FIXED_ONE
                } else {
                    -FIXED_ONE
                }
            }
            Kind::Stable => {
                let u1 = rng::u64_to_f64(rng::prf_u64(self.seed, TAG_THETA, key));
                let u2 = rng::u64_to_f64_open(rng::prf_u64(self.seed, TAG_W, key));
                let x = stable_draw(self.p, u1, u2).clamp(-STABLE_CLAMP, STABLE_CLAMP);
                (x * FIXED_ONE as f64).round() as i64
            }
            Kind::Zero => unreachable!("bucket sketches have no projection entries"),
        }
    }

    /// Applies the sketch to a sparse nonnegative vector.
    pub fn apply(&self, x: &[(usize, u64)]) -> Result<LpSketchVector> {
        for &(i, _) in x {
            if i >= self.input_dim {
                return Err(Error::IndexOutOfRange(format!(
                    "coordinate {i} outside dim {}",
                    self.input_dim
                )));
            }
        }
        match self.kind() {
            Kind::Zero => {
                let (reps, levels, k) = (self.zero_reps(), self.zero_levels(), self.zero_buckets());
                let mut buckets = vec![0u64; reps * levels * k];
                for &(i, v) in x {
                    let vm = v % M61;
                    for t in 0..reps {
                        let depth = coordinate_depth(self.seed, t, i, levels);
                        let tag = coordinate_tag(self.seed, t, i);
                        let contrib = mulmod_m61(vm, tag);
                        for level in 0..=depth {
                            let b = bucket_of(self.seed, t, level, i, k);
                            let slot = (t * levels + level) * k + b;
                            buckets[slot] = addmod_m61(buckets[slot], contrib);
                        }
                    }
                }
                Ok(LpSketchVector {
                    data: SketchData::Buckets(buckets),
                })
            }
            _ => {
                let rows = self.sketch_len();
                let mut coords = vec![0i128; rows];
                for &(i, v) in x {
                    for (r, c) in coords.iter_mut().enumerate() {
                        *c += v as i128 * self.projection_entry(r, i) as i128;
                    }
                }
                let coords = coords
                    .into_iter()
                    .map(|c| i64::try_from(c).map_err(|_| Error::Overflow("sketch coordinate")))
                    .collect::<Result<Vec<i64>>>()?;
                Ok(LpSketchVector {
                    data: SketchData::Fixed(coords),
                })
            }
        }
    }

    /// Nonnegative integer combination of sketches (of the same spec).
    pub fn combine(&self, terms: &[(u64, &LpSketchVector)]) -> Result<LpSketchVector> {
        let len = self.sketch_len();
        match self.kind() {
            Kind::Zero => {
                let mut out = vec![0u64; len];
                for &(w, sk) in terms {
                    let SketchData::Buckets(b) = &sk.data else {
                        return Err(Error::InvalidParameter("mixed sketch kinds".into()));
                    };
                    if b.len() != len {
                        return Err(Error::DimensionMismatch("sketch length".into()));
                    }
                    let wm = w % M61;
                    if wm == 0 {
                        continue;
                    }
                    if wm == 1 {
                        for (o, &x) in out.iter_mut().zip(b.iter()) {
                            *o = addmod_m61(*o, x);
                        }
                    } else {
                        for (o, &x) in out.iter_mut().zip(b.iter()) {
                            *o = addmod_m61(*o, mulmod_m61(wm, x));
                        }
                    }
                }
                Ok(LpSketchVector {
                    data: SketchData::Buckets(out),
                })
            }
            _ => {
                let mut acc = vec![0i128; len];
                for &(w, sk) in terms {
                    let SketchData::Fixed(c) = &sk.data else {
                        return Err(Error::InvalidParameter("mixed sketch kinds".into()));
                    };
                    if c.len() != len {
                        return Err(Error::DimensionMismatch("sketch length".into()));
                    }
                    for (a, &x) in acc.iter_mut().zip(c.iter()) {
                        *a += w as i128 * x as i128;
                    }
                }
                let coords = acc
                    .into_iter()
                    .map(|c| i64::try_from(c).map_err(|_| Error::Overflow("sketch coordinate")))
                    .collect::<Result<Vec<i64>>>()?;
                Ok(LpSketchVector {
                    data: SketchData::Fixed(coords),
                })
            }
        }
    }

    /// Estimates sum of |x_i|^p (the nonzero count for p = 0).
    pub fn estimate(&self, sk: &LpSketchVector) -> f64 {
        match (&sk.data, self.kind()) {
            (SketchData::Fixed(coords), Kind::Sign) => {
                let per = self.sign_rows_per_group();
                let mut means: Vec<f64> = coords
                    .chunks(per)
                    .map(|group| {
                        group
                            .iter()
                            .map(|&c| {
                                let y = c as f64 / FIXED_ONE as f64;
                                y * y
                            })
                            .sum::<f64>()
                            / per as f64
                    })
                    .collect();
                median_f64(&mut means)
            }
            (SketchData::Fixed(coords), Kind::Stable) => {
                let mut mags: Vec<f64> = coords
                    .iter()
                    .map(|&c| (c as f64 / FIXED_ONE as f64).abs())
                    .collect();
                let med = median_f64(&mut mags);
                (med / stable_median(self.p)).powf(self.p)
            }
            (SketchData::Buckets(buckets), Kind::Zero) => {
                let (reps, levels, k) = (self.zero_reps(), self.zero_levels(), self.zero_buckets());
                let mut ests: Vec<f64> = (0..reps)
                    .map(|t| {
                        let occ_at = |level: usize| {
                            buckets[(t * levels + level) * k..(t * levels + level + 1) * k]
                                .iter()
                                .filter(|&&b| b != 0)
                                .count()
                        };
                        if occ_at(0) == 0 {
                            return 0.0;
                        }
                        let ceiling = (OCCUPANCY_CEILING * k as f64) as usize;
                        let mut chosen = levels - 1;
                        for level in 0..levels {
                            if occ_at(level) <= ceiling {
                                chosen = level;
                                break;
                            }
                        }
                        linear_count(occ_at(chosen), k) * (1u64 << chosen) as f64
                    })
                    .collect();
                median_f64(&mut ests)
            }
            _ => f64::NAN,
        }
    }
}

/// Distinct-count estimate from bucket occupancy, correcting for collisions.
fn linear_count(occupied: usize, k: usize) -> f64 {
    if occupied == 0 {
        return 0.0;
    }
    if occupied >= k {
        // Fully saturated; report the largest resolvable count.
        return k as f64 * (k as f64).ln();
    }
    (1.0 - occupied as f64 / k as f64).ln() / (1.0 - 1.0 / k as f64).ln()
}

/// Deepest subsampling level containing coordinate `i` in repetition `t`.
fn coordinate_depth(seed: u64, t: usize, i: usize, levels: usize) -> usize {
    let h = rng::prf_u64(seed, TAG_LEVEL, (t as u64) << 32 | i as u64);
    (h.trailing_zeros() as usize).min(levels - 1)
}

fn coordinate_tag(seed: u64, t: usize, i: usize) -> u64 {
    rng::prf_u64(seed, TAG_MULT, (t as u64) << 32 | i as u64) % (M61 - 1) + 1
}

fn bucket_of(seed: u64, t: usize, level: usize, i: usize, k: usize) -> usize {
    let key = ((t * 64 + level) as u64) << 32 | i as u64;
    (rng::prf_u64(seed, TAG_BUCKET, key) % k as u64) as usize
}

/// Chambers-Mallows-Stuck draw of a standard p-stable variable from two
/// uniforms.
fn stable_draw(p: f64, u1: f64, u2: f64) -> f64 {
    let theta = std::f64::consts::PI * (u1 - 0.5);
    let w = -u2.ln();
    let a = (p * theta).sin() / theta.cos().powf(1.0 / p);
    let b = ((theta * (1.0 - p)).cos() / w).powf((1.0 - p) / p);
    a * b
}

/// Median of |X| for standard p-stable X, computed once per p by a seeded
/// Monte Carlo run (the p = 1 Cauchy case is exactly 1).
fn stable_median(p: f64) -> f64 {
    if (p - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = p.to_bits();
    if let Some(&m) = cache.lock().unwrap().get(&key) {
        return m;
    }
    const SAMPLES: usize = 1 << 18;
    let mut state = 0x5EED_0F_5EED_u64 ^ key;
    let mut mags: Vec<f64> = (0..SAMPLES)
        .map(|_| {
            let u1 = rng::u64_to_f64(rng::splitmix64(&mut state));
            let u2 = rng::u64_to_f64_open(rng::splitmix64(&mut state));
            stable_draw(p, u1, u2).abs()
        })
        .collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = 0.5 * (mags[SAMPLES / 2 - 1] + mags[SAMPLES / 2]);
    cache.lock().unwrap().insert(key, med);
    med
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(x: &[u64]) -> Vec<(usize, u64)> {
        x.iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0)
            .map(|(i, &v)| (i, v))
            .collect()
    }

    fn exact_pow(x: &[u64], p: f64) -> f64 {
        if p == 0.0 {
            x.iter().filter(|&&v| v != 0).count() as f64
        } else {
            x.iter().map(|&v| (v as f64).powf(p)).sum()
        }
    }

    #[test]
    fn zero_vector_sketches_to_zero() {
        for p in [0.0, 0.5, 1.0, 2.0] {
            let spec = LpSketchSpec::new(p, 0.3, 0.1, 16, 7).unwrap();
            let sk = spec.apply(&[]).unwrap();
            assert_eq!(spec.estimate(&sk), 0.0);
        }
    }

    #[test]
    fn linearity_is_exact() {
        for p in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let spec = LpSketchSpec::new(p, 0.3, 0.1, 32, 11).unwrap();
            let x: Vec<u64> = (0..32).map(|i| if i % 3 == 0 { i + 1 } else { 0 }).collect();
            let y: Vec<u64> = (0..32).map(|i| if i % 4 == 0 { 2 * i + 1 } else { 0 }).collect();
            let sum: Vec<u64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let sk_sum = spec.apply(&dense(&sum)).unwrap();
            let combined = spec
                .combine(&[(1, &spec.apply(&dense(&x)).unwrap()), (1, &spec.apply(&dense(&y)).unwrap())])
                .unwrap();
            assert_eq!(sk_sum, combined);
        }
    }

    #[test]
    fn combine_with_weights_matches_scaled_apply() {
        for p in [0.0, 1.0, 2.0] {
            let spec = LpSketchSpec::new(p, 0.4, 0.1, 16, 3).unwrap();
            let x = [(2usize, 3u64), (7, 1), (12, 5)];
            let scaled: Vec<(usize, u64)> = x.iter().map(|&(i, v)| (i, 4 * v)).collect();
            let a = spec.apply(&x).unwrap();
            assert_eq!(spec.combine(&[(4, &a)]).unwrap(), spec.apply(&scaled).unwrap());
        }
    }

    #[test]
    fn seed_determinism() {
        let spec = LpSketchSpec::new(1.0, 0.25, 0.1, 24, 99).unwrap();
        let x = [(1usize, 2u64), (20, 7)];
        assert_eq!(spec.apply(&x).unwrap(), spec.apply(&x).unwrap());
        let other = LpSketchSpec::new(1.0, 0.25, 0.1, 24, 100).unwrap();
        assert_ne!(spec.apply(&x).unwrap(), other.apply(&x).unwrap());
    }

    #[test]
    fn basis_vector_l2_estimate_is_tight() {
        let mut ok = 0;
        for seed in 0..100 {
            let spec = LpSketchSpec::new(2.0, 0.2, 0.05, 64, seed).unwrap();
            let sk = spec.apply(&[(1, 1)]).unwrap();
            let est = spec.estimate(&sk);
            if est >= 1.0 / 1.2 && est <= 1.2 {
                ok += 1;
            }
        }
        assert!(ok >= 90, "only {ok}/100 within (1+eps)");
    }

    #[test]
    fn l0_estimate_37_nonzeros() {
        let x: Vec<u64> = (0..64).map(|i| if i < 37 { 1 } else { 0 }).collect();
        let sx = dense(&x);
        let mut ok = 0;
        let trials = 500;
        for seed in 0..trials {
            let spec = LpSketchSpec::new(0.0, 0.2, 0.05, 64, seed).unwrap();
            let est = spec.estimate(&spec.apply(&sx).unwrap());
            if est >= 37.0 / 1.2 && est <= 37.0 * 1.2 {
                ok += 1;
            }
        }
        // Failure rate at most 2*delta.
        assert!(ok as f64 >= trials as f64 * 0.9, "only {ok}/{trials}");
    }

    #[test]
    fn p_fractional_estimate_tracks_power_sum() {
        let x: Vec<u64> = (0..48)
            .map(|i| if i % 2 == 0 { (i % 7) + 1 } else { 0 })
            .collect();
        let sx = dense(&x);
        let exact = exact_pow(&x, 1.5);
        let mut ok = 0;
        let trials = 300;
        for seed in 0..trials {
            let spec = LpSketchSpec::new(1.5, 0.2, 0.05, 48, seed).unwrap();
            let est = spec.estimate(&spec.apply(&sx).unwrap());
            if est >= exact / 1.2 && est <= exact * 1.2 {
                ok += 1;
            }
        }
        assert!(ok as f64 >= trials as f64 * 0.9, "only {ok}/{trials}");
    }

    /// Empirical contract: failure rate at most 2*delta across p values,
    /// seeds, and random vectors.
    #[test]
    fn empirical_guarantee_suite() {
        use rand_core::Rng as _;
        let eps = 0.25;
        let delta = 0.1;
        let dim = 48;
        for p in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let mut fails = 0;
            let mut total = 0;
            for vec_id in 0..20u64 {
                let mut vrng = rng::chacha(vec_id, 0x76EC);
                let x: Vec<u64> = (0..dim)
                    .map(|_| {
                        if rng::next_f64(&mut vrng) < 0.4 {
                            vrng.next_u64() % 9 + 1
                        } else {
                            0
                        }
                    })
                    .collect();
                let sx = dense(&x);
                let exact = exact_pow(&x, p);
                for seed in 0..25u64 {
                    let spec =
                        LpSketchSpec::new(p, eps, delta, dim, seed ^ (vec_id << 8)).unwrap();
                    let est = spec.estimate(&spec.apply(&sx).unwrap());
                    total += 1;
                    let ok = if exact == 0.0 {
                        est == 0.0
                    } else {
                        est >= exact / (1.0 + eps) && est <= exact * (1.0 + eps)
                    };
                    if !ok {
                        fails += 1;
                    }
                }
            }
            let rate = fails as f64 / total as f64;
            assert!(rate <= 2.0 * delta, "p={p}: failure rate {rate}");
        }
    }

    #[test]
    fn quantization_error_within_budget() {
        // Fixed-point granularity perturbs estimates by far less than eps/10
        // for integer inputs of unit scale or above.
        let eps = 0.2;
        let x = [(0usize, 1u64), (5, 2), (9, 1)];
        for seed in 0..20 {
            let spec = LpSketchSpec::new(1.0, eps, 0.05, 16, seed).unwrap();
            let sk = spec.apply(&x).unwrap();
            let est = spec.estimate(&sk);
            // Recompute the estimate from unquantized projections.
            let rows = spec.sketch_len();
            let mut mags: Vec<f64> = (0..rows)
                .map(|r| {
                    x.iter()
                        .map(|&(i, v)| {
                            let key = (r * spec.input_dim + i) as u64;
                            let u1 = rng::u64_to_f64(rng::prf_u64(spec.seed, TAG_THETA, key));
                            let u2 = rng::u64_to_f64_open(rng::prf_u64(spec.seed, TAG_W, key));
                            v as f64 * stable_draw(1.0, u1, u2).clamp(-STABLE_CLAMP, STABLE_CLAMP)
                        })
                        .sum::<f64>()
                        .abs()
                })
                .collect();
            let unquantized = median_f64(&mut mags);
            assert!(
                (est - unquantized).abs() <= eps / 10.0 * unquantized.max(1.0),
                "quantization shifted estimate too much: {est} vs {unquantized}"
            );
        }
    }
}
