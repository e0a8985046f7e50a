//! Adversarial instance generators with planted ground truth.
//!
//! These constructions turn hard communication instances into matrix pairs
//! whose product statistics are known at generation time, so estimators can
//! be stress-tested without running the exact oracle at larger sizes.
//!
//! The block embedding places bit-vectors `x`, `y` into
//!
//! ```text
//!   A = | A'  I |        B = | I   0 |        A*B = | A'+B'  0 |
//!       | 0   0 |            | B'  0 |              |   0    0 |
//! ```
//!
//! so the product's max entry is 2 exactly when `x` and `y` intersect (1
//! otherwise, 0 when both are empty). The same layout over integer vectors
//! in `[0, kappa]` plants `max_i (x_i + y_i)`.
//!
//! The summed-disjointness instance draws coordinate pairs from a planted
//! distribution: every block is disjoint by construction except possibly
//! one hidden coordinate, which flips a fair coin. The resulting matrices
//! repeat each side's bit-vectors across `n/k` blocks, giving the product a
//! max entry of at least `n/k` on the planted branch and only diffuse mass
//! otherwise.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::SparseIntMatrix;
use crate::rng;
use rand_chacha::ChaCha20Rng;

/// Set-disjointness embedding with its planted answer.
#[derive(Clone, Debug)]
pub struct DisjEmbedding {
    pub x: Vec<bool>,
    pub y: Vec<bool>,
    pub a: SparseIntMatrix,
    pub b: SparseIntMatrix,
    pub intersecting: bool,
    /// Matrix side length (twice the block side).
    pub n: usize,
}

/// Integer-block embedding planting the max entry of the product.
#[derive(Clone, Debug)]
pub struct GapInfEmbedding {
    pub a: SparseIntMatrix,
    pub b: SparseIntMatrix,
    pub planted_linf: u64,
    pub n: usize,
}

/// Summed-disjointness instance with its planted bit.
#[derive(Clone, Debug)]
pub struct SumInstance {
    pub n: usize,
    pub k: usize,
    /// Per-coordinate activation probability after clamping to [0, 1].
    pub beta: f64,
    /// Unclamped value of the defining expression sqrt(50 ln(n) / n).
    pub beta_raw: f64,
    pub u: Vec<Vec<bool>>,
    pub v: Vec<Vec<bool>>,
    pub planted_sum: u8,
    /// Hidden coordinate index (the only one that may intersect).
    pub special_d: usize,
    /// Position inside the hidden block where the coin was planted.
    pub special_m: usize,
    pub a: SparseIntMatrix,
    pub b: SparseIntMatrix,
    /// Number of repeated blocks, floor(n / k).
    pub blocks: usize,
}

fn square_side(len: usize) -> Result<usize> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len || side == 0 {
        return Err(Error::InvalidParameter(format!(
            "input length {len} is not a positive perfect square"
        )));
    }
    Ok(side)
}

/// Builds the block pair (A, B) from two half-side square matrices given as
/// flat row-major value slices.
fn block_pair(xv: &[u64], yv: &[u64]) -> Result<(SparseIntMatrix, SparseIntMatrix, usize)> {
    if xv.len() != yv.len() {
        return Err(Error::DimensionMismatch(
            "embedding inputs differ in length".into(),
        ));
    }
    let half = square_side(xv.len())?;
    let n = 2 * half;
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for i in 0..half {
        for j in 0..half {
            let va = xv[i * half + j];
            if va > 0 {
                a.insert((i, j), va);
            }
            let vb = yv[i * half + j];
            if vb > 0 {
                b.insert((half + i, j), vb);
            }
        }
        a.insert((i, half + i), 1);
        b.insert((i, i), 1);
    }
    Ok((
        SparseIntMatrix::from_map(n, n, a, u64::MAX),
        SparseIntMatrix::from_map(n, n, b, u64::MAX),
        n,
    ))
}

/// Embeds a set-disjointness instance; the product's max entry is 2 iff the
/// bit vectors intersect.
pub fn gen_disj_embedding(x: &[bool], y: &[bool]) -> Result<DisjEmbedding> {
    let xv: Vec<u64> = x.iter().map(|&b| u64::from(b)).collect();
    let yv: Vec<u64> = y.iter().map(|&b| u64::from(b)).collect();
    let (a, b, n) = block_pair(&xv, &yv)?;
    let intersecting = x.iter().zip(y).any(|(&xi, &yi)| xi && yi);
    Ok(DisjEmbedding {
        x: x.to_vec(),
        y: y.to_vec(),
        a,
        b,
        intersecting,
        n,
    })
}

/// Embeds integer vectors in [0, kappa]; plants max_i (x_i + y_i).
pub fn gen_gapinf_embedding(x: &[u64], y: &[u64], kappa: u64) -> Result<GapInfEmbedding> {
    for &v in x.iter().chain(y) {
        if v > kappa {
            return Err(Error::EntryOutOfRange(format!(
                "entry {v} exceeds kappa={kappa}"
            )));
        }
    }
    let (a, b, n) = block_pair(x, y)?;
    let planted_linf = x.iter().zip(y).map(|(&xi, &yi)| xi + yi).max().unwrap_or(0);
    Ok(GapInfEmbedding {
        a,
        b,
        planted_linf,
        n,
    })
}

/// One coordinate pair of the background distribution: never intersecting,
/// active on one side with probability beta.
fn draw_background_pair(rng: &mut ChaCha20Rng, beta: f64) -> (bool, bool) {
    let w = rng::next_bool(rng, 0.5);
    let active = rng::next_bool(rng, beta);
    match (w, active) {
        (false, true) => (false, true),
        (true, true) => (true, false),
        _ => (false, false),
    }
}

/// Default block width from the relation k = 1 / (4 * kappa * beta^2),
/// rounded into [1, n].
pub fn default_k(n: usize, kappa: f64) -> usize {
    let beta = sum_beta(n).0;
    let k = 1.0 / (4.0 * kappa * beta * beta);
    (k.round() as usize).clamp(1, n.max(1))
}

/// (clamped, raw) activation probability for size n.
pub fn sum_beta(n: usize) -> (f64, f64) {
    let raw = (50.0 * (n.max(2) as f64).ln() / n.max(2) as f64).sqrt();
    (raw.min(1.0), raw)
}

/// Draws a summed-disjointness instance: all coordinate blocks disjoint
/// except a hidden one that intersects with probability 1/2.
pub fn gen_sum_instance(n: usize, k: usize, seed: u64) -> Result<SumInstance> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 0 < k <= n, got n={n} k={k}"
        )));
    }
    let (beta, beta_raw) = sum_beta(n);
    let mut rng = rng::chacha(seed, 0x5355_4D49);

    let mut u = vec![vec![false; k]; n];
    let mut v = vec![vec![false; k]; n];
    for i in 0..n {
        for t in 0..k {
            let (xu, xv) = draw_background_pair(&mut rng, beta);
            u[i][t] = xu;
            v[i][t] = xv;
        }
    }
    let special_d = rng::next_index(&mut rng, n);
    let special_m = rng::next_index(&mut rng, k);
    let planted = rng::next_bool(&mut rng, 0.5);
    u[special_d][special_m] = planted;
    v[special_d][special_m] = planted;
    let planted_sum = u8::from(planted);

    // Sanity: the summed disjointness of the drawn vectors equals the
    // planted bit by construction.
    let oracle_sum: usize = (0..n)
        .filter(|&i| (0..k).any(|t| u[i][t] && v[i][t]))
        .count();
    debug_assert_eq!(oracle_sum as u8, planted_sum);

    let blocks = n / k;
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for z in 0..blocks {
        for t in 0..k {
            let col = z * k + t;
            for i in 0..n {
                if u[i][t] {
                    a.insert((i, col), 1u64);
                }
                if v[i][t] {
                    b.insert((col, i), 1u64);
                }
            }
        }
    }
    Ok(SumInstance {
        n,
        k,
        beta,
        beta_raw,
        u,
        v,
        planted_sum,
        special_d,
        special_m,
        a: SparseIntMatrix::from_map(n, n, a, 1),
        b: SparseIntMatrix::from_map(n, n, b, 1),
        blocks,
    })
}

/// Writes an instance pair in the matrix text format plus one JSON line of
/// metadata appended to `instances.jsonl` in the same directory.
pub fn save_instance(
    dir: &Path,
    stem: &str,
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    meta: serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    a.save_file(dir.join(format!("{stem}_a.txt")))?;
    b.save_file(dir.join(format!("{stem}_b.txt")))?;
    let mut sidecar = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("instances.jsonl"))?;
    let mut line = serde_json::to_string(&meta)
        .map_err(|e| Error::Parse(format!("metadata serialization: {e}")))?;
    line.push('\n');
    sidecar.write_all(line.as_bytes())?;
    Ok(())
}
