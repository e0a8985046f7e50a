//! Blocked l2 sketch for coarse max-entry estimation.
//!
//! The coordinate range is split into contiguous blocks of size kappa^2 and
//! each block gets an independent random-sign l2 sketch. Since a block `y`
//! of that size satisfies max|y| <= ||y||_2 <= kappa * max|y|, the largest
//! per-block l2 estimate approximates the max entry within a factor of
//! kappa times the l2 estimator's own constant.
//!
//! Coordinates are exact integers (signs times integer values), so no
//! quantization is involved.

use super::median_f64;
use crate::error::{Error, Result};
use crate::rng;

const TAG_SIGN: u64 = 0x424C_5349;

#[derive(Clone, Debug)]
pub struct BlockedL2Spec {
    pub input_dim: usize,
    pub kappa: usize,
    pub groups: usize,
    pub rows_per_group: usize,
    pub seed: u64,
}

/// Integer sketch coordinates, blocks-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockedL2Sketch {
    pub coords: Vec<i64>,
}

impl BlockedL2Spec {
    pub fn new(input_dim: usize, kappa: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be positive".into()));
        }
        if kappa == 0 {
            return Err(Error::InvalidParameter("kappa must be positive".into()));
        }
        Ok(Self {
            input_dim,
            kappa,
            groups: 5,
            rows_per_group: 6,
            seed,
        })
    }

    pub fn with_reps(mut self, groups: usize, rows_per_group: usize) -> Self {
        self.groups = groups.max(1) | 1;
        self.rows_per_group = rows_per_group.max(1);
        self
    }

    /// Block width kappa^2, clipped to the dimension.
    pub fn block_size(&self) -> usize {
        (self.kappa * self.kappa).min(self.input_dim).max(1)
    }

    pub fn block_count(&self) -> usize {
        self.input_dim.div_ceil(self.block_size())
    }

    fn rows_per_block(&self) -> usize {
        self.groups * self.rows_per_group
    }

    /// Total sketch coordinates.
    pub fn total_rows(&self) -> usize {
        self.block_count() * self.rows_per_block()
    }

    fn sign(&self, block: usize, row: usize, i: usize) -> i64 {
        let key = ((block * self.rows_per_block() + row) as u64) << 32 | i as u64;
        if rng::prf_u64(self.seed, TAG_SIGN, key) & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn apply(&self, x: &[(usize, u64)]) -> Result<BlockedL2Sketch> {
        let mut coords = vec![0i128; self.total_rows()];
        let bs = self.block_size();
        let rpb = self.rows_per_block();
        for &(i, v) in x {
            if i >= self.input_dim {
                return Err(Error::IndexOutOfRange(format!(
                    "coordinate {i} outside dim {}",
                    self.input_dim
                )));
            }
            let block = i / bs;
            for row in 0..rpb {
                coords[block * rpb + row] += v as i128 * self.sign(block, row, i) as i128;
            }
        }
        let coords = coords
            .into_iter()
            .map(|c| i64::try_from(c).map_err(|_| Error::Overflow("blocked sketch coordinate")))
            .collect::<Result<Vec<i64>>>()?;
        Ok(BlockedL2Sketch { coords })
    }

    pub fn combine(&self, terms: &[(u64, &BlockedL2Sketch)]) -> Result<BlockedL2Sketch> {
        let mut acc = vec![0i128; self.total_rows()];
        for &(w, sk) in terms {
            if sk.coords.len() != acc.len() {
                return Err(Error::DimensionMismatch("blocked sketch length".into()));
            }
            for (a, &c) in acc.iter_mut().zip(sk.coords.iter()) {
                *a += w as i128 * c as i128;
            }
        }
        let coords = acc
            .into_iter()
            .map(|c| i64::try_from(c).map_err(|_| Error::Overflow("blocked sketch coordinate")))
            .collect::<Result<Vec<i64>>>()?;
        Ok(BlockedL2Sketch { coords })
    }

    /// Max-entry estimate: the largest per-block l2 estimate.
    pub fn estimate_linf(&self, sk: &BlockedL2Sketch) -> f64 {
        let rpb = self.rows_per_block();
        let mut best = 0.0f64;
        for block in 0..self.block_count() {
            let rows = &sk.coords[block * rpb..(block + 1) * rpb];
            let mut means: Vec<f64> = rows
                .chunks(self.rows_per_group)
                .map(|g| {
                    g.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / g.len() as f64
                })
                .collect();
            let est = median_f64(&mut means).max(0.0).sqrt();
            best = best.max(est);
        }
        best
    }
}
