//! One-round kappa-approximation of the max entry for integer matrices.
//!
//! Alice applies a blocked random-sign l2 sketch to every column of `A` and
//! ships the resulting integer coordinate matrix. Bob combines columns
//! through his `B` to obtain the blocked sketch of every column of the
//! product, estimates each column's max entry, and reports the largest.
//! The sketch shrinks quadratically in kappa; the guarantee degrades to a
//! constant times kappa.

use crate::channel::{EstimateReport, Party, ProtocolSession, ResultValue};
use crate::error::{Error, Result};
use crate::matrix::SparseIntMatrix;
use crate::sketches::{BlockedL2Sketch, BlockedL2Spec};
use crate::wire::{width_for, WireWriter};

const LBL_BLOCK: u64 = 0x4C47_424C;

#[derive(Clone, Debug)]
pub struct GeneralLinfParams {
    pub kappa: usize,
    /// Median-of-means shape of the per-block l2 estimator.
    pub groups: usize,
    pub rows_per_group: usize,
}

impl GeneralLinfParams {
    pub fn new(kappa: usize, max_dim: usize) -> Result<Self> {
        if kappa == 0 || kappa > max_dim.max(1) {
            return Err(Error::InvalidParameter(format!(
                "kappa={kappa} outside [1, {max_dim}]"
            )));
        }
        Ok(Self {
            kappa,
            groups: 5,
            rows_per_group: 6,
        })
    }
}

/// One-round max-entry estimate within a constant times kappa.
pub fn run_linf_general(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &GeneralLinfParams,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("linf-general shapes".into()));
    }
    let (m1, n_in, m2) = (a.n_rows(), a.n_cols(), b.n_cols());
    let spec = BlockedL2Spec::new(m1, params.kappa, session.shared_seed(LBL_BLOCK))?
        .with_reps(params.groups, params.rows_per_group);

    // Coordinates are signed sums of at most block_size entries.
    let coord_bound = (spec.block_size() as u64).saturating_mul(a.entry_bound());
    let coord_width = width_for(coord_bound) + 1;

    let a_cols = a.cols();
    let mut sketches = Vec::with_capacity(n_in);
    let mut w = WireWriter::new();
    for col in &a_cols {
        let sk = spec.apply(col)?;
        for &c in &sk.coords {
            w.put_int(c, coord_width)?;
        }
        sketches.push(sk);
    }
    session.send(Party::Alice, w)?;

    // Bob decodes and pushes the sketch through the product.
    let mut r = session.recv(Party::Bob)?;
    let recv: Vec<BlockedL2Sketch> = (0..n_in)
        .map(|_| {
            Ok(BlockedL2Sketch {
                coords: (0..spec.total_rows())
                    .map(|_| r.get_int(coord_width))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    let b_cols = b.cols();
    let mut best = 0.0f64;
    for j in 0..m2 {
        let terms: Vec<(u64, &BlockedL2Sketch)> =
            b_cols[j].iter().map(|&(k, v)| (v, &recv[k])).collect();
        let column_sketch = spec.combine(&terms)?;
        best = best.max(spec.estimate_linf(&column_sketch));
    }
    session.finish(ResultValue::Scalar(best))
}
