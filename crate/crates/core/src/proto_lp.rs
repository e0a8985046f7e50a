//! Protocols for lp statistics of the product, p in [0, 2].
//!
//! - [`run_lp_estimate`]: 2-round (1+eps)-approximation of the sum of p-th
//!   powers of the product entries. Round 1: Bob ships one lp sketch of
//!   every row of `B` at the coarse accuracy sqrt(eps); Alice combines them
//!   through her rows to estimate every row norm of `C`, groups rows by
//!   norm scale, and samples rows with group-dependent probabilities.
//!   Round 2: Alice ships the group table and the sampled rows of `A`; Bob
//!   reconstructs those product rows exactly and returns the importance-
//!   weighted total. With `boost_reps > 1` the repetitions ride inside the
//!   same two rounds and the median is returned.
//! - [`run_lp_baseline`]: the one-round comparator that ships per-row
//!   sketches at full accuracy eps; its cost scales as 1/eps^2 against the
//!   main protocol's 1/eps.
//! - [`run_l1_exact`]: exact l1 norm of the product in one round from
//!   Alice's column sums.
//! - [`run_l1_sample`]: one-round exact l1 sample of a product position.
//! - [`run_l0_sample_matrix`]: one-round near-uniform sample of a nonzero
//!   product position via per-column l0 sketches and samplers pushed
//!   through the product.
//!
//! Wire schema per boost repetition: round 1 message = `n_inner` sketches
//! of B's rows (fixed-point coords, or 61-bit field buckets for p = 0);
//! round 2 message = 16-bit row group codes, the group table (code, 32-bit
//! probability), then the sampled rows of `A` as sparse vectors prefixed by
//! varint row ids.

use crate::channel::{EstimateReport, Party, ProtocolSession, ResultValue};
use crate::error::{Error, Result};
use crate::matrix::SparseIntMatrix;
use crate::rng;
use crate::sketches::{L0SamplerSpec, L0SamplerState, LpSketchSpec, LpSketchVector, SampleOutcome};
use crate::wire::{width_for, WireReader, WireWriter};

const LBL_SKETCH: u64 = 0x4C50_5345;
const LBL_ROW_SAMPLE: u64 = 0x4C50_5257;
const LBL_L1_COL: u64 = 0x4C31_434C;
const LBL_L1_PICK: u64 = 0x4C31_504B;
const LBL_L0_NORM: u64 = 0x4C30_4E4D;
const LBL_L0_SAMP: u64 = 0x4C30_5350;
const LBL_L0_PICK: u64 = 0x4C30_504B;

/// Row group codes: 0 marks a zero-estimate row, otherwise the signed group
/// index shifted by this bias into a 16-bit field.
const CODE_BIAS: i64 = 1 << 14;
const PROB_SCALE: u64 = u32::MAX as u64;

/// Parameters of the 2-round lp estimation protocol.
#[derive(Clone, Debug)]
pub struct LpProtocolParams {
    pub p: f64,
    pub eps: f64,
    /// Row-sampling budget constant; the expected number of sampled rows is
    /// c_rho / eps.
    pub c_rho: f64,
    /// Sketch failure budget.
    pub delta: f64,
    /// Sketch row constant.
    pub c_sketch: usize,
    /// Odd number of independent repetitions, combined by median.
    pub boost_reps: usize,
}

impl LpProtocolParams {
    pub fn new(p: f64, eps: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p={p} outside [0, 2]")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps={eps} outside (0, 1)")));
        }
        Ok(Self {
            p,
            eps,
            c_rho: 200.0,
            delta: 0.05,
            c_sketch: 6,
            boost_reps: 1,
        })
    }

    pub fn with_boost(mut self, reps: usize) -> Result<Self> {
        if reps == 0 || reps % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "boost_reps must be odd and positive, got {reps}"
            )));
        }
        self.boost_reps = reps;
        Ok(self)
    }

    pub fn with_c_rho(mut self, c_rho: f64) -> Self {
        self.c_rho = c_rho;
        self
    }

    /// Coarse per-row sketch accuracy.
    pub fn beta(&self) -> f64 {
        self.eps.sqrt()
    }

    /// Expected number of sampled rows.
    pub fn rho(&self) -> f64 {
        self.c_rho / self.eps
    }
}

/// Alice's grouping of rows by estimated norm scale.
#[derive(Debug)]
pub(crate) struct GroupTable {
    /// Per row: 0 for zero-estimate rows, else biased group code.
    pub codes: Vec<u64>,
    /// Ascending by group code: (code, quantized sampling probability).
    pub groups: Vec<(u64, u32)>,
}

impl GroupTable {
    fn prob_of(&self, code: u64) -> Option<u32> {
        self.groups
            .iter()
            .find(|&&(c, _)| c == code)
            .map(|&(_, q)| q)
    }
}

fn encode_group(ell: i64) -> u64 {
    (ell + CODE_BIAS).clamp(1, (1 << 16) - 1) as u64
}

/// Group index of a positive row estimate: the integer l with
/// (1+beta)^l <= est < (1+beta)^(l+1).
fn group_of(est: f64, beta: f64) -> i64 {
    (est.ln() / (1.0 + beta).ln()).floor() as i64
}

pub(crate) fn build_group_table(row_est: &[f64], beta: f64, rho: f64) -> GroupTable {
    let total: f64 = row_est.iter().sum();
    let mut codes = vec![0u64; row_est.len()];
    let mut by_group: std::collections::BTreeMap<u64, (usize, f64)> = Default::default();
    if total > 0.0 {
        for (i, &est) in row_est.iter().enumerate() {
            if est > 0.0 {
                let code = encode_group(group_of(est, beta));
                codes[i] = code;
                let slot = by_group.entry(code).or_insert((0, 0.0));
                slot.0 += 1;
                slot.1 += est;
            }
        }
    }
    let groups = by_group
        .into_iter()
        .map(|(code, (count, gnorm))| {
            let p = (rho / count as f64 * gnorm / total).min(1.0);
            let q = ((p * PROB_SCALE as f64).round() as u64).clamp(1, PROB_SCALE) as u32;
            (code, q)
        })
        .collect();
    GroupTable { codes, groups }
}

/// Exact p-th-power norm of a dense product row.
fn row_norm_pow(row: &[u128], p: f64) -> f64 {
    if p == 0.0 {
        row.iter().filter(|&&v| v != 0).count() as f64
    } else if p == 1.0 {
        row.iter().map(|&v| v as f64).sum()
    } else if p == 2.0 {
        row.iter().map(|&v| (v as f64) * (v as f64)).sum()
    } else {
        row.iter()
            .map(|&v| if v == 0 { 0.0 } else { (v as f64).powf(p) })
            .sum()
    }
}

fn product_row(a_row: &[(usize, u64)], b_rows: &[Vec<(usize, u64)>], m2: usize) -> Vec<u128> {
    let mut row = vec![0u128; m2];
    for &(k, va) in a_row {
        for &(j, vb) in &b_rows[k] {
            row[j] += va as u128 * vb as u128;
        }
    }
    row
}

fn encode_sketch(w: &mut WireWriter, sk: &LpSketchVector) -> Result<()> {
    match &sk.data {
        crate::sketches::SketchData::Fixed(coords) => {
            w.put_fixeds(coords);
            Ok(())
        }
        crate::sketches::SketchData::Buckets(buckets) => w.put_uints(buckets, 61),
    }
}

fn decode_sketch(r: &mut WireReader, spec: &LpSketchSpec) -> Result<LpSketchVector> {
    let data = if spec.uses_buckets() {
        crate::sketches::SketchData::Buckets(r.get_uints(spec.sketch_len(), 61)?)
    } else {
        crate::sketches::SketchData::Fixed(r.get_fixeds(spec.sketch_len())?)
    };
    Ok(LpSketchVector { data })
}

pub(crate) fn sample_rows(table: &GroupTable, rng: &mut rand_chacha::ChaCha20Rng) -> Vec<usize> {
    let mut sampled = Vec::new();
    for (i, &code) in table.codes.iter().enumerate() {
        if code == 0 {
            continue;
        }
        let q = table.prob_of(code).expect("group exists for coded row");
        if rng::next_bool(rng, q as f64 / PROB_SCALE as f64) {
            sampled.push(i);
        }
    }
    sampled
}

/// Runs the 2-round estimation phase and returns Bob's estimate without
/// finishing the session; heavy-hitter protocols embed this.
pub(crate) fn lp_estimate_phase(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &LpProtocolParams,
    session: &mut ProtocolSession,
    label_salt: u64,
) -> Result<f64> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.n_rows(),
            a.n_cols(),
            b.n_rows(),
            b.n_cols()
        )));
    }
    let (m1, n_in, m2) = (a.n_rows(), a.n_cols(), b.n_cols());
    let reps = params.boost_reps;
    let beta = params.beta();

    let specs: Vec<LpSketchSpec> = (0..reps)
        .map(|rep| {
            let seed = session.shared_seed(LBL_SKETCH ^ label_salt ^ ((rep as u64) << 32));
            LpSketchSpec::with_c(params.p, beta, params.delta, m2, seed, params.c_sketch)
        })
        .collect::<Result<_>>()?;

    // Round 1: Bob sketches every row of B (through one materialized
    // projection per repetition).
    let b_rows = b.rows();
    for spec in &specs {
        let proj = spec.projection();
        let mut w = WireWriter::new();
        for row in &b_rows {
            let sk = match &proj {
                Some(table) => spec.apply_with(table, row)?,
                None => spec.apply(row)?,
            };
            encode_sketch(&mut w, &sk)?;
        }
        session.send(Party::Bob, w)?;
    }

    // Alice: estimate row norms of C through the product, group, sample.
    let a_rows = a.rows();
    for (rep, spec) in specs.iter().enumerate() {
        let mut r = session.recv(Party::Alice)?;
        let b_sketches: Vec<LpSketchVector> = (0..n_in)
            .map(|_| decode_sketch(&mut r, spec))
            .collect::<Result<_>>()?;
        let row_est: Vec<f64> = a_rows
            .iter()
            .map(|row| {
                let terms: Vec<(u64, &LpSketchVector)> =
                    row.iter().map(|&(k, v)| (v, &b_sketches[k])).collect();
                Ok(spec.estimate(&spec.combine(&terms)?))
            })
            .collect::<Result<_>>()?;
        let table = build_group_table(&row_est, beta, params.rho());
        let mut rng = session.private_rng(
            Party::Alice,
            LBL_ROW_SAMPLE ^ label_salt ^ ((rep as u64) << 32),
        );
        let sampled = sample_rows(&table, &mut rng);

        let mut w = WireWriter::new();
        w.put_uints(&table.codes, 16)?;
        w.put_varint(table.groups.len() as u64);
        for &(code, q) in &table.groups {
            w.put_uint(code, 16)?;
            w.put_uint(q as u64, 32)?;
        }
        w.put_varint(sampled.len() as u64);
        for &i in &sampled {
            w.put_varint(i as u64);
            w.put_sparse_vec(&a_rows[i])?;
        }
        session.send(Party::Alice, w)?;
    }

    // Bob: rebuild the sampled product rows exactly and aggregate.
    let mut estimates = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut r = session.recv(Party::Bob)?;
        let codes = r.get_uints(m1, 16)?;
        let group_count = r.get_varint()? as usize;
        let mut groups = Vec::with_capacity(group_count);
        for _ in 0..group_count {
            let code = r.get_uint(16)?;
            let q = r.get_uint(32)? as u32;
            groups.push((code, q));
        }
        let table = GroupTable {
            codes: codes.clone(),
            groups,
        };
        let sampled_count = r.get_varint()? as usize;
        let mut total = 0.0;
        for _ in 0..sampled_count {
            let i = r.get_varint()? as usize;
            if i >= m1 {
                return Err(Error::Wire(format!("sampled row {i} out of range")));
            }
            let a_row = r.get_sparse_vec()?;
            let q = table
                .prob_of(codes[i])
                .ok_or_else(|| Error::Wire(format!("row {i} has no group entry")))?;
            let p_used = q as f64 / PROB_SCALE as f64;
            let norm = row_norm_pow(&product_row(&a_row, &b_rows, m2), params.p);
            total += norm / p_used;
        }
        estimates.push(total);
    }
    estimates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(estimates[estimates.len() / 2])
}

/// 2-round (1+eps)-approximation of the sum of p-th powers of the entries
/// of `A*B`, p in [0, 2].
pub fn run_lp_estimate(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &LpProtocolParams,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    let est = lp_estimate_phase(a, b, params, session, 0)?;
    session.finish(ResultValue::Scalar(est))
}

/// One-round comparator: Bob ships per-row sketches at full accuracy eps;
/// Alice sums the per-row estimates.
pub fn run_lp_baseline(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &LpProtocolParams,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("baseline shapes".into()));
    }
    let (n_in, m2) = (a.n_cols(), b.n_cols());
    let seed = session.shared_seed(LBL_SKETCH ^ 0xBA5E);
    let spec = LpSketchSpec::with_c(params.p, params.eps, params.delta, m2, seed, params.c_sketch)?;

    let proj = spec.projection();
    let mut w = WireWriter::new();
    for row in b.rows() {
        let sk = match &proj {
            Some(table) => spec.apply_with(table, &row)?,
            None => spec.apply(&row)?,
        };
        encode_sketch(&mut w, &sk)?;
    }
    session.send(Party::Bob, w)?;

    let mut r = session.recv(Party::Alice)?;
    let b_sketches: Vec<LpSketchVector> = (0..n_in)
        .map(|_| decode_sketch(&mut r, &spec))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for row in a.rows() {
        let terms: Vec<(u64, &LpSketchVector)> =
            row.iter().map(|&(k, v)| (v, &b_sketches[k])).collect();
        total += spec.estimate(&spec.combine(&terms)?);
    }
    session.finish(ResultValue::Scalar(total))
}

/// One-round exact computation of the l1 norm of the product, ending at
/// Bob. Returns the exact integer total.
pub(crate) fn l1_exact_phase(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    session: &mut ProtocolSession,
) -> Result<u128> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("l1 shapes".into()));
    }
    let colsum_width = width_for((a.n_rows() as u64).saturating_mul(a.entry_bound()));
    let colsums = a.col_l1s();
    let mut w = WireWriter::new();
    w.put_uints(&colsums, colsum_width)?;
    session.send(Party::Alice, w)?;

    let mut r = session.recv(Party::Bob)?;
    let received = r.get_uints(a.n_cols(), colsum_width)?;
    let row_l1s = b.row_l1s();
    Ok(received
        .iter()
        .zip(&row_l1s)
        .map(|(&c, &rl)| c as u128 * rl as u128)
        .sum())
}

/// Exact l1 norm of the product: one round, Alice ships her column sums.
pub fn run_l1_exact(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    let total = l1_exact_phase(a, b, session)?;
    session.finish(ResultValue::Scalar(total as f64))
}

/// One-round l1 sample: returns a position (row, col) of the product with
/// probability exactly C[row][col] / l1(C), with the inner index as
/// witness.
pub fn run_l1_sample(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("l1 sample shapes".into()));
    }
    let (m1, n_in) = (a.n_rows(), a.n_cols());
    let colsum_width = width_for((m1 as u64).saturating_mul(a.entry_bound()));
    let idx_width = width_for(m1.saturating_sub(1) as u64);

    let colsums = a.col_l1s();
    let a_cols = a.cols();
    let mut arng = session.private_rng(Party::Alice, LBL_L1_COL);
    let picks: Vec<u64> = (0..n_in)
        .map(|j| {
            if colsums[j] == 0 {
                return 0;
            }
            let weights: Vec<f64> = a_cols[j].iter().map(|&(_, v)| v as f64).collect();
            let w = rng::next_weighted(&mut arng, &weights).expect("nonzero column");
            a_cols[j][w].0 as u64
        })
        .collect();

    let mut w = WireWriter::new();
    w.put_uints(&colsums, colsum_width)?;
    w.put_uints(&picks, idx_width)?;
    session.send(Party::Alice, w)?;

    let mut r = session.recv(Party::Bob)?;
    let recv_cols = r.get_uints(n_in, colsum_width)?;
    let recv_picks = r.get_uints(n_in, idx_width)?;
    let row_l1s = b.row_l1s();
    let weights: Vec<f64> = recv_cols
        .iter()
        .zip(&row_l1s)
        .map(|(&c, &rl)| (c as u128 * rl as u128) as f64)
        .collect();
    let mut brng = session.private_rng(Party::Bob, LBL_L1_PICK);
    let Some(j) = rng::next_weighted(&mut brng, &weights) else {
        return session.finish(ResultValue::Empty);
    };
    let b_row = b.row_entries(j);
    let row_weights: Vec<f64> = b_row.iter().map(|&(_, v)| v as f64).collect();
    let col = b_row[rng::next_weighted(&mut brng, &row_weights).expect("nonzero row")].0;
    session.finish(ResultValue::Sample {
        row: recv_picks[j] as usize,
        col,
        witness: Some(j),
    })
}

/// One-round l0 sample: returns a nonzero position of the product with
/// probability (1 +- eps) / l0(C). Alice ships per-column l0 sketches (for
/// column-norm weights) and per-column l0 sampler states of `A`; Bob pushes
/// both through the product, picks a column proportional to its estimated
/// l0 norm, and recovers a row index from the sampler.
pub fn run_l0_sample_matrix(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    eps: f64,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("l0 sample shapes".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps={eps} outside (0, 1)")));
    }
    let (m1, n_in, m2) = (a.n_rows(), a.n_cols(), b.n_cols());
    let norm_spec = LpSketchSpec::new(0.0, eps, 0.05, m1, session.shared_seed(LBL_L0_NORM))?;
    let samp_spec = L0SamplerSpec::new(m1, session.shared_seed(LBL_L0_SAMP))?;

    let a_cols = a.cols();
    let colsum_bound = (m1 as u64).saturating_mul(a.entry_bound());
    let sum_width = width_for(colsum_bound);
    let isum_width = width_for(colsum_bound.saturating_mul(m1.saturating_sub(1).max(1) as u64));

    let mut w = WireWriter::new();
    let mut samp_states = Vec::with_capacity(n_in);
    for col in &a_cols {
        encode_sketch(&mut w, &norm_spec.apply(col)?)?;
        samp_states.push(samp_spec.apply(col)?);
    }
    for st in &samp_states {
        st.encode(&mut w, sum_width, isum_width)?;
    }
    session.send(Party::Alice, w)?;

    // Bob decodes and pushes everything through the product.
    let mut r = session.recv(Party::Bob)?;
    let recv_norm: Vec<LpSketchVector> = (0..n_in)
        .map(|_| decode_sketch(&mut r, &norm_spec))
        .collect::<Result<_>>()?;
    let recv_samp: Vec<L0SamplerState> = (0..n_in)
        .map(|_| L0SamplerState::decode(&mut r, &samp_spec, sum_width, isum_width))
        .collect::<Result<_>>()?;

    let b_cols = b.cols();
    let mut col_est = vec![0.0f64; m2];
    let mut col_states = Vec::with_capacity(m2);
    for j in 0..m2 {
        let norm_terms: Vec<(u64, &LpSketchVector)> =
            b_cols[j].iter().map(|&(k, v)| (v, &recv_norm[k])).collect();
        col_est[j] = norm_spec.estimate(&norm_spec.combine(&norm_terms)?);
        let samp_terms: Vec<(u64, &L0SamplerState)> =
            b_cols[j].iter().map(|&(k, v)| (v, &recv_samp[k])).collect();
        col_states.push(samp_spec.combine(&samp_terms)?);
    }
    if col_states.iter().all(|st| st.is_zero()) {
        return session.finish(ResultValue::Empty);
    }
    let weights: Vec<f64> = col_est
        .iter()
        .zip(&col_states)
        .map(|(&e, st)| {
            if st.is_zero() {
                0.0
            } else {
                e.max(f64::MIN_POSITIVE)
            }
        })
        .collect();
    let mut brng = session.private_rng(Party::Bob, LBL_L0_PICK);
    let Some(j) = rng::next_weighted(&mut brng, &weights) else {
        return session.finish(ResultValue::Empty);
    };
    match samp_spec.sample(&col_states[j]) {
        SampleOutcome::Index(i) => session.finish(ResultValue::Sample {
            row: i,
            col: j,
            witness: None,
        }),
        _ => session.finish(ResultValue::Failed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseIntMatrix;
    use crate::rng;
    use rand_core::Rng as _;

    fn random_binary(n: usize, m: usize, density: f64, seed: u64) -> SparseIntMatrix {
        let mut r = rng::chacha(seed, 0xABCD);
        let mut triples = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng::next_f64(&mut r) < density {
                    triples.push((i, j, 1));
                }
            }
        }
        SparseIntMatrix::from_entries(n, m, triples).unwrap()
    }

    #[test]
    fn zero_product_estimates_zero_exactly() {
        let z = SparseIntMatrix::zero(8, 8);
        let params = LpProtocolParams::new(1.0, 0.25).unwrap();
        let mut s = ProtocolSession::new(3);
        let report = run_lp_estimate(&z, &z, &params, &mut s).unwrap();
        assert_eq!(report.result, ResultValue::Scalar(0.0));
        assert_eq!(report.rounds, 2);
    }

    #[test]
    fn identity_l0_estimate_within_bounds() {
        let n = 16;
        let id = SparseIntMatrix::identity(n);
        let params = LpProtocolParams::new(0.0, 0.25).unwrap();
        let mut ok = 0;
        let trials = 200;
        for seed in 0..trials {
            let mut s = ProtocolSession::new(seed);
            let report = run_lp_estimate(&id, &id, &params, &mut s).unwrap();
            assert_eq!(report.rounds, 2);
            let est = report.result.scalar().unwrap();
            if est >= n as f64 / 1.25 && est <= n as f64 * 1.25 {
                ok += 1;
            }
        }
        assert!(ok >= trials * 85 / 100, "only {ok}/{trials} within bounds");
    }

    #[test]
    fn random_binary_l1_estimate_tracks_oracle() {
        let a = random_binary(32, 32, 0.2, 5);
        let b = random_binary(32, 32, 0.2, 6);
        let oracle = a.multiply(&b).unwrap().lp_norm_pow(1.0).unwrap();
        let params = LpProtocolParams::new(1.0, 0.25).unwrap();
        let mut ok = 0;
        let trials = 200;
        for seed in 0..trials {
            let mut s = ProtocolSession::new(seed);
            let report = run_lp_estimate(&a, &b, &params, &mut s).unwrap();
            let est = report.result.scalar().unwrap();
            if est >= oracle / 1.25 && est <= oracle * 1.25 {
                ok += 1;
            }
        }
        assert!(ok >= trials * 85 / 100, "only {ok}/{trials} within bounds");
    }

    #[test]
    fn estimator_is_unbiased_given_groups() {
        // Freeze the sketch phase; average the sampling estimator over many
        // draws and compare with the grouped rows' exact total.
        let a = random_binary(12, 12, 0.3, 41);
        let b = random_binary(12, 12, 0.3, 42);
        let p = 1.0;
        let beta = 0.5f64;
        let spec = LpSketchSpec::new(p, beta, 0.05, 12, 777).unwrap();
        let b_rows = b.rows();
        let sketches: Vec<LpSketchVector> = b_rows.iter().map(|r| spec.apply(r).unwrap()).collect();
        let a_rows = a.rows();
        let row_est: Vec<f64> = a_rows
            .iter()
            .map(|row| {
                let terms: Vec<(u64, &LpSketchVector)> =
                    row.iter().map(|&(k, v)| (v, &sketches[k])).collect();
                spec.estimate(&spec.combine(&terms).unwrap())
            })
            .collect();
        let table = build_group_table(&row_est, beta, 4.0);

        let exact: f64 = (0..12)
            .filter(|&i| table.codes[i] != 0)
            .map(|i| row_norm_pow(&product_row(&a_rows[i], &b_rows, 12), p))
            .sum();

        let draws = 10_000;
        let mut mean = 0.0;
        let mut rng = rng::chacha(9, 9);
        for _ in 0..draws {
            let mut draw_rng = rng::chacha(rng.next_u64(), 1);
            let sampled = sample_rows(&table, &mut draw_rng);
            let mut est = 0.0;
            for i in sampled {
                let q = table.prob_of(table.codes[i]).unwrap();
                est += row_norm_pow(&product_row(&a_rows[i], &b_rows, 12), p)
                    / (q as f64 / PROB_SCALE as f64);
            }
            mean += est;
        }
        mean /= draws as f64;
        assert!(
            (mean - exact).abs() <= 0.05 * exact.max(1.0),
            "mean {mean} vs exact {exact}"
        );
    }

    #[test]
    fn sampled_rows_satisfy_group_inequality() {
        // Row codes on the wire match the group each estimate lands in,
        // recomputable from the shared sketch seed.
        let a = random_binary(16, 16, 0.3, 11);
        let b = random_binary(16, 16, 0.3, 12);
        let params = LpProtocolParams::new(1.0, 0.25).unwrap();
        let mut s = ProtocolSession::new(55);
        run_lp_estimate(&a, &b, &params, &mut s).unwrap();
        let msg = &s.messages()[1];
        assert_eq!(msg.sender, Party::Alice);
        let mut r = WireReader::new(msg.payload.clone(), msg.bit_length);
        let codes = r.get_uints(16, 16).unwrap();
        let beta = params.beta();
        let mut probe = ProtocolSession::new(55);
        let seed = probe.shared_seed(LBL_SKETCH);
        let spec = LpSketchSpec::new(1.0, beta, params.delta, 16, seed).unwrap();
        let sketches: Vec<LpSketchVector> =
            b.rows().iter().map(|r| spec.apply(r).unwrap()).collect();
        for (i, row) in a.rows().iter().enumerate() {
            let terms: Vec<(u64, &LpSketchVector)> =
                row.iter().map(|&(k, v)| (v, &sketches[k])).collect();
            let est = spec.estimate(&spec.combine(&terms).unwrap());
            if est > 0.0 {
                let ell = group_of(est, beta);
                assert_eq!(codes[i], encode_group(ell), "row {i}");
                let lo = (1.0 + beta).powi(ell as i32);
                assert!(est >= lo * 0.999 && est < lo * (1.0 + beta) * 1.001);
            } else {
                assert_eq!(codes[i], 0);
            }
        }
    }

    #[test]
    fn l1_exact_matches_oracle_every_time() {
        for seed in 0..50 {
            let a = random_binary(12, 10, 0.35, seed);
            let b = random_binary(10, 14, 0.35, seed + 500);
            let oracle = a.multiply(&b).unwrap().lp_norm_pow(1.0).unwrap();
            let mut s = ProtocolSession::new(seed);
            let report = run_l1_exact(&a, &b, &mut s).unwrap();
            assert_eq!(report.result.scalar().unwrap(), oracle);
            assert_eq!(report.rounds, 1);
        }
    }

    #[test]
    fn l1_exact_hand_cases() {
        let ones = SparseIntMatrix::from_entries(
            2,
            2,
            (0..2).flat_map(|i| (0..2).map(move |j| (i, j, 1))),
        )
        .unwrap();
        let mut s = ProtocolSession::new(0);
        let report = run_l1_exact(&ones, &ones, &mut s).unwrap();
        assert_eq!(report.result.scalar().unwrap(), 8.0);

        let id = SparseIntMatrix::identity(7);
        let b = random_binary(7, 9, 0.4, 3);
        let mut s = ProtocolSession::new(1);
        let report = run_l1_exact(&id, &b, &mut s).unwrap();
        assert_eq!(report.result.scalar().unwrap(), b.lp_norm_pow(1.0).unwrap());
    }

    #[test]
    fn l1_exact_transcript_ignores_unsent_structure() {
        // Moving a 1 within a column preserves column sums, so the whole
        // transcript and Bob's view are unchanged.
        let a = SparseIntMatrix::from_entries(3, 2, [(0, 0, 1), (2, 1, 1)]).unwrap();
        let a2 = SparseIntMatrix::from_entries(3, 2, [(1, 0, 1), (2, 1, 1)]).unwrap();
        let b = random_binary(2, 3, 0.5, 8);
        let mut s1 = ProtocolSession::new(4);
        let mut s2 = ProtocolSession::new(4);
        run_l1_exact(&a, &b, &mut s1).unwrap();
        run_l1_exact(&a2, &b, &mut s2).unwrap();
        assert_eq!(s1.transcript_bytes(), s2.transcript_bytes());
    }

    #[test]
    fn l1_sample_single_nonzero_always_found() {
        let a = SparseIntMatrix::from_entries(6, 6, [(3, 2, 1)]).unwrap();
        let b = SparseIntMatrix::from_entries(6, 6, [(2, 4, 1)]).unwrap();
        for seed in 0..50 {
            let mut s = ProtocolSession::new(seed);
            let report = run_l1_sample(&a, &b, &mut s).unwrap();
            assert_eq!(report.rounds, 1);
            match report.result {
                ResultValue::Sample { row, col, witness } => {
                    assert_eq!((row, col, witness), (3, 4, Some(2)));
                }
                other => panic!("unexpected result {other:?}"),
            }
        }
    }

    #[test]
    fn l1_sample_zero_product_is_empty() {
        let a = SparseIntMatrix::zero(4, 4);
        let b = SparseIntMatrix::identity(4);
        let mut s = ProtocolSession::new(2);
        let report = run_l1_sample(&a, &b, &mut s).unwrap();
        assert_eq!(report.result, ResultValue::Empty);
    }

    #[test]
    fn l1_sample_identity_is_fair() {
        let id = SparseIntMatrix::identity(2);
        let mut hits = [0usize; 2];
        let draws = 10_000;
        for seed in 0..draws {
            let mut s = ProtocolSession::new(seed as u64);
            match run_l1_sample(&id, &id, &mut s).unwrap().result {
                ResultValue::Sample { row, col, .. } => {
                    assert_eq!(row, col);
                    hits[row] += 1;
                }
                other => panic!("unexpected result {other:?}"),
            }
        }
        let f0 = hits[0] as f64 / draws as f64;
        assert!((f0 - 0.5).abs() <= 0.05, "frequency {f0}");
    }

    #[test]
    fn l0_sample_trivial_cases() {
        let a = SparseIntMatrix::from_entries(5, 5, [(1, 3, 1)]).unwrap();
        let b = SparseIntMatrix::from_entries(5, 5, [(3, 2, 1)]).unwrap();
        let mut found = 0;
        for seed in 0..30 {
            let mut s = ProtocolSession::new(seed);
            let report = run_l0_sample_matrix(&a, &b, 0.25, &mut s).unwrap();
            assert_eq!(report.rounds, 1);
            match report.result {
                ResultValue::Sample { row, col, .. } => {
                    assert_eq!((row, col), (1, 2));
                    found += 1;
                }
                ResultValue::Failed => {}
                other => panic!("unexpected result {other:?}"),
            }
        }
        assert!(found >= 28, "only {found}/30 draws succeeded");

        let z = SparseIntMatrix::zero(5, 5);
        let mut s = ProtocolSession::new(1);
        let report = run_l0_sample_matrix(&z, &b, 0.25, &mut s).unwrap();
        assert_eq!(report.result, ResultValue::Empty);
    }

    #[test]
    fn l0_sample_identity_is_fair() {
        let id = SparseIntMatrix::identity(2);
        let mut hits = [0usize; 2];
        let mut fails = 0;
        let draws = 10_000;
        for seed in 0..draws {
            let mut s = ProtocolSession::new(seed as u64);
            match run_l0_sample_matrix(&id, &id, 0.25, &mut s).unwrap().result {
                ResultValue::Sample { row, col, .. } => {
                    assert_eq!(row, col);
                    hits[row] += 1;
                }
                ResultValue::Failed => fails += 1,
                other => panic!("unexpected result {other:?}"),
            }
        }
        assert!(fails < draws / 50, "too many failures: {fails}");
        let succ = (draws - fails) as f64;
        let f0 = hits[0] as f64 / succ;
        assert!((f0 - 0.5).abs() <= 0.05, "frequency {f0}");
    }

    #[test]
    fn baseline_is_one_round_and_tracks_oracle() {
        let a = random_binary(24, 24, 0.25, 91);
        let b = random_binary(24, 24, 0.25, 92);
        let oracle = a.multiply(&b).unwrap().lp_norm_pow(1.0).unwrap();
        let params = LpProtocolParams::new(1.0, 0.3).unwrap();
        let mut ok = 0;
        for seed in 0..100 {
            let mut s = ProtocolSession::new(seed);
            let report = run_lp_baseline(&a, &b, &params, &mut s).unwrap();
            assert_eq!(report.rounds, 1);
            let est = report.result.scalar().unwrap();
            if est >= oracle / 1.3 && est <= oracle * 1.3 {
                ok += 1;
            }
        }
        assert!(ok >= 85, "only {ok}/100 within bounds");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LpProtocolParams::new(2.5, 0.2).is_err());
        assert!(LpProtocolParams::new(1.0, 0.0).is_err());
        assert!(LpProtocolParams::new(1.0, 1.0).is_err());
        assert!(LpProtocolParams::new(1.0, 0.2)
            .unwrap()
            .with_boost(4)
            .is_err());
    }
}
