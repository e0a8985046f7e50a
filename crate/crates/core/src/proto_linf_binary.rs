//! Max-entry estimation for binary matrices, and the index-exchange
//! primitive behind it.
//!
//! Index exchange: for every inner-dimension item `j`, whichever party holds
//! fewer occurrences of `j` (column `j` of `A` at Alice, row `j` of `B` at
//! Bob) ships its index list. The receiver then knows item `j`'s full
//! contribution, so the parties end up with matrices `C_A + C_B = A*B`
//! without either learning the whole product.
//!
//! [`run_linf_2eps`] wraps the exchange in entry subsampling: Alice thins
//! the 1-entries of `A` at geometric rates, the parties locate the first
//! level whose product l1 mass falls under a threshold, exchange index
//! lists at that level, and rescale `max(linf(C_A), linf(C_B))`. Three
//! rounds: level column sums; chosen level, row counts and Bob's lists;
//! Alice's lists and her half's max entry.
//!
//! [`run_linf_kappa`] adds universe sampling (whole columns of `A` kept
//! with probability `q`) in front of the same machinery, trading accuracy
//! factor kappa for communication. When the sampled product is empty it
//! answers 0/1 from the exact l1 norm alone, in one round.

use crate::channel::{EstimateReport, Party, ProtocolSession, ResultValue};
use crate::error::{Error, Result};
use crate::matrix::SparseIntMatrix;
use crate::rng;
use crate::wire::{width_for, WireReader, WireWriter};
use std::collections::BTreeMap;

const LBL_LEVELS: u64 = 0x4C46_4C56;
const LBL_UNIVERSE: u64 = 0x4C46_554E;

/// Parameters of the (2+eps) protocol.
#[derive(Clone, Debug)]
pub struct LinfParams {
    pub eps: f64,
    /// Threshold constant: the level threshold is
    /// c_gamma * ln(dim) / eps^2 * (rows * cols).
    pub c_gamma: f64,
}

impl LinfParams {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("eps={eps} outside (0, 1]")));
        }
        Ok(Self { eps, c_gamma: 8.0 })
    }

    pub fn with_c_gamma(mut self, c_gamma: f64) -> Self {
        self.c_gamma = c_gamma;
        self
    }
}

/// Parameters of the kappa-approximation protocol.
#[derive(Clone, Debug)]
pub struct UniverseSampleParams {
    pub kappa: f64,
    /// Universe rate constant: q = min(c_alpha * ln(dim) / kappa, 1).
    pub c_alpha: f64,
}

impl UniverseSampleParams {
    pub fn new(kappa: f64, max_dim: usize) -> Result<Self> {
        if !(kappa >= 4.0 && kappa <= max_dim.max(4) as f64) {
            return Err(Error::InvalidParameter(format!(
                "kappa={kappa} outside [4, {max_dim}]"
            )));
        }
        Ok(Self {
            kappa,
            c_alpha: 8.0,
        })
    }

    pub fn with_c_alpha(mut self, c_alpha: f64) -> Self {
        self.c_alpha = c_alpha;
        self
    }
}

/// Additive split of a (possibly subsampled) product: `c_alice + c_bob`
/// equals it exactly. `ownership[j]` is the party that received item j's
/// list and therefore knows that item's full contribution.
#[derive(Clone, Debug)]
pub struct AdditiveSplit {
    pub c_alice: SparseIntMatrix,
    pub c_bob: SparseIntMatrix,
    pub ownership: Vec<Party>,
}

pub(crate) fn ln_dim(dims: &[usize]) -> f64 {
    (dims.iter().copied().max().unwrap_or(2).max(2) as f64).ln()
}

/// Accumulates the rank-one contribution of one item into a split half.
pub(crate) fn outer_accumulate(
    acc: &mut BTreeMap<(usize, usize), u128>,
    col: &[(usize, u64)],
    row: &[(usize, u64)],
) {
    for &(i, va) in col {
        for &(j, vb) in row {
            *acc.entry((i, j)).or_insert(0) += va as u128 * vb as u128;
        }
    }
}

pub(crate) fn build_half(
    acc: BTreeMap<(usize, usize), u128>,
    n_rows: usize,
    n_cols: usize,
) -> Result<SparseIntMatrix> {
    let mut entries = BTreeMap::new();
    for ((i, j), v) in acc {
        if v > u64::MAX as u128 {
            return Err(Error::Overflow("split entry"));
        }
        if v > 0 {
            entries.insert((i, j), v as u64);
        }
    }
    Ok(SparseIntMatrix::from_map(n_rows, n_cols, entries, u64::MAX))
}

/// Encodes the item lists a party owns, ascending by item. Binary lists are
/// bare fixed-width indices (the receiver knows the counts); integer lists
/// are self-delimiting sparse vectors.
pub(crate) fn put_item_lists(
    w: &mut WireWriter,
    lists: &[(usize, Vec<(usize, u64)>)],
    binary: bool,
    idx_width: u32,
) -> Result<()> {
    for (_, vec) in lists {
        if binary {
            for &(i, _) in vec {
                w.put_uint(i as u64, idx_width)?;
            }
        } else {
            w.put_sparse_vec(vec)?;
        }
    }
    Ok(())
}

/// Decodes item lists for the given items; `counts[j]` must hold the list
/// length for the binary format.
pub(crate) fn get_item_lists(
    r: &mut WireReader,
    items: &[usize],
    counts: &[u64],
    binary: bool,
    idx_width: u32,
) -> Result<Vec<(usize, Vec<(usize, u64)>)>> {
    let mut out = Vec::with_capacity(items.len());
    for &j in items {
        let vec = if binary {
            (0..counts[j])
                .map(|_| Ok((r.get_uint(idx_width)? as usize, 1u64)))
                .collect::<Result<Vec<_>>>()?
        } else {
            r.get_sparse_vec()?
        };
        out.push((j, vec));
    }
    Ok(out)
}

/// Item owners by the min-side rule; ties go to Alice.
pub(crate) fn alice_items(u: &[u64], v: &[u64]) -> Vec<usize> {
    (0..u.len()).filter(|&j| u[j] <= v[j]).collect()
}

pub(crate) fn bob_items(u: &[u64], v: &[u64]) -> Vec<usize> {
    (0..u.len()).filter(|&j| v[j] < u[j]).collect()
}

/// Standalone index exchange: three messages (Alice's counts; Bob's counts
/// and lists; Alice's lists), producing the additive split. For binary
/// inputs the list cost is exactly sum_j min(u_j, v_j) indices of
/// ceil(log2) width plus the two count vectors.
pub fn index_exchange(
    a_sub: &SparseIntMatrix,
    b: &SparseIntMatrix,
    session: &mut ProtocolSession,
) -> Result<AdditiveSplit> {
    if a_sub.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("index exchange shapes".into()));
    }
    let (m1, n_in, m2) = (a_sub.n_rows(), a_sub.n_cols(), b.n_cols());
    let binary = a_sub.is_binary() && b.is_binary();
    let a_cols = a_sub.cols();
    let b_rows = b.rows();
    let u: Vec<u64> = a_cols.iter().map(|c| c.len() as u64).collect();
    let v: Vec<u64> = b_rows.iter().map(|r| r.len() as u64).collect();

    // Alice announces her per-item counts.
    let mut w = WireWriter::new();
    w.put_uints(&u, width_for(m1 as u64))?;
    session.send(Party::Alice, w)?;
    let mut r = session.recv(Party::Bob)?;
    let u_at_bob = r.get_uints(n_in, width_for(m1 as u64))?;

    // Bob replies with his counts and the lists he owns.
    let bob_owned = bob_items(&u_at_bob, &v);
    let mut w = WireWriter::new();
    w.put_uints(&v, width_for(m2 as u64))?;
    let bob_lists: Vec<(usize, Vec<(usize, u64)>)> =
        bob_owned.iter().map(|&j| (j, b_rows[j].clone())).collect();
    put_item_lists(
        &mut w,
        &bob_lists,
        binary,
        width_for(m2.saturating_sub(1) as u64),
    )?;
    session.send(Party::Bob, w)?;

    let mut r = session.recv(Party::Alice)?;
    let v_at_alice = r.get_uints(n_in, width_for(m2 as u64))?;
    let bob_items_alice = bob_items(&u, &v_at_alice);
    let recv_rows = get_item_lists(
        &mut r,
        &bob_items_alice,
        &v_at_alice,
        binary,
        width_for(m2.saturating_sub(1) as u64),
    )?;

    // Alice ships the lists she owns.
    let alice_owned = alice_items(&u, &v_at_alice);
    let alice_lists: Vec<(usize, Vec<(usize, u64)>)> = alice_owned
        .iter()
        .map(|&j| (j, a_cols[j].clone()))
        .collect();
    let mut w = WireWriter::new();
    put_item_lists(
        &mut w,
        &alice_lists,
        binary,
        width_for(m1.saturating_sub(1) as u64),
    )?;
    session.send(Party::Alice, w)?;

    let mut r = session.recv(Party::Bob)?;
    let alice_items_bob = alice_items(&u_at_bob, &v);
    let recv_cols = get_item_lists(
        &mut r,
        &alice_items_bob,
        &u_at_bob,
        binary,
        width_for(m1.saturating_sub(1) as u64),
    )?;

    // Each party accumulates the items it received in full.
    let mut acc_a = BTreeMap::new();
    for (j, row) in &recv_rows {
        outer_accumulate(&mut acc_a, &a_cols[*j], row);
    }
    let mut acc_b = BTreeMap::new();
    for (j, col) in &recv_cols {
        outer_accumulate(&mut acc_b, col, &b_rows[*j]);
    }
    let ownership = (0..n_in)
        .map(|j| if u[j] <= v[j] { Party::Bob } else { Party::Alice })
        .collect();
    Ok(AdditiveSplit {
        c_alice: build_half(acc_a, m1, m2)?,
        c_bob: build_half(acc_b, m1, m2)?,
        ownership,
    })
}

/// Subsampling depth of one entry: the deepest level at which it survives,
/// under nested thresholds p_level = rate^level.
fn entry_depth(uniform: f64, rate_ln: f64, max_level: usize) -> usize {
    if uniform <= 0.0 {
        return max_level;
    }
    let d = (-uniform.ln() / rate_ln).floor();
    if d.is_finite() && d >= 0.0 {
        (d as usize).min(max_level)
    } else {
        0
    }
}

/// Per-level column sums of the entry-subsampled matrix, plus the depth of
/// every entry. Entry fates are nested: deeper levels keep subsets.
struct LevelView {
    colsums: Vec<Vec<u64>>,
    depths: BTreeMap<(usize, usize), usize>,
}

fn level_view(a: &SparseIntMatrix, seed: u64, rate_ln: f64, levels: usize) -> LevelView {
    let n_in = a.n_cols();
    let mut colsums = vec![vec![0u64; n_in]; levels + 1];
    let mut depths = BTreeMap::new();
    for (i, k, _) in a.entries() {
        let u = rng::prf_f64(seed, i as u64, k as u64);
        let d = entry_depth(u, rate_ln, levels);
        depths.insert((i, k), d);
        for cs in colsums.iter_mut().take(d + 1) {
            cs[k] += 1;
        }
    }
    LevelView { colsums, depths }
}

impl LevelView {
    /// Column supports of the level-`l` matrix.
    fn cols_at(&self, level: usize, n_in: usize) -> Vec<Vec<(usize, u64)>> {
        let mut cols = vec![Vec::new(); n_in];
        for (&(i, k), &d) in &self.depths {
            if d >= level {
                cols[k].push((i, 1));
            }
        }
        cols
    }
}

fn product_l1(colsums: &[u64], b_row_l1s: &[u64]) -> u128 {
    colsums
        .iter()
        .zip(b_row_l1s)
        .map(|(&c, &r)| c as u128 * r as u128)
        .sum()
}

/// Rounds 2 and 3 shared by the two protocols: Bob announces the chosen
/// level, his counts and lists; Alice responds with her lists and her
/// half's max entry; Bob ends up with both halves' max entries.
#[allow(clippy::too_many_arguments)]
fn exchange_at_level(
    session: &mut ProtocolSession,
    a_cols_sub: &[Vec<(usize, u64)>],
    b: &SparseIntMatrix,
    u_at_bob: &[u64],
    lstar: usize,
    lstar_width: u32,
    m1: usize,
    m2: usize,
) -> Result<(u64, u64)> {
    let n_in = a_cols_sub.len();
    let b_rows = b.rows();
    let v: Vec<u64> = b_rows.iter().map(|r| r.len() as u64).collect();
    let bob_owned = bob_items(u_at_bob, &v);

    // Round 2: Bob.
    let mut w = WireWriter::new();
    w.put_uint(lstar as u64, lstar_width)?;
    w.put_uints(&v, width_for(m2 as u64))?;
    let bob_lists: Vec<(usize, Vec<(usize, u64)>)> =
        bob_owned.iter().map(|&j| (j, b_rows[j].clone())).collect();
    put_item_lists(
        &mut w,
        &bob_lists,
        true,
        width_for(m2.saturating_sub(1) as u64),
    )?;
    session.send(Party::Bob, w)?;

    // Alice decodes, accumulates her half, ships her lists and its max.
    let mut r = session.recv(Party::Alice)?;
    let _lstar_echo = r.get_uint(lstar_width)?;
    let v_at_alice = r.get_uints(n_in, width_for(m2 as u64))?;
    let u: Vec<u64> = a_cols_sub.iter().map(|c| c.len() as u64).collect();
    let bob_items_a = bob_items(&u, &v_at_alice);
    let recv_rows = get_item_lists(
        &mut r,
        &bob_items_a,
        &v_at_alice,
        true,
        width_for(m2.saturating_sub(1) as u64),
    )?;
    let mut acc_a = BTreeMap::new();
    for (j, row) in &recv_rows {
        outer_accumulate(&mut acc_a, &a_cols_sub[*j], row);
    }
    let c_a_inf = acc_a.values().copied().max().unwrap_or(0) as u64;

    let alice_owned = alice_items(&u, &v_at_alice);
    let alice_lists: Vec<(usize, Vec<(usize, u64)>)> = alice_owned
        .iter()
        .map(|&j| (j, a_cols_sub[j].clone()))
        .collect();
    let mut w = WireWriter::new();
    put_item_lists(
        &mut w,
        &alice_lists,
        true,
        width_for(m1.saturating_sub(1) as u64),
    )?;
    w.put_uint(c_a_inf, width_for(n_in as u64))?;
    session.send(Party::Alice, w)?;

    // Bob accumulates his half.
    let mut r = session.recv(Party::Bob)?;
    let alice_items_b = alice_items(u_at_bob, &v);
    let recv_cols = get_item_lists(
        &mut r,
        &alice_items_b,
        u_at_bob,
        true,
        width_for(m1.saturating_sub(1) as u64),
    )?;
    let mut acc_b = BTreeMap::new();
    for (j, col) in &recv_cols {
        outer_accumulate(&mut acc_b, col, &b_rows[*j]);
    }
    let c_b_inf = acc_b.values().copied().max().unwrap_or(0) as u64;
    let c_a_inf_recv = r.get_uint(width_for(n_in as u64))?;
    Ok((c_a_inf_recv, c_b_inf))
}

/// 3-round (2+eps)-approximation of the max entry of `A*B` for binary
/// matrices.
pub fn run_linf_2eps(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &LinfParams,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("linf shapes".into()));
    }
    if !a.is_binary() || !b.is_binary() {
        return Err(Error::InvalidParameter(
            "binary matrices required; use the blocked-sketch protocol for integers".into(),
        ));
    }
    let (m1, n_in, m2) = (a.n_rows(), a.n_cols(), b.n_cols());
    let eps = params.eps;
    let rate_ln = (1.0 + eps).ln();
    let levels = ((((m1 * n_in).max(2)) as f64).ln() / rate_ln).ceil() as usize;
    let seed = session.private_seed(Party::Alice, LBL_LEVELS);
    let view = level_view(a, seed, rate_ln, levels);

    // Round 1: per-level column sums.
    let mut w = WireWriter::new();
    for cs in &view.colsums {
        w.put_uints(cs, width_for(m1 as u64))?;
    }
    session.send(Party::Alice, w)?;

    // Bob: product l1 per level, first level under threshold.
    let mut r = session.recv(Party::Bob)?;
    let mut level_colsums = Vec::with_capacity(levels + 1);
    for _ in 0..=levels {
        level_colsums.push(r.get_uints(n_in, width_for(m1 as u64))?);
    }
    let b_row_l1s = b.row_l1s();
    let gamma = params.c_gamma * ln_dim(&[m1, n_in, m2]) / (eps * eps);
    let threshold = gamma * (m1 as f64) * (m2 as f64);
    let lstar = (0..=levels)
        .find(|&l| (product_l1(&level_colsums[l], &b_row_l1s) as f64) <= threshold)
        .unwrap_or(levels);

    let a_cols_sub = view.cols_at(lstar, n_in);
    let (c_a_inf, c_b_inf) = exchange_at_level(
        session,
        &a_cols_sub,
        b,
        &level_colsums[lstar],
        lstar,
        width_for(levels as u64),
        m1,
        m2,
    )?;
    let p_lstar = (1.0 + eps).powi(-(lstar as i32));
    let estimate = c_a_inf.max(c_b_inf) as f64 / p_lstar;
    session.finish(ResultValue::Scalar(estimate))
}

/// kappa-approximation of the max entry for binary matrices via universe
/// sampling plus geometric entry subsampling. At most 3 rounds; one round
/// when the sampled product is empty.
pub fn run_linf_kappa(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &UniverseSampleParams,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("linf shapes".into()));
    }
    if !a.is_binary() || !b.is_binary() {
        return Err(Error::InvalidParameter("binary matrices required".into()));
    }
    let (m1, n_in, m2) = (a.n_rows(), a.n_cols(), b.n_cols());
    let alpha = params.c_alpha * ln_dim(&[m1, n_in, m2]);
    let q = (alpha / params.kappa).min(1.0);

    // Universe sampling: zero out non-sampled columns of A.
    let useed = session.private_seed(Party::Alice, LBL_UNIVERSE);
    let kept: Vec<bool> = (0..n_in)
        .map(|k| rng::prf_f64(useed, 0x636F, k as u64) < q)
        .collect();
    let a_prime = SparseIntMatrix::from_map(
        m1,
        n_in,
        a.entries()
            .filter(|&(_, k, _)| kept[k])
            .map(|(i, k, v)| ((i, k), v))
            .collect(),
        a.max_value(),
    );

    let levels = (((m1 * n_in).max(2)) as f64).log2().ceil() as usize;
    let seed = session.private_seed(Party::Alice, LBL_LEVELS);
    let view = level_view(&a_prime, seed, std::f64::consts::LN_2, levels);

    // Round 1: column sums of A (for the exact product l1) and of every
    // subsampling level of A'.
    let mut w = WireWriter::new();
    w.put_uints(&a.col_l1s(), width_for(m1 as u64))?;
    for cs in &view.colsums {
        w.put_uints(cs, width_for(m1 as u64))?;
    }
    session.send(Party::Alice, w)?;

    let mut r = session.recv(Party::Bob)?;
    let full_colsums = r.get_uints(n_in, width_for(m1 as u64))?;
    let mut level_colsums = Vec::with_capacity(levels + 1);
    for _ in 0..=levels {
        level_colsums.push(r.get_uints(n_in, width_for(m1 as u64))?);
    }
    let b_row_l1s = b.row_l1s();
    let c_l1 = product_l1(&full_colsums, &b_row_l1s);
    let d_l1 = product_l1(&level_colsums[0], &b_row_l1s);
    if d_l1 == 0 {
        let out = if c_l1 == 0 { 0.0 } else { 1.0 };
        return session.finish(ResultValue::Scalar(out));
    }

    let threshold = alpha / params.kappa * (m1 as f64) * (m2 as f64);
    let lstar = (0..=levels)
        .find(|&l| (product_l1(&level_colsums[l], &b_row_l1s) as f64) <= threshold)
        .unwrap_or(levels);
    let a_cols_sub = view.cols_at(lstar, n_in);
    let (c_a_inf, c_b_inf) = exchange_at_level(
        session,
        &a_cols_sub,
        b,
        &level_colsums[lstar],
        lstar,
        width_for(levels as u64),
        m1,
        m2,
    )?;
    let p_lstar = 0.5f64.powi(lstar as i32);
    let estimate = c_a_inf.max(c_b_inf) as f64 / (q * p_lstar);
    session.finish(ResultValue::Scalar(estimate))
}
