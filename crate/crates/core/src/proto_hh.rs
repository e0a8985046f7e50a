//! Heavy-hitter protocols: output a set sandwiched between the phi-heavy
//! and (phi-eps)-heavy entries of the product.
//!
//! [`run_hh_general`] (integer matrices): after a norm phase (exact column
//! sums for p = 1, the 2-round lp protocol otherwise), Alice thins her
//! entries binomially at a rate that leaves heavy entries visible, the
//! parties recover every nonzero of the thinned product as an additive
//! split via index lists, Alice forwards her half's large entries, and Bob
//! thresholds the merged matrix.
//!
//! [`run_hh_binary`] (binary matrices): the same norm phase, then whole-
//! column sampling of `A`, an index-list split of the sampled product, and
//! a verification step: both sides nominate candidate positions from their
//! halves, and each candidate's true product value is estimated from
//! shared-seed coordinate samples of Alice's row bits against Bob's column.
//! When the norm is small the column sampling is skipped entirely.
//!
//! Round counts: five rounds when p = 1, six otherwise; both O(1).

use std::collections::{BTreeMap, BTreeSet};

use crate::channel::{EstimateReport, Party, ProtocolSession, ResultValue};
use crate::error::{Error, Result};
use crate::matrix::{HeavyHitterSet, SparseIntMatrix};
use crate::proto_linf_binary::{
    alice_items, bob_items, get_item_lists, ln_dim, outer_accumulate, put_item_lists,
};
use crate::proto_lp::{l1_exact_phase, lp_estimate_phase, LpProtocolParams};
use crate::rng;
use crate::wire::{width_for, WireWriter};

const LBL_THIN: u64 = 0x4848_5448;
const LBL_COLS: u64 = 0x4848_434C;
const LBL_VERIFY: u64 = 0x4848_5652;
const LBL_NORM_SALT: u64 = 0x4848_4E4D;

/// Parameters shared by both heavy-hitter protocols.
#[derive(Clone, Debug)]
pub struct HHParams {
    pub p: f64,
    pub phi: f64,
    pub eps: f64,
    /// Sampling-rate constant (the paper-scale constant is far larger).
    pub c_hh: f64,
    /// Verification sample-count constant (binary protocol).
    pub c_verify: f64,
}

impl HHParams {
    pub fn new(p: f64, phi: f64, eps: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!("p={p} outside (0, 2]")));
        }
        if !(eps > 0.0 && eps <= phi && phi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < eps <= phi <= 1, got phi={phi} eps={eps}"
            )));
        }
        Ok(Self {
            p,
            phi,
            eps,
            c_hh: 8.0,
            c_verify: 8.0,
        })
    }
}

/// Binomial thinning: each unit of each entry survives with probability
/// `rate`. For binary matrices this is exactly per-entry sampling.
pub(crate) fn thin_matrix(
    a: &SparseIntMatrix,
    rate: f64,
    rng: &mut rand_chacha::ChaCha20Rng,
) -> SparseIntMatrix {
    if rate >= 1.0 {
        return a.clone();
    }
    let mut entries = BTreeMap::new();
    for (i, j, v) in a.entries() {
        let mut kept = 0u64;
        for _ in 0..v {
            if rng::next_bool(rng, rate) {
                kept += 1;
            }
        }
        if kept > 0 {
            entries.insert((i, j), kept);
        }
    }
    SparseIntMatrix::from_map(a.n_rows(), a.n_cols(), entries, a.max_value())
}

/// Norm phase ending with both parties holding the p-th-power norm of the
/// product and Alice holding Bob's per-item row counts: exact for p = 1,
/// the 2-round lp protocol at the given accuracy otherwise.
fn norm_and_counts_phase(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    p: f64,
    accuracy: f64,
    session: &mut ProtocolSession,
) -> Result<(f64, Vec<u64>)> {
    let n_in = a.n_cols();
    let m2 = b.n_cols();
    let norm_pow = if p == 1.0 {
        let exact = l1_exact_phase(a, b, session)?;
        u64::try_from(exact).map_err(|_| Error::Overflow("l1 norm"))? as f64
    } else {
        let params = LpProtocolParams::new(p, accuracy)?.with_boost(3)?;
        lp_estimate_phase(a, b, &params, session, LBL_NORM_SALT)?
    };
    // Bob replies with the norm and his row counts.
    let v: Vec<u64> = b.rows().iter().map(|r| r.len() as u64).collect();
    let mut w = WireWriter::new();
    w.put_uint(norm_pow.to_bits(), 64)?;
    w.put_uints(&v, width_for(m2 as u64))?;
    session.send(Party::Bob, w)?;
    let mut r = session.recv(Party::Alice)?;
    let norm_at_alice = f64::from_bits(r.get_uint(64)?);
    let v_at_alice = r.get_uints(n_in, width_for(m2 as u64))?;
    debug_assert_eq!(norm_at_alice.to_bits(), norm_pow.to_bits());
    debug_assert_eq!(v_at_alice, v);
    Ok((norm_at_alice, v_at_alice))
}

/// Alice announces her per-item counts and list halves; Bob replies with
/// his. Returns Alice's accumulated half and Bob's.
fn split_alice_first(
    session: &mut ProtocolSession,
    a_cols: &[Vec<(usize, u64)>],
    b: &SparseIntMatrix,
    v: &[u64],
    binary: bool,
    m1: usize,
) -> Result<(BTreeMap<(usize, usize), u128>, BTreeMap<(usize, usize), u128>)> {
    let n_in = a_cols.len();
    let m2 = b.n_cols();
    let b_rows = b.rows();
    let u: Vec<u64> = a_cols.iter().map(|c| c.len() as u64).collect();

    let mut w = WireWriter::new();
    w.put_uints(&u, width_for(m1 as u64))?;
    let alice_owned = alice_items(&u, v);
    let alice_lists: Vec<(usize, Vec<(usize, u64)>)> = alice_owned
        .iter()
        .map(|&j| (j, a_cols[j].clone()))
        .collect();
    put_item_lists(
        &mut w,
        &alice_lists,
        binary,
        width_for(m1.saturating_sub(1) as u64),
    )?;
    session.send(Party::Alice, w)?;

    // Bob decodes, accumulates his half, ships his lists.
    let mut r = session.recv(Party::Bob)?;
    let u_at_bob = r.get_uints(n_in, width_for(m1 as u64))?;
    let alice_items_b = alice_items(&u_at_bob, v);
    let recv_cols = get_item_lists(
        &mut r,
        &alice_items_b,
        &u_at_bob,
        binary,
        width_for(m1.saturating_sub(1) as u64),
    )?;
    let mut c_bob = BTreeMap::new();
    for (j, col) in &recv_cols {
        outer_accumulate(&mut c_bob, col, &b_rows[*j]);
    }

    let bob_owned = bob_items(&u_at_bob, v);
    let bob_lists: Vec<(usize, Vec<(usize, u64)>)> =
        bob_owned.iter().map(|&j| (j, b_rows[j].clone())).collect();
    let mut w = WireWriter::new();
    put_item_lists(
        &mut w,
        &bob_lists,
        binary,
        width_for(m2.saturating_sub(1) as u64),
    )?;
    session.send(Party::Bob, w)?;

    // Alice accumulates her half.
    let mut r = session.recv(Party::Alice)?;
    let bob_items_a = bob_items(&u, v);
    let recv_rows = get_item_lists(
        &mut r,
        &bob_items_a,
        v,
        binary,
        width_for(m2.saturating_sub(1) as u64),
    )?;
    let mut c_alice = BTreeMap::new();
    for (j, row) in &recv_rows {
        outer_accumulate(&mut c_alice, &a_cols[*j], row);
    }
    Ok((c_alice, c_bob))
}

fn pow_p(v: u128, p: f64) -> f64 {
    if v == 0 {
        0.0
    } else if p == 1.0 {
        v as f64
    } else if p == 2.0 {
        (v as f64) * (v as f64)
    } else {
        (v as f64).powf(p)
    }
}

/// Heavy hitters of an integer product: thinning, additive-split recovery,
/// forwarding of Alice's large entries, thresholding at Bob.
pub fn run_hh_general(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &HHParams,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("heavy-hitter shapes".into()));
    }
    let (m1, n_in, m2) = (a.n_rows(), a.n_cols(), b.n_cols());
    let (p, phi, eps) = (params.p, params.phi, params.eps);
    let accuracy = (eps / (4.0 * phi)).min(0.5);
    let (norm_pow, v) = norm_and_counts_phase(a, b, p, accuracy, session)?;
    if norm_pow <= 0.0 {
        return session.finish(ResultValue::Hitters(HeavyHitterSet::new(
            BTreeSet::new(),
            phi,
            eps,
        )?));
    }

    // Thinning rate; for p = 1 exactly the sampling rate of the entry-wise
    // scheme, generalized through the p-th-power norm.
    let ratio = eps / phi;
    let rate = (params.c_hh * ln_dim(&[m1, n_in, m2]) / (ratio * ratio * (phi / 8.0) * norm_pow))
        .min(1.0);
    let mut thin_rng = session.private_rng(Party::Alice, LBL_THIN);
    let a_thin = thin_matrix(a, rate, &mut thin_rng);

    let binary = a_thin.is_binary() && b.is_binary();
    let (c_alice, c_bob) = split_alice_first(session, &a_thin.cols(), b, &v, binary, m1)?;

    // Alice forwards entries of her half above the forwarding threshold.
    let alice_thr = eps * rate / 8.0 * norm_pow;
    let forwarded: Vec<((usize, usize), u128)> = c_alice
        .iter()
        .filter(|&(_, &val)| pow_p(val, p) > alice_thr)
        .map(|(&pos, &val)| (pos, val))
        .collect();
    let mut w = WireWriter::new();
    w.put_varint(forwarded.len() as u64);
    for &((i, j), val) in &forwarded {
        w.put_varint(i as u64);
        w.put_varint(j as u64);
        w.put_varint(u64::try_from(val).map_err(|_| Error::Overflow("split entry"))?);
    }
    session.send(Party::Alice, w)?;

    // Bob merges and thresholds.
    let mut r = session.recv(Party::Bob)?;
    let mut merged = c_bob;
    let count = r.get_varint()? as usize;
    for _ in 0..count {
        let i = r.get_varint()? as usize;
        let j = r.get_varint()? as usize;
        let val = r.get_varint()? as u128;
        *merged.entry((i, j)).or_insert(0) += val;
    }
    let out_thr = rate * (phi - eps / 2.0) * norm_pow;
    let pairs: BTreeSet<(usize, usize)> = merged
        .into_iter()
        .filter(|&(_, val)| pow_p(val, p) >= out_thr)
        .map(|(pos, _)| pos)
        .collect();
    session.finish(ResultValue::Hitters(HeavyHitterSet::new(pairs, phi, eps)?))
}

/// Heavy hitters of a binary product: column sampling, additive-split
/// recovery, then candidate verification by shared-coordinate sampling.
pub fn run_hh_binary(
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    params: &HHParams,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::DimensionMismatch("heavy-hitter shapes".into()));
    }
    if !a.is_binary() || !b.is_binary() {
        return Err(Error::InvalidParameter("binary matrices required".into()));
    }
    let (m1, n_in, m2) = (a.n_rows(), a.n_cols(), b.n_cols());
    let (p, phi, eps) = (params.p, params.phi, params.eps);
    let accuracy = (eps / (4.0 * phi)).min(0.5);
    let (norm_pow, v) = norm_and_counts_phase(a, b, p, accuracy, session)?;
    if norm_pow <= 0.0 {
        return session.finish(ResultValue::Hitters(HeavyHitterSet::new(
            BTreeSet::new(),
            phi,
            eps,
        )?));
    }
    let ldim = ln_dim(&[m1, n_in, m2]);
    let rough_norm = norm_pow.powf(1.0 / p);

    // Small norms skip the column sampling entirely.
    let small_norm = norm_pow < 100.0 * phi * ldim / (eps * eps);
    let beta = if small_norm {
        1.0
    } else {
        let alpha = (params.c_hh * ldim).powf(1.0 / p);
        (alpha / (phi.powf(1.0 / p) * rough_norm)).min(1.0)
    };
    let mut col_rng = session.private_rng(Party::Alice, LBL_COLS);
    let kept: Vec<bool> = (0..n_in).map(|_| rng::next_bool(&mut col_rng, beta)).collect();
    let a_cols: Vec<Vec<(usize, u64)>> = a
        .cols()
        .into_iter()
        .enumerate()
        .map(|(k, col)| if kept[k] { col } else { Vec::new() })
        .collect();

    let (c_alice, c_bob) = split_alice_first(session, &a_cols, b, &v, true, m1)?;

    // Candidate nomination from each half.
    let verify_thr = beta.powf(p) * phi * norm_pow / 20.0;
    let nominate = |half: &BTreeMap<(usize, usize), u128>| -> Vec<(usize, usize)> {
        half.iter()
            .filter(|&(_, &val)| pow_p(val, p) >= verify_thr)
            .map(|(&pos, _)| pos)
            .collect()
    };
    let s_alice = nominate(&c_alice);
    let s_bob = nominate(&c_bob);

    // Bob ships his candidates.
    let mut w = WireWriter::new();
    w.put_varint(s_bob.len() as u64);
    for &(i, j) in &s_bob {
        w.put_varint(i as u64);
        w.put_varint(j as u64);
    }
    session.send(Party::Bob, w)?;
    let mut r = session.recv(Party::Alice)?;
    let mut candidates: BTreeSet<(usize, usize)> = s_alice.iter().copied().collect();
    let count = r.get_varint()? as usize;
    for _ in 0..count {
        let i = r.get_varint()? as usize;
        let j = r.get_varint()? as usize;
        candidates.insert((i, j));
    }

    // Verification: per candidate, both parties derive the same coordinate
    // sample; Alice ships her row bits at those coordinates.
    let samples = ((params.c_verify * (phi / eps) * (phi / eps) * ldim).ceil() as usize).max(1);
    let exact = samples >= n_in;
    let coords_for = |rng: &mut rand_chacha::ChaCha20Rng| -> Vec<usize> {
        if exact {
            (0..n_in).collect()
        } else {
            (0..samples).map(|_| rng::next_index(rng, n_in)).collect()
        }
    };
    let a_dense_rows: Vec<BTreeSet<usize>> = {
        let mut rows = vec![BTreeSet::new(); m1];
        for (i, k, _) in a.entries() {
            rows[i].insert(k);
        }
        rows
    };

    let mut w = WireWriter::new();
    w.put_varint(s_alice.len() as u64);
    for &(i, j) in &s_alice {
        w.put_varint(i as u64);
        w.put_varint(j as u64);
    }
    let mut verify_rng = session.shared_rng(LBL_VERIFY);
    for &(i, _) in &candidates {
        for k in coords_for(&mut verify_rng) {
            w.put_uint(u64::from(a_dense_rows[i].contains(&k)), 1)?;
        }
    }
    session.send(Party::Alice, w)?;

    // Bob rebuilds the candidate set, re-derives the coordinates, and
    // estimates each candidate's true value.
    let mut r = session.recv(Party::Bob)?;
    let mut candidates_bob: BTreeSet<(usize, usize)> = s_bob.iter().copied().collect();
    let count = r.get_varint()? as usize;
    for _ in 0..count {
        let i = r.get_varint()? as usize;
        let j = r.get_varint()? as usize;
        candidates_bob.insert((i, j));
    }
    let b_dense_cols: Vec<BTreeSet<usize>> = {
        let mut cols = vec![BTreeSet::new(); m2];
        for (k, j, _) in b.entries() {
            cols[j].insert(k);
        }
        cols
    };
    let mut verify_rng = session.shared_rng(LBL_VERIFY);
    let accept_thr = (phi - eps / 2.0) * norm_pow;
    let mut pairs = BTreeSet::new();
    for &(i, j) in &candidates_bob {
        let coords = coords_for(&mut verify_rng);
        let mut hit = 0u64;
        for &k in &coords {
            let a_bit = r.get_uint(1)?;
            if a_bit == 1 && b_dense_cols[j].contains(&k) {
                hit += 1;
            }
        }
        let scale = if exact {
            1.0
        } else {
            n_in as f64 / samples as f64
        };
        let est = hit as f64 * scale;
        if est.powf(p) >= accept_thr {
            pairs.insert((i, j));
        }
    }
    session.finish(ResultValue::Hitters(HeavyHitterSet::new(pairs, phi, eps)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn hitters(report: &EstimateReport) -> &HeavyHitterSet {
        match &report.result {
            ResultValue::Hitters(h) => h,
            other => panic!("expected hitters, got {other:?}"),
        }
    }

    /// Binary planted instance: one pair of sets with a large overlap, very
    /// sparse background, so the overlap is a ~0.6 fraction of the product
    /// l1 mass.
    fn planted_overlap(n: usize, seed: u64) -> (SparseIntMatrix, SparseIntMatrix) {
        let mut r = rng::chacha(seed, 0x484F);
        let hot = n / 4;
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for k in 0..(2 * n / 3) {
            a.insert((hot, k), 1u64);
            b.insert((k, hot), 1u64);
        }
        let bg = 0.6 / (n as f64).sqrt() / 2.0;
        for i in 0..n {
            for j in 0..n {
                if i != hot && rng::next_f64(&mut r) < bg {
                    a.insert((i, j), 1);
                }
                if j != hot && rng::next_f64(&mut r) < bg {
                    b.insert((i, j), 1);
                }
            }
        }
        (
            SparseIntMatrix::from_map(n, n, a, 1),
            SparseIntMatrix::from_map(n, n, b, 1),
        )
    }

    fn sandwich_holds(
        set: &BTreeSet<(usize, usize)>,
        c: &SparseIntMatrix,
        p: f64,
        phi: f64,
        eps: f64,
    ) -> bool {
        let heavy = c.heavy_hitters_exact(p, phi).unwrap();
        let loose = c.heavy_hitters_exact(p, phi - eps).unwrap();
        heavy.is_subset(set) && set.is_subset(&loose)
    }

    #[test]
    fn zero_product_gives_empty_set() {
        let z = SparseIntMatrix::zero(8, 8);
        let params = HHParams::new(1.0, 0.5, 0.25).unwrap();
        let mut s = ProtocolSession::new(1);
        let report = run_hh_general(&z, &z, &params, &mut s).unwrap();
        assert!(hitters(&report).pairs.is_empty());

        let mut s = ProtocolSession::new(2);
        let report = run_hh_binary(&z, &z, &params, &mut s).unwrap();
        assert!(hitters(&report).pairs.is_empty());
    }

    #[test]
    fn single_dominant_entry_always_recovered() {
        let a = SparseIntMatrix::from_entries(8, 8, [(2, 3, 100)]).unwrap();
        let b = SparseIntMatrix::from_entries(8, 8, [(3, 5, 1)]).unwrap();
        let params = HHParams::new(1.0, 0.5, 0.25).unwrap();
        let mut ok = 0;
        for seed in 0..200 {
            let mut s = ProtocolSession::new(seed);
            let report = run_hh_general(&a, &b, &params, &mut s).unwrap();
            if hitters(&report).pairs == BTreeSet::from([(2, 5)]) {
                ok += 1;
            }
        }
        assert!(ok >= 180, "only {ok}/200 recovered the dominant entry");
    }

    #[test]
    fn general_thinned_three_level_instance() {
        // Diagonal values at 0.45, 0.30, 0.15 fractions of the l1 mass,
        // scaled so the thinning rate is genuinely below 1. The top value
        // must be kept, the bottom excluded; the middle may go either way.
        let scale = 1000u64;
        let a = SparseIntMatrix::from_entries(
            4,
            4,
            [(0, 0, 45 * scale), (1, 1, 30 * scale), (2, 2, 15 * scale), (3, 3, 10 * scale)],
        )
        .unwrap();
        let b = SparseIntMatrix::identity(4);
        let params = HHParams::new(1.0, 0.35, 0.1).unwrap();
        let mut ok = 0;
        for seed in 0..200 {
            let mut s = ProtocolSession::new(seed);
            let report = run_hh_general(&a, &b, &params, &mut s).unwrap();
            let set = &hitters(&report).pairs;
            if set.contains(&(0, 0)) && !set.contains(&(2, 2)) && !set.contains(&(3, 3)) {
                ok += 1;
            }
        }
        assert!(ok >= 170, "only {ok}/200 classified the extremes correctly");
    }

    #[test]
    fn general_sandwich_on_planted_instances() {
        let params = HHParams::new(1.0, 0.5, 0.2).unwrap();
        let mut ok = 0;
        for seed in 0..100 {
            let (a, b) = planted_overlap(64, 1000 + seed);
            let c = a.multiply(&b).unwrap();
            let mut s = ProtocolSession::new(seed);
            let report = run_hh_general(&a, &b, &params, &mut s).unwrap();
            assert!(report.rounds <= 6);
            if sandwich_holds(&hitters(&report).pairs, &c, 1.0, 0.5, 0.2) {
                ok += 1;
            }
        }
        assert!(ok >= 85, "sandwich held in only {ok}/100 trials");
    }

    #[test]
    fn binary_sandwich_on_planted_instances() {
        let params = HHParams::new(1.0, 0.5, 0.2).unwrap();
        let mut ok = 0;
        for seed in 0..100 {
            let (a, b) = planted_overlap(64, 2000 + seed);
            let c = a.multiply(&b).unwrap();
            let mut s = ProtocolSession::new(seed);
            let report = run_hh_binary(&a, &b, &params, &mut s).unwrap();
            assert!(report.rounds <= 6);
            if sandwich_holds(&hitters(&report).pairs, &c, 1.0, 0.5, 0.2) {
                ok += 1;
            }
        }
        assert!(ok >= 85, "sandwich held in only {ok}/100 trials");
    }

    #[test]
    fn binary_identity_with_large_phi_is_empty() {
        // Every diagonal entry is a 1/n fraction; at phi = 0.5 the output
        // should be empty.
        let id = SparseIntMatrix::identity(16);
        let params = HHParams::new(1.0, 0.5, 0.25).unwrap();
        let mut ok = 0;
        for seed in 0..100 {
            let mut s = ProtocolSession::new(seed);
            let report = run_hh_binary(&id, &id, &params, &mut s).unwrap();
            if hitters(&report).pairs.is_empty() {
                ok += 1;
            }
        }
        assert!(ok >= 90, "only {ok}/100 empty outputs");
    }

    #[test]
    fn binary_subsampled_path_runs_and_respects_sandwich() {
        // Dense instance with a tiny phi pushes the protocol onto the
        // column-sampling path (no entry can be heavy at this scale, so
        // the correct output is empty).
        let mut r = rng::chacha(3, 0x5555);
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for i in 0..64 {
            for j in 0..64 {
                if rng::next_f64(&mut r) < 0.7 {
                    a.insert((i, j), 1u64);
                }
                if rng::next_f64(&mut r) < 0.7 {
                    b.insert((i, j), 1u64);
                }
            }
        }
        let a = SparseIntMatrix::from_map(64, 64, a, 1);
        let b = SparseIntMatrix::from_map(64, 64, b, 1);
        let c = a.multiply(&b).unwrap();
        let params = HHParams::new(1.0, 0.02, 0.015).unwrap();
        // Confirm this instance actually takes the sampled path.
        let norm = c.lp_norm_pow(1.0).unwrap();
        assert!(norm >= 100.0 * 0.02 * 64f64.ln() / (0.015 * 0.015));
        let mut ok = 0;
        for seed in 0..50 {
            let mut s = ProtocolSession::new(seed);
            let report = run_hh_binary(&a, &b, &params, &mut s).unwrap();
            if sandwich_holds(&hitters(&report).pairs, &c, 1.0, 0.02, 0.015) {
                ok += 1;
            }
        }
        assert!(ok >= 45, "sandwich held in only {ok}/50 trials");
    }

    #[test]
    fn candidate_count_stays_bounded() {
        let params = HHParams::new(1.0, 0.5, 0.2).unwrap();
        for seed in 0..20 {
            let (a, b) = planted_overlap(64, 3000 + seed);
            let mut s = ProtocolSession::new(seed);
            run_hh_binary(&a, &b, &params, &mut s).unwrap();
            // Candidate pairs ride messages 4 and 5 as varint lists.
            let msg = &s.messages()[3];
            let mut r = crate::wire::WireReader::new(msg.payload.clone(), msg.bit_length);
            let bob_cands = r.get_varint().unwrap();
            assert!(
                bob_cands as f64 <= 10.0 * 20.0 / 0.5,
                "candidate list blew up: {bob_cands}"
            );
        }
    }

    #[test]
    fn thinning_is_unbiased() {
        let a = SparseIntMatrix::from_entries(3, 3, [(0, 0, 40), (1, 2, 10), (2, 1, 1)]).unwrap();
        let rate = 0.3;
        let trials = 20_000;
        let mut sums = BTreeMap::new();
        for seed in 0..trials {
            let mut rng = rng::chacha(seed, 0x7711);
            for (i, j, v) in thin_matrix(&a, rate, &mut rng).entries() {
                *sums.entry((i, j)).or_insert(0u64) += v;
            }
        }
        for (i, j, v) in a.entries() {
            let mean = *sums.get(&(i, j)).unwrap_or(&0) as f64 / trials as f64;
            let expect = rate * v as f64;
            assert!(
                (mean - expect).abs() <= 0.05 * expect.max(0.5),
                "entry ({i},{j}): mean {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HHParams::new(0.0, 0.5, 0.2).is_err());
        assert!(HHParams::new(1.0, 0.5, 0.6).is_err());
        assert!(HHParams::new(1.0, 1.5, 0.2).is_err());
        let a = SparseIntMatrix::from_entries(2, 2, [(0, 0, 3)]).unwrap();
        let params = HHParams::new(1.0, 0.5, 0.2).unwrap();
        let mut s = ProtocolSession::new(0);
        assert!(run_hh_binary(&a, &SparseIntMatrix::identity(2), &params, &mut s).is_err());
    }
}
