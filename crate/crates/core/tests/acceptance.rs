//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test -p matprod --test acceptance -- --nocapture` to see
//! the per-criterion lines. Golden transcripts live under
//! `tests/golden/`; regenerate them with `GOLDEN_REGEN=1` after a
//! deliberate wire-format change.

use std::collections::BTreeMap;

use rayon::prelude::*;

use matprod::harness::{
    make_instance, planted_hh_pair, planted_int_max_pair, planted_max_pair, ExperimentConfig,
    FamilyKind, ProtocolKind,
};
use matprod::proto_hh::{run_hh_binary, run_hh_general, HHParams};
use matprod::proto_linf_binary::{
    index_exchange, run_linf_2eps, run_linf_kappa, LinfParams, UniverseSampleParams,
};
use matprod::proto_linf_general::{run_linf_general, GeneralLinfParams};
use matprod::proto_lp::{
    run_l0_sample_matrix, run_l1_exact, run_l1_sample, run_lp_baseline, run_lp_estimate,
    LpProtocolParams,
};
use matprod::{hardgen, rng, ProtocolSession, ResultValue, SparseIntMatrix};

fn pass(criterion: u32, what: &str) {
    println!("[PASS] criterion {criterion:02}: {what}");
}

fn random_binary(n: usize, density: f64, seed: u64) -> SparseIntMatrix {
    let mut r = rng::chacha(seed, 0xACC0);
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng::next_f64(&mut r) < density {
                triples.push((i, j, 1));
            }
        }
    }
    SparseIntMatrix::from_entries(n, n, triples).unwrap()
}

#[test]
fn criterion_01_l1_exactness() {
    let sizes = [8usize, 16, 32, 64];
    let densities = [0.05, 0.2, 0.5];
    for trial in 0..200u64 {
        let n = sizes[trial as usize % sizes.len()];
        let d = densities[trial as usize % densities.len()];
        let a = random_binary(n, d, 1_000 + trial);
        let b = random_binary(n, d, 2_000 + trial);
        let oracle = a.multiply(&b).unwrap().lp_norm_pow(1.0).unwrap();
        let mut s = ProtocolSession::new(trial);
        let report = run_l1_exact(&a, &b, &mut s).unwrap();
        assert_eq!(report.result.scalar().unwrap(), oracle, "trial {trial}");
        assert_eq!(report.rounds, 1, "trial {trial}");
    }
    pass(1, "exact l1 equals the oracle on 200 instances, 1 round, zero tolerance");
}

#[test]
fn criterion_02_additive_split_exactness() {
    let sizes = [8usize, 16, 32];
    for trial in 0..200u64 {
        let n = sizes[trial as usize % sizes.len()];
        let a = random_binary(n, 0.25, 3_000 + trial);
        let b = random_binary(n, 0.25, 4_000 + trial);
        let mut s = ProtocolSession::new(trial);
        let split = index_exchange(&a, &b, &mut s).unwrap();
        let c = a.multiply(&b).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(
                    split.c_alice.get(i, j) + split.c_bob.get(i, j),
                    c.get(i, j),
                    "trial {trial} entry ({i},{j})"
                );
            }
        }
    }
    pass(2, "index exchange splits the product exactly on 200 instances");
}

#[test]
fn criterion_03_lp_estimate_guarantee() {
    let n = 64;
    let eps = 0.25;
    let a = random_binary(n, 0.2, 51);
    let b = random_binary(n, 0.2, 52);
    let c = a.multiply(&b).unwrap();
    for p in [0.0, 1.0, 2.0] {
        let oracle = c.lp_norm_pow(p).unwrap();
        let params = LpProtocolParams::new(p, eps).unwrap().with_boost(9).unwrap();
        let outcomes: Vec<(bool, u64)> = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let mut s = ProtocolSession::new(seed);
                let report = run_lp_estimate(&a, &b, &params, &mut s).unwrap();
                let est = report.result.scalar().unwrap();
                let ok = est >= oracle / (1.0 + eps) && est <= oracle * (1.0 + eps);
                (ok, report.rounds)
            })
            .collect();
        assert!(outcomes.iter().all(|&(_, r)| r == 2), "p={p}: rounds != 2");
        let ok = outcomes.iter().filter(|&&(ok, _)| ok).count();
        assert!(ok >= 170, "p={p}: only {ok}/200 within (1+eps)");
    }
    pass(3, "2-round lp estimate within (1+eps) for p in {0,1,2}, >= 85% of trials");
}

#[test]
fn criterion_04_communication_separation() {
    let n = 256;
    let a = random_binary(n, 0.2, 61);
    let b = random_binary(n, 0.2, 62);
    let median_bits = |eps: f64, baseline: bool| -> u64 {
        let params = LpProtocolParams::new(1.0, eps).unwrap();
        let mut bits: Vec<u64> = (0..5u64)
            .into_par_iter()
            .map(|seed| {
                let mut s = ProtocolSession::new(7_000 + seed);
                let report = if baseline {
                    run_lp_baseline(&a, &b, &params, &mut s).unwrap()
                } else {
                    run_lp_estimate(&a, &b, &params, &mut s).unwrap()
                };
                report.bits_total
            })
            .collect();
        bits.sort_unstable();
        bits[bits.len() / 2]
    };
    let main_ratio = median_bits(0.1, false) as f64 / median_bits(0.2, false) as f64;
    let base_ratio = median_bits(0.1, true) as f64 / median_bits(0.2, true) as f64;
    assert!(
        main_ratio <= 2.5,
        "halving eps grew the 2-round protocol by {main_ratio:.2} > 2.5"
    );
    assert!(
        base_ratio >= 3.2,
        "halving eps grew the baseline only by {base_ratio:.2} < 3.2"
    );
    pass(
        4,
        "halving eps: 2-round cost grows <= 2.5x while the one-round baseline grows >= 3.2x",
    );
}

#[test]
fn criterion_05_l0_sampling_uniformity() {
    let n = 16;
    let a = random_binary(n, 0.15, 71);
    let b = random_binary(n, 0.15, 72);
    let c = a.multiply(&b).unwrap();
    let support: Vec<(usize, usize)> = c.entries().map(|(i, j, _)| (i, j)).collect();
    let s = support.len();
    assert!(s > 10, "degenerate fixture: support {s}");

    let draws = 200_000u64;
    let counts: BTreeMap<(usize, usize), u64> = (0..draws)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc, seed| {
            let mut sess = ProtocolSession::new(seed);
            match run_l0_sample_matrix(&a, &b, 0.25, &mut sess).unwrap().result {
                ResultValue::Sample { row, col, .. } => {
                    *acc.entry((row, col)).or_insert(0) += 1;
                }
                ResultValue::Failed => {}
                other => panic!("unexpected outcome {other:?}"),
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });

    for (pos, count) in &counts {
        assert!(support.contains(pos), "sampled a zero position {pos:?}");
        let _ = count;
    }
    let uniform = 1.0 / s as f64;
    let mut tv = 0.0;
    for pos in &support {
        let freq = *counts.get(pos).unwrap_or(&0) as f64 / draws as f64;
        assert!(
            freq >= uniform * (1.0 - 0.35) && freq <= uniform * (1.0 + 0.35),
            "entry {pos:?}: frequency {freq:.5} outside (1 +- 0.35)/{s}"
        );
        tv += (freq - uniform).abs();
    }
    tv /= 2.0;
    assert!(tv <= 0.1, "total variation to uniform {tv:.4} > 0.1");
    pass(5, "matrix l0 sampling near-uniform over the support (band and TV checks)");
}

#[test]
fn criterion_06_l1_sampling_distribution() {
    let n = 8;
    let a = random_binary(n, 0.35, 81);
    let b = random_binary(n, 0.35, 82);
    let c = a.multiply(&b).unwrap();
    let total = c.lp_norm_pow(1.0).unwrap();
    assert!(total > 0.0);

    let draws = 100_000u64;
    let counts: BTreeMap<(usize, usize), u64> = (0..draws)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc, seed| {
            let mut sess = ProtocolSession::new(seed);
            match run_l1_sample(&a, &b, &mut sess).unwrap().result {
                ResultValue::Sample { row, col, .. } => {
                    *acc.entry((row, col)).or_insert(0) += 1;
                }
                other => panic!("unexpected outcome {other:?}"),
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });

    let mut tv = 0.0;
    for i in 0..n {
        for j in 0..n {
            let expect = c.get(i, j) as f64 / total;
            let freq = *counts.get(&(i, j)).unwrap_or(&0) as f64 / draws as f64;
            tv += (freq - expect).abs();
        }
    }
    tv /= 2.0;
    assert!(tv <= 0.02, "total variation {tv:.4} > 0.02");
    pass(6, "l1 sampling matches C / l1(C) within total variation 0.02");
}

#[test]
fn criterion_07_linf_2eps_guarantee() {
    let eps = 0.5;
    let (a, b) = planted_max_pair(64, 0.1, 91);
    let oracle = a.multiply(&b).unwrap().linf_norm() as f64;
    let params = LinfParams::new(eps).unwrap();
    let outcomes: Vec<(bool, u64)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let mut s = ProtocolSession::new(seed);
            let report = run_linf_2eps(&a, &b, &params, &mut s).unwrap();
            let ratio = report.result.scalar().unwrap() / oracle;
            let ok = ratio >= 1.0 / (2.0 * (1.0 + eps)) && ratio <= 1.0 + eps;
            (ok, report.rounds)
        })
        .collect();
    assert!(outcomes.iter().all(|&(_, r)| r == 3), "rounds != 3");
    let ok = outcomes.iter().filter(|&&(ok, _)| ok).count();
    assert!(ok >= 170, "only {ok}/200 within the (2+eps) sandwich");
    pass(7, "(2+eps) max-entry protocol within sandwich >= 85%, 3 rounds each");
}

#[test]
fn criterion_08_linf_kappa_guarantee_and_scaling() {
    let n = 128;
    let (a, b) = planted_max_pair(n, 0.3, 93);
    let oracle = a.multiply(&b).unwrap().linf_norm() as f64;
    let mut medians = Vec::new();
    for kappa in [4.0, 8.0, 16.0] {
        let params = UniverseSampleParams::new(kappa, n).unwrap();
        let runs: Vec<(bool, u64)> = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let mut s = ProtocolSession::new(seed);
                let report = run_linf_kappa(&a, &b, &params, &mut s).unwrap();
                let ratio = report.result.scalar().unwrap() / oracle;
                ((1.0 / kappa..=kappa).contains(&ratio), report.bits_total)
            })
            .collect();
        let ok = runs.iter().filter(|&&(ok, _)| ok).count();
        assert!(ok >= 170, "kappa={kappa}: only {ok}/200 within sandwich");
        let mut bits: Vec<u64> = runs.iter().map(|&(_, b)| b).collect();
        bits.sort_unstable();
        medians.push(bits[bits.len() / 2]);
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "median bits not strictly decreasing: {medians:?}"
    );
    pass(
        8,
        "kappa protocol within sandwich >= 85% and median bits strictly decrease in kappa",
    );
}

#[test]
fn criterion_09_linf_general_guarantee_and_scaling() {
    let kappa = 4.0;
    let (a, b) = planted_int_max_pair(64, 0.05, 4, 95);
    let oracle = a.multiply(&b).unwrap().linf_norm() as f64;
    let params = GeneralLinfParams::new(4, 64).unwrap();
    let outcomes: Vec<(bool, u64)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let mut s = ProtocolSession::new(seed);
            let report = run_linf_general(&a, &b, &params, &mut s).unwrap();
            let ratio = report.result.scalar().unwrap() / oracle;
            let ok = ratio >= 1.0 / (2.0 * kappa) && ratio <= 2.0 * kappa;
            (ok, report.rounds)
        })
        .collect();
    assert!(outcomes.iter().all(|&(_, r)| r == 1), "rounds != 1");
    let ok = outcomes.iter().filter(|&&(ok, _)| ok).count();
    assert!(ok >= 180, "only {ok}/200 within factor 2*kappa");

    // Quadratic cost trend at n = 256.
    let (a, b) = planted_int_max_pair(256, 0.05, 4, 96);
    let bits_at = |kappa: usize| {
        let params = GeneralLinfParams::new(kappa, 256).unwrap();
        let mut s = ProtocolSession::new(42);
        run_linf_general(&a, &b, &params, &mut s).unwrap().bits_total as f64
    };
    let ratio = bits_at(8) / bits_at(4);
    assert!(ratio <= 0.35, "bits(kappa=8)/bits(kappa=4) = {ratio:.3} > 0.35");
    pass(
        9,
        "blocked-sketch protocol within 2*kappa >= 90%, one round, quadratic cost drop",
    );
}

#[test]
fn criterion_10_heavy_hitter_sandwich() {
    let (phi, eps) = (0.5, 0.2);
    let params = HHParams::new(1.0, phi, eps).unwrap();
    for binary_protocol in [false, true] {
        let ok: usize = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let (a, b) = planted_hh_pair(64, 11_000 + seed);
                let c = a.multiply(&b).unwrap();
                let heavy = c.heavy_hitters_exact(1.0, phi).unwrap();
                let loose = c.heavy_hitters_exact(1.0, phi - eps).unwrap();
                let mut s = ProtocolSession::new(seed);
                let report = if binary_protocol {
                    run_hh_binary(&a, &b, &params, &mut s).unwrap()
                } else {
                    run_hh_general(&a, &b, &params, &mut s).unwrap()
                };
                let set = match report.result {
                    ResultValue::Hitters(h) => h.pairs,
                    other => panic!("unexpected outcome {other:?}"),
                };
                usize::from(heavy.is_subset(&set) && set.is_subset(&loose))
            })
            .sum();
        assert!(
            ok >= 170,
            "{} sandwich held in only {ok}/200 trials",
            if binary_protocol { "binary" } else { "general" }
        );
    }
    pass(10, "heavy-hitter outputs sandwiched between phi and phi-eps sets >= 85%");
}

#[test]
fn criterion_11_hard_instance_sanity() {
    // Disjointness embedding: planted truth matches the oracle.
    let mut r = rng::chacha(5, 0x6861);
    for trial in 0..500 {
        let t = 64; // 16 x 16 matrices
        let x: Vec<bool> = (0..t).map(|_| rng::next_f64(&mut r) < 0.15).collect();
        let y: Vec<bool> = (0..t).map(|_| rng::next_f64(&mut r) < 0.15).collect();
        let emb = hardgen::gen_disj_embedding(&x, &y).unwrap();
        let linf = emb.a.multiply(&emb.b).unwrap().linf_norm();
        let expect = if emb.intersecting {
            2
        } else if x.iter().any(|&v| v) || y.iter().any(|&v| v) {
            1
        } else {
            0
        };
        assert_eq!(linf, expect, "trial {trial}");
    }

    // Summed-disjointness: planted bit matches, and the max-entry gap holds.
    let n = 128;
    let k = 8;
    let (mut zero_ok, mut zero_total) = (0, 0);
    let results: Vec<(u8, u64, usize, f64)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let inst = hardgen::gen_sum_instance(n, k, seed).unwrap();
            let oracle_sum: usize = (0..inst.n)
                .filter(|&i| (0..inst.k).any(|t| inst.u[i][t] && inst.v[i][t]))
                .count();
            assert_eq!(oracle_sum as u8, inst.planted_sum, "seed {seed}");
            let linf = inst.a.multiply(&inst.b).unwrap().linf_norm();
            (inst.planted_sum, linf, inst.blocks, inst.beta)
        })
        .collect();
    for (planted, linf, blocks, beta) in results {
        if planted == 1 {
            assert!(linf >= blocks as u64, "planted spike lost: {linf} < {blocks}");
        } else {
            zero_total += 1;
            if (linf as f64) <= 2.0 * beta * beta * n as f64 {
                zero_ok += 1;
            }
        }
    }
    assert!(
        zero_ok * 100 >= zero_total * 95,
        "quiet-branch bound held in {zero_ok}/{zero_total}"
    );
    pass(11, "generator ground truths match oracles; max-entry gap holds per branch");
}

// ---------------------------------------------------------------------
// Criterion 12: golden transcripts.

const GOLDEN_SEED: u64 = 992_288;

fn golden_transcript(kind: ProtocolKind) -> Vec<u8> {
    let run = |a: &SparseIntMatrix, b: &SparseIntMatrix| -> ProtocolSession {
        let mut s = ProtocolSession::new(GOLDEN_SEED);
        match kind {
            ProtocolKind::LpEstimate => {
                let p = LpProtocolParams::new(1.0, 0.25).unwrap();
                run_lp_estimate(a, b, &p, &mut s).unwrap();
            }
            ProtocolKind::LpBaseline => {
                let p = LpProtocolParams::new(1.0, 0.25).unwrap();
                run_lp_baseline(a, b, &p, &mut s).unwrap();
            }
            ProtocolKind::L1Exact => {
                run_l1_exact(a, b, &mut s).unwrap();
            }
            ProtocolKind::L1Sample => {
                run_l1_sample(a, b, &mut s).unwrap();
            }
            ProtocolKind::L0Sample => {
                run_l0_sample_matrix(a, b, 0.25, &mut s).unwrap();
            }
            ProtocolKind::Linf2Eps => {
                let p = LinfParams::new(0.5).unwrap();
                run_linf_2eps(a, b, &p, &mut s).unwrap();
            }
            ProtocolKind::LinfKappa => {
                let p = UniverseSampleParams::new(4.0, a.n_rows()).unwrap();
                run_linf_kappa(a, b, &p, &mut s).unwrap();
            }
            ProtocolKind::LinfGeneral => {
                let p = GeneralLinfParams::new(4, a.n_rows()).unwrap();
                run_linf_general(a, b, &p, &mut s).unwrap();
            }
            ProtocolKind::HhGeneral => {
                let p = HHParams::new(1.0, 0.5, 0.2).unwrap();
                run_hh_general(a, b, &p, &mut s).unwrap();
            }
            ProtocolKind::HhBinary => {
                let p = HHParams::new(1.0, 0.5, 0.2).unwrap();
                run_hh_binary(a, b, &p, &mut s).unwrap();
            }
        }
        s
    };
    let session = match kind {
        ProtocolKind::Linf2Eps | ProtocolKind::LinfKappa => {
            let (a, b) = planted_max_pair(16, 0.2, 103);
            run(&a, &b)
        }
        ProtocolKind::LinfGeneral => {
            let (a, b) = planted_int_max_pair(16, 0.2, 4, 104);
            run(&a, &b)
        }
        ProtocolKind::HhGeneral | ProtocolKind::HhBinary => {
            let (a, b) = planted_hh_pair(16, 105);
            run(&a, &b)
        }
        _ => {
            let a = random_binary(12, 0.3, 101);
            let b = random_binary(12, 0.3, 102);
            run(&a, &b)
        }
    };
    session.transcript_bytes()
}

#[test]
fn criterion_12_golden_transcripts() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let regen = std::env::var_os("GOLDEN_REGEN").is_some();
    if regen {
        std::fs::create_dir_all(&dir).unwrap();
    }
    for &kind in ProtocolKind::all() {
        let first = golden_transcript(kind);
        let second = golden_transcript(kind);
        assert_eq!(first, second, "{}: rerun differs", kind.name());
        let path = dir.join(format!("{}.bin", kind.name()));
        if regen {
            std::fs::write(&path, &first).unwrap();
        } else {
            let golden = std::fs::read(&path).unwrap_or_else(|_| {
                panic!(
                    "missing golden file {}; run with GOLDEN_REGEN=1 to create it",
                    path.display()
                )
            });
            assert_eq!(first, golden, "{}: transcript drifted from golden", kind.name());
        }
    }
    pass(12, "fixed-seed transcripts byte-identical across runs and against goldens");
}

// Cross-check that the harness reproduces a protocol run end to end.
#[test]
fn harness_dispatch_smoke() {
    for &(protocol, family) in &[
        (ProtocolKind::LpEstimate, FamilyKind::RandomDensity),
        (ProtocolKind::LinfKappa, FamilyKind::PlantedMax),
        (ProtocolKind::HhBinary, FamilyKind::PlantedHh),
        (ProtocolKind::Linf2Eps, FamilyKind::DisjEmbed),
    ] {
        let mut cfg = ExperimentConfig::new(protocol, family);
        cfg.n = 16;
        cfg.eps = 0.5;
        cfg.trials = 3;
        let (a, b, _) = make_instance(&cfg, 7).unwrap();
        assert_eq!(a.n_cols(), b.n_rows());
        let rows = matprod::harness::run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
    }
}
