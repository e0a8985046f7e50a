//! Experiment harness: instance families, trial loops, CSV output and
//! summaries.
//!
//! A run is fully determined by its configuration and base seed: instance
//! generation, protocol randomness and the CSV bytes all derive from them.
//! Trials execute in parallel but results are emitted in trial order. Wall
//! times are opt-in so that default output is byte-reproducible.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{EstimateReport, ProtocolSession, ResultValue};
use crate::error::{Error, Result};
use crate::hardgen;
use crate::matrix::SparseIntMatrix;
use crate::proto_hh::{run_hh_binary, run_hh_general, HHParams};
use crate::proto_linf_binary::{run_linf_2eps, run_linf_kappa, LinfParams, UniverseSampleParams};
use crate::proto_linf_general::{run_linf_general, GeneralLinfParams};
use crate::proto_lp::{
    run_l0_sample_matrix, run_l1_exact, run_l1_sample, run_lp_baseline, run_lp_estimate,
    LpProtocolParams,
};
use crate::rng;

/// CSV schema version comment emitted at the top of every trials file.
pub const CSV_SCHEMA: &str = "# matprod-trials v1";

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ProtocolKind {
    LpEstimate,
    LpBaseline,
    L1Exact,
    L1Sample,
    L0Sample,
    Linf2Eps,
    LinfKappa,
    LinfGeneral,
    HhGeneral,
    HhBinary,
}

impl ProtocolKind {
    pub fn all() -> &'static [ProtocolKind] {
        use ProtocolKind::*;
        &[
            LpEstimate, LpBaseline, L1Exact, L1Sample, L0Sample, Linf2Eps, LinfKappa,
            LinfGeneral, HhGeneral, HhBinary,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::LpEstimate => "lp-estimate",
            ProtocolKind::LpBaseline => "lp-baseline",
            ProtocolKind::L1Exact => "l1-exact",
            ProtocolKind::L1Sample => "l1-sample",
            ProtocolKind::L0Sample => "l0-sample",
            ProtocolKind::Linf2Eps => "linf-2eps",
            ProtocolKind::LinfKappa => "linf-kappa",
            ProtocolKind::LinfGeneral => "linf-general",
            ProtocolKind::HhGeneral => "hh-general",
            ProtocolKind::HhBinary => "hh-binary",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ProtocolKind::LpEstimate => {
                "(1+eps)-approximation of sum |C_ij|^p, p in [0,2]; 2 rounds (row sketches, then sampled rows)"
            }
            ProtocolKind::LpBaseline => {
                "one-round comparator shipping per-row sketches at full accuracy eps (cost ~ 1/eps^2)"
            }
            ProtocolKind::L1Exact => "exact l1 norm of the product from column sums; 1 round",
            ProtocolKind::L1Sample => "exact l1-weighted sample of a product position; 1 round",
            ProtocolKind::L0Sample => {
                "near-uniform sample of a nonzero product position ((1+-eps)/l0); 1 round"
            }
            ProtocolKind::Linf2Eps => {
                "(2+eps)-approximation of the max entry for binary inputs; 3 rounds"
            }
            ProtocolKind::LinfKappa => {
                "kappa-approximation of the max entry for binary inputs (kappa in [4,n]); <=3 rounds"
            }
            ProtocolKind::LinfGeneral => {
                "O(kappa)-approximation of the max entry for integer inputs; 1 round, cost ~ n^2/kappa^2"
            }
            ProtocolKind::HhGeneral => {
                "(phi,eps) heavy hitters of an integer product; 5-6 rounds"
            }
            ProtocolKind::HhBinary => "(phi,eps) heavy hitters of a binary product; 5-6 rounds",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::all()
            .iter()
            .copied()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown protocol {name:?}")))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FamilyKind {
    /// Binary matrices with i.i.d. Bernoulli(density) entries.
    RandomDensity,
    /// Integer matrices, density-sparse with values in [1, value_max].
    RandomInt,
    /// Binary with one all-ones row of A and column of B (max entry = n).
    PlantedMax,
    /// Integer background plus one large planted product entry.
    PlantedIntMax,
    /// Binary pair sharing one large overlap; sparse background.
    PlantedHh,
    /// Block embedding of a random disjointness instance.
    DisjEmbed,
    /// Summed-disjointness instance with a planted coin.
    SumInstance,
    /// Matrices loaded from files.
    File,
}

impl FamilyKind {
    pub fn all() -> &'static [FamilyKind] {
        use FamilyKind::*;
        &[
            RandomDensity, RandomInt, PlantedMax, PlantedIntMax, PlantedHh, DisjEmbed,
            SumInstance, File,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::RandomDensity => "random-density",
            FamilyKind::RandomInt => "random-int",
            FamilyKind::PlantedMax => "planted-max",
            FamilyKind::PlantedIntMax => "planted-int-max",
            FamilyKind::PlantedHh => "planted-hh",
            FamilyKind::DisjEmbed => "disj-embed",
            FamilyKind::SumInstance => "sum-instance",
            FamilyKind::File => "file",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::all()
            .iter()
            .copied()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown family {name:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub family: FamilyKind,
    pub n: usize,
    pub density: f64,
    pub p: f64,
    pub eps: f64,
    pub phi: f64,
    pub kappa: f64,
    /// Block width of the summed-disjointness family (None = default
    /// relation).
    pub k_blocks: Option<usize>,
    pub value_max: u64,
    pub trials: usize,
    pub seed: u64,
    pub boost_reps: usize,
    pub c_rho: f64,
    pub c_gamma: f64,
    pub c_alpha: f64,
    pub c_hh: f64,
    pub c_sketch: usize,
    pub oracle: bool,
    pub oracle_cutoff: usize,
    /// Regenerate the instance every trial (default for the adversarial
    /// generator families).
    pub vary_instance: bool,
    pub timings: bool,
    pub file_a: Option<PathBuf>,
    pub file_b: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(protocol: ProtocolKind, family: FamilyKind) -> Self {
        Self {
            protocol,
            family,
            n: 64,
            density: 0.2,
            p: 1.0,
            eps: 0.25,
            phi: 0.5,
            kappa: 4.0,
            k_blocks: None,
            value_max: 8,
            trials: 20,
            seed: 1,
            boost_reps: 1,
            c_rho: 200.0,
            c_gamma: 8.0,
            c_alpha: 8.0,
            c_hh: 8.0,
            c_sketch: 6,
            oracle: true,
            oracle_cutoff: 512,
            vary_instance: matches!(family, FamilyKind::DisjEmbed | FamilyKind::SumInstance),
            timings: false,
            file_a: None,
            file_b: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family != FamilyKind::File && self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidParameter(format!(
                "density={} outside [0, 1]",
                self.density
            )));
        }
        if self.family == FamilyKind::File && (self.file_a.is_none() || self.file_b.is_none()) {
            return Err(Error::InvalidParameter(
                "family 'file' needs both matrix files".into(),
            ));
        }
        // Protocol parameter ranges are checked by the same constructors
        // the trials use.
        match self.protocol {
            ProtocolKind::LpEstimate | ProtocolKind::LpBaseline => {
                self.lp_params()?;
            }
            ProtocolKind::Linf2Eps => {
                LinfParams::new(self.eps)?;
            }
            ProtocolKind::LinfKappa => {
                UniverseSampleParams::new(self.kappa, self.n)?;
            }
            ProtocolKind::LinfGeneral => {
                GeneralLinfParams::new(self.kappa.round() as usize, self.n)?;
            }
            ProtocolKind::HhGeneral | ProtocolKind::HhBinary => {
                self.hh_params()?;
            }
            ProtocolKind::L0Sample => {
                if !(self.eps > 0.0 && self.eps < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "eps={} outside (0, 1)",
                        self.eps
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn lp_params(&self) -> Result<LpProtocolParams> {
        let mut p = LpProtocolParams::new(self.p, self.eps)?
            .with_boost(self.boost_reps)?
            .with_c_rho(self.c_rho);
        p.c_sketch = self.c_sketch;
        Ok(p)
    }

    fn hh_params(&self) -> Result<HHParams> {
        let mut p = HHParams::new(self.p, self.phi, self.eps)?;
        p.c_hh = self.c_hh;
        Ok(p)
    }
}

/// One trial's outcome.
#[derive(Clone, Debug)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub result: String,
    pub estimate: Option<f64>,
    pub oracle: Option<f64>,
    pub ratio: Option<f64>,
    pub within: Option<bool>,
    pub bits: u64,
    pub rounds: u64,
    pub wall_ms: Option<f64>,
}

fn random_binary(n: usize, density: f64, seed: u64) -> SparseIntMatrix {
    let mut r = rng::chacha(seed, 0x6269);
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng::next_f64(&mut r) < density {
                triples.push((i, j, 1));
            }
        }
    }
    SparseIntMatrix::from_entries(n, n, triples).expect("generated entries are valid")
}

fn random_int(n: usize, density: f64, value_max: u64, seed: u64) -> SparseIntMatrix {
    let mut r = rng::chacha(seed, 0x696E);
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng::next_f64(&mut r) < density {
                let v = rng::next_index(&mut r, value_max.max(1) as usize) as u64 + 1;
                triples.push((i, j, v));
            }
        }
    }
    // Declare the tight bound so protocols pick honest wire widths.
    SparseIntMatrix::from_entries_bounded(n, n, triples, value_max.max(1))
        .expect("generated entries are valid")
}

/// Binary pair with one all-ones row of A and all-ones column of B, so the
/// product's max entry equals n.
pub fn planted_max_pair(n: usize, density: f64, seed: u64) -> (SparseIntMatrix, SparseIntMatrix) {
    let mut r = rng::chacha(seed, 0x706D);
    let hot_row = rng::next_index(&mut r, n);
    let hot_col = rng::next_index(&mut r, n);
    let mut a = std::collections::BTreeMap::new();
    let mut b = std::collections::BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if i == hot_row || rng::next_f64(&mut r) < density {
                a.insert((i, j), 1u64);
            }
            if j == hot_col || rng::next_f64(&mut r) < density {
                b.insert((i, j), 1u64);
            }
        }
    }
    (
        SparseIntMatrix::from_map(n, n, a, 1),
        SparseIntMatrix::from_map(n, n, b, 1),
    )
}

/// Integer background plus one dominant product entry of about
/// `spike` (default 1000).
pub fn planted_int_max_pair(
    n: usize,
    density: f64,
    value_max: u64,
    seed: u64,
) -> (SparseIntMatrix, SparseIntMatrix) {
    let spike = 1000u64;
    let mut a = random_int(n, density, value_max.min(4), seed);
    let mut b = random_int(n, density, value_max.min(4), rng::mix(seed, 1));
    let mut ea: Vec<(usize, usize, u64)> =
        a.entries().filter(|&(i, k, _)| !(i == 0 && k == 0)).collect();
    ea.push((0, 0, spike));
    a = SparseIntMatrix::from_entries_bounded(n, n, ea, spike).expect("planted entries are valid");
    let mut eb: Vec<(usize, usize, u64)> =
        b.entries().filter(|&(k, j, _)| !(k == 0 && j == 0)).collect();
    eb.push((0, 0, 1));
    b = SparseIntMatrix::from_entries_bounded(n, n, eb, value_max.min(4).max(1))
        .expect("planted entries are valid");
    (a, b)
}

/// Binary pair sharing one large set overlap over a very sparse background,
/// so the overlap is a roughly 0.6 fraction of the product l1 mass.
pub fn planted_hh_pair(n: usize, seed: u64) -> (SparseIntMatrix, SparseIntMatrix) {
    let mut r = rng::chacha(seed, 0x7068);
    let hot = n / 4;
    let mut a = std::collections::BTreeMap::new();
    let mut b = std::collections::BTreeMap::new();
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

/// Builds the trial instance. Returns the pair plus a planted statistic
/// when the family records one at generation time.
pub fn make_instance(
    cfg: &ExperimentConfig,
    inst_seed: u64,
) -> Result<(SparseIntMatrix, SparseIntMatrix, Option<f64>)> {
    match cfg.family {
        FamilyKind::RandomDensity => Ok((
            random_binary(cfg.n, cfg.density, inst_seed),
            random_binary(cfg.n, cfg.density, rng::mix(inst_seed, 1)),
            None,
        )),
        FamilyKind::RandomInt => Ok((
            random_int(cfg.n, cfg.density, cfg.value_max, inst_seed),
            random_int(cfg.n, cfg.density, cfg.value_max, rng::mix(inst_seed, 1)),
            None,
        )),
        FamilyKind::PlantedMax => {
            let (a, b) = planted_max_pair(cfg.n, cfg.density, inst_seed);
            Ok((a, b, None))
        }
        FamilyKind::PlantedIntMax => {
            let (a, b) = planted_int_max_pair(cfg.n, cfg.density, cfg.value_max, inst_seed);
            Ok((a, b, None))
        }
        FamilyKind::PlantedHh => {
            let (a, b) = planted_hh_pair(cfg.n, inst_seed);
            Ok((a, b, None))
        }
        FamilyKind::DisjEmbed => {
            let half = (cfg.n / 2).max(1);
            let t = half * half;
            let mut r = rng::chacha(inst_seed, 0x6462);
            let x: Vec<bool> = (0..t).map(|_| rng::next_f64(&mut r) < cfg.density).collect();
            let y: Vec<bool> = (0..t).map(|_| rng::next_f64(&mut r) < cfg.density).collect();
            let emb = hardgen::gen_disj_embedding(&x, &y)?;
            let planted = if emb.intersecting {
                2.0
            } else if x.iter().any(|&v| v) || y.iter().any(|&v| v) {
                1.0
            } else {
                0.0
            };
            Ok((emb.a, emb.b, Some(planted)))
        }
        FamilyKind::SumInstance => {
            let k = cfg
                .k_blocks
                .unwrap_or_else(|| hardgen::default_k(cfg.n, cfg.kappa));
            let inst = hardgen::gen_sum_instance(cfg.n, k, inst_seed)?;
            // The planted lower bound on the max entry of the product.
            let planted = if inst.planted_sum == 1 {
                Some(inst.blocks as f64)
            } else {
                None
            };
            let (a, b) = (inst.a, inst.b);
            Ok((a, b, planted))
        }
        FamilyKind::File => {
            let a = SparseIntMatrix::load_file(cfg.file_a.as_ref().expect("validated"))?;
            let b = SparseIntMatrix::load_file(cfg.file_b.as_ref().expect("validated"))?;
            Ok((a, b, None))
        }
    }
}

fn dispatch(
    cfg: &ExperimentConfig,
    a: &SparseIntMatrix,
    b: &SparseIntMatrix,
    session: &mut ProtocolSession,
) -> Result<EstimateReport> {
    match cfg.protocol {
        ProtocolKind::LpEstimate => run_lp_estimate(a, b, &cfg.lp_params()?, session),
        ProtocolKind::LpBaseline => run_lp_baseline(a, b, &cfg.lp_params()?, session),
        ProtocolKind::L1Exact => run_l1_exact(a, b, session),
        ProtocolKind::L1Sample => run_l1_sample(a, b, session),
        ProtocolKind::L0Sample => run_l0_sample_matrix(a, b, cfg.eps, session),
        ProtocolKind::Linf2Eps => {
            let params = LinfParams::new(cfg.eps)?.with_c_gamma(cfg.c_gamma);
            run_linf_2eps(a, b, &params, session)
        }
        ProtocolKind::LinfKappa => {
            let params =
                UniverseSampleParams::new(cfg.kappa, cfg.n)?.with_c_alpha(cfg.c_alpha);
            run_linf_kappa(a, b, &params, session)
        }
        ProtocolKind::LinfGeneral => {
            let params = GeneralLinfParams::new(cfg.kappa.round() as usize, cfg.n)?;
            run_linf_general(a, b, &params, session)
        }
        ProtocolKind::HhGeneral => run_hh_general(a, b, &cfg.hh_params()?, session),
        ProtocolKind::HhBinary => run_hh_binary(a, b, &cfg.hh_params()?, session),
    }
}

/// Guarantee band for a scalar-estimate protocol, as (lo, hi) ratio bounds.
fn guarantee_band(cfg: &ExperimentConfig) -> Option<(f64, f64)> {
    match cfg.protocol {
        ProtocolKind::LpEstimate | ProtocolKind::LpBaseline => {
            Some((1.0 / (1.0 + cfg.eps), 1.0 + cfg.eps))
        }
        ProtocolKind::L1Exact => Some((1.0, 1.0)),
        ProtocolKind::Linf2Eps => Some((1.0 / (2.0 * (1.0 + cfg.eps)), 1.0 + cfg.eps)),
        ProtocolKind::LinfKappa => Some((1.0 / cfg.kappa, cfg.kappa)),
        ProtocolKind::LinfGeneral => Some((1.0 / (2.0 * cfg.kappa), 2.0 * cfg.kappa)),
        _ => None,
    }
}

fn oracle_value(cfg: &ExperimentConfig, c: &SparseIntMatrix) -> Result<f64> {
    Ok(match cfg.protocol {
        ProtocolKind::LpEstimate | ProtocolKind::LpBaseline => c.lp_norm_pow(cfg.p)?,
        ProtocolKind::L1Exact | ProtocolKind::L1Sample => c.lp_norm_pow(1.0)?,
        ProtocolKind::L0Sample => c.lp_norm_pow(0.0)?,
        ProtocolKind::Linf2Eps | ProtocolKind::LinfKappa | ProtocolKind::LinfGeneral => {
            c.linf_norm() as f64
        }
        ProtocolKind::HhGeneral | ProtocolKind::HhBinary => {
            c.heavy_hitters_exact(cfg.p, cfg.phi)?.len() as f64
        }
    })
}

/// Runs one trial: build the instance, run the protocol, score the report.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialRow> {
    let inst_label = if cfg.vary_instance { trial as u64 + 1 } else { 0 };
    let inst_seed = rng::mix(cfg.seed, 0x494E_5354 ^ inst_label);
    let (a, b, planted) = make_instance(cfg, inst_seed)?;
    let session_seed = rng::mix(cfg.seed, 0x5452_49 ^ ((trial as u64) << 8));
    let mut session = ProtocolSession::new(session_seed);
    let start = Instant::now();
    let report = dispatch(cfg, &a, &b, &mut session)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let use_oracle = cfg.oracle && cfg.n <= cfg.oracle_cutoff;
    let c = if use_oracle { Some(a.multiply(&b)?) } else { None };
    let oracle = match &c {
        Some(c) => Some(oracle_value(cfg, c)?),
        None => planted,
    };

    let (result_str, estimate) = match &report.result {
        ResultValue::Scalar(x) => (format!("{x}"), Some(*x)),
        ResultValue::Sample { row, col, witness } => {
            let w = witness.map(|k| format!(":w{k}")).unwrap_or_default();
            (format!("sample:{row}:{col}{w}"), None)
        }
        ResultValue::Hitters(h) => (format!("set:{}", h.pairs.len()), Some(h.pairs.len() as f64)),
        ResultValue::Empty => ("empty".into(), None),
        ResultValue::Failed => ("failed".into(), None),
    };

    let ratio = match (estimate, oracle) {
        (Some(e), Some(o)) if o > 0.0 => Some(e / o),
        _ => None,
    };
    let within = match (&report.result, &c) {
        (ResultValue::Scalar(e), Some(c)) => {
            let o = oracle_value(cfg, c)?;
            guarantee_band(cfg).map(|(lo, hi)| {
                if o == 0.0 {
                    *e == 0.0
                } else {
                    let r = e / o;
                    r >= lo && r <= hi
                }
            })
        }
        (ResultValue::Sample { row, col, .. }, Some(c)) => Some(c.get(*row, *col) > 0),
        (ResultValue::Hitters(h), Some(c)) => {
            let heavy = c.heavy_hitters_exact(cfg.p, cfg.phi)?;
            let loose_phi = cfg.phi - cfg.eps;
            let loose = if loose_phi > 0.0 {
                c.heavy_hitters_exact(cfg.p, loose_phi)?
            } else {
                c.entries().map(|(i, j, _)| (i, j)).collect()
            };
            Some(heavy.is_subset(&h.pairs) && h.pairs.is_subset(&loose))
        }
        _ => None,
    };

    Ok(TrialRow {
        trial,
        seed: session_seed,
        result: result_str,
        estimate,
        oracle,
        ratio,
        within,
        bits: report.bits_total,
        rounds: report.rounds,
        wall_ms: cfg.timings.then_some(wall_ms),
    })
}

/// Runs all trials in parallel; rows come back in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let mut rows: Vec<(usize, Result<TrialRow>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| (t, run_trial(cfg, t)))
        .collect();
    rows.sort_by_key(|(t, _)| *t);
    rows.into_iter().map(|(_, r)| r).collect()
}

fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Writes the versioned CSV: schema comment, header, one line per trial.
pub fn write_csv<W: Write>(out: &mut W, cfg: &ExperimentConfig, rows: &[TrialRow]) -> Result<()> {
    writeln!(out, "{CSV_SCHEMA}")?;
    let time_col = if cfg.timings { ",wall_ms" } else { "" };
    writeln!(
        out,
        "protocol,family,n,p,eps,phi,kappa,trial,seed,result,estimate,oracle,ratio,within,bits,rounds{time_col}"
    )?;
    for r in rows {
        let within = r
            .within
            .map(|b| if b { "1" } else { "0" })
            .unwrap_or("");
        let time_val = match (cfg.timings, r.wall_ms) {
            (true, Some(ms)) => format!(",{ms:.3}"),
            (true, None) => ",".into(),
            _ => String::new(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}{}",
            cfg.protocol.name(),
            cfg.family.name(),
            cfg.n,
            cfg.p,
            cfg.eps,
            cfg.phi,
            cfg.kappa,
            r.trial,
            r.seed,
            r.result,
            fmt_opt_f64(r.estimate),
            fmt_opt_f64(r.oracle),
            fmt_opt_f64(r.ratio),
            within,
            r.bits,
            r.rounds,
            time_val,
        )?;
    }
    Ok(())
}

/// Per-configuration summary of a trials CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub protocol: String,
    pub family: String,
    pub n: u64,
    pub trials: usize,
    /// Fraction of trials whose `within` flag was set, if any carried one.
    pub success_rate: Option<f64>,
    pub median_bits: u64,
    pub median_rounds: u64,
}

fn median_u64(values: &mut [u64]) -> u64 {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[values.len() / 2]
}

/// Parses a trials CSV and aggregates per (protocol, family, n).
pub fn summarize(csv_text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = csv_text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let Some(header) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split(',').collect();
    let idx = |name: &str| -> Result<usize> {
        cols.iter()
            .position(|&c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing CSV column {name:?}")))
    };
    let (ip, ifam, in_, iwithin, ibits, irounds) = (
        idx("protocol")?,
        idx("family")?,
        idx("n")?,
        idx("within")?,
        idx("bits")?,
        idx("rounds")?,
    );
    let mut groups: std::collections::BTreeMap<(String, String, u64), Vec<(Option<bool>, u64, u64)>> =
        Default::default();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < cols.len() {
            return Err(Error::Parse(format!("short CSV row: {line:?}")));
        }
        let key = (
            f[ip].to_string(),
            f[ifam].to_string(),
            f[in_]
                .parse()
                .map_err(|_| Error::Parse(format!("bad n in {line:?}")))?,
        );
        let within = match f[iwithin] {
            "1" => Some(true),
            "0" => Some(false),
            "" => None,
            other => return Err(Error::Parse(format!("bad within flag {other:?}"))),
        };
        let bits: u64 = f[ibits]
            .parse()
            .map_err(|_| Error::Parse(format!("bad bits in {line:?}")))?;
        let rounds: u64 = f[irounds]
            .parse()
            .map_err(|_| Error::Parse(format!("bad rounds in {line:?}")))?;
        groups.entry(key).or_default().push((within, bits, rounds));
    }
    Ok(groups
        .into_iter()
        .map(|((protocol, family, n), rows)| {
            let flagged: Vec<bool> = rows.iter().filter_map(|(w, _, _)| *w).collect();
            let success_rate = (!flagged.is_empty())
                .then(|| flagged.iter().filter(|&&b| b).count() as f64 / flagged.len() as f64);
            let mut bits: Vec<u64> = rows.iter().map(|(_, b, _)| *b).collect();
            let mut rounds: Vec<u64> = rows.iter().map(|(_, _, r)| *r).collect();
            SummaryRow {
                protocol,
                family,
                n,
                trials: rows.len(),
                success_rate,
                median_bits: median_u64(&mut bits),
                median_rounds: median_u64(&mut rounds),
            }
        })
        .collect())
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from("protocol,family,n,trials,success_rate,median_bits,median_rounds\n");
    for r in rows {
        let rate = r
            .success_rate
            .map(|x| format!("{x:.3}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.protocol, r.family, r.n, r.trials, rate, r.median_bits, r.median_rounds
        ));
    }
    out
}
