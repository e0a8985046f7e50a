//! Command-line harness for running protocols over instance families.

use std::io::Read;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use matprod::harness::{
    self, ExperimentConfig, FamilyKind, ProtocolKind, CSV_SCHEMA,
};
use matprod::{hardgen, rng};

#[derive(Parser)]
#[command(
    name = "matprod",
    about = "Two-party estimation of matrix-product statistics with exact bit metering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol over an instance family and emit a trials CSV.
    Run(RunArgs),
    /// Aggregate a trials CSV into per-configuration success and cost.
    Summarize(SummarizeArgs),
    /// Generate instance files (matrix text format plus a JSONL sidecar).
    Gen(GenArgs),
    /// List protocols with their guarantees.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Protocol name (see `matprod list`).
    #[arg(long)]
    protocol: String,
    /// Instance family: random-density | random-int | planted-max |
    /// planted-int-max | planted-hh | disj-embed | sum-instance | file.
    #[arg(long, default_value = "random-density")]
    family: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 4.0)]
    kappa: f64,
    /// Block width for the sum-instance family (defaults to the planted
    /// relation).
    #[arg(long)]
    k_blocks: Option<usize>,
    /// Largest entry value for integer families.
    #[arg(long, default_value_t = 8)]
    value_max: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Odd number of median-boost repetitions for the lp protocol.
    #[arg(long, default_value_t = 1)]
    boost: usize,
    #[arg(long = "c-rho", default_value_t = 200.0)]
    c_rho: f64,
    #[arg(long = "c-gamma", default_value_t = 8.0)]
    c_gamma: f64,
    #[arg(long = "c-alpha", default_value_t = 8.0)]
    c_alpha: f64,
    #[arg(long = "c-hh", default_value_t = 8.0)]
    c_hh: f64,
    #[arg(long = "c-sketch", default_value_t = 6)]
    c_sketch: usize,
    /// Compute the exact oracle column (default; see --no-oracle).
    #[arg(long, action = ArgAction::SetTrue, conflicts_with = "no_oracle")]
    oracle: bool,
    /// Skip oracle computation.
    #[arg(long = "no-oracle", action = ArgAction::SetTrue)]
    no_oracle: bool,
    /// Largest n at which the cubic oracle still runs.
    #[arg(long, default_value_t = 512)]
    oracle_cutoff: usize,
    /// Regenerate the instance every trial (default for generator
    /// families).
    #[arg(long, action = ArgAction::SetTrue)]
    vary_instance: bool,
    /// Add a wall-clock column (makes output non-reproducible).
    #[arg(long, action = ArgAction::SetTrue)]
    timings: bool,
    /// Matrix files for the `file` family: A then B.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    file: Option<Vec<PathBuf>>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Trials CSV to read; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Family to generate: disj-embed | sum-instance | planted-max |
    /// planted-hh | random-density | random-int.
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long, default_value_t = 4.0)]
    kappa: f64,
    #[arg(long)]
    k_blocks: Option<usize>,
    #[arg(long, default_value_t = 8)]
    value_max: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of instances.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn build_config(args: &RunArgs) -> matprod::Result<ExperimentConfig> {
    let protocol = ProtocolKind::from_name(&args.protocol)?;
    let family = FamilyKind::from_name(&args.family)?;
    let mut cfg = ExperimentConfig::new(protocol, family);
    cfg.n = args.n;
    cfg.density = args.density;
    cfg.p = args.p;
    cfg.eps = args.eps;
    cfg.phi = args.phi;
    cfg.kappa = args.kappa;
    cfg.k_blocks = args.k_blocks;
    cfg.value_max = args.value_max;
    cfg.trials = args.trials;
    cfg.seed = args.seed;
    cfg.boost_reps = args.boost;
    cfg.c_rho = args.c_rho;
    cfg.c_gamma = args.c_gamma;
    cfg.c_alpha = args.c_alpha;
    cfg.c_hh = args.c_hh;
    cfg.c_sketch = args.c_sketch;
    cfg.oracle = !args.no_oracle;
    cfg.oracle_cutoff = args.oracle_cutoff;
    cfg.vary_instance = cfg.vary_instance || args.vary_instance;
    cfg.timings = args.timings;
    if let Some(files) = &args.file {
        cfg.file_a = Some(files[0].clone());
        cfg.file_b = Some(files[1].clone());
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> matprod::Result<()> {
    let cfg = build_config(&args)?;
    if cfg.oracle && cfg.n > cfg.oracle_cutoff {
        eprintln!(
            "warning: n={} exceeds oracle cutoff {}; oracle column left empty",
            cfg.n, cfg.oracle_cutoff
        );
    }
    let rows = harness::run_experiment(&cfg)?;
    match &args.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            harness::write_csv(&mut f, &cfg, &rows)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            harness::write_csv(&mut lock, &cfg, &rows)?;
        }
    }
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> matprod::Result<()> {
    let text = match &args.input {
        Some(path) => std::fs::read_to_string(path)?,
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    let summary = harness::summarize(&text)?;
    print!("{}", harness::render_summary(&summary));
    Ok(())
}

fn cmd_gen(args: GenArgs) -> matprod::Result<()> {
    let family = FamilyKind::from_name(&args.family)?;
    for idx in 0..args.count {
        let seed = rng::mix(args.seed, idx as u64);
        let stem = format!("{}_{idx:04}", family.name());
        let mut cfg = ExperimentConfig::new(ProtocolKind::L1Exact, family);
        cfg.n = args.n;
        cfg.density = args.density;
        cfg.kappa = args.kappa;
        cfg.k_blocks = args.k_blocks;
        cfg.value_max = args.value_max;
        let (a, b, planted) = harness::make_instance(&cfg, seed)?;
        let mut meta = serde_json::json!({
            "family": family.name(),
            "stem": stem,
            "seed": seed,
            "n": args.n,
            "density": args.density,
        });
        if let Some(p) = planted {
            meta["planted"] = serde_json::json!(p);
        }
        if family == FamilyKind::SumInstance {
            let k = args
                .k_blocks
                .unwrap_or_else(|| hardgen::default_k(args.n, args.kappa));
            let inst = hardgen::gen_sum_instance(args.n, k, seed)?;
            meta["k"] = serde_json::json!(inst.k);
            meta["beta"] = serde_json::json!(inst.beta);
            meta["beta_raw"] = serde_json::json!(inst.beta_raw);
            meta["blocks"] = serde_json::json!(inst.blocks);
            meta["planted_sum"] = serde_json::json!(inst.planted_sum);
        }
        hardgen::save_instance(&args.out_dir, &stem, &a, &b, meta)?;
        println!("wrote {stem} under {}", args.out_dir.display());
    }
    Ok(())
}

fn cmd_list() {
    println!("{:<14} description", "protocol");
    for p in ProtocolKind::all() {
        println!("{:<14} {}", p.name(), p.describe());
    }
    println!("\ntrials CSV schema: {CSV_SCHEMA}");
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Gen(args) => cmd_gen(args),
        Command::List => {
            cmd_list();
            Ok(())
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
