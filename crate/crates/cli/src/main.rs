use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rhopomcpow::error::Result;
use rhopomcpow::harness::{self, oracle, BoundsSpec, ProfileSpec};

#[derive(Parser)]
#[command(name = "rhopomcpow", version, about = "Online planning experiments with belief-dependent rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration (or, for `run`, a manifest to replay).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes and write summary.csv, runs.jsonl and manifest.json.
    Run {
        #[command(flatten)]
        common: Common,
        /// Episode count, overriding the configuration.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Cumulative planning time per iteration for paired planner variants.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Iterations, overriding the configuration.
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Visit counts against the deterministic visitation lower bounds.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Incremental against batch recomputation sweeps.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Shannon insertions.
        #[arg(long, default_value_t = 10_000)]
        shannon: usize,
        /// Boers particles.
        #[arg(long, default_value_t = 2_000)]
        boers: usize,
        /// Random tree updates.
        #[arg(long, default_value_t = 100_000)]
        lvu: usize,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| rhopomcpow::error::Error::Config(e.to_string()))
}

fn out_dir(common: &Common, fallback: Option<PathBuf>, name: &str) -> PathBuf {
    common
        .out
        .clone()
        .or(fallback)
        .unwrap_or_else(|| PathBuf::from("out").join(name))
}

fn run(common: &Common, episodes: Option<usize>) -> Result<()> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| rhopomcpow::error::Error::Config("run needs --config".into()))?;
    let mut config = harness::load_experiment(path)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(n) = episodes {
        config.episodes = n;
    }
    let dir = out_dir(common, config.out_dir.clone(), "run");
    let experiment = harness::run_experiment(&config, common.threads)?;
    for path in harness::emit_reports(&experiment, &dir)? {
        println!("wrote {}", path.display());
    }
    println!("{:<16} {:>10} {:>10} {:>10} {:>6}", "planner", "budget", "mean", "stderr", "n");
    for r in &experiment.summary {
        println!("{:<16} {:>10} {:>10.3} {:>10.3} {:>6}", r.planner, r.budget, r.mean, r.stderr, r.n);
    }
    Ok(())
}

fn profile(common: &Common, iterations: Option<u64>) -> Result<()> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| rhopomcpow::error::Error::Config("profile needs --config".into()))?;
    let mut spec: ProfileSpec = read_json(path)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(t) = iterations {
        spec.iterations = t;
    }
    let profile = harness::timing_profile(&spec)?;
    let dir = out_dir(common, None, "profile");
    println!("wrote {}", harness::write_timings_csv(&profile.curves, &dir)?.display());
    let hi = spec.iterations;
    let lo = (hi / 10).max(1);
    println!("trees identical across {} variants", profile.curves.len());
    for c in &profile.curves {
        let total = c.times.last().copied().unwrap_or(0.0);
        let slope = if hi > lo { c.slope(lo, hi, 20) } else { f64::NAN };
        println!("{:<14} total {:>10.4}s  log-log slope over [{lo}, {hi}]: {slope:.3}", c.variant, total);
    }
    Ok(())
}

fn bounds(common: &Common) -> Result<()> {
    let mut spec: BoundsSpec = match &common.config {
        Some(path) => read_json(path)?,
        None => BoundsSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let rows = harness::run_bounds(&spec)?;
    let dir = out_dir(common, None, "bounds");
    println!("wrote {}", harness::write_bounds_csv(&rows, &dir)?.display());
    for &t in &spec.checkpoints {
        let at: Vec<_> = rows.iter().filter(|r| r.t == t).collect();
        println!(
            "t = {t:>7}: {:>6} eligible nodes, {:>6} vacuous, {} violations",
            at.len(),
            at.iter().filter(|r| r.vacuous).count(),
            at.iter().filter(|r| r.violated).count()
        );
    }
    Ok(())
}

fn run_oracle(common: &Common, shannon: usize, boers: usize, lvu: usize) -> Result<()> {
    let seed = common.seed.unwrap_or(0);
    let reports = vec![
        oracle::shannon_sweep(shannon, seed)?,
        oracle::boers_sweep(boers, 100, seed)?,
        oracle::lvu_sweep(lvu, (lvu / 10).max(1), seed)?,
    ];
    let dir = out_dir(common, None, "oracle");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("oracle.json");
    std::fs::write(&path, serde_json::to_string_pretty(&reports)?)?;
    println!("wrote {}", path.display());
    for r in &reports {
        println!(
            "{:<8} checks {:>8}  max abs err {:.3e}  max rel err {:.3e}  speedup {:>8.1}x",
            r.name,
            r.checks,
            r.max_abs_error,
            r.max_rel_error,
            r.speedup()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common, episodes } => run(common, *episodes),
        Command::Profile { common, iterations } => profile(common, *iterations),
        Command::Bounds { common } => bounds(common),
        Command::Oracle {
            common,
            shannon,
            boers,
            lvu,
        } => run_oracle(common, *shannon, *boers, *lvu),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
