use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use disac::experiment::{cache_bank, emit_results, run_sweep, ExperimentConfig};
use disac::pipeline::{design_bank, Roles};
use disac::selection::{candidate_count, quantile, random_baseline, saf_cache, solve_exhaustive, solve_ga, GaConfig};
use disac::validation;
use disac::waveform::WaveformKind;
use log::info;

#[derive(Parser)]
#[command(name = "disac", version, about = "Distributed ISAC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write results.csv, manifest.json and images.
    Run {
        /// TOML experiment file. Built-in defaults when omitted.
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(short, long, default_value_t = 0)]
        threads: usize,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Design one sensing waveform per Tx AP and write the bank.
    DesignWaveforms {
        config: Option<PathBuf>,
        /// Rx AP indices; every other AP transmits.
        #[arg(long, value_delimiter = ',')]
        rx: Vec<usize>,
        #[arg(short, long, default_value = "bank.txt")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Skip the design and draw pseudo-random sequences.
        #[arg(long)]
        pseudo_random: bool,
    },
    /// Choose the Rx APs that minimise image entropy.
    SelectAps {
        config: Option<PathBuf>,
        /// Largest number of Rx APs.
        #[arg(long, default_value_t = 1)]
        max_rx: usize,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random allocations drawn for the baseline quantiles.
        #[arg(long, default_value_t = 200)]
        baseline: usize,
    },
    /// Run the acceptance checks.
    Validate {
        /// Criteria to run (default: all).
        #[arg(value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Exhaustive up to 1e5 candidates, GA beyond.
    Auto,
    Ga,
    Exhaustive,
}

fn load(config: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(config: Option<PathBuf>, out: PathBuf, threads: usize, seed: Option<u64>) -> Result<()> {
    let mut cfg = load(config.as_ref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    let points = cfg.points().len();
    info!("{}: {} points x {} replicates", cfg.name, points, cfg.replicates);
    let t = Instant::now();
    let result = run_sweep(&cfg)?;
    let manifest = emit_results(&cfg, &result, &out)?;
    let failed = result.rows.iter().filter(|r| !r.error.is_empty()).count();
    println!(
        "{} rows ({} failed) in {:.1} s -> {}",
        result.rows.len(),
        failed,
        t.elapsed().as_secs_f64(),
        manifest.display()
    );
    Ok(())
}

fn design(config: Option<PathBuf>, rx: Vec<usize>, out: PathBuf, seed: u64, pseudo: bool) -> Result<()> {
    let mut cfg = load(config.as_ref())?;
    cfg.run.waveform = if pseudo {
        WaveformKind::PseudoRandom
    } else {
        WaveformKind::Designed
    };
    let base = cfg.scenario.base()?;
    let n = base.aps.len();
    if let Some(bad) = rx.iter().find(|&&r| r >= n) {
        bail!("Rx AP {bad} out of range (network has {n} APs)");
    }
    let roles = Roles::split(n, &rx);
    let bank = design_bank(&base, &roles, &cfg.run, seed)?;
    bank.save(&out)?;
    println!(
        "{} sequences, M = {}, |support| = {}, max cross-correlation on support = {:.3e} -> {}",
        bank.len(),
        base.grid.subcarriers,
        bank.support.len(),
        bank.max_cross_correlation(),
        out.display()
    );
    Ok(())
}

fn select(config: Option<PathBuf>, max_rx: usize, method: Method, seed: u64, baseline: usize) -> Result<()> {
    let cfg = load(config.as_ref())?;
    let base = cfg.scenario.base()?;
    let n = base.aps.len();
    let t = Instant::now();
    let bank = cache_bank(&base, &cfg.run, seed)?;
    let cache = saf_cache(&base, &bank, &cfg.run)?;
    info!("pair cache for {n} APs built in {:.1} s", t.elapsed().as_secs_f64());
    let exhaustive = match method {
        Method::Auto => candidate_count(n, max_rx) <= 100_000,
        Method::Ga => false,
        Method::Exhaustive => true,
    };
    let result = if exhaustive {
        solve_exhaustive(&cache, max_rx)?
    } else {
        let ga = match &cfg.selection {
            disac::experiment::SelectionConfig::Ga(g) => g.clone(),
            _ => GaConfig::default(),
        };
        solve_ga(&cache, max_rx, &GaConfig { seed, ..ga })?
    };
    let rnd = random_baseline(&cache, max_rx, baseline, seed)?;
    let q: Vec<Option<f64>> = [0.05, 0.5, 0.95].iter().map(|p| quantile(&rnd, *p)).collect();
    let report = serde_json::json!({
        "method": if exhaustive { "exhaustive" } else { "ga" },
        "rx": result.allocation.rx(),
        "tx": result.allocation.tx(),
        "entropy_bits": result.entropy,
        "evaluations": result.evaluations,
        "random_entropy_q05_q50_q95": q,
        "seconds": t.elapsed().as_secs_f64(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn validate(only: Vec<usize>) -> Result<bool> {
    let ids: Vec<usize> = if only.is_empty() {
        (1..=validation::CRITERIA.len()).collect()
    } else {
        only
    };
    let mut ok = true;
    for id in ids {
        if !(1..=validation::CRITERIA.len()).contains(&id) {
            bail!("no criterion {id}");
        }
        let outcome = validation::run(id);
        println!("{outcome}");
        ok &= outcome.passed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => run(config, out, threads, seed).map(|_| true),
        Command::DesignWaveforms {
            config,
            rx,
            out,
            seed,
            pseudo_random,
        } => design(config, rx, out, seed, pseudo_random).map(|_| true),
        Command::SelectAps {
            config,
            max_rx,
            method,
            seed,
            baseline,
        } => select(config, max_rx, method, seed, baseline).map(|_| true),
        Command::Validate { only } => validate(only),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
