use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use wmkv_core::harness::{
    run_limit_ladder, run_sweep, verify_outputs, write_ladder, write_sweep, ExperimentConfig,
    Manifest, RuntimeInfo,
};

#[derive(Parser, Debug)]
#[command(name = "wmkv", version, about = "Convergence experiments for weighted particle systems with common noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug)]
struct Opts {
    /// Override the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: `[output] dir` of the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validate the configuration and exit.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the single axis named in `[sweep]`.
    Simulate { config: PathBuf },
    /// Every ladder axis plus the overall chain against the target.
    Ladder { config: PathBuf },
    /// Re-run the experiment recorded in a manifest and compare every output digest.
    Replay { manifest: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Simulate,
    Ladder,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.sweep.seed = s;
    }
    Ok(cfg)
}

fn execute(kind: Kind, cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<Manifest> {
    let start = Instant::now();
    info!("{kind:?} with config hash {} into {}", cfg.hash(), out.display());
    let manifest = match kind {
        Kind::Simulate => {
            let r = run_sweep(cfg)?;
            let rt = RuntimeInfo {
                threads,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            write_sweep(out, cfg, &r, &rt)?
        }
        Kind::Ladder => {
            let r = run_limit_ladder(cfg)?;
            let rt = RuntimeInfo {
                threads,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            write_ladder(out, cfg, &r, &rt)?
        }
    };
    Ok(manifest)
}

fn run(cli: Cli) -> Result<()> {
    let opts = cli.opts;
    let (kind, cfg) = match &cli.command {
        Command::Simulate { config } => (Kind::Simulate, load(config, opts.seed)?),
        Command::Ladder { config } => (Kind::Ladder, load(config, opts.seed)?),
        Command::Replay { manifest } => {
            if opts.seed.is_some() {
                bail!("--seed cannot be combined with replay; the seed is part of the manifest");
            }
            let m = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let kind = match m.get("command") {
                Some("simulate") => Kind::Simulate,
                Some("ladder") => Kind::Ladder,
                other => bail!("manifest names an unknown command {other:?}"),
            };
            (kind, m.config()?)
        }
    };
    cfg.validate().context("invalid configuration")?;
    if opts.check {
        println!("ok {}", cfg.hash());
        return Ok(());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    let threads = pool.current_num_threads();
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let manifest = pool.install(|| execute(kind, &cfg, &out, threads))?;

    if let Command::Replay { manifest: original } = &cli.command {
        let recorded = Manifest::read(original)?;
        let differing = verify_outputs(&out, &recorded);
        if !differing.is_empty() {
            bail!("replay differs from the recorded run in: {}", differing.join(", "));
        }
        if manifest.comparable() != recorded.comparable() {
            bail!("replay produced a different manifest");
        }
        println!("replay identical: {} outputs", recorded.outputs().len());
    }
    for (name, _) in manifest.outputs() {
        println!("{}", out.join(name).display());
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
