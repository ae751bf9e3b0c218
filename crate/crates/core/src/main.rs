use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qec_abort::harness::{cmd_benchmark, cmd_generate, cmd_selftest, cmd_sweep, cmd_train, with_threads, ExperimentConfig};

/// Surface-code memory experiments with adaptive abort policies.
#[derive(Parser)]
#[command(name = "qec-abort", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "QEC_ABORT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample full-depth shots into a shot file.
    Generate(ConfigArgs),
    /// Train a predictor and write a checkpoint.
    Train(ConfigArgs),
    /// Efficiency of each policy at the configured theta and c.
    Benchmark(ConfigArgs),
    /// Efficiency over the theta and c grids.
    Sweep(ConfigArgs),
    /// Run the oracle checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(short, long)]
    d: Option<String>,
    #[arg(short, long)]
    p: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    shots: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    osla_checkpoint: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("d", &self.d),
            ("p", &self.p),
            ("rounds", &self.rounds),
            ("shots", &self.shots),
            ("seed", &self.seed),
            ("arch", &self.arch),
            ("out", &self.out),
            ("dataset", &self.dataset),
            ("checkpoint", &self.checkpoint),
            ("osla_checkpoint", &self.osla_checkpoint),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    let threads = cli.threads;
    match cli.command {
        Command::Generate(args) => {
            let cfg = args.resolve()?;
            let s = with_threads(threads, || cmd_generate(&cfg))??;
            println!("wrote {} shots to {} (sha256 {})", s.shots, s.path.display(), s.content_hash);
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let s = with_threads(threads, || cmd_train(&cfg))??;
            print!("{}", s.report.loss_csv());
            print!("{}", s.auc_text());
            println!("wrote {} ({} examples)", s.checkpoint.display(), s.examples);
        }
        Command::Benchmark(args) => {
            let cfg = args.resolve()?;
            print!("{}", with_threads(threads, || cmd_benchmark(&cfg))??);
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let s = with_threads(threads, || cmd_sweep(&cfg))??;
            print!("{}", s.csv);
            if let Some((theta, eta)) = s.best_theta {
                eprintln!("best theta {theta} (eta {eta}), {} peak(s) after smoothing", s.theta_peaks.unwrap_or(0));
            }
            if let Some((c, eta)) = s.best_c {
                eprintln!("best c {c} (eta {eta})");
            }
        }
        Command::Selftest { seed } => {
            let results = with_threads(threads, || cmd_selftest(seed))??;
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.pass;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
