use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imc::cli::{self, ExperimentConfig, VerifyConfig};
use imc::{ImcError, Result};

#[derive(Parser)]
#[command(name = "imc", version, about = "Importance Markov chain sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output`, then `imc-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "IMC_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the sampler and writes samples, metadata and diagnostics.
    Run(Common),
    /// Checks the finite-state oracle identities on random specs.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Number of states in each random spec.
        #[arg(long)]
        m: Option<usize>,
        /// Largest replication count in each random spec.
        #[arg(long)]
        n_max: Option<usize>,
        /// Comma-separated spec seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Tolerance override, `name=value`; repeatable.
        #[arg(long = "tol")]
        tolerances: Vec<String>,
        /// Adds a reducible spec that must fail the uniqueness check.
        #[arg(long)]
        reducible: bool,
    },
    /// Scans κ on a fixed instrumental chain.
    EssScan(Common),
    /// Compares IMC, IS, independent MH and OSR on shared i.i.d. draws.
    Bench(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().ok_or_else(|| ImcError::Config { path: "--config".into(), reason: "required".into() })?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg_out: Option<&PathBuf>) -> PathBuf {
    common.out.clone().or_else(|| cfg_out.cloned()).unwrap_or_else(|| PathBuf::from("imc-out"))
}

fn set_threads(common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| ImcError::Config { path: "--threads".into(), reason: e.to_string() })?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run(common) => {
            set_threads(&common)?;
            let cfg = load(&common)?;
            let out = out_dir(&common, cfg.output.as_ref());
            let summary = cli::run(&cfg, &out)?;
            for (o, d) in summary.replications.iter().zip(&summary.diagnostics) {
                println!("replication {}: kappa {:.6e}, chain length {}, ESS_kappa {:.1}, ESS_IS {:.1}", o.replication, o.kappa, d.chain_length, d.ess_kappa, d.ess_is);
            }
            Ok(true)
        }
        Command::Verify { common, m, n_max, seeds, tolerances, reducible } => {
            set_threads(&common)?;
            let mut cfg = match &common.config {
                Some(p) => VerifyConfig::from_json(&std::fs::read_to_string(p)?)?,
                None => VerifyConfig::default(),
            };
            if let Some(m) = m {
                cfg.m = m;
            }
            if let Some(n) = n_max {
                cfg.n_max = n;
            }
            if let Some(s) = seeds {
                cfg.seeds = s;
            } else if let Some(seed) = common.seed {
                cfg.seeds = vec![seed];
            }
            for t in &tolerances {
                let (name, value) = t.split_once('=').ok_or_else(|| ImcError::Config { path: "--tol".into(), reason: format!("expected name=value, got `{t}`") })?;
                let value: f64 = value.parse().map_err(|_| ImcError::Config { path: format!("--tol {name}"), reason: format!("not a number: `{value}`") })?;
                cfg.tolerances.set(name, value)?;
            }
            cfg.include_reducible |= reducible;
            let report = cli::verify_to(&cfg, &out_dir(&common, None))?;
            for s in &report.specs {
                let failed: Vec<&str> = s.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                println!("{}: {}{}", s.label, if s.passed { "pass" } else { "FAIL" }, if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) });
            }
            Ok(report.passed)
        }
        Command::EssScan(common) => {
            set_threads(&common)?;
            let cfg = load(&common)?;
            let s = cli::ess_scan(&cfg, &out_dir(&common, cfg.output.as_ref()))?;
            println!("{} rows, chain length slope {:.6e} (sum of weights {:.6e}), R^2 {:.6}, final ESS gap {:.4}", s.rows.len(), s.slope, s.sum_weights, s.r2, s.final_relative_gap);
            Ok(true)
        }
        Command::Bench(common) => {
            set_threads(&common)?;
            let cfg = load(&common)?;
            let r = cli::bench(&cfg, &out_dir(&common, cfg.output.as_ref()))?;
            for b in &r.results {
                let mse: Vec<String> = b.mse.iter().map(|v| format!("{v:.3e}")).collect();
                println!("{:>4}: mse [{}], positive copies {:.1}", b.method, mse.join(", "), b.positive_copies);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
