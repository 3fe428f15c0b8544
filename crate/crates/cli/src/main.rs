use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sparsebandit::features::{audit_decay, audit_lipschitz, effective_dimension, sample_lipschitz_triples};
use sparsebandit::hard_instances::{build, HardInstanceSpec, HardKind};
use sparsebandit::harness::{
    resolve_output_dir, run_to_dir, sweep_to_dir, EnvSpec, ExperimentConfig, SweepConfig,
};
use sparsebandit::oracles::{run_posterior_check, PosteriorCheckConfig};
use sparsebandit::{Error, Features, Result};

#[derive(Parser)]
#[command(name = "sparsebandit", version, about = "Sparse nonparametric contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config: per-seed trace CSVs and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the environment variable and the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Append sampler diagnostics to the trace CSVs.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Run a config over an n-grid and fit the log-log regret slope.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a lower-bound instance and print its summary.
    HardInstance {
        #[arg(long, value_parser = parse_kind)]
        kind: HardKind,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        d: usize,
        /// Rounds per phase; defaults to the smallest admissible value.
        #[arg(long)]
        m: Option<usize>,
        /// Zero-based good actions, comma separated.
        #[arg(long, value_delimiter = ',')]
        good_actions: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the nonzero feature values as CSV to this file.
        #[arg(long)]
        tables: Option<PathBuf>,
    },
    /// Compare the MCMC sampler with the enumerated toy posterior.
    PosteriorCheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        thin: usize,
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
    },
    /// Run the decay or Lipschitz audit on a config's environment.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_index: usize,
        #[arg(long, default_value_t = 2_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_kind(s: &str) -> std::result::Result<HardKind, String> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| format!("unknown kind {s:?}; expected countable_poly, countable_exp or uncountable"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn execute(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::Run { config, output, diagnostics } => {
            let mut cfg = ExperimentConfig::from_json(&read(&config)?)?;
            cfg.diagnostics |= diagnostics;
            let dir = output.unwrap_or_else(|| resolve_output_dir(cfg.output_dir.as_deref(), Path::new("results")));
            let out = run_to_dir(&cfg, &dir)?;
            Ok(json!({
                "output_dir": dir.display().to_string(),
                "policy": out.summary.policy,
                "n": out.summary.n,
                "mean": out.summary.mean,
                "stderr": out.summary.stderr,
                "lower_bound": out.summary.lower_bound,
            }))
        }
        Command::Sweep { config, output } => {
            let cfg = SweepConfig::from_json(&read(&config)?)?;
            let dir =
                output.unwrap_or_else(|| resolve_output_dir(cfg.base.output_dir.as_deref(), Path::new("results")));
            let out = sweep_to_dir(&cfg, &dir)?;
            let mut record = out.fit_record();
            record["output_dir"] = json!(dir.display().to_string());
            Ok(record)
        }
        Command::HardInstance { kind, s, k, beta, d, m, good_actions, seed, tables } => {
            let mut spec = HardInstanceSpec { kind, s, k, beta, dim: d, m: 1, good_actions };
            spec.m = match m {
                Some(m) => m,
                None => {
                    let t = spec.threshold();
                    if !t.is_finite() || t > 1e12 {
                        return Err(Error::InstanceTooSmall(format!("admissible m would be {t}")));
                    }
                    t.ceil().max(1.0) as usize
                }
            };
            let h = build::<f64>(&spec, seed)?;
            if let Some(path) = tables {
                fs::write(&path, h.feature_table_csv()?)?;
            }
            Ok(h.summary())
        }
        Command::PosteriorCheck { seed, samples, thin, eta, lambda } => {
            let cfg = PosteriorCheckConfig { seed, samples, thin, eta, lambda, ..PosteriorCheckConfig::default() };
            let report = run_posterior_check(&cfg)?;
            Ok(serde_json::to_value(report).expect("report serializes"))
        }
        Command::Audit { config, max_index, samples, seed } => {
            let cfg = ExperimentConfig::from_json(&read(&config)?)?;
            audit(&cfg.environment, cfg.n, max_index, samples, seed)
        }
    }
}

fn audit(env: &EnvSpec, n: usize, max_index: usize, samples: usize, seed: u64) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Features<f64> = match env {
        EnvSpec::HardInstance(h) => build::<f64>(h, seed)?.instance.features,
        other => other.features()?,
    };
    Ok(match &features {
        Features::Countable(f) => {
            let worst = audit_decay(f.as_ref(), max_index, samples, &mut rng)?;
            json!({
                "audit": "decay",
                "family": f.describe(),
                "max_index": max_index,
                "max_violation": worst,
                "passed": worst <= 0.0,
                "d_eff": effective_dimension(&f.decay(), n)?,
                "n": n,
            })
        }
        Features::Parametric(f) => {
            let triples = sample_lipschitz_triples(f.as_ref(), samples, &mut rng);
            let worst = audit_lipschitz(f.as_ref(), &triples)?;
            json!({
                "audit": "lipschitz",
                "map": f.describe(),
                "triples": samples,
                "max_ratio": worst,
                "passed": worst <= 1.0,
            })
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                e.exit();
            }
            eprintln!("{}", pretty(&json!({ "error": "UsageError", "message": e.to_string().trim_end() })));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(v) => {
            println!("{}", pretty(&v));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", pretty(&json!({ "error": e.kind(), "message": e.to_string() })));
            ExitCode::FAILURE
        }
    }
}
