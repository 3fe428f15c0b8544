//! Experiment runs, n-grid sweeps with log-log scaling fits, and artifacts.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{
    build_policy, resolve_lambda, BuiltEnv, EnvSpec, ExperimentConfig, FgtsSpec, PolicySpec, Precision, Resolved,
};
pub use plot::{emit_plot, render_svg, PlotSeries};

use crate::error::{Error, Result};
use crate::oracles::MeanStderr;
use crate::protocol::{run_episode, RegretTrace};
use crate::scalar::Scalar;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SPARSEBANDIT_OUTPUT_DIR";

/// Output directory: the environment override, else the config's, else `fallback`.
pub fn resolve_output_dir(configured: Option<&str>, fallback: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => configured.map(PathBuf::from).unwrap_or_else(|| fallback.to_path_buf()),
    }
}

/// Per-seed traces (in f64) and the summary of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub traces: Vec<RegretTrace<f64>>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub environment: String,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub final_regret: Vec<f64>,
    pub mean: f64,
    /// Absent with a single seed.
    pub stderr: Option<f64>,
    pub lower_bound: Option<f64>,
    pub uniform_regret: Option<f64>,
    pub resolved: Resolved,
    pub config: ExperimentConfig,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

fn to_f64_trace<S: Scalar>(t: RegretTrace<S>) -> RegretTrace<f64> {
    RegretTrace {
        seed: t.seed,
        instant: t.instant.iter().map(|x| x.as_f64()).collect(),
        cumulative: t.cumulative.iter().map(|x| x.as_f64()).collect(),
        actions: t.actions,
        diagnostics: t.diagnostics,
    }
}

fn run_seed<S: Scalar>(config: &ExperimentConfig, seed: u64) -> Result<(RegretTrace<f64>, Resolved)> {
    let env = config.environment.build::<S>(config.n, seed)?;
    let k = config.environment.num_actions();
    let (mut policy, mut resolved) = build_policy(&config.policy, &env.instance.features, k, config.n)?;
    resolved.environment = env.instance.name.clone();
    resolved.lower_bound = env.lower_bound;
    resolved.uniform_regret = env.uniform_regret;
    let mut trace = run_episode(&env.instance, &mut policy, config.n, seed)?;
    if !config.diagnostics {
        trace.diagnostics = None;
    }
    Ok((to_f64_trace(trace), resolved))
}

/// Runs every seed (in parallel) without touching the file system.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let results = config
        .seeds
        .par_iter()
        .map(|&seed| match config.precision {
            Precision::F64 => run_seed::<f64>(config, seed),
            Precision::F32 => run_seed::<f32>(config, seed),
        })
        .collect::<Result<Vec<_>>>()?;
    let resolved = results[0].1.clone();
    let traces: Vec<RegretTrace<f64>> = results.into_iter().map(|(t, _)| t).collect();
    let final_regret: Vec<f64> = traces.iter().map(|t| t.total()).collect();
    let mean = final_regret.iter().sum::<f64>() / final_regret.len() as f64;
    let stderr = MeanStderr::from_samples(&final_regret).ok().map(|m| m.stderr);
    let summary = RunSummary {
        policy: resolved.policy.clone(),
        environment: resolved.environment.clone(),
        n: config.n,
        seeds: config.seeds.clone(),
        final_regret,
        mean,
        stderr,
        lower_bound: resolved.lower_bound,
        uniform_regret: resolved.uniform_regret,
        resolved,
        config: config.clone(),
    };
    Ok(RunOutput { traces, summary })
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

/// Writes `trace_seed<seed>.csv` per seed and `summary.json` into `dir`.
pub fn write_run(output: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for trace in &output.traces {
        fs::write(dir.join(trace_file_name(trace.seed)), trace.to_csv())?;
    }
    fs::write(dir.join("summary.json"), output.summary.to_json())?;
    Ok(())
}

/// Runs and writes the artifacts.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    let out = run(config)?;
    write_run(&out, dir)?;
    Ok(out)
}

/// Least-squares fit of `log(mean regret)` on `log(n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::FitUndefined(format!("need at least 3 grid points, got {}", points.len())));
    }
    if let Some((n, m)) = points.iter().find(|(n, m)| !(*n > 0.0) || !(*m > 0.0)) {
        return Err(Error::FitUndefined(format!("nonpositive value at n = {n}: {m}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FitUndefined("all grid points share one n".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(ScalingFit { points: points.to_vec(), slope, intercept, r_squared })
}

/// A base experiment replayed over a horizon grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub n_grid: Vec<usize>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() < 3 {
            return Err(Error::Config(format!("n_grid needs at least 3 points, got {}", self.n_grid.len())));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub runs: Vec<RunOutput>,
    pub fit: ScalingFit,
}

impl SweepOutput {
    /// `n,seed,cum_regret` for every run and seed.
    pub fn combined_csv(&self) -> String {
        let mut out = String::from("n,seed,cum_regret\n");
        for run in &self.runs {
            for (seed, total) in run.summary.seeds.iter().zip(&run.summary.final_regret) {
                out.push_str(&format!("{},{seed},{total:?}\n", run.summary.n));
            }
        }
        out
    }

    pub fn fit_record(&self) -> Value {
        json!({
            "policy": self.runs[0].summary.policy,
            "n_grid": self.runs.iter().map(|r| r.summary.n).collect::<Vec<_>>(),
            "mean_regret": self.runs.iter().map(|r| r.summary.mean).collect::<Vec<_>>(),
            "stderr": self.runs.iter().map(|r| r.summary.stderr).collect::<Vec<_>>(),
            "slope": self.fit.slope,
            "intercept": self.fit.intercept,
            "r_squared": self.fit.r_squared,
        })
    }
}

pub fn sweep(config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    let runs = config
        .n_grid
        .iter()
        .map(|&n| run(&ExperimentConfig { n, ..config.base.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = runs.iter().map(|r| (r.summary.n as f64, r.summary.mean)).collect();
    let fit = fit_scaling(&points)?;
    Ok(SweepOutput { runs, fit })
}

/// Runs a sweep and writes `n_<n>/` run directories, `sweep.csv`,
/// `fit.json` and `scaling.svg` into `dir`.
pub fn sweep_to_dir(config: &SweepConfig, dir: &Path) -> Result<SweepOutput> {
    let out = sweep(config)?;
    fs::create_dir_all(dir)?;
    for run in &out.runs {
        write_run(run, &dir.join(format!("n_{}", run.summary.n)))?;
    }
    fs::write(dir.join("sweep.csv"), out.combined_csv())?;
    fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&out.fit_record()).expect("serializes") + "\n")?;
    let series = PlotSeries { label: out.runs[0].summary.policy.clone(), points: out.fit.points.clone() };
    emit_plot(&[series], Some(&out.fit), "n", "mean cumulative regret", &dir.join("scaling.svg"))?;
    Ok(out)
}

/// Mean cumulative regret curve across traces, as plot points `(t, mean)`
/// with `t >= 1`.
pub fn mean_curve(traces: &[RegretTrace<f64>]) -> Vec<(f64, f64)> {
    let Some(n) = traces.iter().map(|t| t.len()).min() else { return Vec::new() };
    (0..n)
        .map(|t| {
            let m = traces.iter().map(|tr| tr.cumulative[t]).sum::<f64>() / traces.len() as f64;
            ((t + 1) as f64, m)
        })
        .collect()
}
