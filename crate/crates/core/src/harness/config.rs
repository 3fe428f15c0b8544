//! JSON experiment configuration and its resolution into environments and
//! policies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::{vanilla_ts, EpsilonGreedyPolicy, RidgeUcbPolicy, UniformPolicy};
use crate::error::{Error, Result};
use crate::features::{effective_dimension, CosineFamily, CountableFeatures, DecayKind, DecayProfile, Features, GaussianBumpMap, ReluMap};
use crate::fgts::{default_lambda_atomic, default_lambda_countable, FgtsConfig, FgtsPolicy, MoveMix};
use crate::hard_instances::{build, HardInstanceSpec};
use crate::model::{AtomicParam, CountableParam, Prior, SparseParam, DEFAULT_ATOM_CAP};
use crate::protocol::{BanditInstance, NoiseSpec, Policy};
use crate::scalar::Scalar;

/// Environment description. Context schedules and, for hard instances, the
/// good actions are drawn per episode seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvSpec {
    /// Cosine family `envelope(i) cos(π i z₁)` on `[0, 1]^dim`.
    Cosine {
        #[serde(default = "default_decay")]
        decay: DecayKind,
        beta: f64,
        #[serde(default = "default_dim")]
        dim: usize,
        k: usize,
        sigma: f64,
        support: Vec<usize>,
        weights: Vec<f64>,
    },
    /// Gaussian bumps `exp(-‖z - θ‖²/(2ℓ²))` on the unit ball.
    Bump {
        length_scale: f64,
        dim: usize,
        k: usize,
        sigma: f64,
        weights: Vec<f64>,
        atoms: Vec<Vec<f64>>,
    },
    /// ReLU units `max(0, ⟨θ, z⟩)` on the unit ball.
    Relu { dim: usize, k: usize, sigma: f64, weights: Vec<f64>, atoms: Vec<Vec<f64>> },
    /// A lower-bound construction; noise is standard Gaussian.
    HardInstance(HardInstanceSpec),
}

fn default_decay() -> DecayKind {
    DecayKind::Polynomial
}

fn default_dim() -> usize {
    1
}

/// Policy description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Fgts(FgtsSpec),
    VanillaTs(FgtsSpec),
    Uniform,
    EpsilonGreedy {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_one")]
        alpha: f64,
        #[serde(default)]
        dim: Option<usize>,
    },
    RidgeUcb {
        #[serde(default = "default_one")]
        alpha: f64,
        #[serde(default = "default_one")]
        width: f64,
        #[serde(default)]
        dim: Option<usize>,
    },
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgtsSpec {
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Overrides the default λ when set.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Known upper bound on the sparsity; the default λ drops `s` when absent.
    #[serde(default)]
    pub sparsity: Option<usize>,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_step")]
    pub weight_step: f64,
    #[serde(default = "default_step")]
    pub atom_step: f64,
    #[serde(default = "default_atom_cap")]
    pub atom_cap: usize,
}

impl Default for FgtsSpec {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            lambda: None,
            sparsity: None,
            sweeps: default_sweeps(),
            weight_step: default_step(),
            atom_step: default_step(),
            atom_cap: default_atom_cap(),
        }
    }
}

fn default_eta() -> f64 {
    0.25
}

fn default_sweeps() -> usize {
    100
}

fn default_step() -> f64 {
    0.1
}

fn default_atom_cap() -> usize {
    DEFAULT_ATOM_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvSpec,
    pub policy: PolicySpec,
    pub n: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub precision: Precision,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }
}

/// Quantities derived while resolving a config.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Resolved {
    pub policy: String,
    pub environment: String,
    pub num_actions: usize,
    pub d_eff: Option<usize>,
    pub lambda: Option<f64>,
    pub ridge_dim: Option<usize>,
    pub lower_bound: Option<f64>,
    pub uniform_regret: Option<f64>,
}

/// An environment built for one seed.
pub struct BuiltEnv<S: Scalar> {
    pub instance: BanditInstance<S>,
    pub lower_bound: Option<f64>,
    pub uniform_regret: Option<f64>,
}

impl EnvSpec {
    pub fn num_actions(&self) -> usize {
        match self {
            EnvSpec::Cosine { k, .. } | EnvSpec::Bump { k, .. } | EnvSpec::Relu { k, .. } => *k,
            EnvSpec::HardInstance(h) => h.k,
        }
    }

    pub fn features<S: Scalar>(&self) -> Result<Features<S>> {
        Ok(match self {
            EnvSpec::Cosine { decay, beta, dim, .. } => {
                Features::countable(CosineFamily::new(DecayProfile::new(*decay, S::lit(*beta))?, *dim)?)
            }
            EnvSpec::Bump { length_scale, dim, .. } => {
                Features::parametric(GaussianBumpMap::new(S::lit(*length_scale), *dim)?)
            }
            EnvSpec::Relu { dim, .. } => Features::parametric(ReluMap::new(*dim)?),
            EnvSpec::HardInstance(h) => build::<S>(h, 0)?.instance.features,
        })
    }

    /// Builds the environment for an episode seed with an `n`-round schedule.
    pub fn build<S: Scalar>(&self, n: usize, seed: u64) -> Result<BuiltEnv<S>> {
        let smooth = |features: Features<S>, truth: SparseParam<S>, k: usize, sigma: f64, name: &str| {
            let mut rng = schedule_rng(seed);
            let space = features.context_space();
            let schedule =
                (0..n).map(|t| space.sample_context(t + 1, k, &mut rng)).collect::<Result<Vec<_>>>()?;
            Ok::<_, Error>(BuiltEnv {
                instance: BanditInstance {
                    name: name.to_string(),
                    schedule,
                    truth,
                    features,
                    noise: NoiseSpec::gaussian(S::lit(sigma))?,
                },
                lower_bound: None,
                uniform_regret: None,
            })
        };
        let lift = |v: &[f64]| v.iter().map(|x| S::lit(*x)).collect::<Vec<S>>();
        match self {
            EnvSpec::Cosine { k, sigma, support, weights, .. } => {
                let truth = SparseParam::Countable(CountableParam::new(support.clone(), lift(weights))?);
                smooth(self.features()?, truth, *k, *sigma, "cosine")
            }
            EnvSpec::Bump { k, sigma, weights, atoms, .. } | EnvSpec::Relu { k, sigma, weights, atoms, .. } => {
                let truth = SparseParam::Atomic(AtomicParam::new(lift(weights), atoms.iter().map(|a| lift(a)).collect())?);
                let name = if matches!(self, EnvSpec::Bump { .. }) { "bump" } else { "relu" };
                smooth(self.features()?, truth, *k, *sigma, name)
            }
            EnvSpec::HardInstance(h) => {
                let built = build::<S>(h, seed)?;
                if built.instance.horizon() < n {
                    return Err(Error::ScheduleTooShort { available: built.instance.horizon(), requested: n });
                }
                Ok(BuiltEnv {
                    lower_bound: Some(built.lower_bound),
                    uniform_regret: Some(built.spec.uniform_regret()),
                    instance: built.instance,
                })
            }
        }
    }
}

fn schedule_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

fn prior_for<S: Scalar>(features: &Features<S>, n: usize, atom_cap: usize) -> Result<(Prior, Option<usize>)> {
    match features {
        Features::Countable(f) => {
            let d_eff = effective_dimension(&f.decay(), n)?;
            Ok((Prior::countable(d_eff)?, Some(d_eff)))
        }
        Features::Parametric(f) => Ok((Prior::atomic(f.param_dim(), atom_cap)?, None)),
    }
}

fn fgts_config<S: Scalar>(spec: &FgtsSpec, lambda: f64) -> Result<FgtsConfig<S>> {
    let mut c = FgtsConfig::new(S::lit(spec.eta), S::lit(lambda))?
        .with_sweeps(spec.sweeps)
        .with_moves(MoveMix::default());
    c.weight_step = S::lit(spec.weight_step);
    c.atom_step = S::lit(spec.atom_step);
    c.validate()?;
    Ok(c)
}

/// The λ an FGTS spec resolves to for horizon `n`.
pub fn resolve_lambda<S: Scalar>(spec: &FgtsSpec, features: &Features<S>, k: usize, n: usize) -> Result<f64> {
    if let Some(l) = spec.lambda {
        return Ok(l);
    }
    Ok(match features {
        Features::Countable(f) => {
            let d_eff = effective_dimension(&f.decay(), n)?;
            default_lambda_countable::<f64>(spec.sparsity, d_eff, k, n)
        }
        Features::Parametric(f) => default_lambda_atomic::<f64>(spec.sparsity, f.param_dim(), k, n),
    })
}

/// Builds a fresh policy and reports the derived quantities.
pub fn build_policy<S: Scalar>(
    spec: &PolicySpec,
    features: &Features<S>,
    k: usize,
    n: usize,
) -> Result<(Box<dyn Policy<S>>, Resolved)> {
    let mut resolved = Resolved { num_actions: k, ..Resolved::default() };
    let policy: Box<dyn Policy<S>> = match spec {
        PolicySpec::Fgts(f) => {
            let (prior, d_eff) = prior_for(features, n, f.atom_cap)?;
            let lambda = resolve_lambda(f, features, k, n)?;
            resolved.d_eff = d_eff;
            resolved.lambda = Some(lambda);
            Box::new(FgtsPolicy::new(features.clone(), prior, fgts_config(f, lambda)?)?)
        }
        PolicySpec::VanillaTs(f) => {
            let (prior, d_eff) = prior_for(features, n, f.atom_cap)?;
            resolved.d_eff = d_eff;
            resolved.lambda = Some(0.0);
            Box::new(vanilla_ts(features.clone(), prior, fgts_config(f, 0.0)?)?)
        }
        PolicySpec::Uniform => Box::new(UniformPolicy),
        PolicySpec::EpsilonGreedy { epsilon, alpha, dim } => {
            let (family, d) = ridge_setup(features, *dim, n, &mut resolved)?;
            Box::new(EpsilonGreedyPolicy::new(family, d, S::lit(*alpha), *epsilon)?)
        }
        PolicySpec::RidgeUcb { alpha, width, dim } => {
            let (family, d) = ridge_setup(features, *dim, n, &mut resolved)?;
            Box::new(RidgeUcbPolicy::new(family, d, S::lit(*alpha), S::lit(*width))?)
        }
    };
    resolved.policy = policy.name();
    Ok((policy, resolved))
}

fn ridge_setup<S: Scalar>(
    features: &Features<S>,
    dim: Option<usize>,
    n: usize,
    resolved: &mut Resolved,
) -> Result<(Arc<dyn CountableFeatures<S>>, usize)> {
    let Features::Countable(f) = features else {
        return Err(Error::UnsupportedModel("ridge policies need a countable feature family".into()));
    };
    let d_eff = effective_dimension(&f.decay(), n)?;
    let d = dim.unwrap_or(d_eff);
    resolved.d_eff = Some(d_eff);
    resolved.ridge_dim = Some(d);
    Ok((f.clone(), d))
}
