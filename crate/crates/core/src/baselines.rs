//! Reference policies: uniform play, ε-greedy and UCB on a ridge fit of the
//! first `d` countable features, and vanilla Thompson sampling (FGTS with
//! `λ = 0`).

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{CountableFeatures, Features};
use crate::fgts::{FgtsConfig, FgtsPolicy};
use crate::model::Prior;
use crate::protocol::{argmax_first, ContextSlice, HistoryRecord, Item, Policy};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Uniform,
    EpsilonGreedy,
    VanillaTs,
    RidgeUcb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_alpha() -> f64 {
    1.0
}

fn default_width() -> f64 {
    1.0
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind) -> Self {
        Self { kind, epsilon: default_epsilon(), alpha: default_alpha(), width: default_width() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("ridge alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.width >= 0.0) || !self.width.is_finite() {
            return Err(Error::InvalidParameter(format!("confidence width must be >= 0, got {}", self.width)));
        }
        Ok(())
    }
}

/// Builds a baseline policy. `dim` is the number of leading countable
/// features used by the ridge-based policies; `fgts` supplies η, sweeps and
/// move settings for vanilla TS (its λ is overridden with zero).
pub fn build_baseline<S: Scalar>(
    config: &BaselineConfig,
    features: &Features<S>,
    prior: Prior,
    dim: usize,
    fgts: FgtsConfig<S>,
) -> Result<Box<dyn Policy<S>>> {
    config.validate()?;
    Ok(match config.kind {
        BaselineKind::Uniform => Box::new(UniformPolicy),
        BaselineKind::EpsilonGreedy => {
            Box::new(EpsilonGreedyPolicy::new(countable(features)?, dim, S::lit(config.alpha), config.epsilon)?)
        }
        BaselineKind::RidgeUcb => Box::new(RidgeUcbPolicy::new(
            countable(features)?,
            dim,
            S::lit(config.alpha),
            S::lit(config.width),
        )?),
        BaselineKind::VanillaTs => Box::new(vanilla_ts(features.clone(), prior, fgts)?),
    })
}

fn countable<S: Scalar>(features: &Features<S>) -> Result<Arc<dyn CountableFeatures<S>>> {
    match features {
        Features::Countable(f) => Ok(f.clone()),
        Features::Parametric(_) => {
            Err(Error::UnsupportedModel("ridge policies need a countable feature family".into()))
        }
    }
}

/// FGTS with the feel-good term switched off.
pub fn vanilla_ts<S: Scalar>(features: Features<S>, prior: Prior, mut config: FgtsConfig<S>) -> Result<FgtsPolicy<S>> {
    config.lambda = S::zero();
    Ok(FgtsPolicy::new(features, prior, config)?.with_label("vanilla_ts"))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy;

pub fn uniform_policy<S: Scalar>(context: &ContextSlice<S>, rng: &mut dyn RngCore) -> usize {
    rng.random_range(0..context.num_actions())
}

impl<S: Scalar> Policy<S> for UniformPolicy {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn select(&mut self, _: &[HistoryRecord<S>], context: &ContextSlice<S>, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(uniform_policy(context, rng))
    }
}

/// Online ridge regression `(αI + Σ φφᵀ)⁻¹ Σ φ y`, with the inverse kept
/// current by Sherman–Morrison updates.
#[derive(Debug, Clone)]
pub struct RidgeModel<S> {
    dim: usize,
    inverse: Vec<S>,
    target: Vec<S>,
    coef: Vec<S>,
}

impl<S: Scalar> RidgeModel<S> {
    pub fn new(dim: usize, alpha: S) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("ridge dimension must be >= 1".into()));
        }
        if !(alpha > S::zero()) {
            return Err(Error::InvalidParameter(format!("ridge alpha must be > 0, got {alpha}")));
        }
        let mut inverse = vec![S::zero(); dim * dim];
        for i in 0..dim {
            inverse[i * dim + i] = S::one() / alpha;
        }
        Ok(Self { dim, inverse, target: vec![S::zero(); dim], coef: vec![S::zero(); dim] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coef(&self) -> &[S] {
        &self.coef
    }

    pub fn predict(&self, phi: &[S]) -> S {
        dot(&self.coef, phi)
    }

    /// `φᵀ A⁻¹ φ`.
    pub fn leverage(&self, phi: &[S]) -> S {
        let d = self.dim;
        let mut total = S::zero();
        for i in 0..d {
            total += phi[i] * dot(&self.inverse[i * d..(i + 1) * d], phi);
        }
        total.max(S::zero())
    }

    pub fn update(&mut self, phi: &[S], y: S) {
        let d = self.dim;
        let u: Vec<S> = (0..d).map(|i| dot(&self.inverse[i * d..(i + 1) * d], phi)).collect();
        let denom = S::one() + dot(phi, &u);
        for i in 0..d {
            for j in 0..d {
                self.inverse[i * d + j] -= u[i] * u[j] / denom;
            }
        }
        for (t, p) in self.target.iter_mut().zip(phi) {
            *t += *p * y;
        }
        for i in 0..d {
            self.coef[i] = dot(&self.inverse[i * d..(i + 1) * d], &self.target);
        }
    }
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn feature_vector<S: Scalar>(family: &dyn CountableFeatures<S>, dim: usize, item: &Item<S>) -> Result<Vec<S>> {
    (1..=dim).map(|j| family.eval(j, item)).collect()
}

/// Ridge regression plus `c · sqrt(φᵀ A⁻¹ φ)` exploration bonus.
pub struct RidgeUcbPolicy<S: Scalar> {
    family: Arc<dyn CountableFeatures<S>>,
    ridge: RidgeModel<S>,
    width: S,
}

impl<S: Scalar> RidgeUcbPolicy<S> {
    pub fn new(family: Arc<dyn CountableFeatures<S>>, dim: usize, alpha: S, width: S) -> Result<Self> {
        Ok(Self { family, ridge: RidgeModel::new(dim, alpha)?, width })
    }

    pub fn ridge(&self) -> &RidgeModel<S> {
        &self.ridge
    }
}

impl<S: Scalar> Policy<S> for RidgeUcbPolicy<S> {
    fn name(&self) -> String {
        "ridge_ucb".into()
    }

    fn select(&mut self, _: &[HistoryRecord<S>], context: &ContextSlice<S>, _: &mut dyn RngCore) -> Result<usize> {
        let scores = context
            .items()
            .iter()
            .map(|item| {
                let phi = feature_vector(self.family.as_ref(), self.ridge.dim(), item)?;
                Ok(self.ridge.predict(&phi) + self.width * self.ridge.leverage(&phi).sqrt())
            })
            .collect::<Result<Vec<S>>>()?;
        Ok(argmax_first(&scores).0)
    }

    fn observe(&mut self, record: &HistoryRecord<S>) -> Result<()> {
        let phi = feature_vector(self.family.as_ref(), self.ridge.dim(), record.context.item(record.action)?)?;
        self.ridge.update(&phi, record.reward);
        Ok(())
    }
}

/// Greedy on the ridge point estimate, uniform with probability `ε`.
pub struct EpsilonGreedyPolicy<S: Scalar> {
    family: Arc<dyn CountableFeatures<S>>,
    ridge: RidgeModel<S>,
    epsilon: f64,
}

impl<S: Scalar> EpsilonGreedyPolicy<S> {
    pub fn new(family: Arc<dyn CountableFeatures<S>>, dim: usize, alpha: S, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self { family, ridge: RidgeModel::new(dim, alpha)?, epsilon })
    }
}

impl<S: Scalar> Policy<S> for EpsilonGreedyPolicy<S> {
    fn name(&self) -> String {
        "epsilon_greedy".into()
    }

    fn select(&mut self, _: &[HistoryRecord<S>], context: &ContextSlice<S>, rng: &mut dyn RngCore) -> Result<usize> {
        if rng.random::<f64>() < self.epsilon {
            return Ok(uniform_policy(context, rng));
        }
        let scores = context
            .items()
            .iter()
            .map(|item| Ok(self.ridge.predict(&feature_vector(self.family.as_ref(), self.ridge.dim(), item)?)))
            .collect::<Result<Vec<S>>>()?;
        Ok(argmax_first(&scores).0)
    }

    fn observe(&mut self, record: &HistoryRecord<S>) -> Result<()> {
        let phi = feature_vector(self.family.as_ref(), self.ridge.dim(), record.context.item(record.action)?)?;
        self.ridge.update(&phi, record.reward);
        Ok(())
    }
}
