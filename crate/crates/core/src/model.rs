//! Sparse parameters, reward evaluation and the two sparsity priors.

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::Features;
use crate::protocol::{argmax_first, ContextSlice};
use crate::sampling::{
    l1_norm, l2_norm, ln_truncated_geometric, sample_l1_ball, sample_l2_ball, sample_truncated_geometric,
};
use crate::scalar::{ln_binomial, ln_factorial, ln_unit_l2_ball_volume, Scalar};

/// Default truncation of the geometric law on the atom count.
pub const DEFAULT_ATOM_CAP: usize = 32;

/// Weights on a finite support of the countable feature sequence.
///
/// Indices are 1-based feature indices, strictly increasing. Zero weights are
/// not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CountableParam<S> {
    support: Vec<usize>,
    weights: Vec<S>,
}

impl<S: Scalar> CountableParam<S> {
    pub fn new(support: Vec<usize>, weights: Vec<S>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidParameter("support must be nonempty".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} support indices but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if support[0] == 0 || support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "support must be strictly increasing 1-based indices: {support:?}"
            )));
        }
        if weights.iter().any(|w| *w == S::zero() || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and nonzero".into()));
        }
        if l1_norm(&weights) > S::one() {
            return Err(Error::InvalidParameter("weights must satisfy ‖w‖₁ <= 1".into()));
        }
        Ok(Self { support, weights })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Builds from entries in any order; used by the sampler moves.
    pub(crate) fn from_unsorted(mut entries: Vec<(usize, S)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        let (support, weights) = entries.into_iter().unzip();
        Self::new(support, weights)
    }
}

/// A finite mixture of parametric features, `Σ_i w_i φ(·, θ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicParam<S> {
    weights: Vec<S>,
    atoms: Vec<Vec<S>>,
}

impl<S: Scalar> AtomicParam<S> {
    pub fn new(weights: Vec<S>, atoms: Vec<Vec<S>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != atoms.len() {
            return Err(Error::InvalidParameter(format!(
                "need m >= 1 weights matching atoms, got {} weights and {} atoms",
                weights.len(),
                atoms.len()
            )));
        }
        let d = atoms[0].len();
        if d == 0 || atoms.iter().any(|a| a.len() != d) {
            return Err(Error::InvalidParameter("atoms must share one dimension d >= 1".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) || atoms.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if l1_norm(&weights) > S::one() {
            return Err(Error::InvalidParameter("weights must satisfy ‖w‖₁ <= 1".into()));
        }
        if atoms.iter().any(|a| l2_norm(a) > S::one()) {
            return Err(Error::InvalidParameter("atoms must lie in the unit ball".into()));
        }
        Ok(Self { weights, atoms })
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn atoms(&self) -> &[Vec<S>] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SparseParam<S> {
    Countable(CountableParam<S>),
    Atomic(AtomicParam<S>),
}

impl<S: Scalar> SparseParam<S> {
    pub fn weights(&self) -> &[S] {
        match self {
            SparseParam::Countable(p) => p.weights(),
            SparseParam::Atomic(p) => p.weights(),
        }
    }

    /// `|M|` or `m`.
    pub fn size(&self) -> usize {
        self.weights().len()
    }

    /// Self-describing JSON record.
    pub fn to_record(&self) -> Value {
        let w: Vec<f64> = self.weights().iter().map(|x| x.as_f64()).collect();
        match self {
            SparseParam::Countable(p) => json!({ "kind": "countable", "support": p.support, "weights": w }),
            SparseParam::Atomic(p) => {
                let atoms: Vec<Vec<f64>> =
                    p.atoms.iter().map(|a| a.iter().map(|x| x.as_f64()).collect()).collect();
                json!({ "kind": "atomic", "weights": w, "atoms": atoms })
            }
        }
    }

    pub fn from_record(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("parameter record: {m}"));
        let floats = |v: &Value| -> Result<Vec<S>> {
            v.as_array()
                .ok_or_else(|| bad("expected an array"))?
                .iter()
                .map(|x| x.as_f64().map(S::lit).ok_or_else(|| bad("expected numbers")))
                .collect()
        };
        let weights = floats(&v["weights"])?;
        match v["kind"].as_str() {
            Some("countable") => {
                let support = v["support"]
                    .as_array()
                    .ok_or_else(|| bad("missing support"))?
                    .iter()
                    .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| bad("support must be integers")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SparseParam::Countable(CountableParam::new(support, weights)?))
            }
            Some("atomic") => {
                let atoms = v["atoms"]
                    .as_array()
                    .ok_or_else(|| bad("missing atoms"))?
                    .iter()
                    .map(floats)
                    .collect::<Result<Vec<_>>>()?;
                Ok(SparseParam::Atomic(AtomicParam::new(weights, atoms)?))
            }
            _ => Err(bad("unknown kind")),
        }
    }
}

/// `f_ν(x, a)`.
pub fn eval_reward<S: Scalar>(
    param: &SparseParam<S>,
    features: &Features<S>,
    context: &ContextSlice<S>,
    action: usize,
) -> Result<S> {
    let item = context.item(action)?;
    match (param, features) {
        (SparseParam::Countable(p), Features::Countable(f)) => {
            let mut acc = S::zero();
            for (&j, &w) in p.support.iter().zip(&p.weights) {
                acc += w * f.eval(j, item)?;
            }
            Ok(acc)
        }
        (SparseParam::Atomic(p), Features::Parametric(f)) => {
            let mut acc = S::zero();
            for (theta, &w) in p.atoms.iter().zip(&p.weights) {
                acc += w * f.eval(item, theta)?;
            }
            Ok(acc)
        }
        _ => Err(Error::ModelMismatch),
    }
}

/// `f_ν(x, a)` for every action.
pub fn eval_all_actions<S: Scalar>(
    param: &SparseParam<S>,
    features: &Features<S>,
    context: &ContextSlice<S>,
) -> Result<Vec<S>> {
    (0..context.num_actions()).map(|a| eval_reward(param, features, context, a)).collect()
}

/// `(a(ν, x), f_ν(x))`: the greedy action, lowest index on ties, and its value.
pub fn eval_best<S: Scalar>(
    param: &SparseParam<S>,
    features: &Features<S>,
    context: &ContextSlice<S>,
) -> Result<(usize, S)> {
    Ok(argmax_first(&eval_all_actions(param, features, context)?))
}

/// The two sparsity priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prior {
    /// Subset prior on `M ⊆ [d_eff]` with `P(|M| = m) ∝ 2^{-m}`, uniform
    /// subsets of each size and weights uniform on the ℓ₁ ball over `M`.
    Countable { d_eff: usize },
    /// `P(m) ∝ 2^{-m}` on `{1, …, m_cap}`, weights uniform on `B_1^m(1)`,
    /// atoms i.i.d. uniform on `B_2^d(1)`.
    Atomic { dim: usize, m_cap: usize },
}

impl Prior {
    pub fn countable(d_eff: usize) -> Result<Self> {
        if d_eff == 0 {
            return Err(Error::InvalidParameter("d_eff must be >= 1".into()));
        }
        Ok(Prior::Countable { d_eff })
    }

    pub fn atomic(dim: usize, m_cap: usize) -> Result<Self> {
        if dim == 0 || m_cap == 0 {
            return Err(Error::InvalidParameter("atomic prior needs d >= 1 and m_cap >= 1".into()));
        }
        Ok(Prior::Atomic { dim, m_cap })
    }

    /// Largest model size the prior supports.
    pub fn max_size(&self) -> usize {
        match *self {
            Prior::Countable { d_eff } => d_eff,
            Prior::Atomic { m_cap, .. } => m_cap,
        }
    }

    pub fn sample<S: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> SparseParam<S> {
        match *self {
            Prior::Countable { d_eff } => SparseParam::Countable(sample_prior_countable(d_eff, rng)),
            Prior::Atomic { dim, m_cap } => SparseParam::Atomic(sample_prior_atomic(dim, m_cap, rng)),
        }
    }

    /// Exact log-density with every normalizing constant, or `-∞` outside
    /// the support.
    pub fn log_density<S: Scalar>(&self, param: &SparseParam<S>) -> S {
        match (*self, param) {
            (Prior::Countable { d_eff }, SparseParam::Countable(p)) => log_prior_countable(p, d_eff),
            (Prior::Atomic { dim, m_cap }, SparseParam::Atomic(p)) => log_prior_atomic(p, dim, m_cap),
            _ => S::neg_infinity(),
        }
    }
}

/// Size ∝ `2^{-m}` on `1..=d_eff`, uniform subset of that size, weights
/// uniform on the ℓ₁ ball restricted to the subset.
pub fn sample_prior_countable<S: Scalar, R: Rng + ?Sized>(d_eff: usize, rng: &mut R) -> CountableParam<S> {
    let m = sample_truncated_geometric(d_eff, rng);
    let mut support: Vec<usize> = rand::seq::index::sample(rng, d_eff, m).into_iter().map(|i| i + 1).collect();
    support.sort_unstable();
    let weights = sample_l1_ball(m, rng);
    CountableParam { support, weights }
}

pub fn sample_prior_atomic<S: Scalar, R: Rng + ?Sized>(dim: usize, m_cap: usize, rng: &mut R) -> AtomicParam<S> {
    let m = sample_truncated_geometric(m_cap, rng);
    let weights = sample_l1_ball(m, rng);
    let atoms = (0..m).map(|_| sample_l2_ball(dim, rng)).collect();
    AtomicParam { weights, atoms }
}

/// Log-density of the uniform law on the `m`-dimensional unit ℓ₁ ball, `ln(m!/2^m)`.
pub fn ln_uniform_l1_density(m: usize) -> f64 {
    ln_factorial(m) - m as f64 * std::f64::consts::LN_2
}

pub fn log_prior_countable<S: Scalar>(p: &CountableParam<S>, d_eff: usize) -> S {
    let m = p.sparsity();
    if m == 0 || m > d_eff || p.support.iter().any(|&j| j == 0 || j > d_eff) || l1_norm(&p.weights) > S::one() {
        return S::neg_infinity();
    }
    let ln_subset = ln_truncated_geometric(m, d_eff) - ln_binomial(d_eff, m);
    S::lit(ln_subset + ln_uniform_l1_density(m))
}

pub fn log_prior_atomic<S: Scalar>(p: &AtomicParam<S>, dim: usize, m_cap: usize) -> S {
    let m = p.num_atoms();
    if m == 0
        || m > m_cap
        || p.dim() != dim
        || l1_norm(&p.weights) > S::one()
        || p.atoms.iter().any(|a| l2_norm(a) > S::one())
    {
        return S::neg_infinity();
    }
    let ln_atoms = -(m as f64) * ln_unit_l2_ball_volume(dim);
    S::lit(ln_truncated_geometric(m, m_cap) + ln_uniform_l1_density(m) + ln_atoms)
}

pub fn sample_prior<S: Scalar, R: Rng + ?Sized>(prior: &Prior, rng: &mut R) -> SparseParam<S> {
    prior.sample(rng)
}

pub fn log_prior<S: Scalar>(param: &SparseParam<S>, prior: &Prior) -> S {
    prior.log_density(param)
}
