//! Feel-Good Thompson Sampling.
//!
//! The tempered posterior after `t - 1` rounds is
//! `p_t(ν) ∝ exp(-Σ_l L(ν, X_l, A_l, Y_l)) p_1(ν)` with the loss
//! `L = η (f_ν(x, a) - y)² - λ f_ν(x)`. It is sampled by a Metropolis–Hastings
//! chain over sparse parameters whose moves change the model size
//! (grow/shrink), relocate one component, or perturb the weights.
//! Size-changing moves redraw the whole weight vector from the uniform law on
//! the new ℓ₁ ball, so the acceptance ratio needs no Jacobian.
//!
//! The chain keeps, for every history record, `f_ν(X_l, a)` for all actions
//! together with the fitted value `f_ν(X_l, A_l)`, the best value `f_ν(X_l)`
//! and the summed loss. A proposal recomputes these in one pass over the
//! history from per-component feature columns, so cached and fresh values
//! never drift apart.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::features::{Features, ParametricFeatures};
use crate::model::{
    eval_all_actions, eval_best, ln_uniform_l1_density, AtomicParam, CountableParam, Prior, SparseParam,
};
use crate::protocol::{argmax_first, ContextSlice, HistoryRecord, Item, Policy, RoundDiagnostics};
use crate::sampling::{l1_norm, l2_norm, sample_l1_ball, sample_l2_ball};
use crate::scalar::{ln_unit_l2_ball_volume, Scalar};

/// Probabilities of the four move families; normalized on use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveMix {
    /// ADD (countable) / BIRTH (atomic).
    pub grow: f64,
    /// DROP / DEATH.
    pub shrink: f64,
    /// SWAP / WALK.
    pub relocate: f64,
    /// Random-walk on the weights.
    pub perturb: f64,
}

impl Default for MoveMix {
    fn default() -> Self {
        Self { grow: 0.2, shrink: 0.2, relocate: 0.2, perturb: 0.4 }
    }
}

impl MoveMix {
    pub fn perturb_only() -> Self {
        Self { grow: 0.0, shrink: 0.0, relocate: 0.0, perturb: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.grow, self.shrink, self.relocate, self.perturb];
        if parts.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) || parts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter(format!("bad move mix {self:?}")));
        }
        Ok(())
    }

    fn total(&self) -> f64 {
        self.grow + self.shrink + self.relocate + self.perturb
    }

    fn ln_prob(&self, kind: MoveKind) -> f64 {
        let p = match kind {
            MoveKind::Grow => self.grow,
            MoveKind::Shrink => self.shrink,
            MoveKind::Relocate => self.relocate,
            MoveKind::Perturb => self.perturb,
        };
        (p / self.total()).ln()
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveKind {
        let u = rng.random::<f64>() * self.total();
        if u < self.grow {
            MoveKind::Grow
        } else if u < self.grow + self.shrink {
            MoveKind::Shrink
        } else if u < self.grow + self.shrink + self.relocate {
            MoveKind::Relocate
        } else {
            MoveKind::Perturb
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgtsConfig<S> {
    /// Likelihood temperature, `0 < η <= 1/4`.
    pub eta: S,
    /// Feel-good weight; zero gives vanilla Thompson sampling.
    pub lambda: S,
    /// MCMC steps per round.
    pub sweeps: usize,
    pub moves: MoveMix,
    /// Standard deviation of the weight random walk.
    pub weight_step: S,
    /// Standard deviation of the atom random walk.
    pub atom_step: S,
}

impl<S: Scalar> FgtsConfig<S> {
    pub fn new(eta: S, lambda: S) -> Result<Self> {
        let c = Self {
            eta,
            lambda,
            sweeps: 100,
            moves: MoveMix::default(),
            weight_step: S::lit(0.1),
            atom_step: S::lit(0.1),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self
    }

    pub fn with_moves(mut self, moves: MoveMix) -> Self {
        self.moves = moves;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > S::zero() && self.eta <= S::lit(0.25)) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1/4], got {}", self.eta)));
        }
        if !(self.lambda >= S::zero()) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.weight_step >= S::zero()) || !(self.atom_step >= S::zero()) {
            return Err(Error::InvalidParameter("step sizes must be >= 0".into()));
        }
        self.moves.validate()
    }
}

/// `λ` for the countable prior: `sqrt(s log(d_eff n) / (K n))` when an upper
/// bound `s` on the sparsity is known, otherwise without the `s` factor.
pub fn default_lambda_countable<S: Scalar>(sparsity: Option<usize>, d_eff: usize, k: usize, n: usize) -> S {
    let s = sparsity.unwrap_or(1) as f64;
    S::lit((s * ((d_eff * n) as f64).ln() / (k * n) as f64).sqrt())
}

/// `λ` for the atomic prior: `sqrt(s d log(n) / (K n))`, `s` dropped when unknown.
pub fn default_lambda_atomic<S: Scalar>(sparsity: Option<usize>, dim: usize, k: usize, n: usize) -> S {
    let s = sparsity.unwrap_or(1) as f64;
    S::lit((s * dim as f64 * (n as f64).ln() / (k * n) as f64).sqrt())
}

/// `L(ν, x, a, y) = η (f_ν(x, a) - y)² - λ f_ν(x)`.
pub fn loss<S: Scalar>(
    param: &SparseParam<S>,
    features: &Features<S>,
    context: &ContextSlice<S>,
    action: usize,
    reward: S,
    eta: S,
    lambda: S,
) -> Result<S> {
    let values = eval_all_actions(param, features, context)?;
    let fitted = *values.get(action).ok_or(Error::InvalidAction { action, num_actions: values.len() })?;
    let (_, best) = argmax_first(&values);
    let r = fitted - reward;
    Ok(eta * r * r - lambda * best)
}

/// `-Σ_l L(ν, X_l, A_l, Y_l) + ln p_1(ν)`, evaluated from scratch.
pub fn log_posterior_unnorm<S: Scalar>(
    param: &SparseParam<S>,
    history: &[HistoryRecord<S>],
    eta: S,
    lambda: S,
    features: &Features<S>,
    prior: &Prior,
) -> Result<S> {
    let lp = prior.log_density(param);
    if lp == S::neg_infinity() {
        return Ok(lp);
    }
    let mut total = S::zero();
    for rec in history {
        total += loss(param, features, &rec.context, rec.action, rec.reward, eta, lambda)?;
    }
    Ok(lp - total)
}

/// Log-likelihood-ratio potential
/// `ΔL = η[(f_ν(x,a) - y)² - (f*(x,a) - y)²] - λ[f_ν(x) - f*(x)]`.
#[allow(clippy::too_many_arguments)]
pub fn delta_l<S: Scalar>(
    param: &SparseParam<S>,
    truth: &SparseParam<S>,
    features: &Features<S>,
    context: &ContextSlice<S>,
    action: usize,
    reward: S,
    eta: S,
    lambda: S,
) -> Result<S> {
    let (fv, bv) = fitted_and_best(param, features, context, action)?;
    let (fs, bs) = fitted_and_best(truth, features, context, action)?;
    Ok(delta_l_from_values(fv, bv, fs, bs, reward, eta, lambda))
}

fn fitted_and_best<S: Scalar>(
    param: &SparseParam<S>,
    features: &Features<S>,
    context: &ContextSlice<S>,
    action: usize,
) -> Result<(S, S)> {
    let values = eval_all_actions(param, features, context)?;
    let fitted = *values.get(action).ok_or(Error::InvalidAction { action, num_actions: values.len() })?;
    Ok((fitted, argmax_first(&values).1))
}

/// `ΔL` from the four function values it depends on.
pub fn delta_l_from_values<S: Scalar>(
    fitted: S,
    best: S,
    fitted_star: S,
    best_star: S,
    reward: S,
    eta: S,
    lambda: S,
) -> S {
    let a = fitted - reward;
    let b = fitted_star - reward;
    eta * (a * a - b * b) - lambda * (best - best_star)
}

/// The expansion of `ΔL` in the gap `g = f_ν(x,a) - f*(x,a)` and the noise
/// `ε = y - f*(x,a)`: `η g² - 2η ε g - λ (f_ν(x) - f*(x))`.
pub fn delta_l_expanded<S: Scalar>(
    fitted: S,
    best: S,
    fitted_star: S,
    best_star: S,
    reward: S,
    eta: S,
    lambda: S,
) -> S {
    let g = fitted - fitted_star;
    let eps = reward - fitted_star;
    eta * g * g - S::lit(2.0) * eta * eps * g - lambda * (best - best_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Grow,
    Shrink,
    Relocate,
    Perturb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
}

/// Per-history quantities for one parameter value.
#[derive(Debug, Clone, Default)]
struct Fit<S> {
    /// `f_ν(X_l, a)` laid out as `l * K + a`.
    values: Vec<S>,
    fitted: Vec<S>,
    best: Vec<S>,
    loss: S,
}

#[derive(Debug, Clone)]
enum Columns<S> {
    /// Lazily filled feature columns `φ_j(X_{l,a})`, slot `j - 1`.
    Countable(Vec<Option<Vec<S>>>),
    /// `φ(X_{l,a}, θ_i)`, aligned with the atoms of the current parameter.
    Atomic(Vec<Vec<S>>),
}

/// Warm-startable MCMC state with cached per-record statistics.
#[derive(Clone)]
pub struct PosteriorState<S: Scalar> {
    param: SparseParam<S>,
    prior: Prior,
    features: Features<S>,
    num_actions: Option<usize>,
    items: Vec<Item<S>>,
    actions: Vec<usize>,
    rewards: Vec<S>,
    columns: Columns<S>,
    current: Fit<S>,
    scratch: Fit<S>,
    log_prior: S,
    eta: S,
    lambda: S,
}

impl<S: Scalar> std::fmt::Debug for PosteriorState<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PosteriorState")
            .field("param", &self.param)
            .field("records", &self.actions.len())
            .field("loss", &self.current.loss)
            .field("log_prior", &self.log_prior)
            .finish()
    }
}

impl<S: Scalar> PosteriorState<S> {
    /// Starts a chain at `param` with an empty history.
    pub fn new(param: SparseParam<S>, prior: Prior, features: Features<S>, config: &FgtsConfig<S>) -> Result<Self> {
        config.validate()?;
        let columns = match (&prior, &param, &features) {
            (Prior::Countable { d_eff }, SparseParam::Countable(_), Features::Countable(_)) => {
                Columns::Countable(vec![None; *d_eff])
            }
            (Prior::Atomic { dim, .. }, SparseParam::Atomic(p), Features::Parametric(f)) => {
                if f.param_dim() != *dim {
                    return Err(Error::InvalidParameter(format!(
                        "prior dimension {dim} differs from feature map dimension {}",
                        f.param_dim()
                    )));
                }
                Columns::Atomic(vec![Vec::new(); p.num_atoms()])
            }
            _ => return Err(Error::ModelMismatch),
        };
        let log_prior = prior.log_density(&param);
        if log_prior == S::neg_infinity() {
            return Err(Error::InvalidParameter("initial parameter outside the prior support".into()));
        }
        Ok(Self {
            param,
            prior,
            features,
            num_actions: None,
            items: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            columns,
            current: Fit { loss: S::zero(), ..Fit::default() },
            scratch: Fit::default(),
            log_prior,
            eta: config.eta,
            lambda: config.lambda,
        })
    }

    /// Starts a chain at a fresh prior draw.
    pub fn from_prior<R: Rng + ?Sized>(
        prior: Prior,
        features: Features<S>,
        config: &FgtsConfig<S>,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(prior.sample(rng), prior, features, config)
    }

    pub fn param(&self) -> &SparseParam<S> {
        &self.param
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn num_records(&self) -> usize {
        self.actions.len()
    }

    /// Cached `Σ_l L(ν, X_l, A_l, Y_l)`.
    pub fn total_loss(&self) -> S {
        self.current.loss
    }

    pub fn log_prior(&self) -> S {
        self.log_prior
    }

    /// Cached `-Σ L + ln p_1(ν)`.
    pub fn log_posterior(&self) -> S {
        self.log_prior - self.current.loss
    }

    /// Cached `f_ν(X_l, A_l)` per record.
    pub fn fitted_values(&self) -> &[S] {
        &self.current.fitted
    }

    /// Cached `f_ν(X_l)` per record.
    pub fn best_values(&self) -> &[S] {
        &self.current.best
    }

    /// Appends one history record and updates every cache.
    pub fn push_record(&mut self, record: &HistoryRecord<S>) -> Result<()> {
        let k = record.context.num_actions();
        match self.num_actions {
            None => self.num_actions = Some(k),
            Some(expected) if expected != k => {
                return Err(Error::InvalidContext(format!("expected {expected} actions, got {k}")));
            }
            _ => {}
        }
        let items = record.context.items();
        match (&mut self.columns, &self.features) {
            (Columns::Countable(cols), Features::Countable(f)) => {
                for (slot, col) in cols.iter_mut().enumerate() {
                    if let Some(col) = col {
                        for item in items {
                            col.push(f.eval(slot + 1, item)?);
                        }
                    }
                }
            }
            (Columns::Atomic(cols), Features::Parametric(f)) => {
                let SparseParam::Atomic(p) = &self.param else { return Err(Error::ModelMismatch) };
                for (col, theta) in cols.iter_mut().zip(p.atoms()) {
                    for item in items {
                        col.push(f.eval(item, theta)?);
                    }
                }
            }
            _ => return Err(Error::ModelMismatch),
        }
        self.items.extend(items.iter().cloned());
        self.actions.push(record.action);
        self.rewards.push(record.reward);

        // Extend the current fit by one row.
        let values = eval_all_actions(&self.param, &self.features, &record.context)?;
        let fitted = values[record.action];
        let (_, best) = argmax_first(&values);
        let r = fitted - record.reward;
        self.current.loss += self.eta * r * r - self.lambda * best;
        self.current.values.extend(values);
        self.current.fitted.push(fitted);
        self.current.best.push(best);
        Ok(())
    }

    fn k(&self) -> usize {
        self.num_actions.unwrap_or(0)
    }

    fn ensure_countable_column(&mut self, index: usize) -> Result<()> {
        let (Columns::Countable(cols), Features::Countable(f)) = (&mut self.columns, &self.features) else {
            return Err(Error::ModelMismatch);
        };
        let slot = cols.get_mut(index - 1).ok_or(Error::InvalidFeatureIndex(index))?;
        if slot.is_none() {
            let col = self.items.iter().map(|item| f.eval(index, item)).collect::<Result<Vec<_>>>()?;
            *slot = Some(col);
        }
        Ok(())
    }

    fn atom_column(&self, theta: &[S]) -> Result<Vec<S>> {
        let Features::Parametric(f) = &self.features else { return Err(Error::ModelMismatch) };
        atom_column(f.as_ref(), &self.items, theta)
    }

    /// Fills `self.scratch` from `(column, weight)` pairs.
    fn evaluate_into_scratch(&mut self, comps: &[(&[S], S)]) {
        let k = self.k();
        let t = self.actions.len();
        let fit = &mut self.scratch;
        fit.values.clear();
        fit.values.resize(t * k, S::zero());
        for (col, w) in comps {
            for (v, c) in fit.values.iter_mut().zip(col.iter()) {
                *v += *w * *c;
            }
        }
        fit.fitted.clear();
        fit.best.clear();
        let mut total = S::zero();
        for l in 0..t {
            let row = &fit.values[l * k..(l + 1) * k];
            let fitted = row[self.actions[l]];
            let best = row.iter().copied().fold(row[0], S::max);
            let r = fitted - self.rewards[l];
            total += self.eta * r * r - self.lambda * best;
            fit.fitted.push(fitted);
            fit.best.push(best);
        }
        fit.loss = total;
    }

    fn evaluate_countable(&mut self, support: &[usize], weights: &[S]) -> Result<()> {
        for &j in support {
            self.ensure_countable_column(j)?;
        }
        let Columns::Countable(cols) = std::mem::replace(&mut self.columns, Columns::Countable(Vec::new())) else {
            unreachable!()
        };
        let comps: Vec<(&[S], S)> = support
            .iter()
            .zip(weights)
            .map(|(&j, &w)| (cols[j - 1].as_deref().expect("column filled above"), w))
            .collect();
        self.evaluate_into_scratch(&comps);
        drop(comps);
        self.columns = Columns::Countable(cols);
        Ok(())
    }

    fn evaluate_atomic(&mut self, cols: &[Vec<S>], weights: &[S]) {
        let comps: Vec<(&[S], S)> = cols.iter().map(|c| c.as_slice()).zip(weights.iter().copied()).collect();
        self.evaluate_into_scratch(&comps);
    }

    /// Metropolis–Hastings accept/reject for a proposal whose fit is in
    /// `self.scratch`. `ln_q_ratio` is `ln q(reverse) - ln q(forward)`.
    fn accept<R: Rng + ?Sized>(&mut self, proposal_log_prior: S, ln_q_ratio: f64, rng: &mut R) -> bool {
        if proposal_log_prior == S::neg_infinity() {
            return false;
        }
        let log_target_diff =
            (proposal_log_prior - self.scratch.loss).as_f64() - (self.log_prior - self.current.loss).as_f64();
        let log_alpha = log_target_diff + ln_q_ratio;
        if log_alpha.is_nan() {
            return false;
        }
        log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha
    }

    fn commit(&mut self, param: SparseParam<S>, log_prior: S) {
        self.param = param;
        self.log_prior = log_prior;
        std::mem::swap(&mut self.current, &mut self.scratch);
    }

    fn perturbed_weights<R: Rng + ?Sized>(weights: &[S], step: S, rng: &mut R) -> Option<Vec<S>> {
        let w: Vec<S> = weights.iter().map(|x| *x + step * S::sample_standard_normal(rng)).collect();
        (l1_norm(&w) <= S::one() && w.iter().all(|x| *x != S::zero())).then_some(w)
    }

    /// One Metropolis–Hastings move.
    pub fn step<R: Rng + ?Sized>(&mut self, config: &FgtsConfig<S>, rng: &mut R) -> Result<MoveOutcome> {
        let kind = config.moves.pick(rng);
        let accepted = match self.param.clone() {
            SparseParam::Countable(p) => self.step_countable(&p, kind, config, rng)?,
            SparseParam::Atomic(p) => self.step_atomic(&p, kind, config, rng)?,
        };
        Ok(MoveOutcome { kind, accepted })
    }

    fn step_countable<R: Rng + ?Sized>(
        &mut self,
        p: &CountableParam<S>,
        kind: MoveKind,
        config: &FgtsConfig<S>,
        rng: &mut R,
    ) -> Result<bool> {
        let d = self.prior.max_size();
        let m = p.sparsity();
        let mix = &config.moves;
        let entries: Vec<(usize, S)> = p.support().iter().copied().zip(p.weights().iter().copied()).collect();

        let (proposal, ln_q_ratio) = match kind {
            MoveKind::Grow => {
                if m >= d {
                    return Ok(false);
                }
                let j = pick_outside(p.support(), d, rng);
                let mut support: Vec<usize> = p.support().to_vec();
                support.push(j);
                support.sort_unstable();
                let weights = sample_l1_ball(m + 1, rng);
                let fwd = mix.ln_prob(MoveKind::Grow) - ((d - m) as f64).ln() + ln_uniform_l1_density(m + 1);
                let rev = mix.ln_prob(MoveKind::Shrink) - ((m + 1) as f64).ln() + ln_uniform_l1_density(m);
                (CountableParam::new(support, weights)?, rev - fwd)
            }
            MoveKind::Shrink => {
                if m <= 1 {
                    return Ok(false);
                }
                let drop = rng.random_range(0..m);
                let support: Vec<usize> =
                    p.support().iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, &j)| j).collect();
                let weights = sample_l1_ball(m - 1, rng);
                let fwd = mix.ln_prob(MoveKind::Shrink) - (m as f64).ln() + ln_uniform_l1_density(m - 1);
                let rev = mix.ln_prob(MoveKind::Grow) - ((d - m + 1) as f64).ln() + ln_uniform_l1_density(m);
                (CountableParam::new(support, weights)?, rev - fwd)
            }
            MoveKind::Relocate => {
                if m >= d {
                    return Ok(false);
                }
                let out = rng.random_range(0..m);
                let j = pick_outside(p.support(), d, rng);
                let mut moved = entries.clone();
                moved[out].0 = j;
                (CountableParam::from_unsorted(moved)?, 0.0)
            }
            MoveKind::Perturb => match Self::perturbed_weights(p.weights(), config.weight_step, rng) {
                Some(w) => (CountableParam::new(p.support().to_vec(), w)?, 0.0),
                None => return Ok(false),
            },
        };

        self.evaluate_countable(proposal.support(), proposal.weights())?;
        let proposal = SparseParam::Countable(proposal);
        let lp = self.prior.log_density(&proposal);
        if self.accept(lp, ln_q_ratio, rng) {
            self.commit(proposal, lp);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn step_atomic<R: Rng + ?Sized>(
        &mut self,
        p: &AtomicParam<S>,
        kind: MoveKind,
        config: &FgtsConfig<S>,
        rng: &mut R,
    ) -> Result<bool> {
        let cap = self.prior.max_size();
        let dim = p.dim();
        let m = p.num_atoms();
        let mix = &config.moves;
        let ln_atom_density = -ln_unit_l2_ball_volume(dim);
        let Columns::Atomic(cols) = &self.columns else { return Err(Error::ModelMismatch) };
        let mut new_cols = cols.clone();
        let mut atoms = p.atoms().to_vec();

        let (weights, ln_q_ratio) = match kind {
            MoveKind::Grow => {
                if m >= cap {
                    return Ok(false);
                }
                let pos = rng.random_range(0..=m);
                let theta: Vec<S> = sample_l2_ball(dim, rng);
                new_cols.insert(pos, self.atom_column(&theta)?);
                atoms.insert(pos, theta);
                let weights = sample_l1_ball(m + 1, rng);
                let fwd = mix.ln_prob(MoveKind::Grow) - ((m + 1) as f64).ln()
                    + ln_uniform_l1_density(m + 1)
                    + ln_atom_density;
                let rev = mix.ln_prob(MoveKind::Shrink) - ((m + 1) as f64).ln() + ln_uniform_l1_density(m);
                (weights, rev - fwd)
            }
            MoveKind::Shrink => {
                if m <= 1 {
                    return Ok(false);
                }
                let pos = rng.random_range(0..m);
                new_cols.remove(pos);
                atoms.remove(pos);
                let weights = sample_l1_ball(m - 1, rng);
                let fwd = mix.ln_prob(MoveKind::Shrink) - (m as f64).ln() + ln_uniform_l1_density(m - 1);
                let rev = mix.ln_prob(MoveKind::Grow) - (m as f64).ln() + ln_uniform_l1_density(m) + ln_atom_density;
                (weights, rev - fwd)
            }
            MoveKind::Relocate => {
                let i = rng.random_range(0..m);
                let theta: Vec<S> =
                    atoms[i].iter().map(|x| *x + config.atom_step * S::sample_standard_normal(rng)).collect();
                if l2_norm(&theta) > S::one() {
                    return Ok(false);
                }
                new_cols[i] = self.atom_column(&theta)?;
                atoms[i] = theta;
                (p.weights().to_vec(), 0.0)
            }
            MoveKind::Perturb => match Self::perturbed_weights(p.weights(), config.weight_step, rng) {
                Some(w) => (w, 0.0),
                None => return Ok(false),
            },
        };

        self.evaluate_atomic(&new_cols, &weights);
        let proposal = SparseParam::Atomic(AtomicParam::new(weights, atoms)?);
        let lp = self.prior.log_density(&proposal);
        if self.accept(lp, ln_q_ratio, rng) {
            self.commit(proposal, lp);
            self.columns = Columns::Atomic(new_cols);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Recomputes the summed loss from scratch through the generic reward
    /// evaluation path; used to audit the caches.
    pub fn fresh_total_loss(&self) -> Result<S> {
        let k = self.k();
        let mut total = S::zero();
        for (l, (&a, &y)) in self.actions.iter().zip(&self.rewards).enumerate() {
            let ctx = ContextSlice::new(l + 1, self.items[l * k..(l + 1) * k].to_vec())?;
            total += loss(&self.param, &self.features, &ctx, a, y, self.eta, self.lambda)?;
        }
        Ok(total)
    }
}

fn atom_column<S: Scalar>(f: &dyn ParametricFeatures<S>, items: &[Item<S>], theta: &[S]) -> Result<Vec<S>> {
    items.iter().map(|item| f.eval(item, theta)).collect()
}

/// Uniform index of `1..=d` not in the sorted `support`.
fn pick_outside<R: Rng + ?Sized>(support: &[usize], d: usize, rng: &mut R) -> usize {
    let mut r = rng.random_range(0..d - support.len());
    let mut j = 1;
    let mut si = 0;
    loop {
        if si < support.len() && support[si] == j {
            si += 1;
        } else if r == 0 {
            return j;
        } else {
            r -= 1;
        }
        j += 1;
    }
}

/// One MH move on `state`.
pub fn mcmc_step<S: Scalar, R: Rng + ?Sized>(
    state: &mut PosteriorState<S>,
    config: &FgtsConfig<S>,
    rng: &mut R,
) -> Result<MoveOutcome> {
    state.step(config, rng)
}

/// Runs `config.sweeps` moves on the warm-started chain, then acts greedily
/// for the final sample. Returns the action and the number of accepted moves.
pub fn fgts_policy_step<S: Scalar, R: Rng + ?Sized>(
    state: &mut PosteriorState<S>,
    context: &ContextSlice<S>,
    config: &FgtsConfig<S>,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let mut accepted = 0;
    for _ in 0..config.sweeps {
        if state.step(config, rng)?.accepted {
            accepted += 1;
        }
    }
    let (action, _) = eval_best(&state.param, &state.features, context)?;
    Ok((action, accepted))
}

/// Feel-Good Thompson Sampling as a [`Policy`]. With `λ = 0` this is vanilla
/// Thompson sampling over the same prior.
pub struct FgtsPolicy<S: Scalar> {
    features: Features<S>,
    prior: Prior,
    config: FgtsConfig<S>,
    state: Option<PosteriorState<S>>,
    last: Option<RoundDiagnostics>,
    label: String,
}

impl<S: Scalar> FgtsPolicy<S> {
    pub fn new(features: Features<S>, prior: Prior, config: FgtsConfig<S>) -> Result<Self> {
        config.validate()?;
        let label = if config.lambda == S::zero() { "vanilla_ts" } else { "fgts" }.to_string();
        Ok(Self { features, prior, config, state: None, last: None, label })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn config(&self) -> &FgtsConfig<S> {
        &self.config
    }

    pub fn state(&self) -> Option<&PosteriorState<S>> {
        self.state.as_ref()
    }
}

impl<S: Scalar> Policy<S> for FgtsPolicy<S> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn select(
        &mut self,
        _history: &[HistoryRecord<S>],
        context: &ContextSlice<S>,
        rng: &mut dyn RngCore,
    ) -> Result<usize> {
        if self.state.is_none() {
            self.state = Some(PosteriorState::from_prior(self.prior, self.features.clone(), &self.config, rng)?);
        }
        let state = self.state.as_mut().expect("initialized above");
        let (action, accepted) = fgts_policy_step(state, context, &self.config, rng)?;
        self.last = Some(RoundDiagnostics {
            accept_rate: if self.config.sweeps == 0 { 0.0 } else { accepted as f64 / self.config.sweeps as f64 },
            support_size: state.param().size(),
            log_posterior: state.log_posterior().as_f64(),
        });
        Ok(action)
    }

    fn observe(&mut self, record: &HistoryRecord<S>) -> Result<()> {
        match self.state.as_mut() {
            Some(state) => state.push_record(record),
            None => Err(Error::InvalidParameter("observe called before select".into())),
        }
    }

    fn diagnostics(&self) -> Option<RoundDiagnostics> {
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{CosineFamily, DecayProfile, GaussianBumpMap};
    use crate::protocol::Item;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cosine() -> Features<f64> {
        Features::countable(CosineFamily::new(DecayProfile::polynomial(2.0).unwrap(), 1).unwrap())
    }

    fn random_record(k: usize, rng: &mut ChaCha8Rng, round: usize) -> HistoryRecord<f64> {
        let items = (0..k).map(|_| Item::Point(vec![rng.random::<f64>()])).collect();
        let ctx = ContextSlice::new(round, items).unwrap();
        let a = rng.random_range(0..k);
        HistoryRecord::new(ctx, a, rng.random::<f64>() - 0.5).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(FgtsConfig::new(0.25, 0.1).is_ok());
        assert!(FgtsConfig::new(0.0, 0.1).is_err());
        assert!(FgtsConfig::new(0.3, 0.1).is_err());
        assert!(FgtsConfig::new(0.25, -0.1).is_err());
        assert!(FgtsConfig::new(0.25, 0.0).is_ok());
    }

    #[test]
    fn expansion_matches_direct_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let y = v[4] * 3.0;
            let direct = delta_l_from_values(v[0], v[1], v[2], v[3], y, 0.25, 0.7);
            let expanded = delta_l_expanded(v[0], v[1], v[2], v[3], y, 0.25, 0.7);
            assert!((direct - expanded).abs() < 1e-12);
        }
    }

    #[test]
    fn caches_track_fresh_loss_countable() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let config = FgtsConfig::new(0.25, 0.3).unwrap();
        let mut state = PosteriorState::from_prior(Prior::countable(8).unwrap(), cosine(), &config, &mut rng).unwrap();
        for t in 1..=60 {
            for _ in 0..20 {
                state.step(&config, &mut rng).unwrap();
            }
            state.push_record(&random_record(3, &mut rng, t)).unwrap();
            let fresh = state.fresh_total_loss().unwrap();
            assert!((fresh - state.total_loss()).abs() < 1e-9, "{fresh} vs {}", state.total_loss());
        }
        assert_eq!(state.fitted_values().len(), 60);
    }

    #[test]
    fn caches_track_fresh_loss_atomic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let config = FgtsConfig::new(0.25, 0.3).unwrap();
        let features = Features::parametric(GaussianBumpMap::new(1.0, 2).unwrap());
        let mut state = PosteriorState::from_prior(Prior::atomic(2, 6).unwrap(), features, &config, &mut rng).unwrap();
        for t in 1..=40 {
            for _ in 0..20 {
                state.step(&config, &mut rng).unwrap();
            }
            let items = (0..2)
                .map(|_| Item::Point(vec![rng.random::<f64>(), rng.random::<f64>()]))
                .collect();
            let rec = HistoryRecord::new(ContextSlice::new(t, items).unwrap(), 1, 0.2).unwrap();
            state.push_record(&rec).unwrap();
            let fresh = state.fresh_total_loss().unwrap();
            assert!((fresh - state.total_loss()).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_history_chain_targets_the_prior() {
        // With no data the target is the prior itself, so the size marginal
        // of the chain must match the prior's: for d_eff = 3 the sizes 1, 2, 3
        // have masses 4/7, 2/7, 1/7.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let config = FgtsConfig::new(0.25, 0.1).unwrap();
        let mut state = PosteriorState::from_prior(Prior::countable(3).unwrap(), cosine(), &config, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        let mut l1 = 0.0;
        let n = 400_000;
        for _ in 0..n {
            state.step(&config, &mut rng).unwrap();
            counts[state.param().size()] += 1;
            l1 += l1_norm(state.param().weights());
        }
        for (m, expected) in [(1, 4.0 / 7.0), (2, 2.0 / 7.0), (3, 1.0 / 7.0)] {
            let f = counts[m] as f64 / n as f64;
            assert!((f - expected).abs() < 0.01, "size {m}: {f} vs {expected}");
        }
        // E‖w‖₁ = Σ_m P(m) m/(m+1).
        let expected_l1 = 4.0 / 7.0 * 0.5 + 2.0 / 7.0 * (2.0 / 3.0) + 1.0 / 7.0 * 0.75;
        assert!((l1 / n as f64 - expected_l1).abs() < 0.01);
    }

    #[test]
    fn empty_history_atomic_chain_targets_the_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let config = FgtsConfig::new(0.25, 0.1).unwrap();
        let features = Features::parametric(GaussianBumpMap::new(1.0, 2).unwrap());
        let mut state = PosteriorState::from_prior(Prior::atomic(2, 3).unwrap(), features, &config, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        let mut radius = 0.0;
        let n = 300_000;
        for _ in 0..n {
            state.step(&config, &mut rng).unwrap();
            counts[state.param().size()] += 1;
            if let SparseParam::Atomic(p) = state.param() {
                radius += l2_norm(&p.atoms()[0]);
            }
        }
        for (m, expected) in [(1, 4.0 / 7.0), (2, 2.0 / 7.0), (3, 1.0 / 7.0)] {
            let f = counts[m] as f64 / n as f64;
            assert!((f - expected).abs() < 0.01, "size {m}: {f} vs {expected}");
        }
        assert!((radius / n as f64 - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn policy_reports_diagnostics_and_rejects_observe_before_select() {
        let config = FgtsConfig::new(0.25, 0.1).unwrap().with_sweeps(10);
        let mut policy = FgtsPolicy::new(cosine(), Prior::countable(4).unwrap(), config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rec = random_record(2, &mut rng, 1);
        assert!(policy.observe(&rec).is_err());
        let a = policy.select(&[], &rec.context, &mut rng).unwrap();
        assert!(a < 2);
        let d = policy.diagnostics().unwrap();
        assert!((0.0..=1.0).contains(&d.accept_rate));
        assert!(d.support_size >= 1);
        assert_eq!(policy.name(), "fgts");
    }

    #[test]
    fn mismatched_prior_and_features_rejected() {
        let config = FgtsConfig::new(0.25, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = PosteriorState::<f64>::from_prior(Prior::atomic(1, 4).unwrap(), cosine(), &config, &mut rng);
        assert!(matches!(r, Err(Error::ModelMismatch)));
    }

    #[test]
    fn pick_outside_is_uniform_over_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut counts = [0usize; 7];
        for _ in 0..60_000 {
            counts[pick_outside(&[2, 4, 5], 6, &mut rng)] += 1;
        }
        assert_eq!(counts[2] + counts[4] + counts[5] + counts[0], 0);
        for j in [1, 3, 6] {
            assert!((counts[j] as f64 / 60_000.0 - 1.0 / 3.0).abs() < 0.01);
        }
    }
}
