//! The contextual bandit round loop and regret bookkeeping.
//!
//! Actions are zero-based indices into the per-round context slice. An
//! episode draws observation noise and policy randomness from two independent
//! ChaCha streams derived from the episode seed, so two policies run with the
//! same seed face the same noise sequence.

use std::fmt::Write as _;
use std::io::Write;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::Features;
use crate::model::{eval_all_actions, SparseParam};
use crate::scalar::Scalar;

/// One per-action element of a context, a point of the context space.
///
/// Feature families decide which variants they understand: the smooth
/// families read real vectors, the lower-bound constructions read opaque
/// tokens.
#[derive(Debug, Clone, PartialEq)]
pub enum Item<S> {
    Point(Vec<S>),
    Token(usize),
}

impl<S: Scalar> Item<S> {
    pub fn point(&self) -> Result<&[S]> {
        match self {
            Item::Point(p) => Ok(p),
            Item::Token(t) => Err(Error::ContextMismatch(format!("expected a point, got token {t}"))),
        }
    }

    pub fn token(&self) -> Result<usize> {
        match self {
            Item::Token(t) => Ok(*t),
            Item::Point(_) => Err(Error::ContextMismatch("expected a token, got a point".into())),
        }
    }
}

/// The context revealed at the start of round `round` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSlice<S> {
    pub round: usize,
    items: Vec<Item<S>>,
}

impl<S: Scalar> ContextSlice<S> {
    pub fn new(round: usize, items: Vec<Item<S>>) -> Result<Self> {
        if items.len() < 2 {
            return Err(Error::InvalidContext(format!(
                "a context needs at least 2 actions, got {}",
                items.len()
            )));
        }
        Ok(Self { round, items })
    }

    pub fn num_actions(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &[Item<S>] {
        &self.items
    }

    pub fn item(&self, action: usize) -> Result<&Item<S>> {
        self.items.get(action).ok_or(Error::InvalidAction { action, num_actions: self.items.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord<S> {
    pub context: ContextSlice<S>,
    pub action: usize,
    pub reward: S,
}

impl<S: Scalar> HistoryRecord<S> {
    pub fn new(context: ContextSlice<S>, action: usize, reward: S) -> Result<Self> {
        if action >= context.num_actions() {
            return Err(Error::InvalidAction { action, num_actions: context.num_actions() });
        }
        if !reward.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite reward {reward}")));
        }
        Ok(Self { context, action, reward })
    }
}

/// Additive Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<S> {
    pub sigma: S,
}

impl<S: Scalar> NoiseSpec<S> {
    pub fn gaussian(sigma: S) -> Result<Self> {
        if !(sigma >= S::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Conditionally 1/2-sub-Gaussian, the regime the FGTS guarantees assume.
    pub fn is_fgts_regime(&self) -> bool {
        self.sigma <= S::lit(0.5)
    }

    /// Standard Gaussian noise, the regime of the lower-bound constructions.
    pub fn is_lower_bound_regime(&self) -> bool {
        self.sigma == S::one()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> S {
        self.sigma * S::sample_standard_normal(rng)
    }
}

/// A contextual bandit environment with an oblivious, pre-generated context
/// schedule and a sparse true reward function.
#[derive(Clone)]
pub struct BanditInstance<S: Scalar> {
    pub name: String,
    pub schedule: Vec<ContextSlice<S>>,
    pub truth: SparseParam<S>,
    pub features: Features<S>,
    pub noise: NoiseSpec<S>,
}

impl<S: Scalar> BanditInstance<S> {
    /// `f*(x, a)` for every action of `context`.
    pub fn mean_rewards(&self, context: &ContextSlice<S>) -> Result<Vec<S>> {
        eval_all_actions(&self.truth, &self.features, context)
    }

    pub fn horizon(&self) -> usize {
        self.schedule.len()
    }
}

impl<S: Scalar> std::fmt::Debug for BanditInstance<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BanditInstance")
            .field("name", &self.name)
            .field("horizon", &self.schedule.len())
            .field("truth", &self.truth)
            .field("noise", &self.noise)
            .finish()
    }
}

/// Per-round sampler statistics reported by policies that run a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundDiagnostics {
    pub accept_rate: f64,
    pub support_size: usize,
    pub log_posterior: f64,
}

pub trait Policy<S: Scalar>: Send {
    fn name(&self) -> String;

    /// Chooses an action for `context` given everything observed so far.
    fn select(
        &mut self,
        history: &[HistoryRecord<S>],
        context: &ContextSlice<S>,
        rng: &mut dyn RngCore,
    ) -> Result<usize>;

    /// Called once per round after the reward is revealed.
    fn observe(&mut self, _record: &HistoryRecord<S>) -> Result<()> {
        Ok(())
    }

    fn diagnostics(&self) -> Option<RoundDiagnostics> {
        None
    }
}

impl<S: Scalar> Policy<S> for Box<dyn Policy<S>> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn select(
        &mut self,
        history: &[HistoryRecord<S>],
        context: &ContextSlice<S>,
        rng: &mut dyn RngCore,
    ) -> Result<usize> {
        (**self).select(history, context, rng)
    }

    fn observe(&mut self, record: &HistoryRecord<S>) -> Result<()> {
        (**self).observe(record)
    }

    fn diagnostics(&self) -> Option<RoundDiagnostics> {
        (**self).diagnostics()
    }
}

/// Index and value of the maximum, ties resolved to the lowest index.
pub fn argmax_first<S: Scalar>(values: &[S]) -> (usize, S) {
    let mut best = 0;
    let mut best_value = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    (best, best_value)
}

/// `max_b f*(x, b) - f*(x, a)`.
pub fn pseudo_regret_step<S: Scalar>(fstar_values: &[S], action: usize) -> Result<S> {
    if fstar_values.len() < 2 {
        return Err(Error::InvalidContext(format!(
            "need at least 2 action values, got {}",
            fstar_values.len()
        )));
    }
    let chosen = *fstar_values
        .get(action)
        .ok_or(Error::InvalidAction { action, num_actions: fstar_values.len() })?;
    let (_, best) = argmax_first(fstar_values);
    Ok(best - chosen)
}

/// Regret of one seeded episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace<S> {
    pub seed: u64,
    pub instant: Vec<S>,
    pub cumulative: Vec<S>,
    pub actions: Vec<usize>,
    pub diagnostics: Option<Vec<RoundDiagnostics>>,
}

impl<S: Scalar> RegretTrace<S> {
    pub fn len(&self) -> usize {
        self.instant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instant.is_empty()
    }

    pub fn total(&self) -> S {
        self.cumulative.last().copied().unwrap_or_else(S::zero)
    }

    /// Regret summed over consecutive blocks of `block_len` rounds.
    pub fn block_regrets(&self, block_len: usize) -> Vec<S> {
        assert!(block_len > 0);
        self.instant.chunks(block_len).map(|c| c.iter().copied().sum()).collect()
    }

    /// CSV with header `seed,t,instant_regret,cum_regret`, plus
    /// `accept_rate,support_size,log_posterior` when diagnostics were
    /// recorded. Floats are written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("seed,t,instant_regret,cum_regret");
        if self.diagnostics.is_some() {
            out.push_str(",accept_rate,support_size,log_posterior");
        }
        out.push('\n');
        for t in 0..self.instant.len() {
            let _ = write!(
                out,
                "{},{},{:?},{:?}",
                self.seed,
                t + 1,
                self.instant[t].as_f64(),
                self.cumulative[t].as_f64()
            );
            if let Some(diag) = &self.diagnostics {
                let d = diag[t];
                let _ = write!(out, ",{:?},{},{:?}", d.accept_rate, d.support_size, d.log_posterior);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Independent generators for the environment noise and the policy.
pub fn episode_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(0);
    let mut policy = ChaCha8Rng::seed_from_u64(seed);
    policy.set_stream(1);
    (noise, policy)
}

/// Plays `n` rounds of `policy` against `env`.
pub fn run_episode<S: Scalar, P: Policy<S> + ?Sized>(
    env: &BanditInstance<S>,
    policy: &mut P,
    n: usize,
    seed: u64,
) -> Result<RegretTrace<S>> {
    if env.schedule.len() < n {
        return Err(Error::ScheduleTooShort { available: env.schedule.len(), requested: n });
    }
    let (mut noise_rng, mut policy_rng) = episode_rngs(seed);
    let mut history: Vec<HistoryRecord<S>> = Vec::with_capacity(n);
    let mut instant = Vec::with_capacity(n);
    let mut cumulative = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut diagnostics: Vec<RoundDiagnostics> = Vec::new();
    let mut total = S::zero();

    for context in env.schedule.iter().take(n) {
        let k = context.num_actions();
        let action = policy.select(&history, context, &mut policy_rng)?;
        if action >= k {
            return Err(Error::InvalidAction { action, num_actions: k });
        }
        if let Some(d) = policy.diagnostics() {
            diagnostics.push(d);
        }
        let means = env.mean_rewards(context)?;
        let regret = pseudo_regret_step(&means, action)?;
        let reward = means[action] + env.noise.sample(&mut noise_rng);
        total += regret;
        instant.push(regret);
        cumulative.push(total);
        actions.push(action);

        let record = HistoryRecord::new(context.clone(), action, reward)?;
        policy.observe(&record)?;
        history.push(record);
    }

    let diagnostics = (!diagnostics.is_empty() && diagnostics.len() == instant.len()).then_some(diagnostics);
    Ok(RegretTrace { seed, instant, cumulative, actions, diagnostics })
}
