//! Simulation lab for sparse nonparametric contextual bandits.
//!
//! Rewards are sparse combinations of features, either a countable sequence
//! `f(x, a) = Σ_j w_j φ_j(x_a)` or a finite mixture `Σ_i w_i φ(x_a, θ_i)` with
//! continuous parameters in the unit ball. The crate provides the round loop
//! and regret bookkeeping ([`protocol`]), feature families and audits
//! ([`features`]), sparsity priors ([`model`]), Feel-Good Thompson Sampling
//! with a trans-dimensional MCMC sampler ([`fgts`]), reference policies
//! ([`baselines`]), lower-bound instances ([`hard_instances`]), brute-force
//! references ([`oracles`]) and an experiment harness ([`harness`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

// Validation uses `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod features;
pub mod fgts;
pub mod hard_instances;
pub mod harness;
pub mod model;
pub mod oracles;
pub mod protocol;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use features::{DecayKind, DecayProfile, Features};
pub use fgts::{FgtsConfig, FgtsPolicy, MoveMix, PosteriorState};
pub use model::{AtomicParam, CountableParam, Prior, SparseParam};
pub use protocol::{run_episode, BanditInstance, ContextSlice, HistoryRecord, Item, Policy, RegretTrace};
pub use scalar::Scalar;

pub type BanditInstance64 = BanditInstance<f64>;
pub type BanditInstance32 = BanditInstance<f32>;
pub type ContextSlice64 = ContextSlice<f64>;
pub type HistoryRecord64 = HistoryRecord<f64>;
pub type RegretTrace64 = RegretTrace<f64>;
pub type RegretTrace32 = RegretTrace<f32>;
pub type SparseParam64 = SparseParam<f64>;
pub type SparseParam32 = SparseParam<f32>;
pub type CountableParam64 = CountableParam<f64>;
pub type AtomicParam64 = AtomicParam<f64>;
pub type Features64 = Features<f64>;
pub type Features32 = Features<f32>;
pub type FgtsConfig64 = FgtsConfig<f64>;
pub type FgtsConfig32 = FgtsConfig<f32>;
pub type FgtsPolicy64 = FgtsPolicy<f64>;
pub type FgtsPolicy32 = FgtsPolicy<f32>;
pub type PosteriorState64 = PosteriorState<f64>;
