//! Feature families for both sparsity models.
//!
//! A countable family is an indexed sequence `φ_1, φ_2, …` whose sup-norms
//! follow a [`DecayProfile`] envelope. A parametric map is a single function
//! `φ(z, θ)` with `θ` in the unit Euclidean ball, bounded by one and
//! 1-Lipschitz in `θ`. Both are consumed through trait objects so that
//! user-supplied closures and the shipped families are interchangeable.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::protocol::{ContextSlice, Item};
use crate::sampling::{l2_norm, sample_l2_ball};
use crate::scalar::Scalar;

/// Hard cap on the effective-dimension scan.
pub const EFF_DIM_SCAN_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Polynomial,
    Exponential,
}

/// Sup-norm envelope `i^{-β/2}` (polynomial) or `exp(-i^β / 2)` (exponential).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile<S> {
    kind: DecayKind,
    beta: S,
}

impl<S: Scalar> DecayProfile<S> {
    pub fn new(kind: DecayKind, beta: S) -> Result<Self> {
        let ok = match kind {
            DecayKind::Polynomial => beta > S::one(),
            DecayKind::Exponential => beta > S::zero(),
        };
        if !ok || !beta.is_finite() {
            return Err(Error::InvalidDecay(format!("{kind:?} decay needs a larger beta, got {beta}")));
        }
        Ok(Self { kind, beta })
    }

    pub fn polynomial(beta: S) -> Result<Self> {
        Self::new(DecayKind::Polynomial, beta)
    }

    pub fn exponential(beta: S) -> Result<Self> {
        Self::new(DecayKind::Exponential, beta)
    }

    pub fn kind(&self) -> DecayKind {
        self.kind
    }

    pub fn beta(&self) -> S {
        self.beta
    }

    pub fn envelope(&self, index: usize) -> S {
        let i = S::from_count(index);
        let half = S::lit(0.5);
        match self.kind {
            DecayKind::Polynomial => i.powf(-self.beta * half),
            DecayKind::Exponential => (-i.powf(self.beta) * half).exp(),
        }
    }

    /// Whether `envelope(j)^2 <= 1/n`, evaluated in rearranged form so the
    /// boundary cases are exact (`j^β >= n`, resp. `j^β >= ln n`).
    fn below_noise_floor(&self, j: usize, n: usize) -> bool {
        let jb = S::from_count(j).powf(self.beta);
        match self.kind {
            DecayKind::Polynomial => jb >= S::from_count(n),
            DecayKind::Exponential => jb >= S::from_count(n).ln(),
        }
    }
}

/// `min{i >= 1 : envelope(j)^2 <= 1/n for all j > i}`.
///
/// The envelope is decreasing, so the first `j` below the floor settles it.
pub fn effective_dimension<S: Scalar>(profile: &DecayProfile<S>, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter("effective dimension needs n >= 1".into()));
    }
    let mut j = 2;
    while !profile.below_noise_floor(j, n) {
        j += 1;
        if j > EFF_DIM_SCAN_CAP {
            return Err(Error::EffDimOverflow { cap: EFF_DIM_SCAN_CAP });
        }
    }
    Ok(j - 1)
}

/// Where the per-action context items live; used to draw audit samples.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextSpace {
    /// `[0, 1]^p`.
    UnitCube(usize),
    /// The closed unit Euclidean ball in `p` dimensions.
    UnitBall(usize),
    /// Tokens `0..count`.
    Tokens(usize),
}

impl ContextSpace {
    pub fn sample_item<S: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Item<S> {
        match *self {
            ContextSpace::UnitCube(p) => Item::Point((0..p).map(|_| S::sample_unit(rng)).collect()),
            ContextSpace::UnitBall(p) => Item::Point(sample_l2_ball(p, rng)),
            ContextSpace::Tokens(count) => Item::Token(rng.random_range(0..count)),
        }
    }

    pub fn sample_context<S: Scalar, R: Rng + ?Sized>(
        &self,
        round: usize,
        num_actions: usize,
        rng: &mut R,
    ) -> Result<ContextSlice<S>> {
        ContextSlice::new(round, (0..num_actions).map(|_| self.sample_item(rng)).collect())
    }
}

pub trait CountableFeatures<S: Scalar>: Send + Sync {
    /// `φ_index(item)`, with `index >= 1`.
    fn eval(&self, index: usize, item: &Item<S>) -> Result<S>;

    fn decay(&self) -> DecayProfile<S>;

    fn context_space(&self) -> ContextSpace;

    fn describe(&self) -> String;
}

pub trait ParametricFeatures<S: Scalar>: Send + Sync {
    fn eval(&self, item: &Item<S>, theta: &[S]) -> Result<S>;

    /// Dimension `d` of the parameter `θ`.
    fn param_dim(&self) -> usize;

    fn context_space(&self) -> ContextSpace;

    fn describe(&self) -> String;
}

/// The feature side of a sparse reward model.
#[derive(Clone)]
pub enum Features<S: Scalar> {
    Countable(Arc<dyn CountableFeatures<S>>),
    Parametric(Arc<dyn ParametricFeatures<S>>),
}

impl<S: Scalar> Features<S> {
    pub fn countable<F: CountableFeatures<S> + 'static>(f: F) -> Self {
        Features::Countable(Arc::new(f))
    }

    pub fn parametric<F: ParametricFeatures<S> + 'static>(f: F) -> Self {
        Features::Parametric(Arc::new(f))
    }

    pub fn context_space(&self) -> ContextSpace {
        match self {
            Features::Countable(f) => f.context_space(),
            Features::Parametric(f) => f.context_space(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Features::Countable(f) => f.describe(),
            Features::Parametric(f) => f.describe(),
        }
    }
}

impl<S: Scalar> fmt::Debug for Features<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Features({})", self.describe())
    }
}

fn check_index(index: usize) -> Result<()> {
    if index == 0 {
        Err(Error::InvalidFeatureIndex(0))
    } else {
        Ok(())
    }
}

/// `φ_i(z) = envelope(i) · cos(π i z_1)` on `[0, 1]^p`.
#[derive(Debug, Clone)]
pub struct CosineFamily<S> {
    profile: DecayProfile<S>,
    dim: usize,
}

impl<S: Scalar> CosineFamily<S> {
    pub fn new(profile: DecayProfile<S>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("cosine family needs p >= 1".into()));
        }
        Ok(Self { profile, dim })
    }
}

impl<S: Scalar> CountableFeatures<S> for CosineFamily<S> {
    fn eval(&self, index: usize, item: &Item<S>) -> Result<S> {
        check_index(index)?;
        let z = item.point()?;
        if z.len() != self.dim {
            return Err(Error::ContextMismatch(format!("expected dimension {}, got {}", self.dim, z.len())));
        }
        Ok(self.profile.envelope(index) * (S::PI() * S::from_count(index) * z[0]).cos())
    }

    fn decay(&self) -> DecayProfile<S> {
        self.profile
    }

    fn context_space(&self) -> ContextSpace {
        ContextSpace::UnitCube(self.dim)
    }

    fn describe(&self) -> String {
        format!("cosine({:?}, beta={}, p={})", self.profile.kind, self.profile.beta, self.dim)
    }
}

type CountableFn<S> = dyn Fn(usize, &Item<S>) -> Result<S> + Send + Sync;

/// A countable family backed by a user closure.
#[derive(Clone)]
pub struct FnFamily<S: Scalar> {
    eval: Arc<CountableFn<S>>,
    profile: DecayProfile<S>,
    space: ContextSpace,
    name: String,
}

impl<S: Scalar> FnFamily<S> {
    pub fn new<F>(name: impl Into<String>, profile: DecayProfile<S>, space: ContextSpace, eval: F) -> Self
    where
        F: Fn(usize, &Item<S>) -> Result<S> + Send + Sync + 'static,
    {
        Self { eval: Arc::new(eval), profile, space, name: name.into() }
    }
}

impl<S: Scalar> CountableFeatures<S> for FnFamily<S> {
    fn eval(&self, index: usize, item: &Item<S>) -> Result<S> {
        check_index(index)?;
        (self.eval)(index, item)
    }

    fn decay(&self) -> DecayProfile<S> {
        self.profile
    }

    fn context_space(&self) -> ContextSpace {
        self.space.clone()
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// `φ(z, θ) = exp(-‖z - θ‖² / (2ℓ²))`, Lipschitz constant `1/(ℓ√e) <= 1` for `ℓ >= 1`.
#[derive(Debug, Clone)]
pub struct GaussianBumpMap<S> {
    length_scale: S,
    dim: usize,
}

impl<S: Scalar> GaussianBumpMap<S> {
    pub fn new(length_scale: S, dim: usize) -> Result<Self> {
        if !(length_scale >= S::one()) {
            return Err(Error::InvalidParameter(format!("length scale must be >= 1, got {length_scale}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self { length_scale, dim })
    }
}

impl<S: Scalar> ParametricFeatures<S> for GaussianBumpMap<S> {
    fn eval(&self, item: &Item<S>, theta: &[S]) -> Result<S> {
        let z = item.point()?;
        if z.len() != self.dim || theta.len() != self.dim {
            return Err(Error::ContextMismatch(format!("expected dimension {}", self.dim)));
        }
        let sq: S = z.iter().zip(theta).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
        Ok((-sq / (S::lit(2.0) * self.length_scale * self.length_scale)).exp())
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn context_space(&self) -> ContextSpace {
        ContextSpace::UnitBall(self.dim)
    }

    fn describe(&self) -> String {
        format!("gaussian_bump(l={}, d={})", self.length_scale, self.dim)
    }
}

/// Single ReLU unit `φ(z, θ) = max(0, ⟨θ, z⟩)` with `‖z‖₂ <= 1`.
#[derive(Debug, Clone)]
pub struct ReluMap {
    dim: usize,
}

impl ReluMap {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self { dim })
    }
}

impl<S: Scalar> ParametricFeatures<S> for ReluMap {
    fn eval(&self, item: &Item<S>, theta: &[S]) -> Result<S> {
        let z = item.point()?;
        if z.len() != self.dim || theta.len() != self.dim {
            return Err(Error::ContextMismatch(format!("expected dimension {}", self.dim)));
        }
        let dot: S = z.iter().zip(theta).map(|(a, b)| *a * *b).sum();
        Ok(dot.max(S::zero()))
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn context_space(&self) -> ContextSpace {
        ContextSpace::UnitBall(self.dim)
    }

    fn describe(&self) -> String {
        format!("relu(d={})", self.dim)
    }
}

type ParametricFn<S> = dyn Fn(&Item<S>, &[S]) -> Result<S> + Send + Sync;

/// A parametric map backed by a user closure.
#[derive(Clone)]
pub struct FnMap<S: Scalar> {
    eval: Arc<ParametricFn<S>>,
    dim: usize,
    space: ContextSpace,
    name: String,
}

impl<S: Scalar> FnMap<S> {
    pub fn new<F>(name: impl Into<String>, dim: usize, space: ContextSpace, eval: F) -> Self
    where
        F: Fn(&Item<S>, &[S]) -> Result<S> + Send + Sync + 'static,
    {
        Self { eval: Arc::new(eval), dim, space, name: name.into() }
    }
}

impl<S: Scalar> ParametricFeatures<S> for FnMap<S> {
    fn eval(&self, item: &Item<S>, theta: &[S]) -> Result<S> {
        (self.eval)(item, theta)
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn context_space(&self) -> ContextSpace {
        self.space.clone()
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Largest `|φ_i(z)| - envelope(i)` over `i <= max_index` and
/// `sample_points` random contexts. Non-positive means the audit passed.
pub fn audit_decay<S: Scalar, F: CountableFeatures<S> + ?Sized, R: Rng + ?Sized>(
    family: &F,
    max_index: usize,
    sample_points: usize,
    rng: &mut R,
) -> Result<S> {
    if max_index == 0 {
        return Err(Error::InvalidParameter("audit needs max_index >= 1".into()));
    }
    let profile = family.decay();
    let space = family.context_space();
    let mut worst = S::neg_infinity();
    for _ in 0..sample_points {
        let z: Item<S> = space.sample_item(rng);
        for i in 1..=max_index {
            let excess = family.eval(i, &z)?.abs() - profile.envelope(i);
            worst = worst.max(excess);
        }
    }
    Ok(worst)
}

/// One Lipschitz probe `(z, θ, θ′)`.
pub type LipschitzTriple<S> = (Item<S>, Vec<S>, Vec<S>);

/// Largest `|φ(z,θ) − φ(z,θ′)| / ‖θ − θ′‖₂` over the triples. At most one
/// means the audit passed.
pub fn audit_lipschitz<S: Scalar, F: ParametricFeatures<S> + ?Sized>(
    map: &F,
    triples: &[LipschitzTriple<S>],
) -> Result<S> {
    let mut worst = S::zero();
    for (z, a, b) in triples {
        for theta in [a, b] {
            if l2_norm(theta) > S::one() {
                return Err(Error::InvalidParameter(format!("θ outside the unit ball: {theta:?}")));
            }
        }
        let dist = l2_norm(&a.iter().zip(b).map(|(x, y)| *x - *y).collect::<Vec<_>>());
        if dist == S::zero() {
            continue;
        }
        let gap = (map.eval(z, a)? - map.eval(z, b)?).abs();
        worst = worst.max(gap / dist);
    }
    Ok(worst)
}

/// Random audit triples: half with independent `θ, θ′`, half with `θ′` a
/// small perturbation of `θ` to probe local slopes.
pub fn sample_lipschitz_triples<S: Scalar, F: ParametricFeatures<S> + ?Sized>(
    map: &F,
    count: usize,
    rng: &mut dyn RngCore,
) -> Vec<LipschitzTriple<S>> {
    let d = map.param_dim();
    let space = map.context_space();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z = space.sample_item(rng);
        let a: Vec<S> = sample_l2_ball(d, rng);
        let b: Vec<S> = if out.len() % 2 == 0 {
            sample_l2_ball(d, rng)
        } else {
            let eps = S::lit(1e-3);
            let b: Vec<S> = a.iter().map(|x| *x + eps * S::sample_standard_normal(rng)).collect();
            if l2_norm(&b) > S::one() {
                continue;
            }
            b
        };
        out.push((z, a, b));
    }
    out
}
