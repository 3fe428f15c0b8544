//! Lower-bound constructions.
//!
//! Every construction splits the horizon into `m₁` phases of `m` rounds that
//! all show the same context `z_i`. The reward of `z_i` is `Δ/s` on one good
//! action `b_i` and zero elsewhere, and the good actions are encoded in an
//! `s`-sparse parameter with weights `1/s`:
//!
//! * countable, `ℓ = 1` (polynomial decay, or exponential with `β >= 1`):
//!   `s K` features, `φ_j(z_{i,a}) = Δ 1{j = (i-1)K + a}`;
//! * countable, `ℓ = ⌈1/β⌉` (exponential decay with `β < 1`): `s K^ℓ`
//!   features, where block `c` of `K^ℓ` features encodes the good actions of
//!   `ℓ` consecutive phases through the base-`K` digits of the in-block
//!   offset;
//! * uncountable: the same block layout with `ℓ = d`, realized by the points
//!   of a `Δ`-separated packing of the unit ball.
//!
//! Context items are [`Item::Token`]s numbering the pairs `(i, a)` as
//! `(i - 1) K + a - 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::{ContextSpace, CountableFeatures, DecayKind, DecayProfile, Features, ParametricFeatures};
use crate::model::{AtomicParam, CountableParam, SparseParam};
use crate::protocol::{BanditInstance, ContextSlice, Item, NoiseSpec};
use crate::sampling::sample_l2_ball;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardKind {
    CountablePoly,
    CountableExp,
    Uncountable,
}

impl HardKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HardKind::CountablePoly => "countable_poly",
            HardKind::CountableExp => "countable_exp",
            HardKind::Uncountable => "uncountable",
        }
    }
}

/// `(⌈i/ℓ⌉, (i - 1) mod ℓ + 1)`.
pub fn rho(i: usize, block_len: usize) -> (usize, usize) {
    assert!(i >= 1 && block_len >= 1, "rho needs i >= 1 and block length >= 1");
    (i.div_ceil(block_len), (i - 1) % block_len + 1)
}

/// Inverse of [`rho`].
pub fn rho_inverse(block: usize, offset: usize, block_len: usize) -> usize {
    (block - 1) * block_len + offset
}

/// Base-`K` digits of `i - 1`, most significant first, each shifted to `1..=K`.
pub fn zeta(i: usize, k: usize, len: usize) -> Result<Vec<usize>> {
    let max = checked_pow(k, len)?;
    if i == 0 || i > max {
        return Err(Error::IndexOutOfRange { index: i, max });
    }
    let mut rest = i - 1;
    let mut digits = vec![0; len];
    for slot in digits.iter_mut().rev() {
        *slot = rest % k + 1;
        rest /= k;
    }
    Ok(digits)
}

/// Inverse of [`zeta`].
pub fn zeta_inverse(digits: &[usize], k: usize) -> Result<usize> {
    let mut acc = 0usize;
    for &d in digits {
        if d == 0 || d > k {
            return Err(Error::IndexOutOfRange { index: d, max: k });
        }
        acc = acc * k + (d - 1);
    }
    Ok(acc + 1)
}

fn checked_pow(k: usize, len: usize) -> Result<usize> {
    u32::try_from(len)
        .ok()
        .and_then(|l| k.checked_pow(l))
        .ok_or_else(|| Error::InstanceTooSmall(format!("{k}^{len} overflows")))
}

/// Parameters of a lower-bound construction. Good actions are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    pub kind: HardKind,
    pub s: usize,
    pub k: usize,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub dim: usize,
    /// Rounds per phase.
    pub m: usize,
    /// Good action per phase; drawn uniformly from the build seed when absent.
    #[serde(default)]
    pub good_actions: Option<Vec<usize>>,
}

/// Which proof path built a countable instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildPath {
    /// One feature per (phase, action).
    SingleDigit,
    /// `ℓ > 1` phases per feature block.
    MultiDigit,
    Packing,
}

impl HardInstanceSpec {
    fn check_basic(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("need K >= 2, got {}", self.k)));
        }
        if self.s == 0 || self.m == 0 {
            return Err(Error::InvalidParameter("s and m must be >= 1".into()));
        }
        match self.kind {
            HardKind::CountablePoly if !(self.beta > 1.0) => {
                Err(Error::BetaOutOfRange(format!("polynomial decay needs beta > 1, got {}", self.beta)))
            }
            HardKind::CountableExp if !(self.beta > 0.0) || !self.beta.is_finite() => {
                Err(Error::BetaOutOfRange(format!("exponential decay needs beta > 0, got {}", self.beta)))
            }
            HardKind::Uncountable if self.dim == 0 => {
                Err(Error::InvalidParameter("uncountable construction needs d >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Phases per feature block: 1, `⌈1/β⌉` or `d`.
    pub fn block_len(&self) -> usize {
        match self.kind {
            HardKind::CountablePoly => 1,
            HardKind::CountableExp if self.beta >= 1.0 => 1,
            HardKind::CountableExp => (1.0 / self.beta).ceil() as usize,
            HardKind::Uncountable => self.dim,
        }
    }

    /// Number of phases `m₁ = s ℓ`.
    pub fn num_phases(&self) -> usize {
        self.s * self.block_len()
    }

    pub fn horizon(&self) -> usize {
        self.num_phases() * self.m
    }

    /// `Δ = s sqrt(K / (4m))`.
    pub fn delta(&self) -> f64 {
        delta_value(self.s, self.k, self.m)
    }

    /// Smallest admissible real `m`.
    pub fn threshold(&self) -> f64 {
        admissibility_threshold(self.kind, self.s, self.k, self.beta, self.dim)
    }

    pub fn path(&self) -> BuildPath {
        match (self.kind, self.block_len()) {
            (HardKind::Uncountable, _) => BuildPath::Packing,
            (_, 1) => BuildPath::SingleDigit,
            _ => BuildPath::MultiDigit,
        }
    }

    pub fn lower_bound(&self) -> f64 {
        lower_bound_formula(self.kind, self.s, self.k, self.dim, self.beta, self.horizon())
    }

    /// Expected regret of uniform play, `n (Δ/s) (K-1)/K`.
    pub fn uniform_regret(&self) -> f64 {
        self.horizon() as f64 * self.delta() / self.s as f64 * (self.k - 1) as f64 / self.k as f64
    }
}

pub fn delta_value(s: usize, k: usize, m: usize) -> f64 {
    s as f64 * (k as f64 / (4.0 * m as f64)).sqrt()
}

/// Smallest admissible per-phase horizon for each construction.
pub fn admissibility_threshold(kind: HardKind, s: usize, k: usize, beta: f64, dim: usize) -> f64 {
    let (s, kf) = (s as f64, k as f64);
    match kind {
        HardKind::CountablePoly => s.powf(beta + 2.0) * kf.powf(beta + 1.0),
        HardKind::CountableExp if beta >= 1.0 => s * s * kf * (s.powf(beta) * kf.powf(beta)).exp(),
        HardKind::CountableExp => {
            let l = (1.0 / beta).ceil();
            s * s * kf * (s.powf(beta) * kf.powf(beta * l)).exp()
        }
        HardKind::Uncountable => s.powf(2.0 + 2.0 / dim as f64) * kf.powi(3),
    }
}

fn lower_bound_formula(kind: HardKind, s: usize, k: usize, dim: usize, beta: f64, n: usize) -> f64 {
    let base = (k * s * n) as f64;
    let mult = match kind {
        HardKind::CountablePoly => 1.0,
        HardKind::CountableExp => (1.0 / beta).max(1.0),
        HardKind::Uncountable => dim as f64,
    };
    (mult * base).sqrt() / 8.0
}

/// Reference lower bound `(1/8) sqrt(c K s n)` with `c` equal to 1,
/// `max(1, 1/β)` or `d`. Fails unless `n` splits into admissible phases.
pub fn lower_bound_value(kind: HardKind, s: usize, k: usize, dim: usize, beta: f64, n: usize) -> Result<f64> {
    let spec = HardInstanceSpec { kind, s, k, beta, dim, m: 1, good_actions: None };
    spec.check_basic()?;
    let phases = spec.num_phases();
    if n == 0 || !n.is_multiple_of(phases) {
        return Err(Error::InstanceTooSmall(format!("n = {n} is not a multiple of {phases} phases")));
    }
    let m = n / phases;
    let threshold = spec.threshold();
    if (m as f64) < threshold {
        return Err(Error::InstanceTooSmall(format!("per-phase horizon {m} is below {threshold}")));
    }
    Ok(lower_bound_formula(kind, s, k, dim, beta, n))
}

/// Block-indicator features of the countable constructions.
#[derive(Debug, Clone)]
pub struct BlockIndicatorFamily<S> {
    s: usize,
    k: usize,
    block_len: usize,
    block_size: usize,
    delta: S,
    decay: DecayProfile<S>,
}

impl<S: Scalar> BlockIndicatorFamily<S> {
    pub fn new(s: usize, k: usize, block_len: usize, delta: S, decay: DecayProfile<S>) -> Result<Self> {
        Ok(Self { s, k, block_len, block_size: checked_pow(k, block_len)?, delta, decay })
    }

    /// Number of features that are not identically zero, `s K^ℓ`.
    pub fn num_active(&self) -> usize {
        self.s * self.block_size
    }

    fn decode(&self, token: usize) -> Result<(usize, usize)> {
        let phases = self.s * self.block_len;
        if token >= phases * self.k {
            return Err(Error::ContextMismatch(format!("token {token} outside the {phases}x{} grid", self.k)));
        }
        Ok((token / self.k + 1, token % self.k + 1))
    }
}

impl<S: Scalar> CountableFeatures<S> for BlockIndicatorFamily<S> {
    fn eval(&self, index: usize, item: &Item<S>) -> Result<S> {
        if index == 0 {
            return Err(Error::InvalidFeatureIndex(0));
        }
        let (i, a) = self.decode(item.token()?)?;
        if index > self.num_active() {
            return Ok(S::zero());
        }
        let block = (index - 1) / self.block_size + 1;
        let offset = (index - 1) % self.block_size + 1;
        let (phase_block, digit) = rho(i, self.block_len);
        if block != phase_block {
            return Ok(S::zero());
        }
        let digits = zeta(offset, self.k, self.block_len)?;
        Ok(if digits[digit - 1] == a { self.delta } else { S::zero() })
    }

    fn decay(&self) -> DecayProfile<S> {
        self.decay
    }

    fn context_space(&self) -> ContextSpace {
        ContextSpace::Tokens(self.s * self.block_len * self.k)
    }

    fn describe(&self) -> String {
        format!("block indicators (s={}, K={}, block length {})", self.s, self.k, self.block_len)
    }
}

/// `s` blocks of `K^d` points in the unit ball, pairwise farther apart than
/// `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedAtomSet {
    pub points: Vec<Vec<f64>>,
    pub blocks: usize,
    pub block_size: usize,
    pub min_distance: f64,
}

impl PackedAtomSet {
    /// Point `offset` (1-based) of block `block` (1-based).
    pub fn point(&self, block: usize, offset: usize) -> &[f64] {
        &self.points[(block - 1) * self.block_size + offset - 1]
    }

    /// Checks size, ball membership and separation.
    pub fn audit(&self, delta: f64) -> bool {
        self.points.len() == self.blocks * self.block_size
            && self.points.iter().all(|p| norm(p) <= 1.0)
            && min_pairwise_distance(&self.points) > delta
    }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(dist(&points[i], &points[j]));
        }
    }
    best
}

pub const PACKING_BUDGET: usize = 1_000_000;

/// Greedy packing: uniform candidates in the ball, kept when farther than
/// `delta` from every kept point. Retries once with a derived seed.
pub fn build_packing(blocks: usize, block_size: usize, dim: usize, delta: f64, seed: u64) -> Result<PackedAtomSet> {
    let required = blocks * block_size;
    let mut placed = 0;
    for attempt in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(required);
        for _ in 0..PACKING_BUDGET {
            if points.len() == required {
                break;
            }
            let c: Vec<f64> = sample_l2_ball(dim, &mut rng);
            if points.iter().all(|p| dist(p, &c) > delta) {
                points.push(c);
            }
        }
        placed = placed.max(points.len());
        if points.len() == required {
            let min_distance = min_pairwise_distance(&points);
            return Ok(PackedAtomSet { points, blocks, block_size, min_distance });
        }
    }
    Err(Error::PackingFailed { placed, required })
}

/// Feature map of the uncountable construction.
///
/// For a packing point `p` of block `c` with offset `o`, `φ(z_{i,a}, p) = Δ`
/// when `ρ₁(i) = c` and `a` is digit `ρ₂(i)` of `ζ(o)`, else 0. Between
/// packing points the map is extended by cones `Δ (1 - ‖θ - p‖/r)_+` of radius
/// `r` equal to the packing separation, which keeps it `Δ/r < 1` Lipschitz.
#[derive(Debug, Clone)]
pub struct PackedIndicatorMap<S> {
    packing: PackedAtomSet,
    s: usize,
    k: usize,
    dim: usize,
    delta: S,
}

impl<S: Scalar> PackedIndicatorMap<S> {
    pub fn new(packing: PackedAtomSet, s: usize, k: usize, dim: usize, delta: S) -> Self {
        Self { packing, s, k, dim, delta }
    }

    pub fn packing(&self) -> &PackedAtomSet {
        &self.packing
    }
}

impl<S: Scalar> ParametricFeatures<S> for PackedIndicatorMap<S> {
    fn eval(&self, item: &Item<S>, theta: &[S]) -> Result<S> {
        if theta.len() != self.dim {
            return Err(Error::InvalidParameter(format!("expected θ of dimension {}, got {}", self.dim, theta.len())));
        }
        let token = item.token()?;
        let phases = self.s * self.dim;
        if token >= phases * self.k {
            return Err(Error::ContextMismatch(format!("token {token} outside the {phases}x{} grid", self.k)));
        }
        let (i, a) = (token / self.k + 1, token % self.k + 1);
        let (block, digit) = rho(i, self.dim);
        let theta: Vec<f64> = theta.iter().map(|x| x.as_f64()).collect();
        let r = self.packing.min_distance;
        let mut best = S::zero();
        for offset in 1..=self.packing.block_size {
            if zeta(offset, self.k, self.dim)?[digit - 1] != a {
                continue;
            }
            let p = self.packing.point(block, offset);
            let dd = dist(p, &theta);
            if dd == 0.0 {
                return Ok(self.delta);
            }
            let cone = self.delta * S::lit((1.0 - dd / r).max(0.0));
            best = best.max(cone);
        }
        Ok(best)
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn context_space(&self) -> ContextSpace {
        ContextSpace::Tokens(self.s * self.dim * self.k)
    }

    fn describe(&self) -> String {
        format!("packed indicators (s={}, K={}, d={})", self.s, self.k, self.dim)
    }
}

/// A built lower-bound instance with its metadata.
#[derive(Debug, Clone)]
pub struct HardInstance<S: Scalar> {
    pub spec: HardInstanceSpec,
    pub instance: BanditInstance<S>,
    pub delta: f64,
    /// Zero-based good action per phase.
    pub good_actions: Vec<usize>,
    /// In-block offset (1-based) of the active component of each block.
    pub omega: Vec<usize>,
    pub path: BuildPath,
    pub lower_bound: f64,
    pub packing: Option<PackedAtomSet>,
}

impl<S: Scalar> HardInstance<S> {
    /// Phase (1-based) that round `t` (1-based) belongs to.
    pub fn phase_of_round(&self, t: usize) -> usize {
        (t - 1) / self.spec.m + 1
    }

    /// Summary record: kind, parameters, Δ, threshold, lower bound.
    pub fn summary(&self) -> Value {
        json!({
            "kind": self.spec.kind.as_str(),
            "s": self.spec.s,
            "K": self.spec.k,
            "beta": self.spec.beta,
            "d": self.spec.dim,
            "m": self.spec.m,
            "n": self.spec.horizon(),
            "block_len": self.spec.block_len(),
            "path": self.path,
            "delta": self.delta,
            "threshold": self.spec.threshold(),
            "good_actions": self.good_actions,
            "lower_bound": self.lower_bound,
            "uniform_regret": self.spec.uniform_regret(),
        })
    }

    /// Nonzero feature values as CSV rows.
    pub fn feature_table_csv(&self) -> Result<String> {
        let k = self.spec.k;
        let phases = self.spec.num_phases();
        let mut out = String::new();
        match &self.instance.features {
            Features::Countable(f) => {
                out.push_str("feature,phase,action,value\n");
                let active = self.spec.s * checked_pow(k, self.spec.block_len())?;
                for j in 1..=active {
                    for token in 0..phases * k {
                        let v = f.eval(j, &Item::Token(token))?;
                        if v != S::zero() {
                            out.push_str(&format!("{j},{},{},{:?}\n", token / k + 1, token % k + 1, v.as_f64()));
                        }
                    }
                }
            }
            Features::Parametric(f) => {
                out.push_str("block,offset,phase,action,value\n");
                let packing = self.packing.as_ref().expect("parametric hard instances carry a packing");
                for block in 1..=packing.blocks {
                    for offset in 1..=packing.block_size {
                        let theta: Vec<S> = packing.point(block, offset).iter().map(|x| S::lit(*x)).collect();
                        for token in 0..phases * k {
                            let v = f.eval(&Item::Token(token), &theta)?;
                            if v != S::zero() {
                                out.push_str(&format!(
                                    "{block},{offset},{},{},{:?}\n",
                                    token / k + 1,
                                    token % k + 1,
                                    v.as_f64()
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn phase_schedule<S: Scalar>(phases: usize, k: usize, m: usize) -> Result<Vec<ContextSlice<S>>> {
    let mut schedule = Vec::with_capacity(phases * m);
    for i in 0..phases {
        let items: Vec<Item<S>> = (0..k).map(|a| Item::Token(i * k + a)).collect();
        for _ in 0..m {
            schedule.push(ContextSlice::new(schedule.len() + 1, items.clone())?);
        }
    }
    Ok(schedule)
}

/// Block offsets `ω` from zero-based good actions.
fn offsets_from_actions(good: &[usize], k: usize, block_len: usize) -> Result<Vec<usize>> {
    good.chunks(block_len)
        .map(|chunk| {
            let digits: Vec<usize> = chunk.iter().map(|a| a + 1).collect();
            zeta_inverse(&digits, k)
        })
        .collect()
}

/// Zero-based good actions `b_i = ζ_{ρ₂(i)}(ω_{ρ₁(i)}) - 1`.
pub fn actions_from_offsets(omega: &[usize], k: usize, block_len: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(omega.len() * block_len);
    for &o in omega {
        out.extend(zeta(o, k, block_len)?.into_iter().map(|d| d - 1));
    }
    Ok(out)
}

fn resolve_good_actions(spec: &HardInstanceSpec, seed: u64) -> Result<Vec<usize>> {
    let phases = spec.num_phases();
    match &spec.good_actions {
        Some(b) => {
            if b.len() != phases {
                return Err(Error::BadActionSequence(format!("expected {phases} good actions, got {}", b.len())));
            }
            if let Some(bad) = b.iter().find(|&&a| a >= spec.k) {
                return Err(Error::BadActionSequence(format!("action {bad} outside [0, {})", spec.k)));
            }
            Ok(b.clone())
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..phases).map(|_| rng.random_range(0..spec.k)).collect())
        }
    }
}

fn check_admissible(spec: &HardInstanceSpec) -> Result<()> {
    let threshold = spec.threshold();
    if !((spec.m as f64) >= threshold) {
        return Err(Error::InstanceTooSmall(format!(
            "{} needs m >= {threshold}, got {}",
            spec.kind.as_str(),
            spec.m
        )));
    }
    Ok(())
}

/// Builds any of the three constructions. `seed` drives the good actions
/// when the spec leaves them open and the packing.
pub fn build<S: Scalar>(spec: &HardInstanceSpec, seed: u64) -> Result<HardInstance<S>> {
    spec.check_basic()?;
    check_admissible(spec)?;
    let good = resolve_good_actions(spec, seed)?;
    let k = spec.k;
    let l = spec.block_len();
    let omega = offsets_from_actions(&good, k, l)?;
    let delta = spec.delta();
    let block_size = checked_pow(k, l)?;
    let weight = S::one() / S::from_count(spec.s);

    let (features, truth, packing) = match spec.kind {
        HardKind::CountablePoly | HardKind::CountableExp => {
            let decay_kind =
                if spec.kind == HardKind::CountablePoly { DecayKind::Polynomial } else { DecayKind::Exponential };
            let decay = DecayProfile::new(decay_kind, S::lit(spec.beta))?;
            let family = BlockIndicatorFamily::new(spec.s, k, l, S::lit(delta), decay)?;
            let support: Vec<usize> = omega.iter().enumerate().map(|(c, o)| c * block_size + o).collect();
            let truth = CountableParam::new(support, vec![weight; spec.s])?;
            (Features::countable(family), SparseParam::Countable(truth), None)
        }
        HardKind::Uncountable => {
            let packing = build_packing(spec.s, block_size, spec.dim, delta, seed.wrapping_add(1))?;
            let atoms: Vec<Vec<S>> = omega
                .iter()
                .enumerate()
                .map(|(c, &o)| packing.point(c + 1, o).iter().map(|x| S::lit(*x)).collect())
                .collect();
            let truth = AtomicParam::new(vec![weight; spec.s], atoms)?;
            let map = PackedIndicatorMap::new(packing.clone(), spec.s, k, spec.dim, S::lit(delta));
            (Features::parametric(map), SparseParam::Atomic(truth), Some(packing))
        }
    };

    let instance = BanditInstance {
        name: format!("hard_{}", spec.kind.as_str()),
        schedule: phase_schedule(spec.num_phases(), k, spec.m)?,
        truth,
        features,
        noise: NoiseSpec::gaussian(S::one())?,
    };
    Ok(HardInstance {
        spec: HardInstanceSpec { good_actions: Some(good.clone()), ..spec.clone() },
        instance,
        delta,
        good_actions: good,
        omega,
        path: spec.path(),
        lower_bound: spec.lower_bound(),
        packing,
    })
}

pub fn build_countable_poly<S: Scalar>(
    s: usize,
    k: usize,
    beta: f64,
    m: usize,
    good_actions: Option<Vec<usize>>,
    seed: u64,
) -> Result<HardInstance<S>> {
    build(&HardInstanceSpec { kind: HardKind::CountablePoly, s, k, beta, dim: 0, m, good_actions }, seed)
}

pub fn build_countable_exp<S: Scalar>(
    s: usize,
    k: usize,
    beta: f64,
    m: usize,
    good_actions: Option<Vec<usize>>,
    seed: u64,
) -> Result<HardInstance<S>> {
    build(&HardInstanceSpec { kind: HardKind::CountableExp, s, k, beta, dim: 0, m, good_actions }, seed)
}

pub fn build_uncountable<S: Scalar>(
    s: usize,
    k: usize,
    dim: usize,
    m: usize,
    good_actions: Option<Vec<usize>>,
    seed: u64,
) -> Result<HardInstance<S>> {
    build(&HardInstanceSpec { kind: HardKind::Uncountable, s, k, beta: 0.0, dim, m, good_actions }, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::eval_reward;

    #[test]
    fn rho_values() {
        assert_eq!(rho(1, 3), (1, 1));
        assert_eq!(rho(2, 3), (1, 2));
        assert_eq!(rho(4, 3), (2, 1));
        assert_eq!(rho(2 * 3, 3), (2, 3));
        for i in 1..50 {
            let (b, o) = rho(i, 4);
            assert_eq!(rho_inverse(b, o, 4), i);
        }
    }

    #[test]
    fn zeta_values_and_bijection() {
        assert_eq!(zeta(1, 2, 2).unwrap(), vec![1, 1]);
        assert_eq!(zeta(4, 2, 2).unwrap(), vec![2, 2]);
        assert_eq!(zeta(5, 3, 2).unwrap(), vec![2, 2]);
        assert!(matches!(zeta(10, 3, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(zeta(0, 3, 2), Err(Error::IndexOutOfRange { .. })));
        for k in 2..=3usize {
            for l in 1..=2 {
                let all: Vec<Vec<usize>> = (1..=k.pow(l as u32)).map(|i| zeta(i, k, l).unwrap()).collect();
                let mut sorted = all.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), all.len());
                for (i, digits) in all.iter().enumerate() {
                    assert_eq!(zeta_inverse(digits, k).unwrap(), i + 1);
                }
            }
        }
    }

    #[test]
    fn poly_example_values() {
        let h = build_countable_poly::<f64>(2, 4, 2.0, 1024, Some(vec![1, 3]), 0).unwrap();
        assert_eq!(h.delta, 0.0625);
        assert!(h.delta <= 0.125);
        assert_eq!(h.spec.horizon(), 2048);
        assert_eq!(h.lower_bound, 16.0);
        assert_eq!(h.spec.uniform_regret(), 48.0);
        let ctx = &h.instance.schedule[0];
        assert_eq!(eval_reward(&h.instance.truth, &h.instance.features, ctx, 1).unwrap(), 0.03125);
        assert_eq!(eval_reward(&h.instance.truth, &h.instance.features, ctx, 0).unwrap(), 0.0);
        let w = h.instance.truth.weights();
        assert_eq!(w.len(), 2);
        assert_eq!(w.iter().map(|x| x.abs()).sum::<f64>(), 1.0);
        assert!(matches!(
            build_countable_poly::<f64>(2, 4, 2.0, 1023, None, 0),
            Err(Error::InstanceTooSmall(_))
        ));
        assert!(matches!(
            build_countable_poly::<f64>(2, 4, 2.0, 1024, Some(vec![1]), 0),
            Err(Error::BadActionSequence(_))
        ));
        assert!(matches!(build_countable_poly::<f64>(2, 4, 1.0, 1024, None, 0), Err(Error::BetaOutOfRange(_))));
    }

    #[test]
    fn exp_examples() {
        let h = build_countable_exp::<f64>(1, 2, 1.0, 16, None, 3).unwrap();
        assert!((h.delta - (2.0f64 / 64.0).sqrt()).abs() < 1e-15);
        assert!(h.delta <= (-1.0f64).exp());
        assert_eq!(h.path, BuildPath::SingleDigit);
        assert!(matches!(build_countable_exp::<f64>(1, 2, 1.0, 14, None, 3), Err(Error::InstanceTooSmall(_))));

        let spec = HardInstanceSpec { kind: HardKind::CountableExp, s: 1, k: 2, beta: 0.5, dim: 0, m: 1, good_actions: None };
        assert_eq!(spec.block_len(), 2);
        assert_eq!(spec.num_phases(), 2);
        let m = spec.threshold().ceil() as usize;
        let h = build_countable_exp::<f64>(1, 2, 0.5, m, None, 4).unwrap();
        assert_eq!(h.path, BuildPath::MultiDigit);
        let Features::Countable(f) = &h.instance.features else { panic!() };
        let nonzero: Vec<usize> = (1..=10)
            .filter(|&j| (0..4).any(|t| f.eval(j, &Item::Token(t)).unwrap() != 0.0))
            .collect();
        assert_eq!(nonzero, vec![1, 2, 3, 4]);
    }

    #[test]
    fn uncountable_example() {
        let h = build_uncountable::<f64>(1, 2, 2, 8, None, 5).unwrap();
        assert_eq!(h.delta, 0.25);
        assert_eq!(h.spec.horizon(), 16);
        assert_eq!(h.lower_bound, 1.0);
        let packing = h.packing.as_ref().unwrap();
        assert_eq!(packing.points.len(), 4);
        assert!(packing.audit(0.25));
    }

    #[test]
    fn lower_bound_values() {
        assert_eq!(lower_bound_value(HardKind::CountablePoly, 2, 4, 0, 2.0, 2048).unwrap(), 16.0);
        assert_eq!(lower_bound_value(HardKind::Uncountable, 1, 2, 2, 0.0, 16).unwrap(), 1.0);
        assert!(matches!(
            lower_bound_value(HardKind::CountablePoly, 2, 4, 0, 2.0, 2047),
            Err(Error::InstanceTooSmall(_))
        ));
        // β = 1/2 doubles the phase count and the factor inside the root.
        let spec = HardInstanceSpec { kind: HardKind::CountableExp, s: 1, k: 2, beta: 0.5, dim: 0, m: 1, good_actions: None };
        let m = spec.threshold().ceil() as usize;
        let n = 2 * m;
        let v = lower_bound_value(HardKind::CountableExp, 1, 2, 0, 0.5, n).unwrap();
        assert!((v - (2.0 * 2.0 * n as f64).sqrt() / 8.0).abs() < 1e-12);
    }
}
