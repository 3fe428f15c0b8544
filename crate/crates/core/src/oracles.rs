//! Brute-force references: grid-enumerated posteriors for the countable
//! prior on tiny index sets, total-variation distance, and Monte-Carlo regret.
//!
//! Grid atoms are pairs (subset, weight vector) with every weight a nonzero
//! multiple of the grid step `h`. Each atom owns the cell of weight vectors
//! that round to it coordinate-wise; a coordinate in `(0, 3h/2)` rounds to
//! `h` since support weights are never zero. Atoms with `‖w‖₁ > 1` are
//! dropped, so the enumerated distribution and a histogram of sampler output
//! mapped through the same rounding both describe the posterior conditioned
//! on the union of retained cells.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{ContextSpace, CosineFamily, DecayProfile, Features};
use crate::fgts::{loss, FgtsConfig, PosteriorState};
use crate::model::{eval_reward, CountableParam, Prior, SparseParam};
use crate::protocol::{run_episode, BanditInstance, HistoryRecord, NoiseSpec, Policy};
use crate::scalar::{ln_binomial, ln_factorial, Scalar};
use crate::sampling::ln_truncated_geometric;

pub const GRID_ATOM_BUDGET: usize = 100_000;
pub const GRID_MAX_DIM: usize = 3;

/// How prior mass is spread over the cells of one subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMass {
    /// Uniform-law volume of each cell intersected with the ℓ₁ ball.
    Exact,
    /// Every retained cell of a subset gets the same mass.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d_eff: usize,
    /// Grid points per coordinate on `[-1, 1]`, odd so that 0 is included.
    pub points_per_coord: usize,
    pub cell_mass: CellMass,
}

impl GridSpec {
    pub fn new(d_eff: usize, points_per_coord: usize) -> Result<Self> {
        if d_eff == 0 || d_eff > GRID_MAX_DIM {
            return Err(Error::InvalidParameter(format!("grid needs 1 <= d_eff <= {GRID_MAX_DIM}, got {d_eff}")));
        }
        if points_per_coord < 3 || points_per_coord.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "points per coordinate must be odd and >= 3, got {points_per_coord}"
            )));
        }
        Ok(Self { d_eff, points_per_coord, cell_mass: CellMass::Exact })
    }

    pub fn with_cell_mass(mut self, cell_mass: CellMass) -> Self {
        self.cell_mass = cell_mass;
        self
    }

    pub fn step(&self) -> f64 {
        2.0 / (self.points_per_coord - 1) as f64
    }

    fn half_count(&self) -> i64 {
        (self.points_per_coord as i64 - 1) / 2
    }

    /// Grid multiple a weight rounds to, never zero.
    pub fn round_weight(&self, w: f64) -> i64 {
        let q = (w / self.step()).round() as i64;
        if q == 0 {
            if w >= 0.0 {
                1
            } else {
                -1
            }
        } else {
            q
        }
    }
}

/// Identity of a grid atom: support and weights as grid multiples.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomKey {
    pub support: Vec<usize>,
    pub multiples: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct GridDistribution {
    pub grid: GridSpec,
    pub keys: Vec<AtomKey>,
    pub atoms: Vec<SparseParam<f64>>,
    pub masses: Vec<f64>,
    index: HashMap<AtomKey, usize>,
}

impl GridDistribution {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Index of the atom whose cell contains `param`, if it was retained.
    pub fn locate(&self, param: &SparseParam<f64>) -> Option<usize> {
        let SparseParam::Countable(p) = param else { return None };
        let key = AtomKey {
            support: p.support().to_vec(),
            multiples: p.weights().iter().map(|w| self.grid.round_weight(*w)).collect(),
        };
        self.index.get(&key).copied()
    }

    /// Normalized histogram of `samples` over the atoms; samples outside the
    /// retained cells are counted and skipped.
    pub fn histogram<'a, I>(&self, samples: I) -> (Vec<f64>, usize)
    where
        I: IntoIterator<Item = &'a SparseParam<f64>>,
    {
        let mut counts = vec![0usize; self.len()];
        let mut dropped = 0;
        for s in samples {
            match self.locate(s) {
                Some(i) => counts[i] += 1,
                None => dropped += 1,
            }
        }
        let total: usize = counts.iter().sum();
        let masses = counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect();
        (masses, dropped)
    }

    /// Mass-weighted mean of `g` over the atoms.
    pub fn expect<F: Fn(&SparseParam<f64>) -> f64>(&self, g: F) -> f64 {
        self.atoms.iter().zip(&self.masses).map(|(a, m)| m * g(a)).sum()
    }
}

/// Volume of `{y ∈ Π[a_i, b_i] : Σ y_i <= c}` for `0 <= a_i <= b_i`, by
/// inclusion–exclusion over the upper faces.
pub fn box_simplex_volume(lower: &[f64], upper: &[f64], c: f64) -> f64 {
    let k = lower.len();
    let base: f64 = lower.iter().sum();
    let mut total = 0.0;
    for mask in 0u32..(1 << k) {
        let mut shift = base;
        for i in 0..k {
            if mask & (1 << i) != 0 {
                shift += upper[i] - lower[i];
            }
        }
        let r = c - shift;
        if r > 0.0 {
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * r.powi(k as i32);
        }
    }
    (total / ln_factorial(k).exp()).max(0.0)
}

/// Cell of grid multiple `q` in absolute value, as an interval of `|w|`.
fn cell_interval(q: i64, h: f64) -> (f64, f64) {
    let q = q.unsigned_abs() as f64;
    let lo = if q == 1.0 { 0.0 } else { (q - 0.5) * h };
    (lo, (q + 0.5) * h)
}

fn subsets(d: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << d))
        .map(|mask| (0..d).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect())
        .collect()
}

/// All nonzero multiple vectors of length `m` with `Σ|q| <= half`.
fn multiples(m: usize, half: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        let mut next = Vec::new();
        for v in &out {
            let used: i64 = v.iter().map(|q: &i64| q.abs()).sum();
            for q in -half..=half {
                if q != 0 && used + q.abs() <= half {
                    let mut w = v.clone();
                    w.push(q);
                    next.push(w);
                }
            }
        }
        out = next;
    }
    out
}

/// Atoms of the grid and the log of their prior masses.
pub fn grid_prior(grid: &GridSpec) -> Result<(Vec<AtomKey>, Vec<f64>)> {
    let d = grid.d_eff;
    let half = grid.half_count();
    let h = grid.step();
    let mut keys = Vec::new();
    let mut log_masses = Vec::new();
    for support in subsets(d) {
        let m = support.len();
        let ln_subset = ln_truncated_geometric(m, d) - ln_binomial(d, m);
        let cells = multiples(m, half);
        if keys.len() + cells.len() > GRID_ATOM_BUDGET {
            return Err(Error::GridTooLarge { atoms: keys.len() + cells.len(), budget: GRID_ATOM_BUDGET });
        }
        let within: Vec<f64> = match grid.cell_mass {
            CellMass::Exact => {
                // Uniform density on B_1^m is m!/2^m; the cell lies in one orthant.
                let density = ln_factorial(m).exp() / 2f64.powi(m as i32);
                let raw: Vec<f64> = cells
                    .iter()
                    .map(|q| {
                        let (lo, hi): (Vec<f64>, Vec<f64>) = q.iter().map(|&x| cell_interval(x, h)).unzip();
                        density * box_simplex_volume(&lo, &hi, 1.0)
                    })
                    .collect();
                let kept: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / kept).collect()
            }
            CellMass::Equal => vec![1.0 / cells.len() as f64; cells.len()],
        };
        for (q, mass) in cells.into_iter().zip(within) {
            keys.push(AtomKey { support: support.clone(), multiples: q });
            log_masses.push(ln_subset + mass.ln());
        }
    }
    Ok((keys, log_masses))
}

fn atom_param(key: &AtomKey, h: f64) -> Result<SparseParam<f64>> {
    let weights = key.multiples.iter().map(|&q| q as f64 * h).collect();
    Ok(SparseParam::Countable(CountableParam::new(key.support.clone(), weights)?))
}

/// Posterior masses `∝ exp(-Σ L) × prior cell mass` over the grid atoms.
pub fn enumerate_posterior(
    grid: &GridSpec,
    history: &[HistoryRecord<f64>],
    eta: f64,
    lambda: f64,
    features: &Features<f64>,
) -> Result<GridDistribution> {
    let (keys, log_prior) = grid_prior(grid)?;
    let h = grid.step();
    let atoms = keys.iter().map(|k| atom_param(k, h)).collect::<Result<Vec<_>>>()?;
    let mut log_mass = Vec::with_capacity(atoms.len());
    for (atom, lp) in atoms.iter().zip(&log_prior) {
        let mut total = 0.0;
        for rec in history {
            total += loss(atom, features, &rec.context, rec.action, rec.reward, eta, lambda)?;
        }
        log_mass.push(lp - total);
    }
    let masses = normalize_log(&log_mass);
    let index = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    Ok(GridDistribution { grid: *grid, keys, atoms, masses, index })
}

/// `exp(v - max)` normalized to sum to one.
pub fn normalize_log(log_values: &[f64]) -> Vec<f64> {
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// `(1/2) Σ |p - q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 samples, got {}", xs.len())));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self { mean, stderr: (var / n).sqrt() })
    }
}

/// Episode seeds for `reps` repetitions, derived from `seed`.
pub fn rep_seeds(seed: u64, reps: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..reps).map(|_| rng.next_u64()).collect()
}

/// Monte-Carlo estimate of the expected cumulative regret after `n` rounds.
/// Repetitions run in parallel, each with a fresh policy from `make_policy`.
pub fn mc_regret<S, F>(make_policy: F, env: &BanditInstance<S>, n: usize, reps: usize, seed: u64) -> Result<MeanStderr>
where
    S: Scalar,
    F: Fn() -> Result<Box<dyn Policy<S>>> + Sync,
{
    if reps < 2 {
        return Err(Error::InvalidParameter(format!("need reps >= 2, got {reps}")));
    }
    let totals = rep_seeds(seed, reps)
        .into_par_iter()
        .map(|s| {
            let mut policy = make_policy()?;
            Ok(run_episode(env, &mut policy, n, s)?.total().as_f64())
        })
        .collect::<Result<Vec<f64>>>()?;
    MeanStderr::from_samples(&totals)
}

/// The standard toy posterior comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorCheckConfig {
    pub d_eff: usize,
    pub points_per_coord: usize,
    pub records: usize,
    pub num_actions: usize,
    pub eta: f64,
    pub lambda: f64,
    pub samples: usize,
    pub burn_in: usize,
    /// MCMC steps between retained samples.
    pub thin: usize,
    pub seed: u64,
}

impl Default for PosteriorCheckConfig {
    fn default() -> Self {
        Self {
            d_eff: 2,
            points_per_coord: 21,
            records: 5,
            num_actions: 3,
            eta: 0.25,
            lambda: 0.2,
            samples: 100_000,
            burn_in: 10_000,
            thin: 10,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorCheckReport {
    pub config: PosteriorCheckConfig,
    pub atoms: usize,
    pub tv: f64,
    /// Samples outside the retained cells.
    pub dropped: usize,
    pub accept_rate: f64,
}

/// Cosine features with quadratic decay on `[0, 1]`.
pub fn toy_features() -> Features<f64> {
    Features::countable(
        CosineFamily::new(DecayProfile::polynomial(2.0).expect("valid decay"), 1).expect("valid family"),
    )
}

/// Records with uniform contexts and random actions, rewarded by
/// `0.5 φ_1 - 0.3 φ_2` plus `N(0, 1/4)` noise.
pub fn toy_history(records: usize, num_actions: usize, seed: u64) -> Result<Vec<HistoryRecord<f64>>> {
    let features = toy_features();
    let truth = SparseParam::Countable(CountableParam::new(vec![1, 2], vec![0.5, -0.3])?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = ContextSpace::UnitCube(1);
    let noise = NoiseSpec::gaussian(0.5)?;
    (0..records)
        .map(|t| {
            let ctx = space.sample_context(t + 1, num_actions, &mut rng)?;
            let a = rng.random_range(0..num_actions);
            let y = eval_reward(&truth, &features, &ctx, a)? + noise.sample(&mut rng);
            HistoryRecord::new(ctx, a, y)
        })
        .collect()
}

/// Runs the FGTS chain on the toy history and compares its histogram with
/// the enumerated posterior.
pub fn run_posterior_check(config: &PosteriorCheckConfig) -> Result<PosteriorCheckReport> {
    let grid = GridSpec::new(config.d_eff, config.points_per_coord)?;
    let features = toy_features();
    let history = toy_history(config.records, config.num_actions, config.seed)?;
    let exact = enumerate_posterior(&grid, &history, config.eta, config.lambda, &features)?;

    let fgts = FgtsConfig::new(config.eta, config.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let prior = Prior::countable(config.d_eff)?;
    let mut state = PosteriorState::from_prior(prior, features, &fgts, &mut rng)?;
    for rec in &history {
        state.push_record(rec)?;
    }
    for _ in 0..config.burn_in {
        state.step(&fgts, &mut rng)?;
    }
    let thin = config.thin.max(1);
    let mut counts = vec![0usize; exact.len()];
    let mut dropped = 0;
    let mut accepted = 0usize;
    for _ in 0..config.samples {
        for _ in 0..thin {
            accepted += usize::from(state.step(&fgts, &mut rng)?.accepted);
        }
        match exact.locate(state.param()) {
            Some(i) => counts[i] += 1,
            None => dropped += 1,
        }
    }
    let kept: usize = counts.iter().sum();
    let hist: Vec<f64> = counts.iter().map(|&c| c as f64 / kept.max(1) as f64).collect();
    Ok(PosteriorCheckReport {
        config: *config,
        atoms: exact.len(),
        tv: tv_distance(&hist, &exact.masses)?,
        dropped,
        accept_rate: accepted as f64 / (config.samples * thin) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_simplex_volume_cases() {
        // Whole unit simplex in 2-d: 1/2.
        assert!((box_simplex_volume(&[0.0, 0.0], &[1.0, 1.0], 1.0) - 0.5).abs() < 1e-15);
        // Box entirely inside: plain area.
        assert!((box_simplex_volume(&[0.1, 0.1], &[0.2, 0.3], 1.0) - 0.02).abs() < 1e-15);
        // Box [0.4, 0.6]^2 cut by x + y <= 1: half the box.
        assert!((box_simplex_volume(&[0.4, 0.4], &[0.6, 0.6], 1.0) - 0.02).abs() < 1e-12);
        // Entirely outside.
        assert_eq!(box_simplex_volume(&[0.6, 0.6], &[0.7, 0.7], 1.0), 0.0);
    }

    #[test]
    fn exact_cells_tile_the_ball() {
        // Retained cells plus dropped boundary cells cover the whole ball, so
        // the unnormalized within-subset masses are close to one.
        let grid = GridSpec::new(2, 21).unwrap();
        let h = grid.step();
        for m in 1..=2 {
            let density = ln_factorial(m).exp() / 2f64.powi(m as i32);
            let kept: f64 = multiples(m, 10)
                .iter()
                .map(|q| {
                    let (lo, hi): (Vec<f64>, Vec<f64>) = q.iter().map(|&x| cell_interval(x, h)).unzip();
                    density * box_simplex_volume(&lo, &hi, 1.0)
                })
                .sum();
            assert!(kept > 0.97 && kept <= 1.0 + 1e-12, "m={m}: {kept}");
        }
    }

    #[test]
    fn atom_counts() {
        let grid = GridSpec::new(2, 21).unwrap();
        let (keys, lm) = grid_prior(&grid).unwrap();
        assert_eq!(keys.len(), 2 * 20 + 4 * 45);
        let total: f64 = lm.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(tv_distance(&[1.0], &[0.5, 0.5]), Err(Error::SupportMismatch(1, 2))));
    }

    #[test]
    fn grid_limits() {
        assert!(GridSpec::new(4, 21).is_err());
        assert!(GridSpec::new(2, 20).is_err());
        let big = GridSpec::new(3, 201).unwrap();
        assert!(matches!(grid_prior(&big), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn rounding_never_returns_zero() {
        let grid = GridSpec::new(1, 21).unwrap();
        assert_eq!(grid.round_weight(0.01), 1);
        assert_eq!(grid.round_weight(-0.01), -1);
        assert_eq!(grid.round_weight(0.149), 1);
        assert_eq!(grid.round_weight(0.151), 2);
    }
}
