//! Exact samplers for the uniform laws used by the priors.

use rand::Rng;

use crate::scalar::Scalar;

/// Uniform point of the open probability simplex in `m + 1` coordinates,
/// from normalized standard exponentials.
pub fn sample_simplex<S: Scalar, R: Rng + ?Sized>(m_plus_one: usize, rng: &mut R) -> Vec<S> {
    let draws: Vec<S> = (0..m_plus_one).map(|_| S::sample_standard_exp(rng)).collect();
    let total: S = draws.iter().copied().sum();
    draws.into_iter().map(|e| e / total).collect()
}

/// Uniform point of the unit ℓ₁ ball in `m` dimensions.
///
/// Drops the slack coordinate of a uniform simplex point in `m + 1`
/// coordinates and attaches independent random signs.
pub fn sample_l1_ball<S: Scalar, R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<S> {
    loop {
        let simplex = sample_simplex::<S, R>(m + 1, rng);
        let w: Vec<S> = simplex[..m]
            .iter()
            .map(|&x| if rng.random::<bool>() { x } else { -x })
            .collect();
        let norm: S = w.iter().map(|x| x.abs()).sum();
        // Rounding can push the norm a hair past 1 when the slack is tiny.
        if norm <= S::one() && w.iter().all(|x| *x != S::zero()) {
            return w;
        }
    }
}

/// Uniform point of the unit Euclidean ball in `d` dimensions: isotropic
/// Gaussian direction scaled by `U^{1/d}`.
pub fn sample_l2_ball<S: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<S> {
    loop {
        let g: Vec<S> = (0..d).map(|_| S::sample_standard_normal(rng)).collect();
        let norm = l2_norm(&g);
        if norm == S::zero() {
            continue;
        }
        let radius = S::sample_unit(rng).powf(S::one() / S::from_count(d));
        let x: Vec<S> = g.into_iter().map(|v| v / norm * radius).collect();
        if l2_norm(&x) <= S::one() {
            return x;
        }
    }
}

/// Draws `m ∈ {1, …, cap}` with probability proportional to `2^{-m}`.
pub fn sample_truncated_geometric<R: Rng + ?Sized>(cap: usize, rng: &mut R) -> usize {
    debug_assert!(cap >= 1);
    let z = 1.0 - 0.5f64.powi(cap as i32);
    let u: f64 = rng.random::<f64>() * z;
    let mut acc = 0.0;
    let mut p = 0.5;
    for m in 1..=cap {
        acc += p;
        if u < acc {
            return m;
        }
        p *= 0.5;
    }
    cap
}

/// `ln P(m)` under the geometric law truncated to `{1, …, cap}`.
pub fn ln_truncated_geometric(m: usize, cap: usize) -> f64 {
    let z = 1.0 - 0.5f64.powi(cap as i32);
    -(m as f64) * std::f64::consts::LN_2 - z.ln()
}

pub fn l1_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|x| *x * *x).sum::<S>().sqrt()
}
