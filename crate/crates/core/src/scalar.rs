//! Floating-point abstraction shared by every model, sampler and policy.
//!
//! All numerical code in this crate is written against [`Scalar`] so that it
//! runs in `f64` (the default everywhere in the harness) or `f32`. Random
//! draws go through the trait as well, which keeps the distribution bounds of
//! `rand_distr` out of every signature.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

pub trait Scalar:
    Float + FloatConst + NumAssignOps + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant. Lossy for `f32`.
    fn lit(v: f64) -> Self;

    fn as_f64(self) -> f64;

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn sample_standard_exp<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform on `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            #[inline]
            fn sample_standard_exp<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <Exp1 as Distribution<$t>>::sample(&Exp1, rng)
            }

            #[inline]
            fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// `ln(n!)`, exact summation for small `n`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `ln Γ(d/2 + 1)` for a positive integer `d`, using the closed forms at
/// integers and half-integers.
pub fn ln_gamma_half_plus_one(d: usize) -> f64 {
    if d.is_multiple_of(2) {
        ln_factorial(d / 2)
    } else {
        // Γ(k + 3/2) = (2k+2)! sqrt(pi) / (4^{k+1} (k+1)!) with d = 2k + 1.
        let k1 = d.div_ceil(2);
        ln_factorial(2 * k1) + 0.5 * std::f64::consts::PI.ln()
            - (k1 as f64) * 4f64.ln()
            - ln_factorial(k1)
    }
}

/// Log-volume of the unit Euclidean ball in `d` dimensions.
pub fn ln_unit_l2_ball_volume(d: usize) -> f64 {
    0.5 * d as f64 * std::f64::consts::PI.ln() - ln_gamma_half_plus_one(d)
}

/// Log-volume of the unit ℓ₁ ball in `m` dimensions, `2^m / m!`.
pub fn ln_unit_l1_ball_volume(m: usize) -> f64 {
    m as f64 * std::f64::consts::LN_2 - ln_factorial(m)
}
