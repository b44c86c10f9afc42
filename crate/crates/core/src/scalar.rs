//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All math is written against [`Scalar`], which is implemented for `f32`
//! and `f64`. Randomness goes through the trait as well so that samplers stay
//! generic without leaking `rand_distr` bounds into every signature.

use ndarray::NdFloat;
use num_traits::FromPrimitive;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

pub trait Scalar: NdFloat + FromPrimitive + Default {
    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which cannot happen for finite literals in `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn chi_squared<R: Rng + ?Sized>(rng: &mut R, dof: Self) -> Self;

    fn lgamma(self) -> Self;
}

impl Scalar for f64 {
    fn as_f64(self) -> f64 {
        self
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }

    fn chi_squared<R: Rng + ?Sized>(rng: &mut R, dof: Self) -> Self {
        ChiSquared::new(dof)
            .expect("chi-squared degrees of freedom must be positive")
            .sample(rng)
    }

    fn lgamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self)
    }
}

impl Scalar for f32 {
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }

    fn chi_squared<R: Rng + ?Sized>(rng: &mut R, dof: Self) -> Self {
        ChiSquared::new(dof)
            .expect("chi-squared degrees of freedom must be positive")
            .sample(rng)
    }

    fn lgamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self as f64) as f32
    }
}

/// `ln(2π)`.
pub fn ln_two_pi<T: Scalar>() -> T {
    T::lit(std::f64::consts::TAU.ln())
}

/// Dot product over slices with four independent accumulators.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += *x * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `(aᵀb, aᵀc)` in one pass over `a`.
#[inline]
pub fn dot2<T: Scalar>(a: &[T], b: &[T], c: &[T]) -> (T, T) {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len(), c.len());
    let mut acc_b = [T::zero(); 4];
    let mut acc_c = [T::zero(); 4];
    let n = a.len() / 4 * 4;
    for ((x, y), z) in a[..n].chunks_exact(4).zip(b[..n].chunks_exact(4)).zip(c[..n].chunks_exact(4)) {
        for k in 0..4 {
            acc_b[k] += x[k] * y[k];
            acc_c[k] += x[k] * z[k];
        }
    }
    let (mut tail_b, mut tail_c) = (T::zero(), T::zero());
    for i in n..a.len() {
        tail_b += a[i] * b[i];
        tail_c += a[i] * c[i];
    }
    (
        (acc_b[0] + acc_b[1]) + (acc_b[2] + acc_b[3]) + tail_b,
        (acc_c[0] + acc_c[1]) + (acc_c[2] + acc_c[3]) + tail_c,
    )
}

/// Numerically stable `ln Σ exp(x_i)`; returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
