//! Random Fourier features and Gaussian-mixture spectral densities.
//!
//! A shift-invariant kernel `k(x - y)` with `k(0) = 1` is the characteristic
//! function of a probability density `ρ(ω)`. Drawing `M` frequencies from `ρ`
//! gives the feature map
//!
//! ```text
//! φ(x) = M^{-1/2} [cos(ω_1ᵀx), …, cos(ω_Mᵀx), sin(ω_1ᵀx), …, sin(ω_Mᵀx)]
//! ```
//!
//! with `φ(x)ᵀφ(y) ≈ k(x - y)`. Every consumer of features in this crate uses
//! this `[cos block | sin block]` layout, so the pair of columns belonging to
//! frequency `j` is always `(j, M + j)`.
//!
//! When `ρ` is a Gaussian mixture `Σ π_k N(μ_k, Σ_k)` the real part of the
//! kernel has the closed form `Σ π_k exp(-½ tᵀΣ_k t) cos(μ_kᵀ t)`, evaluated by
//! [`mixture_kernel_eval`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{check_dim, BankError, Result};
use crate::linalg::CholeskyFactor;
use crate::scalar::{dot, ln_two_pi, Scalar};

/// `M × d` matrix whose rows are the random frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix<T> {
    w: Array2<T>,
}

impl<T: Scalar> FrequencyMatrix<T> {
    pub fn new(w: Array2<T>) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(BankError::InvalidParameter(format!(
                "frequency matrix must be at least 1×1, got {}×{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(BankError::InvalidParameter(
                "frequency matrix has non-finite entries".into(),
            ));
        }
        Ok(Self {
            w: w.as_standard_layout().into_owned(),
        })
    }

    pub fn n_frequencies(&self) -> usize {
        self.w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// Length of the feature vector, `2M`.
    pub fn n_features(&self) -> usize {
        2 * self.w.nrows()
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, T> {
        self.w.row(j)
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.w.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.w
    }

    pub fn set_row(&mut self, j: usize, omega: ArrayView1<'_, T>) -> Result<()> {
        check_dim("frequency row", self.dim(), omega.len())?;
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(BankError::InvalidParameter(
                "frequency has non-finite entries".into(),
            ));
        }
        self.w.row_mut(j).assign(&omega);
        Ok(())
    }

    /// Projections `ω_jᵀ x` for every frequency.
    pub fn project(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_dim("feature map input", self.dim(), x.len())?;
        Ok(self.w.dot(&x))
    }
}

/// A `2M` feature vector in `[cos | sin]` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T>(pub Array1<T>);

impl<T: Scalar> FeatureVector<T> {
    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice().expect("feature vectors are contiguous")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(self.as_slice(), other.as_slice())
    }
}

/// Writes `φ(x)` into `out` (length `2M`).
pub fn feature_map_into<T: Scalar>(
    x: ArrayView1<'_, T>,
    w: &FrequencyMatrix<T>,
    out: &mut [T],
) -> Result<()> {
    check_dim("feature map input", w.dim(), x.len())?;
    check_dim("feature buffer", w.n_features(), out.len())?;
    let m = w.n_frequencies();
    let scale = T::from_usize_lossy(m).sqrt().recip();
    let (cos_block, sin_block) = out.split_at_mut(m);
    for j in 0..m {
        let proj = w.row(j).dot(&x);
        let (s, c) = proj.sin_cos();
        cos_block[j] = c * scale;
        sin_block[j] = s * scale;
    }
    Ok(())
}

pub fn feature_map<T: Scalar>(
    x: ArrayView1<'_, T>,
    w: &FrequencyMatrix<T>,
) -> Result<FeatureVector<T>> {
    let mut out = vec![T::zero(); w.n_features()];
    feature_map_into(x, w, &mut out)?;
    Ok(FeatureVector(Array1::from(out)))
}

/// Random-feature kernel estimate `φ(x)ᵀφ(y)`.
///
/// Evaluated through the equivalent lag form `M⁻¹ Σ cos(ω_jᵀ(x - y))`, which
/// returns exactly 1 at `x = y` and depends on `(x, y)` only through the lag.
pub fn kernel_estimate<T: Scalar>(
    x: ArrayView1<'_, T>,
    y: ArrayView1<'_, T>,
    w: &FrequencyMatrix<T>,
) -> Result<T> {
    check_dim("kernel estimate (x)", w.dim(), x.len())?;
    check_dim("kernel estimate (y)", w.dim(), y.len())?;
    let lag = &x - &y;
    kernel_estimate_lag(lag.view(), w)
}

/// `M⁻¹ Σ cos(ω_jᵀ t)`.
pub fn kernel_estimate_lag<T: Scalar>(t: ArrayView1<'_, T>, w: &FrequencyMatrix<T>) -> Result<T> {
    let proj = w.project(t)?;
    let sum = proj.iter().fold(T::zero(), |acc, p| acc + p.cos());
    Ok(sum / T::from_usize_lossy(w.n_frequencies()))
}

/// Multivariate normal with a cached Cholesky factor of its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T> {
    mean: Array1<T>,
    cov: Array2<T>,
    factor: CholeskyFactor<T>,
}

impl<T: Scalar> GaussianComponent<T> {
    pub fn new(mean: Array1<T>, cov: Array2<T>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(BankError::InvalidCovariance("zero-dimensional component".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(BankError::InvalidCovariance(format!(
                "covariance is {}×{} but mean has length {d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let tol = T::lit(1e-9);
        for i in 0..d {
            for j in i + 1..d {
                let (a, b) = (cov[[i, j]], cov[[j, i]]);
                if (a - b).abs() > tol * (T::one() + a.abs().max(b.abs())) {
                    return Err(BankError::InvalidCovariance("covariance is not symmetric".into()));
                }
            }
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(BankError::InvalidCovariance("mean has non-finite entries".into()));
        }
        let factor = CholeskyFactor::new(cov.view(), "component covariance").map_err(|_| {
            BankError::InvalidCovariance("covariance is not positive definite".into())
        })?;
        Ok(Self { mean, cov, factor })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(Array1::zeros(d), Array2::eye(d)).expect("identity covariance is valid")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<T> {
        &self.mean
    }

    pub fn cov(&self) -> &Array2<T> {
        &self.cov
    }

    pub fn cov_factor(&self) -> &CholeskyFactor<T> {
        &self.factor
    }

    pub fn log_pdf(&self, omega: ArrayView1<'_, T>) -> Result<T> {
        check_dim("gaussian density", self.dim(), omega.len())?;
        let mut r: Vec<T> = omega.iter().zip(&self.mean).map(|(a, b)| *a - *b).collect();
        self.factor.forward_solve(&mut r);
        let half = T::lit(0.5);
        let d = T::from_usize_lossy(self.dim());
        Ok(-half * d * ln_two_pi::<T>() - half * self.factor.log_det() - half * dot(&r, &r))
    }

    /// `μ + Rᵀ z`, the affine map of a standard-normal vector `z`.
    pub fn transform(&self, z: &[T]) -> Array1<T> {
        &self.mean + &self.factor.mul_upper_transpose(z)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<T> {
        let z: Vec<T> = (0..self.dim()).map(|_| T::standard_normal(rng)).collect();
        self.transform(&z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent<T> {
    pub weight: T,
    pub gaussian: GaussianComponent<T>,
}

/// Gaussian mixture spectral density with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec<T> {
    components: Vec<MixtureComponent<T>>,
}

impl<T: Scalar> GaussianMixtureSpec<T> {
    pub fn new(components: Vec<MixtureComponent<T>>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| BankError::InvalidParameter("mixture needs at least one component".into()))?;
        let d = first.gaussian.dim();
        let mut total = T::zero();
        for c in &components {
            if !(c.weight > T::zero()) || !c.weight.is_finite() {
                return Err(BankError::InvalidParameter(format!(
                    "mixture weight must be positive, got {}",
                    c.weight
                )));
            }
            check_dim("mixture component dimension", d, c.gaussian.dim())?;
            total += c.weight;
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if (total - T::one()).abs() > tol {
            return Err(BankError::InvalidParameter(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components })
    }

    /// Builds a spec from `(weight, mean, covariance)` triples.
    pub fn from_parts(parts: Vec<(T, Array1<T>, Array2<T>)>) -> Result<Self> {
        let components = parts
            .into_iter()
            .map(|(weight, mean, cov)| {
                Ok(MixtureComponent {
                    weight,
                    gaussian: GaussianComponent::new(mean, cov)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    /// Spectral density of the one-dimensional synthetic benchmark kernel
    /// `k(t) = exp(-t²/8)(½ + ½cos(3πt/4))`: `½N(0, ¼) + ½N(3π/4, ¼)`.
    pub fn two_mode_benchmark() -> Self {
        let var = T::lit(0.25);
        let half = T::lit(0.5);
        Self::from_parts(vec![
            (half, Array1::from(vec![T::zero()]), Array2::from_elem((1, 1), var)),
            (
                half,
                Array1::from(vec![T::lit(0.75 * std::f64::consts::PI)]),
                Array2::from_elem((1, 1), var),
            ),
        ])
        .expect("benchmark spec is valid")
    }

    pub fn components(&self) -> &[MixtureComponent<T>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].gaussian.dim()
    }

    pub fn weights(&self) -> Vec<T> {
        self.components.iter().map(|c| c.weight).collect()
    }
}

/// Closed-form mixture kernel `Σ π_k exp(-½ tᵀΣ_k t) cos(μ_kᵀ t)` at lag `t`.
pub fn mixture_kernel_eval<T: Scalar>(t: ArrayView1<'_, T>, spec: &GaussianMixtureSpec<T>) -> Result<T> {
    check_dim("mixture kernel lag", spec.dim(), t.len())?;
    let half = T::lit(0.5);
    Ok(spec.components.iter().fold(T::zero(), |acc, c| {
        let g = &c.gaussian;
        let quad = t.dot(&g.cov().dot(&t));
        acc + c.weight * (-half * quad).exp() * g.mean().dot(&t).cos()
    }))
}

/// Mixture density `ρ(ω) = Σ π_k N(ω | μ_k, Σ_k)`.
pub fn mixture_pdf<T: Scalar>(omega: ArrayView1<'_, T>, spec: &GaussianMixtureSpec<T>) -> Result<T> {
    check_dim("mixture density point", spec.dim(), omega.len())?;
    let mut total = T::zero();
    for c in &spec.components {
        total += c.weight * c.gaussian.log_pdf(omega)?.exp();
    }
    Ok(total)
}

/// Index drawn from unnormalized nonnegative weights; the last positive index
/// absorbs rounding in the cumulative sum.
pub(crate) fn categorical<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
    let u = T::unit_uniform(rng) * total;
    let mut acc = T::zero();
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > T::zero() {
            last_positive = k;
            acc += w;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

/// `M` i.i.d. frequencies from the mixture.
pub fn sample_frequencies<T: Scalar, R: Rng + ?Sized>(
    spec: &GaussianMixtureSpec<T>,
    m: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix<T>> {
    if m == 0 {
        return Err(BankError::InvalidParameter("need at least one frequency".into()));
    }
    let weights = spec.weights();
    let mut w = Array2::zeros((m, spec.dim()));
    for mut row in w.rows_mut() {
        let k = categorical(&weights, rng);
        row.assign(&spec.components[k].gaussian.sample(rng));
    }
    FrequencyMatrix::new(w)
}
