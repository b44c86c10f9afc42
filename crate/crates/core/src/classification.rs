//! Logistic regression over random features: Laplace approximation of the
//! weight posterior and the Monte Carlo evidence ratio used to accept or
//! reject frequency proposals.
//!
//! The ratio for replacing `W` by `W*` is estimated with draws
//! `β_l ~ N(β0, S_n⁻¹)` from the Laplace posterior under the current `W`:
//!
//! ```text
//! r ≈ min(1, (1/L) Σ_l p(Y | X, W*, β_l) / p(Y | X, W, β_l))
//! ```

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::design::Design;
use crate::error::{check_dim, BankError, Result};
use crate::linalg::CholeskyFactor;
use crate::rff::FeatureVector;
use crate::scalar::{dot, ln_two_pi, log_sum_exp, sigmoid, softplus, Scalar};

const MAX_NEWTON_ITERS: usize = 100;
const MAX_HALVINGS: usize = 60;

/// Gaussian prior `β ~ N(μ_β, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticPrior<T> {
    /// `None` means the zero vector.
    pub weight_mean: Option<Array1<T>>,
    pub sigma: T,
}

impl<T: Scalar> Default for LogisticPrior<T> {
    fn default() -> Self {
        Self {
            weight_mean: None,
            sigma: T::one(),
        }
    }
}

impl<T: Scalar> LogisticPrior<T> {
    pub fn new(sigma: T) -> Result<Self> {
        let prior = Self {
            weight_mean: None,
            sigma,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(BankError::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Diagonal of `Λ0`.
    pub fn precision(&self) -> T {
        (self.sigma * self.sigma).recip()
    }

    fn mean_vector(&self, n: usize) -> Result<Array1<T>> {
        match &self.weight_mean {
            Some(m) => {
                check_dim("prior weight mean", n, m.len())?;
                Ok(m.clone())
            }
            None => Ok(Array1::zeros(n)),
        }
    }
}

/// Gaussian approximation `N(β0, S_n⁻¹)` at the posterior mode.
#[derive(Debug, Clone)]
pub struct LaplacePosterior<T> {
    mode: Array1<T>,
    factor: CholeskyFactor<T>,
    log_likelihood: T,
    objective: T,
    log_evidence: T,
    grad_norm: T,
    converged: bool,
    iterations: usize,
    trace: Vec<T>,
}

impl<T: Scalar> LaplacePosterior<T> {
    /// `β0`.
    pub fn mode(&self) -> &Array1<T> {
        &self.mode
    }

    /// Cholesky factor of `S_n`.
    pub fn factor(&self) -> &CholeskyFactor<T> {
        &self.factor
    }

    /// `S_n = Λ0 + ΦᵀDΦ`.
    pub fn precision(&self) -> Array2<T> {
        self.factor.reconstruct()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn grad_norm(&self) -> T {
        self.grad_norm
    }

    /// Log-likelihood at the mode.
    pub fn log_likelihood(&self) -> T {
        self.log_likelihood
    }

    /// Log posterior (up to its normalizer) at every accepted Newton iterate.
    pub fn objective_trace(&self) -> &[T] {
        &self.trace
    }

    pub fn objective(&self) -> T {
        self.objective
    }

    /// Laplace estimate of `ln p(Y | X, W)`.
    pub fn log_evidence(&self) -> T {
        self.log_evidence
    }

    /// `φᵀ S_n⁻¹ φ`.
    pub fn variance(&self, phi: &[T]) -> T {
        self.factor.inv_quad_form(phi)
    }
}

pub(crate) fn check_labels<T: Scalar>(y: ArrayView1<'_, T>) -> Result<()> {
    for (row, &v) in y.iter().enumerate() {
        if v != T::zero() && v != T::one() {
            return Err(BankError::InvalidLabel { row, value: v.as_f64() });
        }
    }
    Ok(())
}

fn log_lik_from_eta<T: Scalar>(eta: &[T], y: &[T]) -> T {
    eta.iter().zip(y).fold(T::zero(), |acc, (&e, &t)| acc + t * e - softplus(e))
}

fn to_vec<T: Scalar>(v: ArrayView1<'_, T>) -> Vec<T> {
    v.as_slice().map(<[T]>::to_vec).unwrap_or_else(|| v.to_vec())
}

/// `Σ_i Y_i ln σ(Φ_i β) + (1 − Y_i) ln(1 − σ(Φ_i β))`.
pub fn log_likelihood_class<T: Scalar>(
    phi: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    beta: ArrayView1<'_, T>,
) -> Result<T> {
    check_dim("classification targets", phi.nrows(), y.len())?;
    check_dim("classification weights", phi.ncols(), beta.len())?;
    check_labels(y)?;
    let eta = phi.dot(&beta);
    Ok(log_lik_from_eta(&to_vec(eta.view()), &to_vec(y)))
}

/// Mode of the log posterior by damped Newton (IRLS) with backtracking, and
/// the curvature there. A run that hits the iteration cap is returned with
/// `converged() == false` and the best iterate.
pub fn fit_laplace<T: Scalar>(
    design: &Design<T>,
    y: ArrayView1<'_, T>,
    prior: &LogisticPrior<T>,
    warm_start: Option<&Array1<T>>,
) -> Result<LaplacePosterior<T>> {
    prior.validate()?;
    check_dim("classification targets", design.n_rows(), y.len())?;
    check_labels(y)?;
    let n = design.n_cols();
    let lambda0 = prior.precision();
    let mu = prior.mean_vector(n)?;
    let phi = design.view();
    let yv = to_vec(y);

    let objective = |beta: &Array1<T>| -> (T, Array1<T>) {
        let eta = phi.dot(beta);
        let diff = beta - &mu;
        let obj = log_lik_from_eta(eta.as_slice().expect("contiguous"), &yv) - T::lit(0.5) * lambda0 * diff.dot(&diff);
        (obj, eta)
    };

    let mut beta = match warm_start {
        Some(b) => {
            check_dim("warm start", n, b.len())?;
            b.clone()
        }
        None => mu.clone(),
    };
    let (mut obj, mut eta) = objective(&beta);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm;
    loop {
        let resid: Array1<T> = Array1::from_iter(eta.iter().zip(&yv).map(|(&e, &t)| t - sigmoid(e)));
        let grad = phi.t().dot(&resid) - (&beta - &mu) * lambda0;
        grad_norm = grad.iter().fold(T::zero(), |m, g| m.max(g.abs()));
        if grad_norm < T::lit(1e-6) * (T::one() + obj.abs()) {
            converged = true;
            break;
        }
        if iterations == MAX_NEWTON_ITERS {
            break;
        }
        iterations += 1;
        let factor = curvature(phi, &eta, lambda0)?;
        let step = factor.solve(grad.as_slice().expect("contiguous"));
        let slope = grad.dot(&step);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + &(&step * t);
            let (c_obj, c_eta) = objective(&candidate);
            if c_obj.is_finite() && c_obj >= obj + T::lit(1e-4) * t * slope {
                beta = candidate;
                obj = c_obj;
                eta = c_eta;
                accepted = true;
                break;
            }
            t *= T::lit(0.5);
        }
        if !accepted {
            // no ascent direction left at working precision
            converged = grad_norm < T::lit(1e-4) * (T::one() + obj.abs());
            break;
        }
        trace.push(obj);
    }

    let factor = curvature(phi, &eta, lambda0)?;
    let log_likelihood = log_lik_from_eta(eta.as_slice().expect("contiguous"), &yv);
    let half = T::lit(0.5);
    let log_evidence = obj + half * T::from_usize_lossy(n) * lambda0.ln() - half * factor.log_det();
    Ok(LaplacePosterior {
        mode: beta,
        factor,
        log_likelihood,
        objective: obj,
        log_evidence,
        grad_norm,
        converged,
        iterations,
        trace,
    })
}

fn curvature<T: Scalar>(phi: ArrayView2<'_, T>, eta: &Array1<T>, lambda0: T) -> Result<CholeskyFactor<T>> {
    let w: Array1<T> = eta.mapv(|e| {
        let p = sigmoid(e);
        (p * (T::one() - p)).sqrt()
    });
    let scaled = &phi * &w.view().insert_axis(Axis(1));
    let mut s = scaled.t().dot(&scaled);
    for i in 0..s.nrows() {
        s[[i, i]] += lambda0;
    }
    CholeskyFactor::new(s.view(), "Laplace precision")
}

/// `L` draws from `N(β0, S_n⁻¹)`.
pub fn sample_beta_laplace<T: Scalar, R: Rng + ?Sized>(
    lap: &LaplacePosterior<T>,
    count: usize,
    rng: &mut R,
) -> Vec<Array1<T>> {
    let n = lap.mode.len();
    (0..count)
        .map(|_| {
            let z: Vec<T> = (0..n).map(|_| T::standard_normal(rng)).collect();
            beta_from_normal(lap, z)
        })
        .collect()
}

/// Draws built from caller-supplied standard normal vectors.
pub fn sample_beta_laplace_with<T: Scalar>(lap: &LaplacePosterior<T>, normals: &[Vec<T>]) -> Result<Vec<Array1<T>>> {
    normals
        .iter()
        .map(|z| {
            check_dim("standard normal draw", lap.mode.len(), z.len())?;
            Ok(beta_from_normal(lap, z.clone()))
        })
        .collect()
}

fn beta_from_normal<T: Scalar>(lap: &LaplacePosterior<T>, mut z: Vec<T>) -> Array1<T> {
    lap.factor.back_solve(&mut z);
    &lap.mode + &Array1::from(z)
}

/// Monte Carlo acceptance ratio with fresh draws from `lap`.
pub fn evidence_ratio_class<T: Scalar, R: Rng + ?Sized>(
    phi_star: ArrayView2<'_, T>,
    phi_current: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    lap: &LaplacePosterior<T>,
    count: usize,
    rng: &mut R,
) -> Result<T> {
    let draws = sample_beta_laplace(lap, count, rng);
    evidence_ratio_from_draws(phi_star, phi_current, y, &draws)
}

/// Acceptance ratio from given draws, averaged in log space.
pub fn evidence_ratio_from_draws<T: Scalar>(
    phi_star: ArrayView2<'_, T>,
    phi_current: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    draws: &[Array1<T>],
) -> Result<T> {
    if draws.is_empty() {
        return Err(BankError::InvalidParameter("evidence ratio needs at least one draw".into()));
    }
    check_dim("proposal design rows", phi_current.nrows(), phi_star.nrows())?;
    check_dim("proposal design columns", phi_current.ncols(), phi_star.ncols())?;
    let mut log_ratios = Vec::with_capacity(draws.len());
    for beta in draws {
        let star = log_likelihood_class(phi_star, y, beta.view())?;
        let cur = log_likelihood_class(phi_current, y, beta.view())?;
        log_ratios.push(star - cur);
    }
    Ok(ratio_from_log_terms(&log_ratios))
}

/// Direct average of likelihood ratios without the log-space path; only
/// meaningful when neither likelihood underflows.
pub fn evidence_ratio_naive<T: Scalar>(
    phi_star: ArrayView2<'_, T>,
    phi_current: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    draws: &[Array1<T>],
) -> Result<T> {
    let mut sum = T::zero();
    for beta in draws {
        let star = log_likelihood_class(phi_star, y, beta.view())?.exp();
        let cur = log_likelihood_class(phi_current, y, beta.view())?.exp();
        sum += star / cur;
    }
    Ok((sum / T::from_usize_lossy(draws.len())).min(T::one()))
}

fn ratio_from_log_terms<T: Scalar>(log_ratios: &[T]) -> T {
    let log_mean = log_sum_exp(log_ratios) - T::from_usize_lossy(log_ratios.len()).ln();
    if log_mean >= T::zero() {
        T::one()
    } else {
        log_mean.exp()
    }
}

/// Linear predictors `η_l = Φβ_l` for a fixed set of draws, so that a proposal
/// touching one frequency's two columns costs `O(N·L)`.
#[derive(Debug, Clone)]
pub struct DrawCache<T> {
    draws: Vec<Array1<T>>,
    eta: Array2<T>,
    log_lik: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> DrawCache<T> {
    pub fn new(design: &Design<T>, y: ArrayView1<'_, T>, draws: Vec<Array1<T>>) -> Result<Self> {
        check_dim("classification targets", design.n_rows(), y.len())?;
        check_labels(y)?;
        if draws.is_empty() {
            return Err(BankError::InvalidParameter("evidence ratio needs at least one draw".into()));
        }
        for beta in &draws {
            check_dim("classification weights", design.n_cols(), beta.len())?;
        }
        let yv = to_vec(y);
        let stacked = Array2::from_shape_fn((draws.len(), design.n_cols()), |(l, k)| draws[l][k]);
        // row l holds (Φβ_l)ᵀ
        let eta = stacked.dot(&design.view().t());
        let log_lik = eta.rows().into_iter().map(|e| log_lik_from_eta(e.as_slice().expect("contiguous"), &yv)).collect();
        Ok(Self { draws, eta, log_lik, y: yv })
    }

    pub fn draws(&self) -> &[Array1<T>] {
        &self.draws
    }

    /// Log acceptance ratio (capped at 0) for replacing design columns
    /// `(cos_col, sin_col)`, currently `(old_cos, old_sin)`.
    #[allow(clippy::too_many_arguments)]
    pub fn log_ratio_swap(
        &self,
        cos_col: usize,
        sin_col: usize,
        old_cos: &[T],
        old_sin: &[T],
        new_cos: &[T],
        new_sin: &[T],
    ) -> T {
        let n = self.y.len();
        let mut log_ratios = Vec::with_capacity(self.draws.len());
        for (l, beta) in self.draws.iter().enumerate() {
            let (bc, bs) = (beta[cos_col], beta[sin_col]);
            let eta = self.eta.row(l);
            let eta = eta.as_slice().expect("contiguous");
            let mut ll = T::zero();
            for i in 0..n {
                let e = eta[i] + (new_cos[i] - old_cos[i]) * bc + (new_sin[i] - old_sin[i]) * bs;
                ll += self.y[i] * e - softplus(e);
            }
            log_ratios.push(ll - self.log_lik[l]);
        }
        let log_mean = log_sum_exp(&log_ratios) - T::from_usize_lossy(log_ratios.len()).ln();
        log_mean.min(T::zero())
    }
}

/// `σ(κ(s²) β0ᵀφ)` with `κ(s²) = (1 + π s²/8)^{-1/2}`; `plug_in` gives
/// `σ(β0ᵀφ)`.
pub fn predict_proba<T: Scalar>(lap: &LaplacePosterior<T>, phi: &FeatureVector<T>, plug_in: bool) -> Result<T> {
    check_dim("prediction features", lap.mode.len(), phi.len())?;
    let s2 = if plug_in { T::zero() } else { lap.variance(phi.as_slice()) };
    Ok(moderated_probability(
        dot(lap.mode.as_slice().expect("contiguous"), phi.as_slice()),
        s2,
    ))
}

/// Moderated sigmoid for a latent mean and variance.
pub fn moderated_probability<T: Scalar>(mean: T, s2: T) -> T {
    let kappa = (T::one() + T::lit(std::f64::consts::PI) * s2 / T::lit(8.0)).sqrt().recip();
    sigmoid(kappa * mean)
}

/// Log density of `β` under the Laplace approximation.
pub fn laplace_log_density<T: Scalar>(lap: &LaplacePosterior<T>, beta: ArrayView1<'_, T>) -> Result<T> {
    check_dim("weights", lap.mode.len(), beta.len())?;
    let diff = to_vec((&beta - &lap.mode).view());
    let r: Vec<T> = (0..diff.len())
        .map(|i| (i..diff.len()).fold(T::zero(), |acc, j| acc + lap.factor.get(i, j) * diff[j]))
        .collect();
    let half = T::lit(0.5);
    let n = T::from_usize_lossy(diff.len());
    Ok(-half * n * ln_two_pi::<T>() + half * lap.factor.log_det() - half * dot(&r, &r))
}
