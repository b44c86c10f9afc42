//! Conjugate Bayesian linear regression over random features.
//!
//! With `σ_ε² ~ InvGamma(a0, b0)` and `β | σ_ε² ~ N(μ_β, σ_ε² Λ0⁻¹)`,
//! `Λ0 = I/σ²`, the weights and noise integrate out in closed form:
//!
//! ```text
//! Λn = ΦᵀΦ + Λ0
//! μn = Λn⁻¹(Λ0 μ_β + ΦᵀY)
//! an = a0 + N/2
//! bn = b0 + ½(YᵀY + μ_βᵀΛ0μ_β − μnᵀΛnμn)
//! ln p(Y) = −(N/2)ln 2π + ln Γ(an) − ln Γ(a0) + a0 ln b0 − an ln bn + ½(ln|Λ0| − ln|Λn|)
//! ```
//!
//! The posterior keeps a Cholesky factor of `Λn` in a permuted order together
//! with the whitened right-hand side `z = R⁻ᵀ h`, `h = Λ0μ_β + ΦᵀY`. Moving
//! the column pair of one frequency to the back of the ordering leaves the
//! leading block untouched, so replacing that frequency only needs two bordered
//! triangular solves instead of a refactorization.

use std::cell::OnceCell;

use ndarray::{Array1, Array2, ArrayView1};

use crate::design::Design;
use crate::error::{check_dim, BankError, Result};
use crate::linalg::CholeskyFactor;
use crate::rff::FeatureVector;
use crate::scalar::{dot, dot2, ln_two_pi, Scalar};

/// Normal-Inverse-Gamma prior on `(β, σ_ε²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NigPrior<T> {
    /// `None` means the zero vector.
    pub weight_mean: Option<Array1<T>>,
    pub sigma: T,
    pub a0: T,
    pub b0: T,
}

impl<T: Scalar> Default for NigPrior<T> {
    fn default() -> Self {
        Self {
            weight_mean: None,
            sigma: T::one(),
            a0: T::one(),
            b0: T::one(),
        }
    }
}

impl<T: Scalar> NigPrior<T> {
    pub fn new(sigma: T, a0: T, b0: T) -> Result<Self> {
        let prior = Self {
            weight_mean: None,
            sigma,
            a0,
            b0,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("a0", self.a0), ("b0", self.b0)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(BankError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Diagonal of `Λ0`.
    pub fn precision(&self) -> T {
        (self.sigma * self.sigma).recip()
    }

    fn mean_entry(&self, f: usize) -> T {
        self.weight_mean.as_ref().map_or(T::zero(), |m| m[f])
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

/// Sufficient statistics of the NIG posterior plus the cached factorization.
#[derive(Debug, Clone)]
pub struct RegressionPosterior<T> {
    n_obs: usize,
    yty: T,
    prior_quad: T,
    prior_log_det: T,
    factor: CholeskyFactor<T>,
    // position -> feature index, and its inverse
    order: Vec<usize>,
    position: Vec<usize>,
    rhs: Array1<T>,
    whitened: Vec<T>,
    // recomputed on demand after a swap
    mean: OnceCell<Array1<T>>,
    shape: T,
    rate: T,
    log_det: T,
    log_evidence: T,
}

/// Result of scoring a replacement of one frequency's column pair; apply it
/// with [`RegressionPosterior::commit_swap`].
#[derive(Debug, Clone)]
pub struct SwapProposal<T> {
    frequency: usize,
    cross_cos: Vec<T>,
    cross_sin: Vec<T>,
    r_cc: T,
    r_cs: T,
    r_ss: T,
    z_cos: T,
    z_sin: T,
    h_cos: T,
    h_sin: T,
    log_det: T,
    rate: T,
    log_evidence: T,
}

impl<T: Scalar> SwapProposal<T> {
    pub fn log_evidence(&self) -> T {
        self.log_evidence
    }
}

/// Conjugate posterior for design `Φ` and targets `Y`.
pub fn fit_posterior<T: Scalar>(
    design: &Design<T>,
    y: ArrayView1<'_, T>,
    prior: &NigPrior<T>,
) -> Result<RegressionPosterior<T>> {
    RegressionPosterior::fit(design, y, prior)
}

/// Log marginal likelihood `ln p(Y | X, W)`, including the `(2π)^{-N/2}`
/// constant. Exactly 0 for an empty dataset.
pub fn log_evidence<T: Scalar>(post: &RegressionPosterior<T>, prior: &NigPrior<T>) -> T {
    evidence_formula(post.n_obs, post.shape, post.rate, post.log_det, post.prior_log_det, prior)
}

fn evidence_formula<T: Scalar>(n_obs: usize, shape: T, rate: T, log_det: T, prior_log_det: T, prior: &NigPrior<T>) -> T {
    if n_obs == 0 {
        return T::zero();
    }
    let half = T::lit(0.5);
    let n = T::from_usize_lossy(n_obs);
    -half * n * ln_two_pi::<T>() + shape.lgamma() - prior.a0.lgamma() + prior.a0 * prior.b0.ln() - shape * rate.ln()
        + half * (prior_log_det - log_det)
}

impl<T: Scalar> RegressionPosterior<T> {
    pub fn fit(design: &Design<T>, y: ArrayView1<'_, T>, prior: &NigPrior<T>) -> Result<Self> {
        prior.validate()?;
        check_dim("regression targets", design.n_rows(), y.len())?;
        let n = design.n_cols();
        let lambda0 = prior.precision();
        let mu_beta = prior.mean_vector(n)?;
        let prior_quad = lambda0 * mu_beta.dot(&mu_beta);
        let prior_log_det = T::from_usize_lossy(n) * lambda0.ln();
        let n_obs = design.n_rows();

        if n_obs == 0 {
            let factor = CholeskyFactor::scaled_identity(n, lambda0)?;
            let rhs = &mu_beta * lambda0;
            let mut whitened = rhs.to_vec();
            factor.forward_solve(&mut whitened);
            return Ok(Self {
                n_obs,
                yty: T::zero(),
                prior_quad,
                prior_log_det,
                log_det: factor.log_det(),
                factor,
                order: (0..n).collect(),
                position: (0..n).collect(),
                rhs,
                whitened,
                mean: OnceCell::from(mu_beta),
                shape: prior.a0,
                rate: prior.b0,
                log_evidence: T::zero(),
            });
        }

        let phi = design.view();
        let mut precision: Array2<T> = phi.t().dot(&phi);
        for i in 0..n {
            precision[[i, i]] += lambda0;
        }
        let factor = CholeskyFactor::new(precision.view(), "regression posterior precision")?;
        let rhs = phi.t().dot(&y) + &mu_beta * lambda0;
        let mut whitened = rhs.to_vec();
        factor.forward_solve(&mut whitened);
        let mut mean = whitened.clone();
        factor.back_solve(&mut mean);

        let half = T::lit(0.5);
        let yty = y.dot(&y);
        let shape = prior.a0 + half * T::from_usize_lossy(n_obs);
        let rate = clamp_rate(prior.b0 + half * (yty + prior_quad - dot(&whitened, &whitened)), prior.b0);
        let log_det = factor.log_det();
        let log_evidence = evidence_formula(n_obs, shape, rate, log_det, prior_log_det, prior);
        Ok(Self {
            n_obs,
            yty,
            prior_quad,
            prior_log_det,
            factor,
            order: (0..n).collect(),
            position: (0..n).collect(),
            rhs,
            whitened,
            mean: OnceCell::from(Array1::from(mean)),
            shape,
            rate,
            log_det,
            log_evidence,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_features(&self) -> usize {
        self.rhs.len()
    }

    /// `μn`.
    pub fn mean(&self) -> &Array1<T> {
        self.mean.get_or_init(|| {
            let mut x = self.whitened.clone();
            self.factor.back_solve(&mut x);
            let mut mean = Array1::zeros(x.len());
            for (pos, &f) in self.order.iter().enumerate() {
                mean[f] = x[pos];
            }
            mean
        })
    }

    /// `an`.
    pub fn shape(&self) -> T {
        self.shape
    }

    /// `bn`.
    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn log_evidence(&self) -> T {
        self.log_evidence
    }

    /// `ln |Λn|`.
    pub fn log_det_precision(&self) -> T {
        self.log_det
    }

    /// `Λn` in feature order, rebuilt from the factor.
    pub fn precision(&self) -> Array2<T> {
        let permuted = self.factor.reconstruct();
        let n = self.n_features();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[[self.order[i], self.order[j]]] = permuted[[i, j]];
            }
        }
        out
    }

    /// `φᵀ Λn⁻¹ φ`.
    pub fn precision_quad_form(&self, phi: &[T]) -> T {
        let permuted: Vec<T> = self.order.iter().map(|&f| phi[f]).collect();
        self.factor.inv_quad_form(&permuted)
    }

    /// Upper Cholesky factor of `Λn` in feature order is not triangular once the
    /// ordering has been permuted, so this returns the factor of a freshly
    /// permuted-back copy.
    pub fn precision_factor(&self) -> Result<CholeskyFactor<T>> {
        if self.order.iter().enumerate().all(|(i, &f)| i == f) {
            Ok(self.factor.clone())
        } else {
            CholeskyFactor::new(self.precision().view(), "regression posterior precision")
        }
    }

    /// Conditions on one additional observation `(φ, y)` through a rank-one
    /// update of the factor.
    pub fn observe(&mut self, phi: &[T], y: T, prior: &NigPrior<T>) -> Result<()> {
        check_dim("observation features", self.n_features(), phi.len())?;
        let mut v: Vec<T> = self.order.iter().map(|&f| phi[f]).collect();
        self.factor.rank_one_update(&mut v);
        for (f, &p) in phi.iter().enumerate() {
            self.rhs[f] += p * y;
        }
        self.n_obs += 1;
        self.yty += y * y;
        self.shape += T::lit(0.5);
        self.refresh(prior);
        Ok(())
    }

    /// Log posterior-predictive density of `y` at features `φ` (Student-t with
    /// `2an` degrees of freedom).
    pub fn log_predictive_density(&self, phi: &[T], y: T) -> Result<T> {
        check_dim("predictive features", self.n_features(), phi.len())?;
        let half = T::lit(0.5);
        let nu = T::lit(2.0) * self.shape;
        let loc = dot(self.mean().as_slice().expect("contiguous"), phi);
        let scale2 = self.rate / self.shape * (T::one() + self.precision_quad_form(phi));
        let r = (y - loc) * (y - loc) / scale2;
        Ok(((nu + T::one()) * half).lgamma()
            - (nu * half).lgamma()
            - half * (nu * T::lit(std::f64::consts::PI) * scale2).ln()
            - (nu + T::one()) * half * (r / nu).ln_1p())
    }

    fn refresh(&mut self, prior: &NigPrior<T>) {
        let mut z: Vec<T> = self.order.iter().map(|&f| self.rhs[f]).collect();
        self.factor.forward_solve(&mut z);
        self.whitened = z;
        self.log_det = self.factor.log_det();
        let half = T::lit(0.5);
        self.rate = clamp_rate(
            prior.b0 + half * (self.yty + self.prior_quad - dot(&self.whitened, &self.whitened)),
            prior.b0,
        );
        self.log_evidence = evidence_formula(self.n_obs, self.shape, self.rate, self.log_det, self.prior_log_det, prior);
        self.invalidate_mean();
    }

    fn invalidate_mean(&mut self) {
        self.mean = OnceCell::new();
    }

    fn move_feature_to_back(&mut self, feature: usize) {
        let pos = self.position[feature];
        self.factor.move_to_back(pos, &mut self.whitened);
        let f = self.order.remove(pos);
        self.order.push(f);
        for (p, &g) in self.order.iter().enumerate().skip(pos) {
            self.position[g] = p;
        }
    }

    /// Reorders the factor so that the column pair of frequency `j` occupies
    /// the last two positions. The represented posterior is unchanged.
    pub fn prepare_swap(&mut self, j: usize) {
        let m = self.n_features() / 2;
        let n = self.n_features();
        if self.order[n - 2] == j && self.order[n - 1] == j + m {
            return;
        }
        self.move_feature_to_back(j);
        self.move_feature_to_back(j + m);
    }

    /// Scores replacing columns `(j, M + j)` of the current design by
    /// `(cos, sin)`. Only the columns of the other frequencies are read from
    /// `design`.
    pub fn propose_swap(
        &mut self,
        design: &Design<T>,
        j: usize,
        cos: &[T],
        sin: &[T],
        y: ArrayView1<'_, T>,
        prior: &NigPrior<T>,
    ) -> Result<SwapProposal<T>> {
        let n = self.n_features();
        let m = n / 2;
        check_dim("swap design columns", n, design.n_cols())?;
        check_dim("swap cos column", design.n_rows(), cos.len())?;
        check_dim("swap sin column", design.n_rows(), sin.len())?;
        self.prepare_swap(j);
        let lead = n - 2;
        let lambda0 = prior.precision();

        let (mut cross_cos, mut cross_sin): (Vec<T>, Vec<T>) =
            self.order[..lead].iter().map(|&f| dot2(design.column(f), cos, sin)).unzip();
        self.factor.forward_solve_leading2(lead, &mut cross_cos, &mut cross_sin);

        let not_pd = || BankError::NotPositiveDefinite {
            context: "bordered swap factor",
        };
        let d_cc = dot(cos, cos) + lambda0;
        let d_ss = dot(sin, sin) + lambda0;
        let d_cs = dot(cos, sin);
        let r_cc2 = d_cc - dot(&cross_cos, &cross_cos);
        if !(r_cc2 > T::zero()) || !r_cc2.is_finite() {
            return Err(not_pd());
        }
        let r_cc = r_cc2.sqrt();
        let r_cs = (d_cs - dot(&cross_cos, &cross_sin)) / r_cc;
        let r_ss2 = d_ss - dot(&cross_sin, &cross_sin) - r_cs * r_cs;
        if !(r_ss2 > T::zero()) || !r_ss2.is_finite() {
            return Err(not_pd());
        }
        let r_ss = r_ss2.sqrt();

        let y = y.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| y.to_vec());
        let h_cos = prior.mean_entry(j) * lambda0 + dot(cos, &y);
        let h_sin = prior.mean_entry(j + m) * lambda0 + dot(sin, &y);
        let z_lead = &self.whitened[..lead];
        let z_cos = (h_cos - dot(&cross_cos, z_lead)) / r_cc;
        let z_sin = (h_sin - dot(&cross_sin, z_lead) - r_cs * z_cos) / r_ss;

        let two = T::lit(2.0);
        let log_det = self.factor.log_det_leading(lead) + two * r_cc.ln() + two * r_ss.ln();
        let quad = dot(z_lead, z_lead) + z_cos * z_cos + z_sin * z_sin;
        let half = T::lit(0.5);
        let rate = clamp_rate(prior.b0 + half * (self.yty + self.prior_quad - quad), prior.b0);
        let log_evidence = evidence_formula(self.n_obs, self.shape, rate, log_det, self.prior_log_det, prior);
        Ok(SwapProposal {
            frequency: j,
            cross_cos,
            cross_sin,
            r_cc,
            r_cs,
            r_ss,
            z_cos,
            z_sin,
            h_cos,
            h_sin,
            log_det,
            rate,
            log_evidence,
        })
    }

    /// Applies a proposal produced by [`Self::propose_swap`] on this posterior
    /// (with no reordering in between).
    pub fn commit_swap(&mut self, proposal: SwapProposal<T>) {
        let n = self.n_features();
        let m = n / 2;
        let lead = n - 2;
        let j = proposal.frequency;
        debug_assert!(self.order[lead] == j && self.order[lead + 1] == j + m);
        for i in 0..lead {
            self.factor.set(i, lead, proposal.cross_cos[i]);
            self.factor.set(i, lead + 1, proposal.cross_sin[i]);
        }
        self.factor.set(lead, lead, proposal.r_cc);
        self.factor.set(lead, lead + 1, proposal.r_cs);
        self.factor.set(lead + 1, lead + 1, proposal.r_ss);
        self.whitened[lead] = proposal.z_cos;
        self.whitened[lead + 1] = proposal.z_sin;
        self.rhs[j] = proposal.h_cos;
        self.rhs[j + m] = proposal.h_sin;
        self.rate = proposal.rate;
        self.log_det = proposal.log_det;
        self.log_evidence = proposal.log_evidence;
        self.invalidate_mean();
    }

    /// Posterior after replacing columns `(j, M + j)` of `design` by
    /// `(cos, sin)`. Falls back to a full refit if the bordered factor loses
    /// positive definiteness.
    pub fn swap_frequency_update(
        &self,
        design: &Design<T>,
        j: usize,
        cos: &[T],
        sin: &[T],
        y: ArrayView1<'_, T>,
        prior: &NigPrior<T>,
    ) -> Result<Self> {
        let mut next = self.clone();
        match next.propose_swap(design, j, cos, sin, y, prior) {
            Ok(proposal) => {
                next.commit_swap(proposal);
                Ok(next)
            }
            Err(BankError::NotPositiveDefinite { .. }) => {
                log::warn!("swap update for frequency {j} lost positive definiteness; refactorizing");
                let mut modified = design.clone();
                modified.replace_frequency(j, cos, sin);
                Self::fit(&modified, y, prior)
            }
            Err(e) => Err(e),
        }
    }

    /// Posterior predictive mean `μnᵀφ` and variance
    /// `bn/(an − 1)·(1 + φᵀΛn⁻¹φ)`.
    pub fn predict_mean_var(&self, phi: &FeatureVector<T>) -> Result<(T, T)> {
        check_dim("prediction features", self.n_features(), phi.len())?;
        let mean = self.predict_mean(phi.as_slice());
        if !(self.shape > T::one()) {
            return Err(BankError::UndefinedVariance {
                shape: self.shape.as_f64(),
                mean: mean.as_f64(),
            });
        }
        let var = self.rate / (self.shape - T::one()) * (T::one() + self.precision_quad_form(phi.as_slice()));
        Ok((mean, var))
    }

    pub fn predict_mean(&self, phi: &[T]) -> T {
        dot(self.mean().as_slice().expect("contiguous"), phi)
    }
}

/// `bn ≥ b0` holds exactly; rounding in the quadratic term must not push it
/// below.
fn clamp_rate<T: Scalar>(rate: T, b0: T) -> T {
    rate.max(b0)
}

/// Free-function form of [`RegressionPosterior::swap_frequency_update`].
pub fn swap_frequency_update<T: Scalar>(
    post: &RegressionPosterior<T>,
    design: &Design<T>,
    j: usize,
    cos: &[T],
    sin: &[T],
    y: ArrayView1<'_, T>,
    prior: &NigPrior<T>,
) -> Result<RegressionPosterior<T>> {
    post.swap_frequency_update(design, j, cos, sin, y, prior)
}

pub fn predict_mean_var<T: Scalar>(post: &RegressionPosterior<T>, phi: &FeatureVector<T>) -> Result<(T, T)> {
    post.predict_mean_var(phi)
}
