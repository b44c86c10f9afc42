//! Collapsed Dirichlet-process Gaussian mixture over the random frequencies.
//!
//! Mixture weights are integrated out through the Chinese restaurant process;
//! only assignments, per-component counts and per-component Gaussian
//! parameters are kept. Component parameters have a Normal-Inverse-Wishart
//! base measure and are resampled from their conjugate posterior.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{check_dim, BankError, Result};
use crate::linalg::{symmetrize, CholeskyFactor};
use crate::rff::{categorical, FrequencyMatrix, GaussianComponent, GaussianMixtureSpec, MixtureComponent};
use crate::scalar::{log_sum_exp, Scalar};

pub type ComponentParams<T> = GaussianComponent<T>;

/// Normal-Inverse-Wishart parameters `(μ0, κ0, Ψ0, ν0)`:
/// `Σ ~ W⁻¹(Ψ0, ν0)`, `μ | Σ ~ N(μ0, Σ/κ0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwParams<T> {
    pub mean: Array1<T>,
    pub kappa: T,
    pub scale: Array2<T>,
    pub dof: T,
}

pub type NiwPrior<T> = NiwParams<T>;
pub type NiwPosterior<T> = NiwParams<T>;

impl<T: Scalar> NiwParams<T> {
    pub fn new(mean: Array1<T>, kappa: T, scale: Array2<T>, dof: T) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(BankError::InvalidParameter("NIW dimension must be positive".into()));
        }
        check_dim("NIW scale rows", d, scale.nrows())?;
        check_dim("NIW scale cols", d, scale.ncols())?;
        if !(kappa > T::zero()) {
            return Err(BankError::InvalidParameter(format!("NIW kappa must be positive, got {kappa}")));
        }
        if !(dof > T::from_usize_lossy(d) - T::one()) {
            return Err(BankError::InvalidParameter(format!(
                "NIW degrees of freedom must exceed d - 1 = {}, got {dof}",
                d - 1
            )));
        }
        CholeskyFactor::new(scale.view(), "NIW scale")
            .map_err(|_| BankError::InvalidCovariance("NIW scale matrix is not positive definite".into()))?;
        Ok(Self { mean, kappa, scale, dof })
    }

    /// `μ0 = 0, κ0 = 1, Ψ0 = I, ν0 = d + 2`.
    pub fn default_for(d: usize) -> Self {
        Self {
            mean: Array1::zeros(d),
            kappa: T::one(),
            scale: Array2::eye(d),
            dof: T::from_usize_lossy(d + 2),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Conjugate update from the rows of `observations`. An empty set returns the
/// prior unchanged.
pub fn niw_posterior<T: Scalar>(prior: &NiwPrior<T>, observations: ArrayView2<'_, T>) -> Result<NiwPosterior<T>> {
    let d = prior.dim();
    check_dim("NIW observation dimension", d, observations.ncols())?;
    let m = observations.nrows();
    if m == 0 {
        return Ok(prior.clone());
    }
    let mf = T::from_usize_lossy(m);
    let xbar = observations.sum_axis(Axis(0)) / mf;
    let mut scale = prior.scale.clone();
    for row in observations.rows() {
        let r = &row - &xbar;
        for i in 0..d {
            for j in 0..d {
                scale[[i, j]] += r[i] * r[j];
            }
        }
    }
    let kappa_n = prior.kappa + mf;
    let shrink = prior.kappa * mf / kappa_n;
    let diff = &xbar - &prior.mean;
    for i in 0..d {
        for j in 0..d {
            scale[[i, j]] += shrink * diff[i] * diff[j];
        }
    }
    symmetrize(&mut scale);
    let mean = (&prior.mean * prior.kappa + &xbar * mf) / kappa_n;
    Ok(NiwParams {
        mean,
        kappa: kappa_n,
        scale,
        dof: prior.dof + mf,
    })
}

/// Draws `Σ ~ W⁻¹(Ψ, ν)` by the Bartlett decomposition, then `μ ~ N(m, Σ/κ)`.
pub fn sample_component_params<T: Scalar, R: Rng + ?Sized>(
    params: &NiwParams<T>,
    rng: &mut R,
) -> Result<ComponentParams<T>> {
    let d = params.dim();
    let u = CholeskyFactor::new(params.scale.view(), "NIW scale")
        .map_err(|_| BankError::InvalidCovariance("NIW scale matrix is not positive definite".into()))?;

    // Lower-triangular Bartlett factor.
    let mut a = Array2::<T>::zeros((d, d));
    for i in 0..d {
        let dof = params.dof - T::from_usize_lossy(i);
        a[[i, i]] = T::chi_squared(rng, dof).sqrt();
        for j in 0..i {
            a[[i, j]] = T::standard_normal(rng);
        }
    }
    // B = A⁻¹ U, so that Σ = BᵀB.
    let mut b = Array2::<T>::zeros((d, d));
    for col in 0..d {
        for i in 0..d {
            let mut s = if col >= i { u.get(i, col) } else { T::zero() };
            for k in 0..i {
                s -= a[[i, k]] * b[[k, col]];
            }
            b[[i, col]] = s / a[[i, i]];
        }
    }
    let mut cov = b.t().dot(&b);
    symmetrize(&mut cov);
    let z = Array1::from_shape_fn(d, |_| T::standard_normal(rng));
    let mean = &params.mean + &(b.t().dot(&z) / params.kappa.sqrt());
    ComponentParams::new(mean, cov)
}

/// Current spectral mixture state. Labels are always dense (`0..K`) and every
/// live component owns at least one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState<T> {
    frequencies: FrequencyMatrix<T>,
    assignments: Vec<usize>,
    components: Vec<ComponentParams<T>>,
    counts: Vec<usize>,
    alpha: T,
}

impl<T: Scalar> SpectralState<T> {
    pub fn new(
        frequencies: FrequencyMatrix<T>,
        assignments: Vec<usize>,
        components: Vec<ComponentParams<T>>,
        alpha: T,
    ) -> Result<Self> {
        check_dim("assignment vector", frequencies.n_frequencies(), assignments.len())?;
        if !(alpha > T::zero()) {
            return Err(BankError::InvalidParameter(format!("DP concentration must be positive, got {alpha}")));
        }
        let mut counts = vec![0usize; components.len()];
        for &z in &assignments {
            let slot = counts
                .get_mut(z)
                .ok_or_else(|| BankError::InvalidParameter(format!("assignment {z} has no component")))?;
            *slot += 1;
        }
        if counts.contains(&0) {
            return Err(BankError::InvalidParameter("every component needs at least one frequency".into()));
        }
        for c in &components {
            check_dim("component dimension", frequencies.dim(), c.dim())?;
        }
        Ok(Self {
            frequencies,
            assignments,
            components,
            counts,
            alpha,
        })
    }

    /// All frequencies in one component whose parameters are drawn from the NIW
    /// posterior given `frequencies`.
    pub fn single_component<R: Rng + ?Sized>(
        frequencies: FrequencyMatrix<T>,
        prior: &NiwPrior<T>,
        alpha: T,
        rng: &mut R,
    ) -> Result<Self> {
        let post = niw_posterior(prior, frequencies.view())?;
        let params = sample_component_params(&post, rng)?;
        let m = frequencies.n_frequencies();
        Self::new(frequencies, vec![0; m], vec![params], alpha)
    }

    pub fn frequencies(&self) -> &FrequencyMatrix<T> {
        &self.frequencies
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn components(&self) -> &[ComponentParams<T>] {
        &self.components
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_frequencies(&self) -> usize {
        self.assignments.len()
    }

    pub fn dim(&self) -> usize {
        self.frequencies.dim()
    }

    /// The Gaussian that frequency `j` is currently assigned to.
    pub fn component_of(&self, j: usize) -> &ComponentParams<T> {
        &self.components[self.assignments[j]]
    }

    pub fn set_frequency(&mut self, j: usize, omega: ndarray::ArrayView1<'_, T>) -> Result<()> {
        self.frequencies.set_row(j, omega)
    }

    pub fn set_component_params(&mut self, k: usize, params: ComponentParams<T>) -> Result<()> {
        check_dim("component dimension", self.dim(), params.dim())?;
        self.components[k] = params;
        Ok(())
    }

    pub fn check_invariants(&self) -> Result<()> {
        let k = self.components.len();
        let mut counts = vec![0usize; k];
        for &z in &self.assignments {
            if z >= k {
                return Err(BankError::InvalidParameter(format!("assignment {z} out of range (K = {k})")));
            }
            counts[z] += 1;
        }
        if counts != self.counts {
            return Err(BankError::InvalidParameter("cached counts disagree with assignments".into()));
        }
        if counts.contains(&0) {
            return Err(BankError::InvalidParameter("empty component is still live".into()));
        }
        if counts.iter().sum::<usize>() != self.frequencies.n_frequencies() {
            return Err(BankError::InvalidParameter("counts do not sum to M".into()));
        }
        Ok(())
    }

    /// Removes frequency `j` from its component, deleting the component (and
    /// compacting labels) if it empties.
    fn detach(&mut self, j: usize) {
        let z = self.assignments[j];
        self.counts[z] -= 1;
        self.assignments[j] = usize::MAX;
        if self.counts[z] == 0 {
            self.counts.remove(z);
            self.components.remove(z);
            for a in self.assignments.iter_mut() {
                if *a != usize::MAX && *a > z {
                    *a -= 1;
                }
            }
        }
    }

    fn attach(&mut self, j: usize, choice: usize, fresh: ComponentParams<T>) {
        if choice == self.components.len() {
            self.components.push(fresh);
            self.counts.push(1);
        } else {
            self.counts[choice] += 1;
        }
        self.assignments[j] = choice;
    }

    fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.components.len()];
        for (j, &z) in self.assignments.iter().enumerate() {
            groups[z].push(j);
        }
        groups
    }
}

/// Unnormalized CRP weight for joining a table with `count` other customers
/// (or opening a new one when `count == 0`).
fn crp_prior_weight<T: Scalar>(count: usize, alpha: T) -> T {
    if count == 0 {
        alpha
    } else {
        T::from_usize_lossy(count)
    }
}

/// Normalizes log-weights into probabilities.
fn normalize_log_weights<T: Scalar>(log_w: &[T]) -> Vec<T> {
    let lse = log_sum_exp(log_w);
    log_w.iter().map(|&l| (l - lse).exp()).collect()
}

fn crp_log_weights<T: Scalar>(
    omega: ndarray::ArrayView1<'_, T>,
    counts: &[usize],
    components: &[ComponentParams<T>],
    alpha: T,
    fresh: &ComponentParams<T>,
) -> Result<Vec<T>> {
    let mut log_w = Vec::with_capacity(components.len() + 1);
    for (c, &m) in components.iter().zip(counts) {
        if m == 0 {
            log_w.push(T::neg_infinity());
        } else {
            log_w.push(crp_prior_weight(m, alpha).ln() + c.log_pdf(omega)?);
        }
    }
    log_w.push(crp_prior_weight(0, alpha).ln() + fresh.log_pdf(omega)?);
    Ok(log_w)
}

/// Conditional distribution of `Z_j` given everything else.
#[derive(Debug, Clone)]
pub struct CrpDraw<T> {
    /// Entry `k < K` is the probability of joining existing component `k`
    /// (zero when `j` is its only member); entry `K` opens a new component.
    pub probabilities: Vec<T>,
    /// Parameters of the new component, drawn once from the NIW prior.
    pub new_component: ComponentParams<T>,
}

pub fn crp_assignment_distribution<T: Scalar, R: Rng + ?Sized>(
    j: usize,
    state: &SpectralState<T>,
    prior: &NiwPrior<T>,
    rng: &mut R,
) -> Result<CrpDraw<T>> {
    let fresh = sample_component_params(prior, rng)?;
    crp_assignment_distribution_with(j, state, fresh)
}

/// Same as [`crp_assignment_distribution`] with the new-component parameters
/// supplied by the caller.
pub fn crp_assignment_distribution_with<T: Scalar>(
    j: usize,
    state: &SpectralState<T>,
    fresh: ComponentParams<T>,
) -> Result<CrpDraw<T>> {
    let mut counts = state.counts.clone();
    counts[state.assignments[j]] -= 1;
    let omega = state.frequencies.row(j);
    let log_w = crp_log_weights(omega, &counts, &state.components, state.alpha, &fresh)?;
    Ok(CrpDraw {
        probabilities: normalize_log_weights(&log_w),
        new_component: fresh,
    })
}

/// One Gibbs sweep over all assignments `Z_0 … Z_{M-1}`.
pub fn gibbs_sample_assignments<T: Scalar, R: Rng + ?Sized>(
    state: &mut SpectralState<T>,
    prior: &NiwPrior<T>,
    rng: &mut R,
) -> Result<()> {
    for j in 0..state.n_frequencies() {
        state.detach(j);
        let fresh = sample_component_params(prior, rng)?;
        let log_w = crp_log_weights(
            state.frequencies.row(j),
            &state.counts,
            &state.components,
            state.alpha,
            &fresh,
        )?;
        let probs = normalize_log_weights(&log_w);
        let choice = categorical(&probs, rng);
        state.attach(j, choice, fresh);
    }
    Ok(())
}

/// Redraws every live component's `(μ, Σ)` from its NIW posterior.
pub fn resample_components<T: Scalar, R: Rng + ?Sized>(
    state: &mut SpectralState<T>,
    prior: &NiwPrior<T>,
    rng: &mut R,
) -> Result<()> {
    for (k, members) in state.members().into_iter().enumerate() {
        let obs = state.frequencies.view().select(Axis(0), &members);
        let post = niw_posterior(prior, obs.view())?;
        state.components[k] = sample_component_params(&post, rng)?;
    }
    Ok(())
}

/// Learned spectral density with weights `m_k / M`.
pub fn state_to_mixture_spec<T: Scalar>(state: &SpectralState<T>) -> Result<GaussianMixtureSpec<T>> {
    let m = T::from_usize_lossy(state.n_frequencies());
    let components = state
        .components
        .iter()
        .zip(&state.counts)
        .map(|(c, &count)| MixtureComponent {
            weight: T::from_usize_lossy(count) / m,
            gaussian: c.clone(),
        })
        .collect();
    GaussianMixtureSpec::new(components)
}

/// Log CRP probability of the partition `assignments`, accumulated by seating
/// items in `order`.
pub fn crp_log_prior<T: Scalar>(assignments: &[usize], order: &[usize], alpha: T) -> T {
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    let mut total = T::zero();
    for (seated, &i) in order.iter().enumerate() {
        let z = assignments[i];
        let denom = T::from_usize_lossy(seated) + alpha;
        total += (crp_prior_weight(counts[z], alpha) / denom).ln();
        counts[z] += 1;
    }
    total
}
