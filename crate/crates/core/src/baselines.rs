//! Fixed-kernel random-feature baselines: RKS with one kernel family and MKL
//! over a bank of families and scales.
//!
//! Every family is parameterized by a length-scale `ℓ`:
//!
//! | family  | kernel `k(t)`                 | frequency law, per coordinate |
//! |---------|-------------------------------|-------------------------------|
//! | rbf     | `exp(−‖t‖²/(2ℓ²))`            | `N(0, ℓ⁻²)`                   |
//! | laplace | `exp(−‖t‖₁/ℓ)`                | `Cauchy(0, 1/ℓ)`              |
//! | cauchy  | `Πᵢ (1 + tᵢ²/ℓ²)⁻¹`           | `Laplace(0, 1/ℓ)`             |
//!
//! MKL concatenates the banks' feature maps in bank order. The kernel weights
//! are absorbed into the linear head rather than fitted separately.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classification::LogisticPrior;
use crate::data::{Dataset, Task};
use crate::design::Design;
use crate::error::{check_dim, BankError, Result};
use crate::predictor::{bank_design, Head, HeadPrior, Member, Prediction};
use crate::regression::NigPrior;
use crate::rff::{feature_map, FeatureVector, FrequencyMatrix};
use crate::sampler::median_heuristic;
use crate::scalar::{softplus, Scalar};

/// Kernel families of one candidate and their frequency banks, in bank order.
type Candidate<T> = (Vec<KernelFamily<T>>, Vec<FrequencyMatrix<T>>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Laplace,
    Cauchy,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Laplace, KernelKind::Rbf, KernelKind::Cauchy];
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Laplace => "laplace",
            KernelKind::Cauchy => "cauchy",
        })
    }
}

impl FromStr for KernelKind {
    type Err = BankError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" | "gaussian" => Ok(KernelKind::Rbf),
            "laplace" => Ok(KernelKind::Laplace),
            "cauchy" => Ok(KernelKind::Cauchy),
            other => Err(BankError::InvalidParameter(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A shift-invariant kernel with length-scale `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFamily<T> {
    pub kind: KernelKind,
    pub scale: T,
}

impl<T: Scalar> KernelFamily<T> {
    pub fn new(kind: KernelKind, scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(BankError::InvalidParameter(format!("kernel scale must be positive, got {scale}")));
        }
        Ok(Self { kind, scale })
    }

    /// Closed-form `k(t)`.
    pub fn kernel(&self, t: ArrayView1<'_, T>) -> T {
        let l = self.scale;
        match self.kind {
            KernelKind::Rbf => {
                let sq = t.iter().fold(T::zero(), |a, &v| a + v * v);
                (-sq / (T::lit(2.0) * l * l)).exp()
            }
            KernelKind::Laplace => (-t.iter().fold(T::zero(), |a, &v| a + v.abs()) / l).exp(),
            KernelKind::Cauchy => t
                .iter()
                .fold(T::one(), |a, &v| a / (T::one() + v * v / (l * l))),
        }
    }

    /// Draws `m × d` frequencies from the family's spectral density.
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, m: usize, rng: &mut R) -> Result<FrequencyMatrix<T>> {
        let base = unit_frequencies(self.kind, d, m, rng)?;
        Ok(rescale(&base, self.scale))
    }
}

/// Public name for [`KernelFamily::sample`].
pub fn spectral_sampler_for<T: Scalar, R: Rng + ?Sized>(
    family: &KernelFamily<T>,
    d: usize,
    m: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix<T>> {
    family.sample(d, m, rng)
}

fn open_uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    loop {
        let u = T::unit_uniform(rng);
        if u > T::zero() {
            return u;
        }
    }
}

/// Frequencies of the unit-scale kernel; dividing by `ℓ` gives scale `ℓ`.
fn unit_frequencies<T: Scalar, R: Rng + ?Sized>(
    kind: KernelKind,
    d: usize,
    m: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix<T>> {
    if m == 0 || d == 0 {
        return Err(BankError::InvalidParameter("need at least one frequency and one input dimension".into()));
    }
    let half = T::lit(0.5);
    let w = Array2::from_shape_simple_fn((m, d), || match kind {
        KernelKind::Rbf => T::standard_normal(rng),
        KernelKind::Laplace => (T::lit(std::f64::consts::PI) * (open_uniform::<T, R>(rng) - half)).tan(),
        KernelKind::Cauchy => {
            let u = open_uniform::<T, R>(rng);
            if u < half {
                (u + u).ln()
            } else {
                -(T::lit(2.0) * (T::one() - u)).ln()
            }
        }
    });
    FrequencyMatrix::new(w)
}

fn rescale<T: Scalar>(base: &FrequencyMatrix<T>, scale: T) -> FrequencyMatrix<T> {
    FrequencyMatrix::new(base.view().mapv(|v| v / scale)).expect("rescaling keeps the shape")
}

/// Concatenated feature vector of `x` over `banks`, in bank order.
pub fn mkl_features<T: Scalar>(x: ArrayView1<'_, T>, banks: &[FrequencyMatrix<T>]) -> Result<FeatureVector<T>> {
    if banks.is_empty() {
        return Err(BankError::InvalidParameter("MKL needs at least one bank".into()));
    }
    let mut out = Vec::with_capacity(banks.iter().map(|b| b.n_features()).sum());
    for w in banks {
        out.extend_from_slice(feature_map(x, w)?.as_slice());
    }
    Ok(FeatureVector(Array1::from(out)))
}

/// Regularized linear head with penalty `λ‖β‖²`.
pub fn head_prior_for<T: Scalar>(task: Task, lambda: T) -> Result<HeadPrior<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(BankError::InvalidParameter(format!("regularizer must be positive, got {lambda}")));
    }
    let sigma = lambda.sqrt().recip();
    Ok(match task {
        Task::Regression => HeadPrior::Regression(NigPrior {
            sigma,
            ..NigPrior::default()
        }),
        Task::Classification => HeadPrior::Classification(LogisticPrior { weight_mean: None, sigma }),
    })
}

/// Ridge (regression) or penalized logistic (classification) fit on the
/// concatenated features of `banks`.
pub fn fit_banks<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    banks: Vec<FrequencyMatrix<T>>,
    task: Task,
    lambda: T,
) -> Result<Member<T>> {
    Member::fit(x, y, banks, &head_prior_for(task, lambda)?)
}

/// Point predictions of a baseline member (MAP probabilities for
/// classification).
pub fn predict_member<T: Scalar>(member: &Member<T>, x: ArrayView2<'_, T>) -> Result<Prediction<T>> {
    let (mean, variance) = member.predict(x, true)?;
    Ok(Prediction { mean, variance })
}

/// Hyperparameter grids shared by the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Total number of frequencies `M` (split across MKL banks).
    pub n_frequencies: usize,
    /// RKS scale grid as multiples of the median heuristic.
    pub scale_multipliers: Vec<f64>,
    /// Penalty grid.
    pub lambdas: Vec<f64>,
    /// Fraction of the training rows held out for grid selection.
    pub validation_fraction: f64,
    /// MKL bank families.
    pub mkl_kinds: Vec<KernelKind>,
    /// MKL bank scales as multiples of the median heuristic.
    pub mkl_multipliers: Vec<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            n_frequencies: 500,
            scale_multipliers: vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0],
            lambdas: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            validation_fraction: 0.2,
            mkl_kinds: KernelKind::ALL.to_vec(),
            mkl_multipliers: vec![0.25, 1.0, 4.0],
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BankError::InvalidParameter(m.into()));
        if self.n_frequencies == 0 {
            return bad("baseline n_frequencies must be at least 1");
        }
        if self.scale_multipliers.is_empty() || self.scale_multipliers.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("scale_multipliers must be a nonempty list of positive numbers");
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("lambdas must be a nonempty list of positive numbers");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.mkl_kinds.is_empty() || self.mkl_multipliers.is_empty() {
            return bad("MKL needs at least one family and one scale");
        }
        if self.mkl_multipliers.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("mkl_multipliers must be positive");
        }
        if self.n_frequencies < self.mkl_kinds.len() * self.mkl_multipliers.len() {
            return bad("n_frequencies must cover at least one frequency per MKL bank");
        }
        Ok(())
    }
}

/// A fitted baseline and the hyperparameters that won on validation.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFit<T> {
    pub member: Member<T>,
    pub families: Vec<KernelFamily<T>>,
    pub lambda: T,
    pub validation_score: f64,
}

impl<T: Scalar> BaselineFit<T> {
    pub fn predict(&self, x: ArrayView2<'_, T>) -> Result<Prediction<T>> {
        predict_member(&self.member, x)
    }
}

/// Squared error for regression, log loss for classification; lower is better.
fn validation_score<T: Scalar>(task: Task, pred: ArrayView1<'_, T>, y: ArrayView1<'_, T>) -> f64 {
    let n = y.len().max(1) as f64;
    match task {
        Task::Regression => pred.iter().zip(y).map(|(&p, &t)| (p - t).as_f64().powi(2)).sum::<f64>() / n,
        Task::Classification => {
            pred.iter()
                .zip(y)
                .map(|(&p, &t)| {
                    let p = p.as_f64().clamp(1e-12, 1.0 - 1e-12);
                    let logit = (p / (1.0 - p)).ln();
                    softplus(logit) - t.as_f64() * logit
                })
                .sum::<f64>()
                / n
        }
    }
}

fn split_validation<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(BankError::Data("validation split needs at least two rows".into()));
    }
    let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
    let mut fit = idx.split_off(n_val);
    let mut val = idx;
    fit.sort_unstable();
    val.sort_unstable();
    Ok((fit, val))
}

/// Picks the bank set and penalty with the best validation score, then refits
/// on all of `train`.
fn select_and_fit<T: Scalar, R: Rng + ?Sized>(
    train: &Dataset<T>,
    candidates: Vec<Candidate<T>>,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineFit<T>> {
    train.validate()?;
    let (fit_rows, val_rows) = split_validation(train.n_rows(), config.validation_fraction, rng)?;
    let fit = train.select(&fit_rows);
    let val = train.select(&val_rows);
    let mut best: Option<(f64, usize, T)> = None;
    for (c, (_, banks)) in candidates.iter().enumerate() {
        let design_fit = bank_design(fit.x.view(), banks)?;
        let design_val = bank_design(val.x.view(), banks)?;
        for &lam in &config.lambdas {
            let lambda = T::lit(lam);
            let head = Head::fit(&design_fit, fit.y.view(), &head_prior_for(train.task, lambda)?)?;
            let member = Member {
                banks: banks.clone(),
                head,
            };
            let pred = predict_on_design(&member, &design_val)?;
            let score = validation_score(train.task, pred.view(), val.y.view());
            if score.is_finite() && best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, c, lambda));
            }
        }
    }
    let (score, c, lambda) = best.ok_or_else(|| BankError::Data("no baseline grid point gave a finite score".into()))?;
    let (families, banks) = candidates.into_iter().nth(c).expect("candidate index in range");
    let member = fit_banks(train.x.view(), train.y.view(), banks, train.task, lambda)?;
    Ok(BaselineFit {
        member,
        families,
        lambda,
        validation_score: score,
    })
}

fn predict_on_design<T: Scalar>(member: &Member<T>, design: &Design<T>) -> Result<Array1<T>> {
    check_dim("head features", member.head.n_features(), design.n_cols())?;
    let w = member.head.weights();
    let eta = design.view().dot(w);
    Ok(match member.head.task() {
        Task::Regression => eta,
        Task::Classification => eta.mapv(|e| crate::scalar::sigmoid(e)),
    })
}

/// RKS with one kernel family; the scale (relative to the median heuristic)
/// and the penalty are chosen on a validation split of `train`.
pub fn rks_fit<T: Scalar, R: Rng + ?Sized>(
    train: &Dataset<T>,
    kind: KernelKind,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineFit<T>> {
    config.validate()?;
    let s = median_heuristic(train.x.view(), 1000, rng);
    let base = unit_frequencies(kind, train.dim(), config.n_frequencies, rng)?;
    let candidates = config
        .scale_multipliers
        .iter()
        .map(|&mult| {
            let family = KernelFamily::new(kind, s * T::lit(mult))?;
            Ok((vec![family], vec![rescale(&base, family.scale)]))
        })
        .collect::<Result<Vec<_>>>()?;
    select_and_fit(train, candidates, config, rng)
}

pub fn rks_fit_predict<T: Scalar, R: Rng + ?Sized>(
    train: &Dataset<T>,
    x_test: ArrayView2<'_, T>,
    kind: KernelKind,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<(BaselineFit<T>, Prediction<T>)> {
    let fit = rks_fit(train, kind, config, rng)?;
    let pred = fit.predict(x_test)?;
    Ok((fit, pred))
}

/// Splits `total` frequencies across `banks` as evenly as possible, earlier
/// banks taking the remainder.
pub fn split_budget(total: usize, banks: usize) -> Vec<usize> {
    (0..banks).map(|b| total / banks + usize::from(b < total % banks)).collect()
}

/// Draws one frequency bank per family, sharing the budget `m` equally.
pub fn mkl_banks<T: Scalar, R: Rng + ?Sized>(
    families: &[KernelFamily<T>],
    d: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<FrequencyMatrix<T>>> {
    if families.is_empty() || m < families.len() {
        return Err(BankError::InvalidParameter(format!(
            "{m} frequencies cannot cover {} banks",
            families.len()
        )));
    }
    families
        .iter()
        .zip(split_budget(m, families.len()))
        .map(|(f, mb)| f.sample(d, mb, rng))
        .collect()
}

/// MKL over `config.mkl_kinds × config.mkl_multipliers` scaled around the
/// median heuristic; only the penalty is selected on validation.
pub fn mkl_fit<T: Scalar, R: Rng + ?Sized>(train: &Dataset<T>, config: &BaselineConfig, rng: &mut R) -> Result<BaselineFit<T>> {
    config.validate()?;
    let s = median_heuristic(train.x.view(), 1000, rng);
    let families = config
        .mkl_kinds
        .iter()
        .flat_map(|&k| config.mkl_multipliers.iter().map(move |&m| (k, m)))
        .map(|(k, m)| KernelFamily::new(k, s * T::lit(m)))
        .collect::<Result<Vec<_>>>()?;
    let banks = mkl_banks(&families, train.dim(), config.n_frequencies, rng)?;
    select_and_fit(train, vec![(families, banks)], config, rng)
}

pub fn mkl_fit_predict<T: Scalar, R: Rng + ?Sized>(
    train: &Dataset<T>,
    x_test: ArrayView2<'_, T>,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<(BaselineFit<T>, Prediction<T>)> {
    let fit = mkl_fit(train, config, rng)?;
    let pred = fit.predict(x_test)?;
    Ok((fit, pred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rff::kernel_estimate_lag;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_forms() {
        let t = array![1.0, -2.0];
        let rbf = KernelFamily::new(KernelKind::Rbf, 2.0).unwrap();
        assert!((rbf.kernel(t.view()) - (-5.0f64 / 8.0).exp()).abs() < 1e-15);
        let lap = KernelFamily::new(KernelKind::Laplace, 2.0).unwrap();
        assert!((lap.kernel(t.view()) - (-1.5f64).exp()).abs() < 1e-15);
        let cau = KernelFamily::new(KernelKind::Cauchy, 2.0).unwrap();
        assert!((cau.kernel(t.view()) - 1.0 / (1.25 * 2.0)).abs() < 1e-15);
        assert!(KernelFamily::new(KernelKind::Rbf, 0.0).is_err());
        assert_eq!("Laplace".parse::<KernelKind>().unwrap(), KernelKind::Laplace);
        assert!("matern".parse::<KernelKind>().is_err());
    }

    #[test]
    fn monte_carlo_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in KernelKind::ALL {
            for scale in [1.0, 2.5] {
                let family = KernelFamily::new(kind, scale).unwrap();
                let w = spectral_sampler_for(&family, 1, 10_000, &mut rng).unwrap();
                for lag in [0.0, 0.5, 1.0, 3.0] {
                    let t = array![lag];
                    let est: f64 = kernel_estimate_lag(t.view(), &w).unwrap();
                    assert!((est - family.kernel(t.view())).abs() < 0.05, "{kind} {scale} {lag}");
                }
                assert_eq!(kernel_estimate_lag(array![0.0].view(), &w).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn unit_scale_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = spectral_sampler_for(&KernelFamily::new(KernelKind::Rbf, 1.0).unwrap(), 1, 10_000, &mut rng).unwrap();
        let est: f64 = kernel_estimate_lag(array![1.0].view(), &w).unwrap();
        assert!((est - (-0.5f64).exp()).abs() < 0.05);
        let w = spectral_sampler_for(&KernelFamily::new(KernelKind::Laplace, 1.0).unwrap(), 1, 10_000, &mut rng).unwrap();
        let est: f64 = kernel_estimate_lag(array![1.0].view(), &w).unwrap();
        assert!((est - (-1.0f64).exp()).abs() < 0.05);
    }

    #[test]
    fn mkl_layout() {
        let x = array![0.3, -1.2];
        let a = FrequencyMatrix::new(array![[1.0, 0.5]]).unwrap();
        let b = FrequencyMatrix::new(array![[-0.2, 2.0]]).unwrap();
        let single = mkl_features(x.view(), std::slice::from_ref(&a)).unwrap();
        assert_eq!(single, feature_map(x.view(), &a).unwrap());
        let both = mkl_features(x.view(), &[a.clone(), b.clone()]).unwrap();
        assert_eq!(both.len(), 4);
        let fa = feature_map(x.view(), &a).unwrap();
        let fb = feature_map(x.view(), &b).unwrap();
        assert_eq!(&both.as_slice()[..2], fa.as_slice());
        assert_eq!(&both.as_slice()[2..], fb.as_slice());

        let z = array![-0.7, 0.4];
        let other = mkl_features(z.view(), &[a.clone(), b.clone()]).unwrap();
        let sum: f64 = fa.dot(&feature_map(z.view(), &a).unwrap()) + fb.dot(&feature_map(z.view(), &b).unwrap());
        assert!((both.dot(&other) - sum).abs() < 1e-15);
        assert!(mkl_features::<f64>(x.view(), &[]).is_err());
    }

    #[test]
    fn budget_split() {
        assert_eq!(split_budget(10, 3), vec![4, 3, 3]);
        assert_eq!(split_budget(9, 9), vec![1; 9]);
    }

    fn toy_regression(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_simple_fn((n, 1), || 4.0 * f64::standard_normal(&mut rng));
        let y = x.column(0).mapv(|v| (0.7 * v).sin() + 0.1 * f64::standard_normal(&mut rng));
        Dataset::new(x, y, Task::Regression).unwrap()
    }

    #[test]
    fn infinite_shrinkage_predicts_zero() {
        let data = toy_regression(50, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = KernelFamily::new(KernelKind::Rbf, 1.0).unwrap().sample(1, 20, &mut rng).unwrap();
        let member = fit_banks(data.x.view(), data.y.view(), vec![w], Task::Regression, 1e12).unwrap();
        let pred = predict_member(&member, data.x.view()).unwrap();
        assert!(pred.mean.iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn interpolates_linear_in_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((80, 1), || 3.0 * f64::standard_normal(&mut rng));
        let w = KernelFamily::new(KernelKind::Rbf, 1.0).unwrap().sample(1, 6, &mut rng).unwrap();
        let beta = Array1::from_shape_simple_fn(12, || f64::standard_normal(&mut rng));
        let y = bank_design(x.view(), std::slice::from_ref(&w)).unwrap().view().dot(&beta);
        let member = fit_banks(x.view(), y.view(), vec![w], Task::Regression, 1e-8).unwrap();
        let pred = predict_member(&member, x.view()).unwrap();
        assert!(crate::data::mse(pred.mean.view(), y.view()).unwrap() < 1e-4);
    }

    #[test]
    fn single_bank_mkl_is_rks() {
        let data = toy_regression(40, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = KernelFamily::new(KernelKind::Cauchy, 2.0).unwrap().sample(1, 10, &mut rng).unwrap();
        let rks = fit_banks(data.x.view(), data.y.view(), vec![w.clone()], Task::Regression, 0.1).unwrap();
        let fam = [KernelFamily::new(KernelKind::Cauchy, 2.0).unwrap()];
        let banks = mkl_banks(&fam, 1, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(banks, vec![w]);
        let mkl = fit_banks(data.x.view(), data.y.view(), banks, Task::Regression, 0.1).unwrap();
        assert_eq!(rks, mkl);
    }

    #[test]
    fn selection_is_deterministic_and_fits() {
        let data = toy_regression(200, 4);
        let config = BaselineConfig {
            n_frequencies: 45,
            ..BaselineConfig::default()
        };
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rks_fit_predict(&data, data.x.view(), KernelKind::Rbf, &config, &mut rng).unwrap()
        };
        let (a, pa) = run(9);
        let (b, pb) = run(9);
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert!(crate::data::mse(pa.mean.view(), data.y.view()).unwrap() < 0.05);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (fit, pred) = mkl_fit_predict(&data, data.x.view(), &config, &mut rng).unwrap();
        assert_eq!(fit.families.len(), 9);
        assert_eq!(fit.member.banks.iter().map(|b| b.n_frequencies()).sum::<usize>(), 45);
        assert!(crate::data::mse(pred.mean.view(), data.y.view()).unwrap() < 0.05);
    }

    #[test]
    fn classification_baseline() {
        let data = crate::data::two_moons::<f64>(300, 0.1, 5).unwrap();
        let config = BaselineConfig {
            n_frequencies: 50,
            ..BaselineConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, pred) = rks_fit_predict(&data, data.x.view(), KernelKind::Rbf, &config, &mut rng).unwrap();
        assert!(pred.mean.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(crate::data::error_rate(pred.mean.view(), data.y.view()).unwrap() < 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(BaselineConfig::default().validate().is_ok());
        let bad = BaselineConfig {
            lambdas: vec![],
            ..BaselineConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BaselineConfig {
            n_frequencies: 4,
            ..BaselineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
