//! Fitted random-feature predictors: one or more frequency banks feeding a
//! Bayesian linear head, averaged over ensemble members.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::classification::{fit_laplace, moderated_probability, LaplacePosterior, LogisticPrior};
use crate::data::Task;
use crate::design::Design;
use crate::error::{check_dim, BankError, Result};
use crate::linalg::CholeskyFactor;
use crate::regression::{fit_posterior, NigPrior, RegressionPosterior};
use crate::rff::FrequencyMatrix;
use crate::scalar::{dot, Scalar};

/// Prior for the linear head.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadPrior<T> {
    Regression(NigPrior<T>),
    Classification(LogisticPrior<T>),
}

impl<T: Scalar> HeadPrior<T> {
    pub fn task(&self) -> Task {
        match self {
            HeadPrior::Regression(_) => Task::Regression,
            HeadPrior::Classification(_) => Task::Classification,
        }
    }
}

/// Posterior summary of the linear weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Head<T> {
    /// NIG posterior: `β ~ N(mean, σ_ε² Λ⁻¹)`, `σ_ε² ~ InvGamma(shape, rate)`.
    Regression {
        mean: Array1<T>,
        precision: CholeskyFactor<T>,
        shape: T,
        rate: T,
    },
    /// Laplace posterior `N(mode, S⁻¹)`.
    Classification { mode: Array1<T>, precision: CholeskyFactor<T> },
}

impl<T: Scalar> Head<T> {
    pub fn from_regression(post: &RegressionPosterior<T>) -> Result<Self> {
        Ok(Head::Regression {
            mean: post.mean().clone(),
            precision: post.precision_factor()?,
            shape: post.shape(),
            rate: post.rate(),
        })
    }

    pub fn from_laplace(lap: &LaplacePosterior<T>) -> Self {
        Head::Classification {
            mode: lap.mode().clone(),
            precision: lap.factor().clone(),
        }
    }

    /// Fits the head on `design`.
    pub fn fit(design: &Design<T>, y: ArrayView1<'_, T>, prior: &HeadPrior<T>) -> Result<Self> {
        match prior {
            HeadPrior::Regression(p) => Self::from_regression(&fit_posterior(design, y, p)?),
            HeadPrior::Classification(p) => {
                let lap = fit_laplace(design, y, p, None)?;
                if !lap.converged() {
                    log::warn!("logistic mode search stopped after {} iterations", lap.iterations());
                }
                Ok(Self::from_laplace(&lap))
            }
        }
    }

    pub fn task(&self) -> Task {
        match self {
            Head::Regression { .. } => Task::Regression,
            Head::Classification { .. } => Task::Classification,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Head::Regression { mean, .. } => mean.len(),
            Head::Classification { mode, .. } => mode.len(),
        }
    }

    pub fn weights(&self) -> &Array1<T> {
        match self {
            Head::Regression { mean, .. } => mean,
            Head::Classification { mode, .. } => mode,
        }
    }

    pub fn precision(&self) -> &CholeskyFactor<T> {
        match self {
            Head::Regression { precision, .. } | Head::Classification { precision, .. } => precision,
        }
    }
}

/// Frequency banks whose feature maps are concatenated in order, plus the
/// head fitted on them.
#[derive(Debug, Clone, PartialEq)]
pub struct Member<T> {
    pub banks: Vec<FrequencyMatrix<T>>,
    pub head: Head<T>,
}

/// Concatenated per-bank designs, bank order preserved.
pub fn bank_design<T: Scalar>(x: ArrayView2<'_, T>, banks: &[FrequencyMatrix<T>]) -> Result<Design<T>> {
    if banks.is_empty() {
        return Err(BankError::InvalidParameter("at least one frequency bank is required".into()));
    }
    if banks.len() == 1 {
        return Design::build(x, &banks[0]);
    }
    let blocks = banks.iter().map(|w| Design::build(x, w)).collect::<Result<Vec<_>>>()?;
    Design::concat(&blocks)
}

impl<T: Scalar> Member<T> {
    pub fn fit(x: ArrayView2<'_, T>, y: ArrayView1<'_, T>, banks: Vec<FrequencyMatrix<T>>, prior: &HeadPrior<T>) -> Result<Self> {
        let design = bank_design(x, &banks)?;
        let head = Head::fit(&design, y, prior)?;
        Ok(Self { banks, head })
    }

    pub fn input_dim(&self) -> usize {
        self.banks[0].dim()
    }

    /// Per-row predictions: regression gives `(mean, variance)` with `None`
    /// variance when the posterior shape is ≤ 1; classification gives
    /// `(probability, None)`.
    pub fn predict(&self, x: ArrayView2<'_, T>, plug_in: bool) -> Result<(Array1<T>, Option<Array1<T>>)> {
        let design = bank_design(x, &self.banks)?;
        check_dim("head features", self.head.n_features(), design.n_cols())?;
        let n = design.n_rows();
        let mut out = Array1::zeros(n);
        let w = self.head.weights().as_slice().expect("contiguous");
        match &self.head {
            Head::Regression {
                precision, shape, rate, ..
            } => {
                let defined = *shape > T::one();
                let mut var = Array1::zeros(n);
                for i in 0..n {
                    let phi = design.row(i);
                    out[i] = dot(w, &phi);
                    if defined {
                        var[i] = *rate / (*shape - T::one()) * (T::one() + precision.inv_quad_form(&phi));
                    }
                }
                Ok((out, defined.then_some(var)))
            }
            Head::Classification { precision, .. } => {
                for i in 0..n {
                    let phi = design.row(i);
                    let s2 = if plug_in { T::zero() } else { precision.inv_quad_form(&phi) };
                    out[i] = moderated_probability(dot(w, &phi), s2);
                }
                Ok((out, None))
            }
        }
    }
}

/// Averaged prediction of several members.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    /// Predictive mean (regression) or probability of label 1 (classification).
    pub mean: Array1<T>,
    /// Predictive variance of the member mixture, regression only.
    pub variance: Option<Array1<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    pub task: Task,
    pub members: Vec<Member<T>>,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(task: Task, members: Vec<Member<T>>) -> Result<Self> {
        if members.is_empty() {
            return Err(BankError::EmptyTrace);
        }
        let d = members[0].input_dim();
        for m in &members {
            if m.head.task() != task {
                return Err(BankError::InvalidParameter("ensemble members disagree on the task".into()));
            }
            check_dim("ensemble member input dimension", d, m.input_dim())?;
        }
        Ok(Self { task, members })
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    /// Arithmetic mean over members; regression variances combine by the law
    /// of total variance.
    pub fn predict(&self, x: ArrayView2<'_, T>, plug_in: bool) -> Result<Prediction<T>> {
        check_dim("prediction inputs", self.input_dim(), x.ncols())?;
        let n = x.nrows();
        let k = T::from_usize_lossy(self.members.len());
        let mut mean = Array1::<T>::zeros(n);
        let mut second = Array1::<T>::zeros(n);
        let mut have_var = self.task == Task::Regression;
        for m in &self.members {
            let (mu, var) = m.predict(x, plug_in)?;
            mean += &mu;
            match var {
                Some(v) if have_var => second += &(&v + &(&mu * &mu)),
                _ => have_var = false,
            }
        }
        mean /= k;
        let variance = have_var.then(|| {
            let mut v = second / k - &mean * &mean;
            v.mapv_inplace(|e| e.max(T::zero()));
            v
        });
        Ok(Prediction { mean, variance })
    }
}
