//! Bayesian nonparametric kernel learning with random Fourier features.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod classification;
pub mod cli;
pub mod data;
pub mod design;
pub mod error;
pub mod linalg;
pub mod model;
pub mod predictor;
pub mod regression;
pub mod rff;
pub mod sampler;
pub mod scalar;
pub mod spectral;

pub use error::{BankError, Result};

pub type FrequencyMatrixF64 = rff::FrequencyMatrix<f64>;
pub type SpectralStateF64 = spectral::SpectralState<f64>;
pub type SamplerConfigF64 = sampler::SamplerConfig<f64>;
pub type ChainTraceF64 = sampler::ChainTrace<f64>;
pub type DatasetF64 = data::Dataset<f64>;
pub type RegressionPosteriorF64 = regression::RegressionPosterior<f64>;
pub type LaplacePosteriorF64 = classification::LaplacePosterior<f64>;
pub type EnsembleF64 = predictor::Ensemble<f64>;
