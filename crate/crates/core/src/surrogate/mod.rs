//! Gaussian-process surrogate: datasets, posterior inference, evidence,
//! hyperparameter fitting and function sampling.

mod dataset;
mod fit;
mod gp;
mod sample;

pub use dataset::{Dataset, ObservationRecord, RecordKey};
pub use fit::{default_hyperparameters, fit_hyperparameters, FitConfig, FitOutcome};
pub use gp::{log_marginal_likelihood, GpModel, Hyperparameters, ModelOptions, Posterior, NEGATIVE_VARIANCE_TOLERANCE};
pub use sample::{posterior_sample_at, sample_objective, GpSample};
