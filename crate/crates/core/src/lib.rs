//! Finite skew-normal mixtures fitted by penalized maximum likelihood.
//!
//! The likelihood of a skew-normal mixture is unbounded as a scale collapses
//! onto an observation, and shape estimates can run off to infinity. Adding
//! penalties on `σ²` and `λ` to the log-likelihood keeps both in check; the
//! penalized estimator is computed by ECM or ECME iterations built on the
//! half-normal latent representation.

pub mod datasets;
pub mod density;
pub mod error;
pub mod estimator;
pub mod init;
pub mod metrics;
pub mod penalty;
pub mod sampler;
pub mod special;
pub mod study;

pub use density::{delta_of_lambda, lambda_of_delta, loglik, mixture_logpdf, sn_logpdf, SnComponent, SnMixture};
pub use error::{Error, Result};
pub use estimator::{
    fit, fit_multistart, label_sort, profile_lrt_me, Algorithm, FitConfig, FitResult, InitScheme, MeResult,
};
pub use penalty::{penalized_loglik, LambdaPenalty, PenaltySpec, SigmaPenalty};
pub use sampler::{sample_mixture, RngHandle};
