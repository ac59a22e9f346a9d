//! Importance Markov chain sampling.
//!
//! An instrumental chain targeting `pi_tilde` is turned into a chain whose
//! first marginal targets `pi` by replicating each instrumental point a random
//! number of times with mean `kappa * pi / pi_tilde`. The [`oracle`] module
//! builds the resulting kernels exactly on finite state spaces.
//!
//! The numerical core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.

pub mod cli;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod replication;
pub mod rng;
pub mod scalar;

pub use error::{ImcError, Result};
pub use rng::RandomSource;

pub type FiniteChainSpecF64 = oracle::FiniteChainSpec<f64>;
pub type MatrixF64 = linalg::Matrix<f64>;
pub type RunLengthSampleF64 = engine::RunLengthSample<Vec<f64>, f64>;
pub type GaussianMixtureF64 = model::GaussianMixture<f64>;
pub type StudentTF64 = model::StudentT<f64>;
pub type CltVarianceReportF64 = diagnostics::CltVarianceReport<f64>;
pub type StationaryF64 = oracle::Stationary<f64>;
