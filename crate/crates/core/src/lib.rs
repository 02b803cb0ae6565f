//! Sparsity-aware randomized smoothing certificates for discrete data.
//!
//! The crate computes exact (rational) robustness certificates for smoothed
//! classifiers whose inputs are binary or categorical vectors. Noise flips
//! zeros with probability `p_plus` and non-zeros with probability `p_minus`,
//! so sparse inputs can be smoothed without drowning them in noisy ones.
//!
//! Layout:
//! - [`types`]: validated domain types shared by everything else.
//! - [`exactmath`]: Poisson-Binomial / multinomial PMFs and Clopper-Pearson bounds.
//! - [`regions`]: constant-likelihood-ratio region tables.
//! - [`certify`]: greedy worst-case solvers, radius search and batch certification.
//! - [`confidence`]: vote counts to class probability bounds.
//! - [`smoothing`]: the noise process, vote collection and toy classifiers.
//! - [`oracle`]: brute-force references used by the test suites.

pub mod certify;
pub mod confidence;
pub mod error;
pub mod exactmath;
pub mod oracle;
pub mod rational;
pub mod regions;
pub mod smoothing;
pub mod types;

pub use error::{Error, Result};
pub use num::BigRational;
pub use types::{
    BoundMode, CertResult, ClassBounds, ClassId, DiscreteVector, NoiseSpec, Perturbation,
    RadiiSpec, Smoothing, VoteRecord,
};
