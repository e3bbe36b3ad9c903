//! Parameter estimation for mixtures of multinomial laws produced by
//! repeated quantum non-demolition measurements.
//!
//! The crate covers the model layer (finite-outcome families indexed by a
//! hidden component), the QND construction of such families from
//! Hamiltonians, seeded simulation, maximum-likelihood estimation and a set
//! of Monte-Carlo experiments probing the large-`n` behaviour.

// `!(x > y)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimate;
pub mod family;
pub mod info;
pub mod lab;
pub mod linalg;
pub mod optimize;
pub mod presets;
pub mod quantum;
pub mod report;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use estimate::{limit_loglik, loglik, loglik_component, logsum_of_sequences, mle, EstimationReport, LogLikelihood, MleOptions};
pub use family::{Alphabet, ClosureModel, ComponentSet, MixtureWeights, ParameterBox, ParametricFamily, ProbabilityModel, Regularity};
pub use info::{check_identifiability, fisher_information, kl_divergence, kl_matrix, shannon_entropy, IdentifiabilityReport, InfoMatrix};
pub use quantum::{Filter, FilterState, HamiltonianModel, LinearHamiltonians, QndSystem};
pub use simulate::{counts, derive_seed, sample_mixture_trajectory, sample_trajectory, CountVector, Trajectory};
