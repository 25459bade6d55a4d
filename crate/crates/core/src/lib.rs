//! Offline combinatorial optimization on Euclidean TSP.
//!
//! Historical `(instance, route, length)` triplets train a pairwise-ranking
//! surrogate. Optimization anneals against the surrogate score, optionally
//! penalized by the squared Mahalanobis distance of the surrogate's last
//! hidden layer from the training-feature distribution, so the search stays
//! where the surrogate has seen data.

pub mod anneal;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod objective;
pub mod ood;
pub mod surrogate;
pub mod tsp;

pub use error::{Error, Result};
