//! Network-augmented bivariate GLMM for trade-credit claim risk.
//!
//! The crate models an insured trade network as a directed graph, derives
//! degree-centrality covariates from it, fits a logistic/gamma GLMM with
//! crossed buyer, seller and policy random effects by stochastic EM, and
//! scores connections with posterior-predictive claim probabilities.

pub mod centrality;
pub mod error;
pub mod graph;
pub mod likelihood;
pub mod oracle;
pub mod predict;
pub mod rng;
pub mod sem;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
