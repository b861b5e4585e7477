//! Bayesian additive regression trees with Metropolis-Hastings tree moves
//! beyond birth and death: cutpoint perturbation, preconditioned
//! change-of-variable, and tree rotation.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod proposals;
pub mod sampler;
pub mod scalar;
pub mod structural;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tree = tree::RegressionTree<f64>;
pub type TreeNode = tree::Node<f64>;
pub type State = model::SumOfTreesState<f64>;
pub type Data = data::ScaledData<f64>;

pub type Tree32 = tree::RegressionTree<f32>;
pub type State32 = model::SumOfTreesState<f32>;
pub type Data32 = data::ScaledData<f32>;
