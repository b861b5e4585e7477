//! Binary regression trees: split rules on a discrete cutpoint lattice,
//! routing, and the cutpoint-set queries used by the perturb proposal.

mod flat;
mod grid;
mod node;
mod random;
mod serialize;

pub use flat::CompiledTree;
pub use grid::{CutInterval, CutpointGrid, SplitRule, DEFAULT_CUTPOINTS};
pub use node::{preorder_cmp, Node, NodeId, RegressionTree};
pub use random::{all_trees, random_tree};
pub use serialize::to_canonical;

#[cfg(test)]
pub(crate) use node::tests as fixtures;
