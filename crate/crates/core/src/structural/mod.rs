//! Tree surgery behind the rotation proposal: cutting a subtree along an
//! imposed rule, merging cut halves back together, and rotating at a node.

mod cut;
mod merge;
mod rotate;

pub use cut::{cut_left, cut_right};
pub use merge::{count_merges, enumerate_merges, merge_random, nontrivial_merges, MergeCount, MergeSet};
pub use rotate::{
    has_twin_children, propose_rotation, rotate_and_cut, rotate_setup, rotate_setup_left, rotate_setup_right,
    rotation_outcomes, rotation_transition_probability, Direction, Inadmissible, RotationProposal,
};
