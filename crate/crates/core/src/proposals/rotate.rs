use rand::Rng;

use super::{decide, ProposalKind, Rejection, Step, Target, Terms};
use crate::scalar::Real;
use crate::structural::propose_rotation;
use crate::tree::RegressionTree;

/// Rotate at a uniformly chosen internal non-root node.
///
/// The likelihood change is evaluated only over the leaves under the
/// rotation node's parent; the rest of the tree is untouched.
pub fn propose_rotate<F: Real, R: Rng + ?Sized>(
    tree: &RegressionTree<F>,
    target: &Target<'_, F>,
    rng: &mut R,
) -> Step<F> {
    let kind = ProposalKind::Rotate;
    let nodes = tree.rotatable_ids();
    if nodes.is_empty() {
        return Step::reject(kind, Rejection::Infeasible);
    }
    let id = nodes[rng.random_range(0..nodes.len())];
    let proposal = match propose_rotation(tree, id, rng) {
        Ok(p) => p,
        Err(e) => return Step::reject(kind, e.into()),
    };
    let parent = id.parent().expect("rotatable nodes have parents");
    if target.hyper.max_depth.is_some_and(|d| proposal.tree.depth() > d) {
        return Step::reject(kind, Rejection::Depth);
    }
    let Some(il_new) = target.local_il(&proposal.tree, parent) else {
        return Step::reject(kind, Rejection::MinLeaf);
    };
    let il_old = target.local_il(tree, parent).expect("current tree is admissible");
    let delta = il_new - il_old;
    let terms = Terms {
        delta,
        delta_log_il: delta,
        log_prior_ratio: target.log_prior(&proposal.tree) - target.log_prior(tree),
        log_proposal_ratio: proposal.log_proposal_ratio(),
    };
    decide(kind, parent, proposal.tree, terms, rng)
}
