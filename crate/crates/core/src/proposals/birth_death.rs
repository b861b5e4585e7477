use rand::Rng;

use super::{decide, ProposalKind, Rejection, Step, Target, Terms};
use crate::scalar::Real;
use crate::tree::{Node, NodeId, RegressionTree, SplitRule};

/// Leaves that may be split without exceeding the depth limit.
pub fn growable_leaves<F: Real>(tree: &RegressionTree<F>, max_depth: Option<usize>) -> Vec<NodeId> {
    let mut ids = tree.leaf_ids();
    if let Some(d) = max_depth {
        ids.retain(|id| id.depth() < d);
    }
    ids
}

/// Probability of choosing birth over death on `tree`.
fn p_birth<F: Real>(tree: &RegressionTree<F>, max_depth: Option<usize>) -> f64 {
    let can_grow = !growable_leaves(tree, max_depth).is_empty();
    let can_prune = !tree.root().is_leaf();
    match (can_grow, can_prune) {
        (true, true) => 0.5,
        (true, false) => 1.0,
        (false, _) => 0.0,
    }
}

/// Birth or death, 50/50 when both are possible and otherwise whichever is.
pub fn propose_birth_death<F: Real, R: Rng + ?Sized>(
    tree: &RegressionTree<F>,
    target: &Target<'_, F>,
    rng: &mut R,
) -> Step<F> {
    let pb = p_birth(tree, target.hyper.max_depth);
    if pb == 0.0 && tree.root().is_leaf() {
        return Step::reject(ProposalKind::Birth, Rejection::Infeasible);
    }
    if rng.random::<f64>() < pb {
        propose_birth(tree, target, rng)
    } else {
        propose_death(tree, target, rng)
    }
}

/// Split a uniformly chosen growable leaf on a rule drawn from its prior.
pub fn propose_birth<F: Real, R: Rng + ?Sized>(
    tree: &RegressionTree<F>,
    target: &Target<'_, F>,
    rng: &mut R,
) -> Step<F> {
    let kind = ProposalKind::Birth;
    let max_depth = target.hyper.max_depth;
    let leaves = growable_leaves(tree, max_depth);
    if leaves.is_empty() {
        return Step::reject(kind, Rejection::Infeasible);
    }
    let id = leaves[rng.random_range(0..leaves.len())];
    let grid = &target.data.grid;
    let var = rng.random_range(0..grid.n_vars());
    let cut = rng.random_range(0..grid.size(var));
    let mut candidate = tree.clone();
    *candidate.node_mut(id).expect("leaf exists") =
        Node::split(SplitRule::new(var, cut), Node::leaf(F::zero()), Node::leaf(F::zero()));

    let Some(il_new) = target.local_il(&candidate, id) else {
        return Step::reject(kind, Rejection::MinLeaf);
    };
    let il_old = target.local_il(tree, id).expect("current tree is admissible");

    let log_q_fwd = p_birth(tree, max_depth).ln()
        - (leaves.len() as f64).ln()
        - ((grid.n_vars() * grid.size(var)) as f64).ln();
    let log_q_rev = (1.0 - p_birth(&candidate, max_depth)).ln() - (candidate.nog_ids().len() as f64).ln();
    let delta = il_new - il_old;
    let terms = Terms {
        delta,
        delta_log_il: delta,
        log_prior_ratio: target.log_prior(&candidate) - target.log_prior(tree),
        log_proposal_ratio: log_q_rev - log_q_fwd,
    };
    decide(kind, id, candidate, terms, rng)
}

/// Collapse a uniformly chosen internal node whose children are both leaves.
pub fn propose_death<F: Real, R: Rng + ?Sized>(
    tree: &RegressionTree<F>,
    target: &Target<'_, F>,
    rng: &mut R,
) -> Step<F> {
    let kind = ProposalKind::Death;
    let nogs = tree.nog_ids();
    if nogs.is_empty() {
        return Step::reject(kind, Rejection::Infeasible);
    }
    let id = nogs[rng.random_range(0..nogs.len())];
    let rule = tree.node(id).and_then(Node::rule).expect("internal");
    let mut candidate = tree.clone();
    *candidate.node_mut(id).expect("node exists") = Node::leaf(F::zero());

    let Some(il_new) = target.local_il(&candidate, id) else {
        return Step::reject(kind, Rejection::MinLeaf);
    };
    let il_old = target.local_il(tree, id).expect("current tree is admissible");

    let max_depth = target.hyper.max_depth;
    let grid = &target.data.grid;
    let log_q_fwd = (1.0 - p_birth(tree, max_depth)).ln() - (nogs.len() as f64).ln();
    let log_q_rev = p_birth(&candidate, max_depth).ln()
        - (growable_leaves(&candidate, max_depth).len() as f64).ln()
        - ((grid.n_vars() * grid.size(rule.var)) as f64).ln();
    let delta = il_new - il_old;
    let terms = Terms {
        delta,
        delta_log_il: delta,
        log_prior_ratio: target.log_prior(&candidate) - target.log_prior(tree),
        log_proposal_ratio: log_q_rev - log_q_fwd,
    };
    decide(kind, id, candidate, terms, rng)
}
