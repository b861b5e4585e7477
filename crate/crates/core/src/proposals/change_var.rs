use rand::Rng;

use super::precond::CorrelationPreconditioner;
use super::{cut_move_deltas, decide, KernelSettings, ProposalKind, Rejection, Step, Target, Terms};
use crate::scalar::Real;
use crate::tree::{CutpointGrid, Node, NodeId, RegressionTree, SplitRule};

/// Weight of moving node `id` from variable `from` to each variable: the
/// preconditioner entry when that variable has a cutpoint available at the
/// node (other than the current one, for `from` itself), zero otherwise.
pub fn change_var_weights<F: Real>(
    tree: &RegressionTree<F>,
    id: NodeId,
    from: usize,
    precond: &CorrelationPreconditioner,
    grid: &CutpointGrid,
) -> Vec<f64> {
    (0..grid.n_vars())
        .map(|j| {
            let w = precond.weight(from, j);
            let need = if j == from { 2 } else { 1 };
            if w > 0.0 && tree.valid_cut_interval(id, j, grid).len() >= need {
                w
            } else {
                0.0
            }
        })
        .collect()
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (j, &w) in weights.iter().enumerate() {
        if u < w {
            return j;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).expect("some positive weight")
}

/// Redraw the variable of a uniformly chosen internal node with probability
/// proportional to its preconditioner weight, then draw a cutpoint uniformly
/// from that variable's valid interval at the node (the current cutpoint
/// excluded when the variable is unchanged).
pub fn propose_change_var<F: Real, R: Rng + ?Sized>(
    tree: &RegressionTree<F>,
    target: &Target<'_, F>,
    settings: &KernelSettings,
    precond: &CorrelationPreconditioner,
    rng: &mut R,
) -> Step<F> {
    let kind = ProposalKind::ChangeVar;
    let internal = tree.internal_ids();
    if internal.is_empty() {
        return Step::reject(kind, Rejection::Infeasible);
    }
    let id = internal[rng.random_range(0..internal.len())];
    let rule = tree.node(id).and_then(Node::rule).expect("internal");
    let grid = &target.data.grid;

    let w_fwd = change_var_weights(tree, id, rule.var, precond, grid);
    if w_fwd.iter().all(|&w| w == 0.0) {
        return Step::reject(kind, Rejection::Infeasible);
    }
    let var = pick(&w_fwd, rng);
    let iv_new = tree.valid_cut_interval(id, var, grid);
    let iv_old = tree.valid_cut_interval(id, rule.var, grid);
    // a same-variable move excludes the current cutpoint
    let choices: Vec<usize> = iv_new.candidates().filter(|&c| var != rule.var || c != rule.cut).collect();
    let cut = choices[rng.random_range(0..choices.len())];
    let w_back = change_var_weights(tree, id, var, precond, grid);
    let (sum_fwd, sum_back): (f64, f64) = (w_fwd.iter().sum(), w_back.iter().sum());
    let log_q_fwd = (w_fwd[var] / sum_fwd).ln() - (choices.len() as f64).ln();
    let back_choices = if var == rule.var { choices.len() } else { iv_old.len() };
    let log_q_back = (w_back[rule.var] / sum_back).ln() - (back_choices as f64).ln();

    let mut candidate = tree.clone();
    if let Some(Node::Split { rule: r, .. }) = candidate.node_mut(id) {
        *r = SplitRule::new(var, cut);
    }
    let Some((delta, delta_log_il)) = cut_move_deltas(target, settings, tree, &candidate, id) else {
        return Step::reject(kind, Rejection::MinLeaf);
    };
    let terms = Terms {
        delta,
        delta_log_il,
        log_prior_ratio: target.log_prior(&candidate) - target.log_prior(tree),
        log_proposal_ratio: log_q_back - log_q_fwd,
    };
    decide(kind, id, candidate, terms, rng)
}
