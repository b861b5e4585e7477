use rand::Rng;

use super::{cut_move_deltas, decide, KernelSettings, ProposalKind, Rejection, Step, Target, Terms};
use crate::scalar::Real;
use crate::tree::{CutInterval, Node, RegressionTree, SplitRule};

/// Lattice indices other than `c` strictly inside the window
/// `(max(c - h, a), min(c + h, b))`, where `h = alpha (b - a) / 2` and
/// `(a, b)` is the node's valid interval.
pub fn perturb_window(interval: CutInterval, c: usize, alpha: f64) -> Vec<usize> {
    let (a, b) = (interval.lower as f64, interval.upper as f64);
    let h = alpha * (b - a) / 2.0;
    let (lo, hi) = ((c as f64 - h).max(a), (c as f64 + h).min(b));
    interval.candidates().filter(|&j| j != c && (j as f64) > lo && (j as f64) < hi).collect()
}

/// Redraw the cutpoint of a uniformly chosen internal node from its window.
pub fn propose_perturb<F: Real, R: Rng + ?Sized>(
    tree: &RegressionTree<F>,
    target: &Target<'_, F>,
    settings: &KernelSettings,
    rng: &mut R,
) -> Step<F> {
    let kind = ProposalKind::Perturb;
    let internal = tree.internal_ids();
    if internal.is_empty() {
        return Step::reject(kind, Rejection::Infeasible);
    }
    let id = internal[rng.random_range(0..internal.len())];
    let rule = tree.node(id).and_then(Node::rule).expect("internal");
    let interval = tree.valid_cut_interval(id, rule.var, &target.data.grid);
    let alpha = settings.alpha[rule.var];
    let fwd = perturb_window(interval, rule.cut, alpha);
    if fwd.is_empty() {
        return Step::reject(kind, Rejection::Infeasible);
    }
    let cut = fwd[rng.random_range(0..fwd.len())];
    let back = perturb_window(interval, cut, alpha);

    let mut candidate = tree.clone();
    if let Some(Node::Split { rule: r, .. }) = candidate.node_mut(id) {
        *r = SplitRule::new(rule.var, cut);
    }
    let Some((delta, delta_log_il)) = cut_move_deltas(target, settings, tree, &candidate, id) else {
        return Step::reject(kind, Rejection::MinLeaf);
    };
    let terms = Terms {
        delta,
        delta_log_il,
        log_prior_ratio: 0.0,
        log_proposal_ratio: (fwd.len() as f64).ln() - (back.len() as f64).ln(),
    };
    decide(kind, id, candidate, terms, rng)
}
