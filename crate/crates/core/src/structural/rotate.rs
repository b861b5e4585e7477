//! Tree rotation: setup, cut and merge, assembled into a proposal.

use rand::Rng;
use thiserror::Error;

use super::cut::{cut_left, cut_right};
use super::merge::{enumerate_merges, merge_random, MergeCount};
use crate::scalar::Real;
use crate::tree::{Node, NodeId, RegressionTree, SplitRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Rotation node is the left child of its parent.
    Right,
    /// Rotation node is the right child of its parent.
    Left,
}

/// Why no rotated tree could be proposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum Inadmissible {
    #[error("node is the root, a leaf, or absent")]
    NotRotatable,
    #[error("both subtree pairs merged; the rule needed to invert is gone")]
    DoubleMerge,
    #[error("the duplicated subtree cannot be rebuilt by the inverse rotation")]
    Irreversible,
}

/// A rotated tree together with the terms of its acceptance ratio.
///
/// `p_m1`/`p_m2` are the forward merge-choice probabilities (new-node side and
/// rotation-node side); `p_s1`/`p_s2` are the probabilities that the inverse
/// rotation rebuilds the duplicated subtree and the rotation node.
#[derive(Clone, Debug)]
pub struct RotationProposal<F> {
    pub tree: RegressionTree<F>,
    pub node: NodeId,
    pub direction: Direction,
    pub p_r_forward: f64,
    pub p_r_inverse: f64,
    pub p_m1: f64,
    pub p_m2: f64,
    pub p_s1: f64,
    pub p_s2: f64,
    pub n_m1: MergeCount,
    pub n_m2: MergeCount,
    pub n_s1: MergeCount,
    pub n_s2: MergeCount,
    /// The rotation could also have been made at the rotation node's sibling.
    pub forward_two_ways: bool,
    /// The inverse rotation can be made from either child of the parent.
    pub two_ways: bool,
}

impl<F> RotationProposal<F> {
    /// log of `p_r(T') p_s1 p_s2 / (p_r(T) p_m1 p_m2)`.
    pub fn log_proposal_ratio(&self) -> f64 {
        (self.p_r_inverse * self.p_s1 * self.p_s2).ln()
            - (self.p_r_forward * self.p_m1 * self.p_m2).ln()
    }
}

/// Pieces of the local subtree at the parent of a rotation node.
struct Local<F> {
    parent_rule: SplitRule,
    node_rule: SplitRule,
    /// Subtrees of the rotation node, left then right.
    inner: (Node<F>, Node<F>),
    /// The parent's other subtree.
    ts: Node<F>,
}

fn local<F: Real>(tree: &RegressionTree<F>, node: NodeId) -> Result<(Local<F>, Direction), Inadmissible> {
    let parent = node.parent().ok_or(Inadmissible::NotRotatable)?;
    let Some(Node::Split { rule: parent_rule, left, right }) = tree.node(parent) else {
        return Err(Inadmissible::NotRotatable);
    };
    let (eta, ts, dir) = if node.is_left_child() {
        (left, right, Direction::Right)
    } else {
        (right, left, Direction::Left)
    };
    let Node::Split { rule: node_rule, left: q, right: r } = &**eta else {
        return Err(Inadmissible::NotRotatable);
    };
    Ok((
        Local {
            parent_rule: *parent_rule,
            node_rule: *node_rule,
            inner: ((**q).clone(), (**r).clone()),
            ts: (**ts).clone(),
        },
        dir,
    ))
}

fn setup_local<F: Real>(loc: &Local<F>, dir: Direction, cut: bool) -> Node<F> {
    let (ts_l, ts_r) = if cut {
        (cut_left(&loc.ts, loc.node_rule), cut_right(&loc.ts, loc.node_rule))
    } else {
        (loc.ts.clone(), loc.ts.clone())
    };
    let (q, r) = (loc.inner.0.clone(), loc.inner.1.clone());
    let p = loc.parent_rule;
    let (a, b) = match dir {
        Direction::Right => (Node::split(p, q, ts_l), Node::split(p, r, ts_r)),
        Direction::Left => (Node::split(p, ts_l, q), Node::split(p, ts_r, r)),
    };
    Node::split(loc.node_rule, a, b)
}

/// Right-rotation setup at `node`, the left child of its parent: the two
/// rules are swapped, a new right child carrying the parent's old rule takes
/// the node's old right subtree, and both right slots get copies of the
/// parent's old right subtree. No cutting is performed.
pub fn rotate_setup_right<F: Real>(tree: &RegressionTree<F>, node: NodeId) -> Result<RegressionTree<F>, Inadmissible> {
    if !node.is_left_child() {
        return Err(Inadmissible::NotRotatable);
    }
    rotate_setup(tree, node)
}

/// Mirror of [`rotate_setup_right`] for a node that is a right child.
pub fn rotate_setup_left<F: Real>(tree: &RegressionTree<F>, node: NodeId) -> Result<RegressionTree<F>, Inadmissible> {
    if node.is_root() || node.is_left_child() {
        return Err(Inadmissible::NotRotatable);
    }
    rotate_setup(tree, node)
}

/// Rotation setup in whichever direction `node`'s position dictates.
pub fn rotate_setup<F: Real>(tree: &RegressionTree<F>, node: NodeId) -> Result<RegressionTree<F>, Inadmissible> {
    let (loc, dir) = local(tree, node)?;
    let parent = node.parent().expect("checked by local");
    Ok(tree
        .replace_subtree(parent, RegressionTree::from_root(setup_local(&loc, dir, false)))
        .expect("parent exists"))
}

/// Setup followed by cutting both copies of the duplicated subtree along the
/// rotation node's rule. Predictions are unchanged for every `x`.
pub fn rotate_and_cut<F: Real>(tree: &RegressionTree<F>, node: NodeId) -> Result<RegressionTree<F>, Inadmissible> {
    let (loc, dir) = local(tree, node)?;
    let parent = node.parent().expect("checked by local");
    Ok(tree
        .replace_subtree(parent, RegressionTree::from_root(setup_local(&loc, dir, true)))
        .expect("parent exists"))
}

/// Both children of `id` are internal and carry the same rule.
pub fn has_twin_children<F: Real>(tree: &RegressionTree<F>, id: NodeId) -> bool {
    match tree.node(id).and_then(Node::children) {
        Some((l, r)) => matches!((l.rule(), r.rule()), (Some(a), Some(b)) if a == b),
        None => false,
    }
}

/// Pairs merged in the forward direction: (new-node side, rotation-node side).
fn forward_pairs<F: Real>(setup: &Node<F>, dir: Direction) -> ((&Node<F>, &Node<F>), (&Node<F>, &Node<F>)) {
    let (a, b) = setup.children().expect("setup root is a split");
    let a = a.children().expect("split");
    let b = b.children().expect("split");
    match dir {
        Direction::Right => (b, a),
        Direction::Left => (a, b),
    }
}

/// Build a rotation proposal at `node`.
///
/// Each of the two (parent-rule) pairs left by the setup is either kept or
/// replaced by a uniformly chosen nontrivial merge; with `n` nontrivial merges
/// available the pair stays unmerged with probability `1/(n+1)`, so every
/// option has that probability. Proposals where both pairs merge, or where
/// the duplicated subtree cannot be rebuilt by the inverse rotation, are
/// inadmissible.
pub fn propose_rotation<F: Real, R: Rng + ?Sized>(
    tree: &RegressionTree<F>,
    node: NodeId,
    rng: &mut R,
) -> Result<RotationProposal<F>, Inadmissible> {
    let (loc, dir) = local(tree, node)?;
    let parent = node.parent().expect("checked by local");
    let rotatable = tree.rotatable_ids().len();
    let setup = setup_local(&loc, dir, true);

    // Inverse: rebuild the duplicated subtree from its halves, and keep the
    // rotation node's two subtrees apart again.
    let ts_l = cut_left(&loc.ts, loc.node_rule);
    let ts_r = cut_right(&loc.ts, loc.node_rule);
    let halves = enumerate_merges(&ts_l, &ts_r, loc.node_rule);
    let rebuilt = halves.trivial.same_structure(&loc.ts) || halves.nontrivial.iter().any(|m| m.same_structure(&loc.ts));
    if !rebuilt {
        return Err(Inadmissible::Irreversible);
    }
    let n_s1 = halves.count();
    let n_s2 = super::merge::count_merges(&loc.inner.0, &loc.inner.1, loc.node_rule);

    let (pair1, pair2) = forward_pairs(&setup, dir);
    let pick = |pair: (&Node<F>, &Node<F>), rng: &mut R| -> (Option<Node<F>>, MergeCount) {
        match merge_random(pair.0, pair.1, loc.parent_rule, rng) {
            None => (None, MergeCount(0)),
            Some((merged, n)) => {
                let u: f64 = rng.random();
                ((u > n.choice_probability()).then_some(merged), n)
            }
        }
    };
    let (merged1, n_m1) = pick(pair1, rng);
    let (merged2, n_m2) = pick(pair2, rng);
    if merged1.is_some() && merged2.is_some() {
        return Err(Inadmissible::DoubleMerge);
    }

    let Node::Split { rule, left, right } = setup else { unreachable!() };
    let (mut a, mut b) = (*left, *right);
    let (new_side, node_side) = match dir {
        Direction::Right => (&mut b, &mut a),
        Direction::Left => (&mut a, &mut b),
    };
    if let Some(m) = merged1 {
        *new_side = m;
    }
    if let Some(m) = merged2 {
        *node_side = m;
    }
    let local_tree = Node::split(rule, a, b);
    let proposed = tree
        .replace_subtree(parent, RegressionTree::from_root(local_tree))
        .expect("parent exists");

    let forward_two_ways = has_twin_children(tree, parent);
    let two_ways = has_twin_children(&proposed, parent);
    let inverse_rotatable = proposed.rotatable_ids().len();
    let ways = |twin: bool| if twin { 2.0 } else { 1.0 };

    Ok(RotationProposal {
        p_r_forward: ways(forward_two_ways) / rotatable as f64,
        p_r_inverse: ways(two_ways) / inverse_rotatable as f64,
        p_m1: n_m1.choice_probability(),
        p_m2: n_m2.choice_probability(),
        p_s1: n_s1.choice_probability(),
        p_s2: n_s2.choice_probability(),
        n_m1,
        n_m2,
        n_s1,
        n_s2,
        forward_two_ways,
        two_ways,
        tree: proposed,
        node,
        direction: dir,
    })
}

/// Exhaustive outcome distribution of a rotation at `node`: every admissible
/// proposed tree with the probability of generating it from this node.
///
/// Built by enumerating merge choices directly rather than through the
/// bookkeeping in [`propose_rotation`], so the two can be checked against
/// each other.
pub fn rotation_outcomes<F: Real>(tree: &RegressionTree<F>, node: NodeId) -> Vec<(RegressionTree<F>, f64)> {
    let Ok((loc, dir)) = local(tree, node) else {
        return Vec::new();
    };
    let ts_l = cut_left(&loc.ts, loc.node_rule);
    let ts_r = cut_right(&loc.ts, loc.node_rule);
    let halves = enumerate_merges(&ts_l, &ts_r, loc.node_rule);
    if !(halves.trivial.same_structure(&loc.ts) || halves.nontrivial.iter().any(|m| m.same_structure(&loc.ts))) {
        return Vec::new();
    }
    let parent = node.parent().unwrap();
    let setup = setup_local(&loc, dir, true);
    let (pair1, pair2) = forward_pairs(&setup, dir);
    let opts = |pair: (&Node<F>, &Node<F>)| -> Vec<Option<Node<F>>> {
        let set = enumerate_merges(pair.0, pair.1, loc.parent_rule);
        std::iter::once(None).chain(set.nontrivial.into_iter().map(Some)).collect()
    };
    let (o1, o2) = (opts(pair1), opts(pair2));
    let p = 1.0 / (o1.len() * o2.len()) as f64;
    let mut out = Vec::new();
    for m1 in &o1 {
        for m2 in &o2 {
            if m1.is_some() && m2.is_some() {
                continue;
            }
            let Node::Split { rule, left, right } = setup.clone() else { unreachable!() };
            let (mut a, mut b) = (*left, *right);
            let (new_side, node_side) = match dir {
                Direction::Right => (&mut b, &mut a),
                Direction::Left => (&mut a, &mut b),
            };
            if let Some(m) = m1 {
                *new_side = m.clone();
            }
            if let Some(m) = m2 {
                *node_side = m.clone();
            }
            let t = tree
                .replace_subtree(parent, RegressionTree::from_root(Node::split(rule, a, b)))
                .unwrap();
            out.push((t, p));
        }
    }
    out
}

/// Total probability that one rotation step (node chosen uniformly among the
/// rotatable nodes) turns `from` into `to`, found by exhaustive enumeration.
pub fn rotation_transition_probability<F: Real>(from: &RegressionTree<F>, to: &RegressionTree<F>) -> f64 {
    let nodes = from.rotatable_ids();
    if nodes.is_empty() {
        return 0.0;
    }
    let pick = 1.0 / nodes.len() as f64;
    nodes
        .iter()
        .flat_map(|&id| rotation_outcomes(from, id))
        .filter(|(t, _)| t.same_structure(to))
        .map(|(_, p)| pick * p)
        .sum()
}
