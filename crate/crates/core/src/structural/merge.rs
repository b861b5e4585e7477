//! Reconstruction of a tree from its two cut halves.
//!
//! Given `l` (consistent with `x_v < c`) and `r` (consistent with `x_v >= c`),
//! a *merge* is any tree `T` with `cut_left(T) = l` and `cut_right(T) = r`.
//! The trivial merge keeps the rule `(v, c)` as a new root over `l` and `r`.
//! A nontrivial merge contains no `(v, c)` node at all; these are the
//! reconstructions a rotation may choose between. The remaining preimages
//! push `(v, c)` further down and are reported separately.
//!
//! At any level the nontrivial cases are:
//! * both leaves: collapse to a single leaf;
//! * both roots carry the same rule on another variable: keep it once and
//!   merge the left and right children pairwise;
//! * `l`'s root splits on `v` (necessarily below `c`): it becomes the parent,
//!   and its right child is merged with `r`;
//! * `r`'s root splits on `v`: mirror of the previous case.
//!
//! The last two may both apply, in which case either root can be the parent.

use std::collections::HashSet;

use rand::Rng;

use crate::scalar::Real;
use crate::tree::{to_canonical, Node, SplitRule};

/// Number of nontrivial merge reconstructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct MergeCount(pub usize);

impl MergeCount {
    /// Probability of each option when choosing uniformly among the trivial
    /// merge and the nontrivial ones.
    pub fn choice_probability(self) -> f64 {
        1.0 / (self.0 as f64 + 1.0)
    }
}

/// Every tree whose cuts along a rule reproduce a given `(l, r)` pair.
#[derive(Clone, Debug)]
pub struct MergeSet<F> {
    pub trivial: Node<F>,
    /// Merges that remove the rule entirely.
    pub nontrivial: Vec<Node<F>>,
    /// Preimages that keep the rule somewhere below the root.
    pub retaining: Vec<Node<F>>,
}

impl<F: Real> MergeSet<F> {
    pub fn count(&self) -> MergeCount {
        MergeCount(self.nontrivial.len())
    }

    /// The complete preimage set.
    pub fn all(&self) -> impl Iterator<Item = &Node<F>> {
        std::iter::once(&self.trivial).chain(&self.nontrivial).chain(&self.retaining)
    }

    pub fn contains(&self, t: &Node<F>) -> bool {
        self.all().any(|m| m.same_structure(t))
    }
}

fn on_var<F: Real>(t: &Node<F>, rule: SplitRule) -> Option<(SplitRule, &Node<F>, &Node<F>)> {
    match t {
        Node::Split { rule: own, left, right } if own.var == rule.var => Some((*own, left, right)),
        _ => None,
    }
}

fn shared_rule<'a, F: Real>(
    l: &'a Node<F>,
    r: &'a Node<F>,
    rule: SplitRule,
) -> Option<(SplitRule, (&'a Node<F>, &'a Node<F>), (&'a Node<F>, &'a Node<F>))> {
    match (l, r) {
        (
            Node::Split { rule: a, left: ll, right: lr },
            Node::Split { rule: b, left: rl, right: rr },
        ) if a == b && a.var != rule.var => Some((*a, (ll, lr), (rl, rr))),
        _ => None,
    }
}

/// Count the nontrivial merges without building them.
pub fn count_merges<F: Real>(l: &Node<F>, r: &Node<F>, rule: SplitRule) -> MergeCount {
    let mut n = 0;
    if l.is_leaf() && r.is_leaf() {
        n += 1;
    }
    if let Some((_, (ll, lr), (rl, rr))) = shared_rule(l, r, rule) {
        let a = count_merges(ll, rl, rule).0;
        if a > 0 {
            n += a * count_merges(lr, rr, rule).0;
        }
    }
    if let Some((own, _, lr)) = on_var(l, rule) {
        if own.cut < rule.cut {
            n += count_merges(lr, r, rule).0;
        }
    }
    if let Some((own, rl, _)) = on_var(r, rule) {
        if own.cut > rule.cut {
            n += count_merges(l, rl, rule).0;
        }
    }
    MergeCount(n)
}

fn nontrivial<F: Real>(l: &Node<F>, r: &Node<F>, rule: SplitRule, out: &mut Vec<Node<F>>) {
    if let (Node::Leaf { mu }, true) = (l, r.is_leaf()) {
        out.push(Node::leaf(*mu));
    }
    if let Some((shared, (ll, lr), (rl, rr))) = shared_rule(l, r, rule) {
        let mut lefts = Vec::new();
        nontrivial(ll, rl, rule, &mut lefts);
        if !lefts.is_empty() {
            let mut rights = Vec::new();
            nontrivial(lr, rr, rule, &mut rights);
            for a in &lefts {
                for b in &rights {
                    out.push(Node::split(shared, a.clone(), b.clone()));
                }
            }
        }
    }
    if let Some((own, ll, lr)) = on_var(l, rule) {
        if own.cut < rule.cut {
            let mut sub = Vec::new();
            nontrivial(lr, r, rule, &mut sub);
            out.extend(sub.into_iter().map(|t| Node::split(own, ll.clone(), t)));
        }
    }
    if let Some((own, rl, rr)) = on_var(r, rule) {
        if own.cut > rule.cut {
            let mut sub = Vec::new();
            nontrivial(l, rl, rule, &mut sub);
            out.extend(sub.into_iter().map(|t| Node::split(own, t, rr.clone())));
        }
    }
}

/// Every preimage, trivial ones at every level included.
fn preimages<F: Real>(l: &Node<F>, r: &Node<F>, rule: SplitRule, out: &mut Vec<Node<F>>) {
    out.push(Node::split(rule, l.clone(), r.clone()));
    if let (Node::Leaf { mu }, true) = (l, r.is_leaf()) {
        out.push(Node::leaf(*mu));
    }
    if let Some((shared, (ll, lr), (rl, rr))) = shared_rule(l, r, rule) {
        let mut lefts = Vec::new();
        preimages(ll, rl, rule, &mut lefts);
        let mut rights = Vec::new();
        preimages(lr, rr, rule, &mut rights);
        for a in &lefts {
            for b in &rights {
                out.push(Node::split(shared, a.clone(), b.clone()));
            }
        }
    }
    if let Some((own, ll, lr)) = on_var(l, rule) {
        if own.cut < rule.cut {
            let mut sub = Vec::new();
            preimages(lr, r, rule, &mut sub);
            out.extend(sub.into_iter().map(|t| Node::split(own, ll.clone(), t)));
        }
    }
    if let Some((own, rl, rr)) = on_var(r, rule) {
        if own.cut > rule.cut {
            let mut sub = Vec::new();
            preimages(l, rl, rule, &mut sub);
            out.extend(sub.into_iter().map(|t| Node::split(own, t, rr.clone())));
        }
    }
}

/// All trees `T` with `cut_left(T) = l` and `cut_right(T) = r` along `rule`.
pub fn enumerate_merges<F: Real>(l: &Node<F>, r: &Node<F>, rule: SplitRule) -> MergeSet<F> {
    let mut all = Vec::new();
    preimages(l, r, rule, &mut all);
    let mut seen = HashSet::new();
    let mut it = all.into_iter().filter(|t| seen.insert(to_canonical(t, false)));
    let trivial = it.next().expect("trivial merge is always first");
    let (nontrivial, retaining) = it.partition(|t| !t.contains_rule(rule));
    MergeSet { trivial, nontrivial, retaining }
}

/// Nontrivial merges only, in the same order as [`enumerate_merges`].
pub fn nontrivial_merges<F: Real>(l: &Node<F>, r: &Node<F>, rule: SplitRule) -> Vec<Node<F>> {
    let mut out = Vec::new();
    nontrivial(l, r, rule, &mut out);
    out
}

/// A uniformly chosen nontrivial merge and the number available, or `None`
/// when the pair cannot be merged nontrivially.
pub fn merge_random<F: Real, R: Rng + ?Sized>(
    l: &Node<F>,
    r: &Node<F>,
    rule: SplitRule,
    rng: &mut R,
) -> Option<(Node<F>, MergeCount)> {
    let n = count_merges(l, r, rule);
    if n.0 == 0 {
        return None;
    }
    let k = rng.random_range(0..n.0);
    Some((nth_merge(l, r, rule, k), n))
}

/// The `k`-th nontrivial merge in enumeration order.
fn nth_merge<F: Real>(l: &Node<F>, r: &Node<F>, rule: SplitRule, mut k: usize) -> Node<F> {
    if let (Node::Leaf { mu }, true) = (l, r.is_leaf()) {
        if k == 0 {
            return Node::leaf(*mu);
        }
        k -= 1;
    }
    if let Some((shared, (ll, lr), (rl, rr))) = shared_rule(l, r, rule) {
        let a = count_merges(ll, rl, rule).0;
        let b = count_merges(lr, rr, rule).0;
        if k < a * b {
            return Node::split(shared, nth_merge(ll, rl, rule, k / b), nth_merge(lr, rr, rule, k % b));
        }
        k -= a * b;
    }
    if let Some((own, ll, lr)) = on_var(l, rule) {
        if own.cut < rule.cut {
            let a = count_merges(lr, r, rule).0;
            if k < a {
                return Node::split(own, ll.clone(), nth_merge(lr, r, rule, k));
            }
            k -= a;
        }
    }
    if let Some((own, rl, rr)) = on_var(r, rule) {
        if own.cut > rule.cut {
            return Node::split(own, nth_merge(l, rl, rule, k), rr.clone());
        }
    }
    unreachable!("merge index out of range")
}
