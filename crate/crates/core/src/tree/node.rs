use std::collections::BTreeSet;
use std::fmt;

use super::grid::{CutInterval, CutpointGrid, SplitRule};
use crate::scalar::Real;

/// Heap-numbered node identity: the root is 1 and the children of `i` are
/// `2i` and `2i + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u64);

impl NodeId {
    pub const ROOT: NodeId = NodeId(1);

    pub fn left(self) -> NodeId {
        NodeId(self.0 * 2)
    }

    pub fn right(self) -> NodeId {
        NodeId(self.0 * 2 + 1)
    }

    pub fn parent(self) -> Option<NodeId> {
        (self.0 > 1).then_some(NodeId(self.0 / 2))
    }

    pub fn is_root(self) -> bool {
        self.0 == 1
    }

    pub fn is_left_child(self) -> bool {
        self.0 > 1 && self.0.is_multiple_of(2)
    }

    /// The other child of this node's parent.
    pub fn sibling(self) -> Option<NodeId> {
        (self.0 > 1).then_some(NodeId(self.0 ^ 1))
    }

    pub fn depth(self) -> usize {
        (63 - self.0.leading_zeros()) as usize
    }

    /// Branch directions from the root, `true` for left.
    pub fn path(self) -> impl Iterator<Item = bool> {
        let depth = self.depth();
        let id = self.0;
        (0..depth).rev().map(move |k| (id >> k) & 1 == 0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A (sub)tree: either a terminal node carrying a constant leaf parameter or
/// an internal node with a split rule and two children.
#[derive(Clone, Debug, PartialEq)]
pub enum Node<F> {
    Leaf { mu: F },
    Split {
        rule: SplitRule,
        left: Box<Node<F>>,
        right: Box<Node<F>>,
    },
}

impl<F: Real> Node<F> {
    pub fn leaf(mu: F) -> Self {
        Node::Leaf { mu }
    }

    pub fn split(rule: SplitRule, left: Node<F>, right: Node<F>) -> Self {
        Node::Split {
            rule,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    pub fn rule(&self) -> Option<SplitRule> {
        match self {
            Node::Leaf { .. } => None,
            Node::Split { rule, .. } => Some(*rule),
        }
    }

    pub fn children(&self) -> Option<(&Node<F>, &Node<F>)> {
        match self {
            Node::Leaf { .. } => None,
            Node::Split { left, right, .. } => Some((left, right)),
        }
    }

    pub fn n_internal(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.n_internal() + right.n_internal(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Height of the subtree; a leaf has height 0.
    pub fn height(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.height().max(right.height()),
        }
    }

    /// Structural equality: rules and shape only, leaf parameters ignored.
    pub fn same_structure(&self, other: &Node<F>) -> bool {
        match (self, other) {
            (Node::Leaf { .. }, Node::Leaf { .. }) => true,
            (
                Node::Split { rule: a, left: al, right: ar },
                Node::Split { rule: b, left: bl, right: br },
            ) => a == b && al.same_structure(bl) && ar.same_structure(br),
            _ => false,
        }
    }

    pub fn contains_rule(&self, target: SplitRule) -> bool {
        match self {
            Node::Leaf { .. } => false,
            Node::Split { rule, left, right } => {
                *rule == target || left.contains_rule(target) || right.contains_rule(target)
            }
        }
    }

    /// Every cutpoint on `var` in this subtree.
    pub fn cutpoints_on(&self, var: usize, out: &mut BTreeSet<usize>) {
        if let Node::Split { rule, left, right } = self {
            if rule.var == var {
                out.insert(rule.cut);
            }
            left.cutpoints_on(var, out);
            right.cutpoints_on(var, out);
        }
    }

    /// Leaf parameters in pre-order.
    pub fn leaf_values(&self) -> Vec<F> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |mu| out.push(mu));
        out
    }

    fn visit_leaves(&self, f: &mut impl FnMut(F)) {
        match self {
            Node::Leaf { mu } => f(*mu),
            Node::Split { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }

    /// Overwrite leaf parameters in pre-order.
    pub fn set_leaf_values(&mut self, values: &[F]) {
        let mut it = values.iter().copied();
        self.for_each_leaf_mut(&mut |mu| *mu = it.next().expect("one value per leaf"));
    }

    pub fn for_each_leaf_mut(&mut self, f: &mut impl FnMut(&mut F)) {
        match self {
            Node::Leaf { mu } => f(mu),
            Node::Split { left, right, .. } => {
                left.for_each_leaf_mut(f);
                right.for_each_leaf_mut(f);
            }
        }
    }

    /// Pre-order leaf index reached by a binned observation.
    pub fn route_binned(&self, bins: &[u16]) -> usize {
        let mut node = self;
        let mut offset = 0;
        loop {
            match node {
                Node::Leaf { .. } => return offset,
                Node::Split { rule, left, right } => {
                    if rule.goes_left(bins) {
                        node = left;
                    } else {
                        offset += left.n_leaves();
                        node = right;
                    }
                }
            }
        }
    }

    pub fn evaluate(&self, x: &[F], grid: &CutpointGrid) -> F {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { mu } => return *mu,
                Node::Split { rule, left, right } => {
                    node = if x[rule.var] < grid.value(rule.var, rule.cut) { left } else { right };
                }
            }
        }
    }
}

/// A binary regression tree with constant leaf parameters.
///
/// Trees are plain values: proposals operate on copies and the current state
/// is only replaced on acceptance.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree<F> {
    root: Node<F>,
}

impl<F: Real> RegressionTree<F> {
    pub fn leaf(mu: F) -> Self {
        Self { root: Node::leaf(mu) }
    }

    pub fn from_root(root: Node<F>) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Node<F> {
        &self.root
    }

    pub fn root_mut(&mut self) -> &mut Node<F> {
        &mut self.root
    }

    pub fn into_root(self) -> Node<F> {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Option<&Node<F>> {
        let mut node = &self.root;
        for go_left in id.path() {
            node = match node {
                Node::Leaf { .. } => return None,
                Node::Split { left, right, .. } => {
                    if go_left {
                        left
                    } else {
                        right
                    }
                }
            };
        }
        Some(node)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut Node<F>> {
        let mut node = &mut self.root;
        for go_left in id.path() {
            node = match node {
                Node::Leaf { .. } => return None,
                Node::Split { left, right, .. } => {
                    if go_left {
                        left
                    } else {
                        right
                    }
                }
            };
        }
        Some(node)
    }

    pub fn n_internal(&self) -> usize {
        self.root.n_internal()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    pub fn depth(&self) -> usize {
        self.root.height()
    }

    fn collect_ids(&self, keep: impl Fn(&Node<F>) -> bool) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![(NodeId::ROOT, &self.root)];
        while let Some((id, node)) = stack.pop() {
            if keep(node) {
                out.push(id);
            }
            if let Node::Split { left, right, .. } = node {
                stack.push((id.right(), right));
                stack.push((id.left(), left));
            }
        }
        out
    }

    /// Terminal node ids in pre-order (the order used for leaf indices).
    pub fn leaf_ids(&self) -> Vec<NodeId> {
        self.collect_ids(Node::is_leaf)
    }

    pub fn internal_ids(&self) -> Vec<NodeId> {
        self.collect_ids(|n| !n.is_leaf())
    }

    /// Internal nodes whose two children are both terminal.
    pub fn nog_ids(&self) -> Vec<NodeId> {
        self.collect_ids(|n| matches!(n.children(), Some((l, r)) if l.is_leaf() && r.is_leaf()))
    }

    /// Internal nodes other than the root.
    pub fn rotatable_ids(&self) -> Vec<NodeId> {
        let mut ids = self.internal_ids();
        ids.retain(|id| !id.is_root());
        ids
    }

    /// Terminal node reached by `x`: left when `x_v < c`, right otherwise.
    pub fn traverse(&self, x: &[F], grid: &CutpointGrid) -> NodeId {
        let mut node = &self.root;
        let mut id = NodeId::ROOT;
        while let Node::Split { rule, left, right } = node {
            if x[rule.var] < grid.value(rule.var, rule.cut) {
                node = left;
                id = id.left();
            } else {
                node = right;
                id = id.right();
            }
        }
        id
    }

    pub fn evaluate(&self, x: &[F], grid: &CutpointGrid) -> F {
        self.root.evaluate(x, grid)
    }

    /// Pre-order leaf index reached by a binned observation.
    pub fn route_binned(&self, bins: &[u16]) -> usize {
        self.root.route_binned(bins)
    }

    /// Split rules on the path from the root to `id` (exclusive), each paired
    /// with whether the path branched left there.
    pub fn ancestors(&self, id: NodeId) -> Vec<(SplitRule, bool)> {
        let mut out = Vec::new();
        let mut node = &self.root;
        for go_left in id.path() {
            match node {
                Node::Leaf { .. } => break,
                Node::Split { rule, left, right } => {
                    out.push((*rule, go_left));
                    node = if go_left { left } else { right };
                }
            }
        }
        out
    }

    /// Cutpoints on `var` among the strict ancestors of `id`.
    pub fn ancestral_cutpoints(&self, id: NodeId, var: usize) -> BTreeSet<usize> {
        self.ancestors(id)
            .into_iter()
            .filter(|(r, _)| r.var == var)
            .map(|(r, _)| r.cut)
            .collect()
    }

    /// Cutpoints on `var` within the left subtree of `id`.
    pub fn left_subtree_cutpoints(&self, id: NodeId, var: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        if let Some(Node::Split { left, .. }) = self.node(id) {
            left.cutpoints_on(var, &mut out);
        }
        out
    }

    /// Cutpoints on `var` within the right subtree of `id`.
    pub fn right_subtree_cutpoints(&self, id: NodeId, var: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        if let Some(Node::Split { right, .. }) = self.node(id) {
            right.cutpoints_on(var, &mut out);
        }
        out
    }

    /// Cutpoints on `var` that may be placed at node `id` while keeping every
    /// terminal node's region nonempty.
    ///
    /// The lower end is the tightest of the ancestral cuts where the path went
    /// right and the left subtree's cuts; the upper end is the tightest of the
    /// ancestral cuts where the path went left and the right subtree's cuts.
    pub fn valid_cut_interval(&self, id: NodeId, var: usize, grid: &CutpointGrid) -> CutInterval {
        let mut lower = 0;
        let mut upper = grid.top(var);
        for (rule, went_left) in self.ancestors(id) {
            if rule.var != var {
                continue;
            }
            if went_left {
                upper = upper.min(rule.cut);
            } else {
                lower = lower.max(rule.cut);
            }
        }
        if let Some(&c) = self.left_subtree_cutpoints(id, var).last() {
            lower = lower.max(c);
        }
        if let Some(&c) = self.right_subtree_cutpoints(id, var).first() {
            upper = upper.min(c);
        }
        CutInterval::new(lower, upper)
    }

    /// Observations per terminal node, in pre-order leaf order.
    pub fn partition_counts(&self, rows: &[Vec<F>], grid: &CutpointGrid) -> Vec<usize> {
        let leaves = self.leaf_ids();
        let mut counts = vec![0; leaves.len()];
        for x in rows {
            let id = self.traverse(x, grid);
            let k = leaves.binary_search_by(|probe| preorder_cmp(*probe, id)).expect("leaf id");
            counts[k] += 1;
        }
        counts
    }

    /// Deep copy of the subtree rooted at `id`.
    pub fn clone_subtree(&self, id: NodeId) -> Option<RegressionTree<F>> {
        self.node(id).map(|n| RegressionTree::from_root(n.clone()))
    }

    /// Copy of this tree with the subtree at `id` replaced by `sub`.
    pub fn replace_subtree(&self, id: NodeId, sub: RegressionTree<F>) -> Option<RegressionTree<F>> {
        let mut out = self.clone();
        *out.node_mut(id)? = sub.root;
        Some(out)
    }

    pub fn same_structure(&self, other: &RegressionTree<F>) -> bool {
        self.root.same_structure(&other.root)
    }

    pub fn leaf_values(&self) -> Vec<F> {
        self.root.leaf_values()
    }

    pub fn set_leaf_values(&mut self, values: &[F]) {
        self.root.set_leaf_values(values)
    }
}

/// Orders node ids by pre-order position.
pub fn preorder_cmp(a: NodeId, b: NodeId) -> std::cmp::Ordering {
    // Align both ids to the same depth by shifting; ancestors come first.
    let (da, db) = (a.depth(), b.depth());
    let d = da.max(db);
    let ka = a.0 << (d - da);
    let kb = b.0 << (d - db);
    ka.cmp(&kb).then(da.cmp(&db))
}
