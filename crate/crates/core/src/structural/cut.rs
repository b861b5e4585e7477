use crate::scalar::Real;
use crate::tree::{Node, SplitRule};

/// Make `t` consistent with `x_v < c` imposed from above.
///
/// Every node splitting on `v` at a cutpoint `>= c` has an unreachable right
/// branch; it is deleted and its left child promoted, recursively.
pub fn cut_left<F: Real>(t: &Node<F>, imposed: SplitRule) -> Node<F> {
    match t {
        Node::Leaf { mu } => Node::leaf(*mu),
        Node::Split { rule, left, right } => {
            if rule.var == imposed.var && rule.cut >= imposed.cut {
                cut_left(left, imposed)
            } else {
                Node::split(*rule, cut_left(left, imposed), cut_left(right, imposed))
            }
        }
    }
}

/// Make `t` consistent with `x_v >= c` imposed from above.
///
/// Mirror of [`cut_left`]: nodes on `v` with cutpoint `<= c` are replaced by
/// their right child.
pub fn cut_right<F: Real>(t: &Node<F>, imposed: SplitRule) -> Node<F> {
    match t {
        Node::Leaf { mu } => Node::leaf(*mu),
        Node::Split { rule, left, right } => {
            if rule.var == imposed.var && rule.cut <= imposed.cut {
                cut_right(right, imposed)
            } else {
                Node::split(*rule, cut_right(left, imposed), cut_right(right, imposed))
            }
        }
    }
}
