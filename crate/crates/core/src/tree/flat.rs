use super::node::Node;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
enum Slot {
    Split { var: u32, cut: u32, right: u32 },
    Leaf(u32),
}

/// Array form of a (sub)tree for routing many binned observations.
///
/// Nodes are stored in pre-order, so a split's left child is the next slot.
#[derive(Clone, Debug)]
pub struct CompiledTree {
    slots: Vec<Slot>,
    n_leaves: usize,
}

impl CompiledTree {
    pub fn new<F: Real>(root: &Node<F>) -> Self {
        let mut slots = Vec::with_capacity(2 * root.n_internal() + 1);
        let mut n_leaves = 0;
        fn push<F: Real>(node: &Node<F>, slots: &mut Vec<Slot>, n_leaves: &mut usize) {
            match node {
                Node::Leaf { .. } => {
                    slots.push(Slot::Leaf(*n_leaves as u32));
                    *n_leaves += 1;
                }
                Node::Split { rule, left, right } => {
                    let at = slots.len();
                    slots.push(Slot::Leaf(0));
                    push(left, slots, n_leaves);
                    let right_at = slots.len() as u32;
                    push(right, slots, n_leaves);
                    slots[at] = Slot::Split {
                        var: rule.var as u32,
                        cut: rule.cut as u32,
                        right: right_at,
                    };
                }
            }
        }
        push(root, &mut slots, &mut n_leaves);
        Self { slots, n_leaves }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Pre-order leaf index for one binned observation.
    #[inline]
    pub fn route(&self, bins: &[u16]) -> usize {
        let mut i = 0usize;
        loop {
            match self.slots[i] {
                Slot::Leaf(k) => return k as usize,
                Slot::Split { var, cut, right } => {
                    i = if bins[var as usize] as u32 <= cut { i + 1 } else { right as usize };
                }
            }
        }
    }
}
