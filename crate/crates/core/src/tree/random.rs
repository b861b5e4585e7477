use rand::Rng;

use super::grid::{CutpointGrid, SplitRule};
use super::node::{Node, RegressionTree};
use crate::scalar::Real;

/// Random tree whose every terminal node has a nonempty region.
///
/// Each node at depth below `max_depth` splits with probability `p_split`
/// when some variable still has a lattice point strictly inside its box;
/// leaf values are standard normal.
pub fn random_tree<F: Real, R: Rng + ?Sized>(
    grid: &CutpointGrid,
    max_depth: usize,
    p_split: f64,
    rng: &mut R,
) -> RegressionTree<F> {
    let mut boxes: Vec<(usize, usize)> = (0..grid.n_vars()).map(|v| (0, grid.top(v))).collect();
    RegressionTree::from_root(grow(grid, &mut boxes, max_depth, p_split, rng))
}

fn grow<F: Real, R: Rng + ?Sized>(
    grid: &CutpointGrid,
    boxes: &mut [(usize, usize)],
    depth_left: usize,
    p_split: f64,
    rng: &mut R,
) -> Node<F> {
    let open: Vec<usize> = (0..grid.n_vars()).filter(|&v| boxes[v].1 > boxes[v].0 + 1).collect();
    if depth_left == 0 || open.is_empty() || rng.random::<f64>() >= p_split {
        return Node::leaf(F::std_normal(rng));
    }
    let var = open[rng.random_range(0..open.len())];
    let (lo, hi) = boxes[var];
    let cut = rng.random_range(lo + 1..hi);
    boxes[var] = (lo, cut);
    let left = grow(grid, boxes, depth_left - 1, p_split, rng);
    boxes[var] = (cut, hi);
    let right = grow(grid, boxes, depth_left - 1, p_split, rng);
    boxes[var] = (lo, hi);
    Node::split(SplitRule::new(var, cut), left, right)
}

/// Every tree of height at most `max_depth` whose terminal regions are all
/// nonempty, with zero leaf values.
pub fn all_trees<F: Real>(grid: &CutpointGrid, max_depth: usize) -> Vec<RegressionTree<F>> {
    let mut boxes: Vec<(usize, usize)> = (0..grid.n_vars()).map(|v| (0, grid.top(v))).collect();
    enumerate(grid, &mut boxes, max_depth)
        .into_iter()
        .map(RegressionTree::from_root)
        .collect()
}

fn enumerate<F: Real>(grid: &CutpointGrid, boxes: &mut [(usize, usize)], depth_left: usize) -> Vec<Node<F>> {
    let mut out = vec![Node::leaf(F::zero())];
    if depth_left == 0 {
        return out;
    }
    for var in 0..grid.n_vars() {
        let (lo, hi) = boxes[var];
        for cut in lo + 1..hi {
            boxes[var] = (lo, cut);
            let lefts = enumerate(grid, boxes, depth_left - 1);
            boxes[var] = (cut, hi);
            let rights = enumerate(grid, boxes, depth_left - 1);
            boxes[var] = (lo, hi);
            for l in &lefts {
                for r in &rights {
                    out.push(Node::split(SplitRule::new(var, cut), l.clone(), r.clone()));
                }
            }
        }
    }
    out
}
