//! Sum-of-trees model: priors, the leaf-integrated likelihood, and the
//! conjugate Gibbs draws for leaf values and the error variance.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredDist, ContinuousCDF};

use crate::data::ScaledData;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tree::{CutpointGrid, Node, NodeId, RegressionTree, SplitRule};

/// Prior and constraint settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub m: usize,
    pub split_alpha: f64,
    pub split_beta: f64,
    /// Leaf prior standard deviation, scaled-response units.
    pub sigma_mu: f64,
    pub nu: f64,
    pub lambda: f64,
    pub min_leaf_n: usize,
    /// Trees deeper than this have prior probability zero.
    pub max_depth: Option<usize>,
}

impl Hyperparams {
    /// Standard defaults for `m` trees; `lambda` should then be calibrated
    /// with [`Hyperparams::calibrate_lambda`].
    pub fn defaults(m: usize) -> Self {
        Self {
            m,
            split_alpha: 0.95,
            split_beta: 2.0,
            sigma_mu: default_sigma_mu(m, 2.0),
            nu: 3.0,
            lambda: 1.0,
            min_leaf_n: 5,
            max_depth: None,
        }
    }

    /// Set `lambda` so the prior puts probability `q` below `sigma2_hat`.
    pub fn calibrate_lambda(&mut self, sigma2_hat: f64, q: f64) {
        self.lambda = lambda_for_quantile(self.nu, sigma2_hat, q);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Hyper(msg));
        if self.m < 1 {
            return bad("m must be >= 1".into());
        }
        if !(self.split_alpha > 0.0 && self.split_alpha < 1.0) {
            return bad(format!("split_alpha must lie in (0,1), got {}", self.split_alpha));
        }
        if !(self.split_beta >= 0.0) {
            return bad(format!("split_beta must be >= 0, got {}", self.split_beta));
        }
        for (name, v) in [("sigma_mu", self.sigma_mu), ("nu", self.nu), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.min_leaf_n < 1 {
            return bad("min_leaf_n must be >= 1".into());
        }
        Ok(())
    }

    /// Prior probability that a node at `depth` splits.
    pub fn p_split(&self, depth: usize) -> f64 {
        if self.max_depth.is_some_and(|d| depth >= d) {
            return 0.0;
        }
        self.split_alpha * (1.0 + depth as f64).powf(-self.split_beta)
    }
}

/// `0.5 / (k sqrt(m))`: the sum of `m` leaves has prior sd `0.5/k`.
pub fn default_sigma_mu(m: usize, k: f64) -> f64 {
    0.5 / (k * (m as f64).sqrt())
}

/// `lambda` with `P(sigma2 < sigma2_hat) = q` under `sigma2 ~ nu lambda / chi2_nu`.
pub fn lambda_for_quantile(nu: f64, sigma2_hat: f64, q: f64) -> f64 {
    let chi = ChiSquaredDist::new(nu).expect("nu > 0");
    sigma2_hat * chi.inverse_cdf(1.0 - q) / nu
}

/// Sample variance of the scaled response, the usual rough `sigma2` guess.
pub fn naive_sigma2<F: Real>(y: &[F]) -> f64 {
    let n = y.len() as f64;
    if n < 2.0 {
        return 1.0;
    }
    let mean = y.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    y.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Log prior of the tree shape: each internal node at depth `d` contributes
/// `log p_split(d)` and each leaf `log(1 - p_split(d))`.
pub fn log_tree_prior<F: Real>(tree: &RegressionTree<F>, hyper: &Hyperparams) -> f64 {
    fn walk<F: Real>(n: &Node<F>, depth: usize, h: &Hyperparams) -> f64 {
        let p = h.p_split(depth);
        match n.children() {
            None => (1.0 - p).ln(),
            Some((l, r)) => p.ln() + walk(l, depth + 1, h) + walk(r, depth + 1, h),
        }
    }
    walk(tree.root(), 0, hyper)
}

/// Log prior of the split rules: uniform over variables, then uniform over
/// that variable's lattice.
pub fn log_rule_prior<F: Real>(tree: &RegressionTree<F>, grid: &CutpointGrid) -> f64 {
    let d = grid.n_vars() as f64;
    tree.internal_ids()
        .iter()
        .map(|&id| {
            let rule = tree.node(id).and_then(Node::rule).expect("internal");
            -(d * grid.size(rule.var) as f64).ln()
        })
        .sum()
}

pub fn log_prior<F: Real>(tree: &RegressionTree<F>, hyper: &Hyperparams, grid: &CutpointGrid) -> f64 {
    log_tree_prior(tree, hyper) + log_rule_prior(tree, grid)
}

/// Sufficient statistics of the residuals in one terminal node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LeafStats {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl LeafStats {
    pub fn push(&mut self, r: f64) {
        self.n += 1;
        self.sum += r;
        self.sumsq += r * r;
    }

    pub fn from_values(rs: &[f64]) -> Self {
        let mut s = Self::default();
        rs.iter().for_each(|&r| s.push(r));
        s
    }
}

/// `log ∫ Π N(r_i; mu, sigma2) N(mu; 0, sigma_mu²) dmu` in closed form.
pub fn log_marginal_leaf(s: LeafStats, sigma2: f64, sigma_mu: f64) -> f64 {
    let n = s.n as f64;
    let t2 = sigma_mu * sigma_mu;
    let denom = sigma2 + n * t2;
    -0.5 * n * (2.0 * PI * sigma2).ln() - 0.5 * (denom / sigma2).ln() - s.sumsq / (2.0 * sigma2)
        + t2 * s.sum * s.sum / (2.0 * sigma2 * denom)
}

/// Conjugate posterior mean and variance of a leaf value.
pub fn leaf_posterior(s: LeafStats, sigma2: f64, sigma_mu: f64) -> (f64, f64) {
    let prec = s.n as f64 / sigma2 + 1.0 / (sigma_mu * sigma_mu);
    let var = 1.0 / prec;
    (var * s.sum / sigma2, var)
}

/// Residual statistics per terminal node, in pre-order.
pub fn leaf_stats<F: Real>(tree: &RegressionTree<F>, data: &ScaledData<F>, resid: &[F]) -> Vec<LeafStats> {
    let mut out = vec![LeafStats::default(); tree.n_leaves()];
    for i in 0..data.n() {
        out[tree.route_binned(data.bins(i))].push(resid[i].as_f64());
    }
    out
}

/// Statistics for the terminal nodes under `id` only, in pre-order within
/// that subtree. Observations that do not reach `id` are skipped.
pub fn subtree_leaf_stats<F: Real>(
    tree: &RegressionTree<F>,
    id: NodeId,
    data: &ScaledData<F>,
    resid: &[F],
) -> Vec<LeafStats> {
    let sub = tree.node(id).expect("node exists");
    let path = tree.ancestors(id);
    let mut out = vec![LeafStats::default(); sub.n_leaves()];
    for i in 0..data.n() {
        let b = data.bins(i);
        if reaches(&path, b) {
            out[sub.route_binned(b)].push(resid[i].as_f64());
        }
    }
    out
}

pub(crate) fn reaches(path: &[(SplitRule, bool)], bins: &[u16]) -> bool {
    path.iter().all(|(rule, left)| rule.goes_left(bins) == *left)
}

fn sum_marginals(stats: &[LeafStats], sigma2: f64, hyper: &Hyperparams) -> Result<f64> {
    if let Some(s) = stats.iter().find(|s| s.n < hyper.min_leaf_n) {
        return Err(Error::Tree(format!("terminal node holds {} observations, need {}", s.n, hyper.min_leaf_n)));
    }
    Ok(stats.iter().map(|&s| log_marginal_leaf(s, sigma2, hyper.sigma_mu)).sum())
}

/// Tree log-likelihood with every leaf value integrated out. Fails when a
/// terminal node holds fewer than `min_leaf_n` observations.
pub fn log_integrated_likelihood<F: Real>(
    tree: &RegressionTree<F>,
    data: &ScaledData<F>,
    resid: &[F],
    sigma2: f64,
    hyper: &Hyperparams,
) -> Result<f64> {
    sum_marginals(&leaf_stats(tree, data, resid), sigma2, hyper)
}

/// The part of [`log_integrated_likelihood`] contributed by leaves under `id`.
pub fn local_log_integrated_likelihood<F: Real>(
    tree: &RegressionTree<F>,
    id: NodeId,
    data: &ScaledData<F>,
    resid: &[F],
    sigma2: f64,
    hyper: &Hyperparams,
) -> Result<f64> {
    sum_marginals(&subtree_leaf_stats(tree, id, data, resid), sigma2, hyper)
}

/// Log-likelihood under the current leaf values, for leaves under `id`.
pub fn local_log_likelihood<F: Real>(
    tree: &RegressionTree<F>,
    id: NodeId,
    data: &ScaledData<F>,
    resid: &[F],
    sigma2: f64,
    hyper: &Hyperparams,
) -> Result<f64> {
    let stats = subtree_leaf_stats(tree, id, data, resid);
    if let Some(s) = stats.iter().find(|s| s.n < hyper.min_leaf_n) {
        return Err(Error::Tree(format!("terminal node holds {} observations, need {}", s.n, hyper.min_leaf_n)));
    }
    let mus = tree.node(id).expect("node exists").leaf_values();
    Ok(stats
        .iter()
        .zip(mus)
        .map(|(s, mu)| {
            let mu = mu.as_f64();
            let n = s.n as f64;
            let ss = s.sumsq - 2.0 * mu * s.sum + n * mu * mu;
            -0.5 * n * (2.0 * PI * sigma2).ln() - ss / (2.0 * sigma2)
        })
        .sum())
}

/// Draw every leaf value from its conjugate Normal posterior.
pub fn draw_leaf_mus<F: Real, R: Rng + ?Sized>(
    tree: &mut RegressionTree<F>,
    data: &ScaledData<F>,
    resid: &[F],
    sigma2: f64,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let stats = leaf_stats(tree, data, resid);
    draw_leaf_mus_from(tree, &stats, sigma2, hyper, rng);
}

pub fn draw_leaf_mus_from<F: Real, R: Rng + ?Sized>(
    tree: &mut RegressionTree<F>,
    stats: &[LeafStats],
    sigma2: f64,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let mus: Vec<F> = stats
        .iter()
        .map(|&s| {
            let (mean, var) = leaf_posterior(s, sigma2, hyper.sigma_mu);
            F::of(mean + var.sqrt() * f64::std_normal(rng))
        })
        .collect();
    tree.set_leaf_values(&mus);
}

/// Draw from the scaled-inverse-chi-squared posterior
/// `(nu lambda + Σr²) / chi2_{nu+n}`.
pub fn draw_sigma2<F: Real, R: Rng + ?Sized>(resid: &[F], hyper: &Hyperparams, rng: &mut R) -> f64 {
    let ss: f64 = resid.iter().map(|r| r.as_f64().powi(2)).sum();
    let df = hyper.nu + resid.len() as f64;
    let chi = ChiSquared::new(df).expect("positive df");
    (hyper.nu * hyper.lambda + ss) / chi.sample(rng)
}

/// Full model state: the trees and the error variance.
#[derive(Clone, Debug)]
pub struct SumOfTreesState<F> {
    pub trees: Vec<RegressionTree<F>>,
    pub sigma2: f64,
}

impl<F: Real> SumOfTreesState<F> {
    /// `m` single-leaf trees with zero leaves.
    pub fn new(m: usize, sigma2: f64) -> Self {
        Self { trees: vec![RegressionTree::leaf(F::zero()); m], sigma2 }
    }

    /// Sum-of-trees prediction for binned observation `bins`.
    pub fn predict_binned(&self, bins: &[u16]) -> F {
        self.trees.iter().map(|t| t.root().leaf_values()[t.route_binned(bins)]).sum()
    }

    /// Fitted values of every tree at every training row.
    pub fn fits(&self, data: &ScaledData<F>) -> Vec<Vec<F>> {
        self.trees.iter().map(|t| tree_fit(t, data)).collect()
    }
}

/// One tree's predictions at the training rows.
pub fn tree_fit<F: Real>(tree: &RegressionTree<F>, data: &ScaledData<F>) -> Vec<F> {
    let mus = tree.leaf_values();
    (0..data.n()).map(|i| mus[tree.route_binned(data.bins(i))]).collect()
}

/// `y - Σ_{k≠j} g_k(x)`, computed from scratch.
pub fn residual_targets<F: Real>(data: &ScaledData<F>, state: &SumOfTreesState<F>, j: usize) -> Vec<F> {
    let mut r = data.y.clone();
    for (k, t) in state.trees.iter().enumerate() {
        if k == j {
            continue;
        }
        for (ri, g) in r.iter_mut().zip(tree_fit(t, data)) {
            *ri = *ri - g;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Scaling;
    use crate::tree::fixtures::{lf, r, sp};
    use crate::tree::{random_tree, CutpointGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_data(n: usize, d: usize, seed: u64) -> ScaledData<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] - 0.5 + 0.1 * f64::std_normal(&mut rng)).collect();
        let grid = CutpointGrid::uniform(d, 11).unwrap();
        let scaling = Scaling { x_min: vec![0.0; d], x_max: vec![1.0; d], y_min: -0.5, y_max: 0.5 };
        ScaledData::from_unit(&x, &y, grid, scaling).unwrap()
    }

    #[test]
    fn prior_of_leaf_and_stump() {
        let h = Hyperparams::defaults(1);
        let leaf = RegressionTree::leaf(0.0);
        assert!((log_tree_prior(&leaf, &h) - 0.05f64.ln()).abs() < 1e-12);
        let stump = RegressionTree::from_root(sp(r(0, 5), lf(0.0), lf(0.0)));
        let want = 0.95f64.ln() + 2.0 * (1.0 - 0.95 / 4.0f64).ln();
        assert!((log_tree_prior(&stump, &h) - want).abs() < 1e-12);
    }

    #[test]
    fn shape_prior_mass_at_bounded_depth() {
        // Σ over shapes of height <= D: recursion S(d, D) = (1-p) + p S(d+1)^2.
        let h = Hyperparams::defaults(1);
        fn shapes(depth: usize, left: usize) -> Vec<Node<f64>> {
            let mut out = vec![lf(0.0)];
            if left > 0 {
                let kids = shapes(depth + 1, left - 1);
                for a in &kids {
                    for b in &kids {
                        out.push(sp(r(0, 1), a.clone(), b.clone()));
                    }
                }
            }
            out
        }
        let mut prev = 0.0;
        for d in 0..=4 {
            let total: f64 = shapes(0, d)
                .into_iter()
                .map(|n| log_tree_prior(&RegressionTree::from_root(n), &h).exp())
                .sum();
            assert!(total <= 1.0 + 1e-12 && total >= prev, "depth {d}: {total}");
            prev = total;
        }
        assert!(prev > 0.99);
        let mut capped = h.clone();
        capped.max_depth = Some(2);
        let total: f64 = shapes(0, 2)
            .into_iter()
            .map(|n| log_tree_prior(&RegressionTree::from_root(n), &capped).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    /// Adaptive Simpson in the log domain around the posterior mode.
    fn quadrature_log_marginal(rs: &[f64], sigma2: f64, sigma_mu: f64) -> f64 {
        let f = |mu: f64| -> f64 {
            rs.iter().map(|r| -0.5 * (2.0 * PI * sigma2).ln() - (r - mu).powi(2) / (2.0 * sigma2)).sum::<f64>()
                - 0.5 * (2.0 * PI * sigma_mu * sigma_mu).ln()
                - mu * mu / (2.0 * sigma_mu * sigma_mu)
        };
        let (m, v) = leaf_posterior(LeafStats::from_values(rs), sigma2, sigma_mu);
        let sd = v.sqrt();
        let peak = f(m);
        let (a, b) = (m - 14.0 * sd, m + 14.0 * sd);
        let k = 20_000;
        let h = (b - a) / k as f64;
        let mut acc = 0.0;
        for i in 0..=k {
            let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * (f(a + i as f64 * h) - peak).exp();
        }
        peak + (acc * h / 3.0).ln()
    }

    #[test]
    fn marginal_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(n, sigma2, sigma_mu) in &[(1, 0.1, 0.5), (7, 0.01, 0.05), (40, 1.0, 0.3), (5, 0.5, 2.0)] {
            let rs: Vec<f64> = (0..n).map(|_| 0.3 + f64::std_normal(&mut rng) * 0.2).collect();
            let exact = log_marginal_leaf(LeafStats::from_values(&rs), sigma2, sigma_mu);
            let num = quadrature_log_marginal(&rs, sigma2, sigma_mu);
            assert!(((exact - num).exp() - 1.0).abs() < 1e-6, "n={n}: {exact} vs {num}");
        }
        // all-zero residuals
        let rs = vec![0.0; 10];
        let exact = log_marginal_leaf(LeafStats::from_values(&rs), 0.2, 0.1);
        assert!(((exact - quadrature_log_marginal(&rs, 0.2, 0.1)).exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn likelihood_is_additive_and_local_parts_agree() {
        let data = toy_data(300, 3, 2);
        let mut h = Hyperparams::defaults(1);
        h.min_leaf_n = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let resid = data.y.clone();
        let mut checked = 0;
        while checked < 100 {
            let t: RegressionTree<f64> = random_tree(&data.grid, 3, 0.8, &mut rng);
            let Ok(full) = log_integrated_likelihood(&t, &data, &resid, 0.05, &h) else { continue };
            let per_leaf: f64 =
                leaf_stats(&t, &data, &resid).iter().map(|&s| log_marginal_leaf(s, 0.05, h.sigma_mu)).sum();
            assert!((full - per_leaf).abs() < 1e-10);
            for id in t.internal_ids() {
                let inside = local_log_integrated_likelihood(&t, id, &data, &resid, 0.05, &h).unwrap();
                // the rest of the tree: replace the subtree by a leaf and remove its share
                let collapsed = t.replace_subtree(id, RegressionTree::leaf(0.0)).unwrap();
                let outside = log_integrated_likelihood(&collapsed, &data, &resid, 0.05, &h).unwrap()
                    - local_log_integrated_likelihood(&collapsed, id, &data, &resid, 0.05, &h).unwrap();
                assert!((inside + outside - full).abs() < 1e-9);
            }
            checked += 1;
        }
    }

    #[test]
    fn min_leaf_n_is_enforced() {
        let data = toy_data(20, 1, 4);
        let h = Hyperparams::defaults(1);
        let t = RegressionTree::from_root(sp(r(0, 0), lf(0.0), lf(0.0)));
        assert!(log_integrated_likelihood(&t, &data, &data.y, 0.1, &h).is_err());
    }

    #[test]
    fn leaf_draws_match_conjugate_posterior() {
        let data = toy_data(50, 1, 5);
        let mut h = Hyperparams::defaults(1);
        h.sigma_mu = 0.3;
        let sigma2 = 0.02;
        let mut t = RegressionTree::leaf(0.0);
        let s = LeafStats::from_values(&data.y);
        let (mean, var) = leaf_posterior(s, sigma2, h.sigma_mu);
        let want = (s.n as f64 / sigma2) * (s.sum / s.n as f64) / (s.n as f64 / sigma2 + 1.0 / 0.09);
        assert!((mean - want).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = 100_000;
        let mut acc = 0.0;
        for _ in 0..k {
            draw_leaf_mus(&mut t, &data, &data.y, sigma2, &h, &mut rng);
            acc += t.leaf_values()[0];
        }
        let emp = acc / k as f64;
        assert!((emp - mean).abs() < 4.0 * (var / k as f64).sqrt());

        h.sigma_mu = 1e-9;
        draw_leaf_mus(&mut t, &data, &data.y, sigma2, &h, &mut rng);
        assert!(t.leaf_values()[0].abs() < 1e-6);
    }

    #[test]
    fn sigma2_draws() {
        let h = Hyperparams { nu: 3.0, lambda: 0.1, ..Hyperparams::defaults(1) };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // n = 0 falls back to the prior, whose mean is nu lambda / (nu - 2)
        let k = 200_000;
        let prior_mean: f64 = (0..k).map(|_| draw_sigma2::<f64, _>(&[], &h, &mut rng)).sum::<f64>() / k as f64;
        assert!((prior_mean - 0.3).abs() < 0.03, "{prior_mean}");

        let resid: Vec<f64> = (0..5000).map(|_| 0.2 * f64::std_normal(&mut rng)).collect();
        let ss: f64 = resid.iter().map(|r| r * r).sum();
        let df = 3.0 + 5000.0;
        let mean = (3.0 * 0.1 + ss) / (df - 2.0);
        let k = 20_000;
        let draws: Vec<f64> = (0..k).map(|_| draw_sigma2(&resid, &h, &mut rng)).collect();
        let emp = draws.iter().sum::<f64>() / k as f64;
        let sd = mean * (2.0 / (df - 4.0)).sqrt();
        assert!((emp - mean).abs() < 4.0 * sd / (k as f64).sqrt());
        assert!((emp - ss / 5000.0).abs() < 0.002);
    }

    #[test]
    fn lambda_calibration() {
        let lambda = lambda_for_quantile(3.0, 0.04, 0.9);
        // P(3 lambda / X < 0.04) = P(X > 3 lambda / 0.04) should be 0.9
        let chi = ChiSquaredDist::new(3.0).unwrap();
        assert!((1.0 - chi.cdf(3.0 * lambda / 0.04) - 0.9).abs() < 1e-9);
    }

    #[test]
    fn residual_targets_exclude_one_tree() {
        let data = toy_data(30, 2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let state = SumOfTreesState {
            trees: (0..3).map(|_| random_tree(&data.grid, 2, 0.9, &mut rng)).collect(),
            sigma2: 1.0,
        };
        let single = SumOfTreesState::<f64>::new(1, 1.0);
        assert_eq!(residual_targets(&data, &single, 0), data.y);
        let r = residual_targets(&data, &state, 1);
        for i in 0..data.n() {
            let g0 = state.trees[0].leaf_values()[state.trees[0].route_binned(data.bins(i))];
            let g2 = state.trees[2].leaf_values()[state.trees[2].route_binned(data.bins(i))];
            assert!((r[i] - (data.y[i] - g0 - g2)).abs() < 1e-12);
        }
    }
}
