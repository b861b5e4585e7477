//! The MCMC driver: one structural proposal and one leaf-value draw per tree
//! per sweep, then an error-variance draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ScaledData;
use crate::error::{Error, Result};
use crate::model::{self, Hyperparams, LeafStats, SumOfTreesState};
use crate::proposals::{
    build_preconditioner, propose_birth_death, propose_change_var, propose_perturb, propose_rotate,
    CorrelationPreconditioner, CutLikelihood, KernelSettings, ProposalOutcome, Step, Target,
};
use crate::scalar::Real;
use crate::tree::RegressionTree;

/// Mixture weights over move families. Birth and death share one weight.
/// When read from a config table, omitted families get weight 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalWeights {
    #[serde(default)]
    pub birth_death: f64,
    #[serde(default)]
    pub perturb: f64,
    #[serde(default)]
    pub change_var: f64,
    #[serde(default)]
    pub rotate: f64,
}

impl Default for ProposalWeights {
    fn default() -> Self {
        Self { birth_death: 0.5, perturb: 0.2, change_var: 0.1, rotate: 0.2 }
    }
}

impl ProposalWeights {
    pub fn birth_death_only() -> Self {
        Self { birth_death: 1.0, perturb: 0.0, change_var: 0.0, rotate: 0.0 }
    }

    pub fn with_rotate(rotate: f64) -> Self {
        Self { birth_death: 1.0 - rotate, perturb: 0.0, change_var: 0.0, rotate }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.birth_death, self.perturb, self.change_var, self.rotate]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Config(format!("proposal weights must be finite and >= 0, got {w:?}")));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("at least one proposal weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    BirthDeath,
    Perturb,
    ChangeVar,
    Rotate,
}

impl Family {
    const ALL: [Family; 4] = [Self::BirthDeath, Self::Perturb, Self::ChangeVar, Self::Rotate];
}

/// Everything that controls a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub burnin: usize,
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
    pub weights: ProposalWeights,
    pub hyper: Hyperparams,
    /// Perturb window scale per variable; a single entry applies to all.
    pub alpha: Vec<f64>,
    pub cut_likelihood: CutLikelihood,
    pub precond_cutoff: f64,
    /// Hold the error variance at this value instead of drawing it.
    pub sigma2_fixed: Option<f64>,
    /// Keep canonical tree text for every kept draw.
    pub record_trees: bool,
    /// Keep the full ensemble, leaf values included, for every kept draw.
    pub record_forest: bool,
    /// Recompute cached fits from scratch every this many sweeps and fail on
    /// a mismatch; zero disables.
    pub verify_every: usize,
}

impl RunConfig {
    pub fn new(hyper: Hyperparams, burnin: usize, keep: usize, seed: u64) -> Self {
        Self {
            burnin,
            keep,
            thin: 1,
            seed,
            weights: ProposalWeights::default(),
            hyper,
            alpha: vec![0.85],
            cut_likelihood: CutLikelihood::Integrated,
            precond_cutoff: 0.30,
            sigma2_fixed: None,
            record_trees: true,
            record_forest: false,
            verify_every: 0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.hyper.validate()?;
        self.weights.validate()?;
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if !(self.alpha.len() == 1 || self.alpha.len() == d) {
            return Err(Error::Config(format!("alpha needs 1 or {d} entries, got {}", self.alpha.len())));
        }
        if let Some(a) = self.alpha.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {a}")));
        }
        if !(0.0..1.0).contains(&self.precond_cutoff) {
            return Err(Error::Config(format!("precond_cutoff must lie in [0, 1), got {}", self.precond_cutoff)));
        }
        if let Some(s) = self.sigma2_fixed {
            if !(s > 0.0) {
                return Err(Error::Config(format!("sigma2_fixed must be positive, got {s}")));
            }
        }
        Ok(())
    }

    fn kernel_settings(&self, d: usize) -> KernelSettings {
        let alpha = if self.alpha.len() == 1 { vec![self.alpha[0]; d] } else { self.alpha.clone() };
        KernelSettings { alpha, likelihood: self.cut_likelihood }
    }
}

/// One proposal in the chain's history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub iter: usize,
    pub tree: usize,
    pub outcome: ProposalOutcome,
}

/// Output of one chain.
#[derive(Clone, Debug)]
pub struct ChainResult<F> {
    pub seed: u64,
    pub burnin: usize,
    /// Kept draws of the sum-of-trees prediction at each requested point,
    /// in raw response units: `predictions[draw][point]`.
    pub predictions: Vec<Vec<f64>>,
    /// Kept draws of the error variance in raw units.
    pub sigma2: Vec<f64>,
    /// Canonical structure of every tree at each kept draw.
    pub trees: Vec<Vec<String>>,
    /// Canonical text of every tree, with leaf values, at each kept draw.
    pub forests: Vec<Vec<String>>,
    pub outcomes: Vec<OutcomeRecord>,
    pub final_state: SumOfTreesState<F>,
}

impl<F> ChainResult<F> {
    /// Proposals made after burn-in.
    pub fn kept_outcomes(&self) -> impl Iterator<Item = &ProposalOutcome> {
        self.outcomes.iter().filter(|r| r.iter >= self.burnin).map(|r| &r.outcome)
    }
}

/// Chain state with per-tree fitted values cached at every training row.
struct Fit<F> {
    state: SumOfTreesState<F>,
    per_tree: Vec<Vec<F>>,
    total: Vec<F>,
}

impl<F: Real> Fit<F> {
    fn new(m: usize, n: usize, sigma2: f64) -> Self {
        Self { state: SumOfTreesState::new(m, sigma2), per_tree: vec![vec![F::zero(); n]; m], total: vec![F::zero(); n] }
    }

    fn residuals_without(&self, j: usize, y: &[F], out: &mut Vec<F>) {
        out.clear();
        out.extend(y.iter().zip(&self.total).zip(&self.per_tree[j]).map(|((&y, &t), &g)| y - (t - g)));
    }

    /// Draw tree `j`'s leaves and refresh its cached fit.
    fn redraw_leaves<R: Rng + ?Sized>(
        &mut self,
        j: usize,
        data: &ScaledData<F>,
        resid: &[F],
        hyper: &Hyperparams,
        rng: &mut R,
    ) {
        let tree = &mut self.state.trees[j];
        let leaf_of: Vec<usize> = (0..data.n()).map(|i| tree.route_binned(data.bins(i))).collect();
        let mut stats = vec![LeafStats::default(); tree.n_leaves()];
        for (i, &k) in leaf_of.iter().enumerate() {
            stats[k].push(resid[i].as_f64());
        }
        model::draw_leaf_mus_from(tree, &stats, self.state.sigma2, hyper, rng);
        let mus = tree.leaf_values();
        for (i, &k) in leaf_of.iter().enumerate() {
            let g = mus[k];
            self.total[i] = self.total[i] - self.per_tree[j][i] + g;
            self.per_tree[j][i] = g;
        }
    }

    fn verify(&self, data: &ScaledData<F>) -> Result<()> {
        let fits = self.state.fits(data);
        for i in 0..data.n() {
            let direct: f64 = fits.iter().map(|f| f[i].as_f64()).sum();
            let tol = if std::mem::size_of::<F>() == 4 { 1e-4 } else { 1e-10 };
            if (direct - self.total[i].as_f64()).abs() > tol {
                return Err(Error::Tree(format!("cached fit drifted at row {i}: {} vs {direct}", self.total[i])));
            }
        }
        Ok(())
    }
}

fn pick_family<R: Rng + ?Sized>(w: &[f64; 4], rng: &mut R) -> Family {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &x) in w.iter().enumerate() {
        if u < x {
            return Family::ALL[k];
        }
        u -= x;
    }
    Family::ALL[w.iter().rposition(|&x| x > 0.0).expect("positive weight")]
}

/// Run one chain on `data`, recording predictions at the binned `points`.
pub fn run_chain<F: Real>(config: &RunConfig, data: &ScaledData<F>, points: &[Vec<u16>]) -> Result<ChainResult<F>> {
    config.validate(data.d())?;
    let hyper = &config.hyper;
    if data.n() < hyper.min_leaf_n {
        return Err(Error::Config(format!("{} observations is fewer than min_leaf_n = {}", data.n(), hyper.min_leaf_n)));
    }
    if let Some(p) = points.iter().find(|p| p.len() != data.d()) {
        return Err(Error::Dimension(format!("prediction point has {} covariates, data has {}", p.len(), data.d())));
    }
    let settings = config.kernel_settings(data.d());
    let precond = if config.weights.change_var > 0.0 {
        let cols: Vec<Vec<f64>> = (0..data.d()).map(|j| data.column(j)).collect();
        build_preconditioner(&cols, config.precond_cutoff)
    } else {
        CorrelationPreconditioner::identity(data.d())
    };
    let weights = config.weights.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sigma2_init = config.sigma2_fixed.unwrap_or_else(|| model::naive_sigma2(&data.y));
    let mut fit = Fit::new(hyper.m, data.n(), sigma2_init);

    let total_iters = config.burnin + config.keep;
    let mut out = ChainResult {
        seed: config.seed,
        burnin: config.burnin,
        predictions: Vec::new(),
        sigma2: Vec::new(),
        trees: Vec::new(),
        forests: Vec::new(),
        outcomes: Vec::with_capacity(total_iters * hyper.m),
        final_state: SumOfTreesState::new(0, sigma2_init),
    };
    let mut resid = Vec::with_capacity(data.n());

    for iter in 0..total_iters {
        for j in 0..hyper.m {
            fit.residuals_without(j, &data.y, &mut resid);
            let target = Target { data, resid: &resid, sigma2: fit.state.sigma2, hyper };
            let tree = &fit.state.trees[j];
            let step: Step<F> = match pick_family(&weights, &mut rng) {
                Family::BirthDeath => propose_birth_death(tree, &target, &mut rng),
                Family::Perturb => propose_perturb(tree, &target, &settings, &mut rng),
                Family::ChangeVar => propose_change_var(tree, &target, &settings, &precond, &mut rng),
                Family::Rotate => propose_rotate(tree, &target, &mut rng),
            };
            out.outcomes.push(OutcomeRecord { iter, tree: j, outcome: step.outcome.clone() });
            if let Some(t) = step.accepted_tree() {
                fit.state.trees[j] = t;
            }
            fit.redraw_leaves(j, data, &resid, hyper, &mut rng);
        }
        if config.sigma2_fixed.is_none() {
            let full: Vec<F> = data.y.iter().zip(&fit.total).map(|(&y, &g)| y - g).collect();
            fit.state.sigma2 = model::draw_sigma2(&full, hyper, &mut rng);
        }
        if config.verify_every > 0 && (iter + 1) % config.verify_every == 0 {
            fit.verify(data)?;
        }
        if iter >= config.burnin && (iter - config.burnin + 1).is_multiple_of(config.thin) {
            out.predictions.push(
                points.iter().map(|p| data.scaling.unscale_y(fit.state.predict_binned(p).as_f64())).collect(),
            );
            out.sigma2.push(data.scaling.unscale_var(fit.state.sigma2));
            if config.record_trees {
                out.trees.push(fit.state.trees.iter().map(RegressionTree::structure_key).collect());
            }
            if config.record_forest {
                out.forests.push(fit.state.trees.iter().map(RegressionTree::to_canonical).collect());
            }
        }
    }
    out.final_state = fit.state;
    Ok(out)
}

/// Seed of chain `k` in a replicated run; chain 0 uses the configured seed.
pub fn chain_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// `k` independent chains run concurrently, returned in chain order.
pub fn run_replicated<F: Real>(
    config: &RunConfig,
    data: &ScaledData<F>,
    points: &[Vec<u16>],
    k: usize,
) -> Result<Vec<ChainResult<F>>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..k)
            .map(|c| {
                let mut cfg = config.clone();
                cfg.seed = chain_seed(config.seed, c);
                s.spawn(move || run_chain(&cfg, data, points))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}
