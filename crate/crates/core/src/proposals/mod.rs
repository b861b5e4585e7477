//! Metropolis-Hastings kernels acting on one tree of the ensemble, with the
//! other trees held fixed through the residual targets.

mod birth_death;
mod change_var;
mod perturb;
mod precond;
mod rotate;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use birth_death::{growable_leaves, propose_birth, propose_birth_death, propose_death};
pub use change_var::{change_var_weights, propose_change_var};
pub use perturb::{perturb_window, propose_perturb};
pub use precond::{build_preconditioner, CorrelationPreconditioner};
pub use rotate::propose_rotate;

use crate::data::ScaledData;
use crate::model::{self, Hyperparams};
use crate::scalar::Real;
use crate::structural::Inadmissible;
use crate::tree::{NodeId, RegressionTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProposalKind {
    Birth,
    Death,
    Perturb,
    ChangeVar,
    Rotate,
}

impl ProposalKind {
    pub const ALL: [ProposalKind; 5] = [Self::Birth, Self::Death, Self::Perturb, Self::ChangeVar, Self::Rotate];

    pub fn name(self) -> &'static str {
        match self {
            Self::Birth => "birth",
            Self::Death => "death",
            Self::Perturb => "perturb",
            Self::ChangeVar => "change_var",
            Self::Rotate => "rotate",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Why a proposal was turned down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    /// The move is not possible on this tree.
    Infeasible,
    /// A terminal node would hold fewer than `min_leaf_n` observations.
    MinLeaf,
    /// The candidate exceeds the depth limit.
    Depth,
    /// The rotation could not produce an admissible tree.
    DoubleMerge,
    Irreversible,
    /// Lost the accept/reject draw.
    Metropolis,
}

impl From<Inadmissible> for Rejection {
    fn from(e: Inadmissible) -> Self {
        match e {
            Inadmissible::NotRotatable => Self::Infeasible,
            Inadmissible::DoubleMerge => Self::DoubleMerge,
            Inadmissible::Irreversible => Self::Irreversible,
        }
    }
}

/// Record of one proposal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalOutcome {
    pub kind: ProposalKind,
    pub accepted: bool,
    /// Change in log integrated likelihood, when the candidate was admissible.
    pub delta_log_il: Option<f64>,
    pub log_prior_ratio: Option<f64>,
    pub log_proposal_ratio: Option<f64>,
    pub rejection: Option<Rejection>,
    /// Node the move acted at.
    pub node: Option<u64>,
}

impl ProposalOutcome {
    pub fn rejected(kind: ProposalKind, why: Rejection) -> Self {
        Self {
            kind,
            accepted: false,
            delta_log_il: None,
            log_prior_ratio: None,
            log_proposal_ratio: None,
            rejection: Some(why),
            node: None,
        }
    }

    pub fn log_acceptance_ratio(&self) -> Option<f64> {
        Some(self.delta_log_il? + self.log_prior_ratio? + self.log_proposal_ratio?)
    }
}

/// Result of applying a kernel: the outcome and the candidate tree, when one
/// was built. The candidate replaces the current tree only if accepted.
#[derive(Clone, Debug)]
pub struct Step<F> {
    pub outcome: ProposalOutcome,
    pub candidate: Option<RegressionTree<F>>,
}

impl<F> Step<F> {
    fn reject(kind: ProposalKind, why: Rejection) -> Self {
        Self { outcome: ProposalOutcome::rejected(kind, why), candidate: None }
    }

    /// The new tree if the move was accepted.
    pub fn accepted_tree(self) -> Option<RegressionTree<F>> {
        if self.outcome.accepted {
            self.candidate
        } else {
            None
        }
    }
}

/// Which likelihood the perturb and change-of-variable kernels use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutLikelihood {
    /// Leaf values integrated out, as for the dimension-changing moves.
    #[default]
    Integrated,
    /// Current leaf values held fixed.
    Conditional,
}

/// Tuning of the cutpoint kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSettings {
    /// Per-variable perturb window scale, in (0, 1].
    pub alpha: Vec<f64>,
    pub likelihood: CutLikelihood,
}

impl KernelSettings {
    pub fn uniform(d: usize, alpha: f64) -> Self {
        Self { alpha: vec![alpha; d], likelihood: CutLikelihood::Integrated }
    }
}

/// What a kernel needs to score a candidate for one tree.
#[derive(Clone, Copy)]
pub struct Target<'a, F> {
    pub data: &'a ScaledData<F>,
    /// Residual targets with this tree's contribution removed.
    pub resid: &'a [F],
    pub sigma2: f64,
    pub hyper: &'a Hyperparams,
}

impl<F: Real> Target<'_, F> {
    fn local_il(&self, tree: &RegressionTree<F>, id: NodeId) -> Option<f64> {
        model::local_log_integrated_likelihood(tree, id, self.data, self.resid, self.sigma2, self.hyper).ok()
    }

    fn local_cond(&self, tree: &RegressionTree<F>, id: NodeId) -> Option<f64> {
        model::local_log_likelihood(tree, id, self.data, self.resid, self.sigma2, self.hyper).ok()
    }

    fn log_prior(&self, tree: &RegressionTree<F>) -> f64 {
        model::log_prior(tree, self.hyper, &self.data.grid)
    }
}

/// Log terms of an acceptance ratio. `delta` is the likelihood change used
/// for acceptance, `delta_log_il` the integrated one reported in traces.
#[derive(Clone, Copy, Debug)]
struct Terms {
    delta: f64,
    delta_log_il: f64,
    log_prior_ratio: f64,
    log_proposal_ratio: f64,
}

fn decide<F: Real, R: Rng + ?Sized>(
    kind: ProposalKind,
    node: NodeId,
    candidate: RegressionTree<F>,
    t: Terms,
    rng: &mut R,
) -> Step<F> {
    let log_a = t.delta + t.log_prior_ratio + t.log_proposal_ratio;
    let accepted = log_a >= 0.0 || rng.random::<f64>().ln() < log_a;
    Step {
        outcome: ProposalOutcome {
            kind,
            accepted,
            delta_log_il: Some(t.delta_log_il),
            log_prior_ratio: Some(t.log_prior_ratio),
            log_proposal_ratio: Some(t.log_proposal_ratio),
            rejection: (!accepted).then_some(Rejection::Metropolis),
            node: Some(node.0),
        },
        candidate: Some(candidate),
    }
}

/// Scores a same-shape candidate differing only at `id`'s rule and returns
/// the likelihood change used for acceptance and the integrated change for
/// the trace; `None` when `min_leaf_n` fails.
fn cut_move_deltas<F: Real>(
    target: &Target<'_, F>,
    settings: &KernelSettings,
    tree: &RegressionTree<F>,
    candidate: &RegressionTree<F>,
    id: NodeId,
) -> Option<(f64, f64)> {
    let il_new = target.local_il(candidate, id)?;
    let il_old = target.local_il(tree, id)?;
    let delta_il = il_new - il_old;
    let delta = match settings.likelihood {
        CutLikelihood::Integrated => delta_il,
        CutLikelihood::Conditional => target.local_cond(candidate, id)? - target.local_cond(tree, id)?,
    };
    Some((delta, delta_il))
}
