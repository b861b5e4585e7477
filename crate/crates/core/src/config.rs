//! TOML run configuration. Top-level keys mirror [`RunConfig`]; the
//! `[weights]` and `[hyper]` tables mirror [`ProposalWeights`] and
//! [`Hyperparams`]. Every key is optional and unknown keys are errors.
//!
//! ```toml
//! burnin = 1000
//! keep = 1000
//! alpha = 0.85            # or one value per covariate
//! n_v = 100
//!
//! [weights]
//! birth_death = 0.8
//! rotate = 0.2
//!
//! [hyper]
//! m = 50
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Hyperparams};
use crate::proposals::CutLikelihood;
use crate::sampler::{ProposalWeights, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    All(f64),
    PerVariable(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperFile {
    pub m: Option<usize>,
    pub split_alpha: Option<f64>,
    pub split_beta: Option<f64>,
    /// Overrides the default `0.5 / (k sqrt(m))`.
    pub sigma_mu: Option<f64>,
    pub k: Option<f64>,
    pub nu: Option<f64>,
    /// Overrides calibration from `sigma_quantile`.
    pub lambda: Option<f64>,
    /// Prior probability that the error variance lies below the sample
    /// variance of the response.
    pub sigma_quantile: Option<f64>,
    pub min_leaf_n: Option<usize>,
    pub max_depth: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub burnin: Option<usize>,
    pub keep: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub weights: Option<ProposalWeights>,
    pub hyper: Option<HyperFile>,
    pub alpha: Option<Alpha>,
    pub cut_likelihood: Option<CutLikelihood>,
    pub precond_cutoff: Option<f64>,
    pub sigma2_fixed: Option<f64>,
    pub record_trees: Option<bool>,
    pub verify_every: Option<usize>,
    /// Cutpoints per covariate.
    pub n_v: Option<usize>,
}

pub const DEFAULT_BURNIN: usize = 1000;
pub const DEFAULT_KEEP: usize = 1000;
pub const DEFAULT_M: usize = 50;
pub const DEFAULT_N_V: usize = 100;
pub const DEFAULT_SIGMA_QUANTILE: f64 = 0.9;

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::File { path: path.display().to_string(), msg: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn n_v(&self) -> usize {
        self.n_v.unwrap_or(DEFAULT_N_V)
    }

    /// Fill defaults. `sigma2_hat` is the response variance on the model's
    /// scale, used to calibrate `lambda` unless it is given.
    pub fn resolve(&self, sigma2_hat: f64) -> Result<RunConfig> {
        let h = self.hyper.clone().unwrap_or_default();
        let m = h.m.unwrap_or(DEFAULT_M);
        let mut hyper = Hyperparams::defaults(m);
        if let Some(v) = h.split_alpha {
            hyper.split_alpha = v;
        }
        if let Some(v) = h.split_beta {
            hyper.split_beta = v;
        }
        if let Some(k) = h.k {
            hyper.sigma_mu = model::default_sigma_mu(m, k);
        }
        if let Some(v) = h.sigma_mu {
            hyper.sigma_mu = v;
        }
        if let Some(v) = h.nu {
            hyper.nu = v;
        }
        match h.lambda {
            Some(v) => hyper.lambda = v,
            None => {
                let q = h.sigma_quantile.unwrap_or(DEFAULT_SIGMA_QUANTILE);
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::Config(format!("sigma_quantile must lie in (0, 1), got {q}")));
                }
                hyper.calibrate_lambda(sigma2_hat, q);
            }
        }
        if let Some(v) = h.min_leaf_n {
            hyper.min_leaf_n = v;
        }
        hyper.max_depth = h.max_depth;

        let mut cfg = RunConfig::new(
            hyper,
            self.burnin.unwrap_or(DEFAULT_BURNIN),
            self.keep.unwrap_or(DEFAULT_KEEP),
            self.seed.unwrap_or(0),
        );
        if let Some(v) = self.thin {
            cfg.thin = v;
        }
        if let Some(w) = &self.weights {
            cfg.weights = w.clone();
        }
        match &self.alpha {
            Some(Alpha::All(a)) => cfg.alpha = vec![*a],
            Some(Alpha::PerVariable(v)) => cfg.alpha = v.clone(),
            None => {}
        }
        if let Some(v) = self.cut_likelihood {
            cfg.cut_likelihood = v;
        }
        if let Some(v) = self.precond_cutoff {
            cfg.precond_cutoff = v;
        }
        cfg.sigma2_fixed = self.sigma2_fixed;
        if let Some(v) = self.record_trees {
            cfg.record_trees = v;
        }
        if let Some(v) = self.verify_every {
            cfg.verify_every = v;
        }
        Ok(cfg)
    }
}
