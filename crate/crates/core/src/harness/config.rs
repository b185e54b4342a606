//! Experiment configuration: a flat `key = value` file plus overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `dataset` | (required) | LIBSVM file |
//! | `methods` | `bayes_basic` | comma-separated list, run in lockstep |
//! | `learner` | `perceptron` | `perceptron` or `naive_bayes` |
//! | `pool_size` | 100 | weak learners in the pool |
//! | `subset_inclusion` | 0.5 | per-feature inclusion probability; `1` uses all features |
//! | `frozen_pool` | true | keep the pool fixed during streaming |
//! | `train_fraction` | 0.1 | pretraining split, at most 0.1 |
//! | `trials` | 5 | random splits/orderings |
//! | `seed` | 1 | master seed |
//! | `base_loss` | `ramp` | base loss for the basic, SGD and SAG weights |
//! | `shape_base_loss` | `logistic` | base loss for the two Gamma-likelihood variants |
//! | `binary_scores` | true | feed `sign(score)` rather than the raw score to the base loss |
//! | `loss_floor` | 1e-12 | floor on losses for the Gamma-likelihood variants |
//! | `theta`, `alpha0`, `beta0` | 0.1, 1, 1 | basic model |
//! | `gamma` | 1 | SGD step constant |
//! | `sag_multiplier` | 1 | SAG step multiplier |
//! | `shape_a`, `shape_b`, `shape_c`, `shape_cap` | 1, 1, 1, 1000 | shape variant |
//! | `rate_p`, `rate_q`, `rate_r`, `rate_s` | 1, 1, 1.5, 1 | shape-rate variant |
//! | `rate_r_cap`, `rate_s_cap` | 200.5, 200 | shape-rate exponent caps |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::loss::BaseLoss;
use crate::weak::LearnerKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Single,
    Voting,
    Sgd,
    SgdAvg,
    Sag,
    BayesBasic,
    BayesShape,
    BayesShapeRate,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Single,
        Method::Voting,
        Method::Sgd,
        Method::SgdAvg,
        Method::Sag,
        Method::BayesBasic,
        Method::BayesShape,
        Method::BayesShapeRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Single => "single",
            Method::Voting => "voting",
            Method::Sgd => "sgd",
            Method::SgdAvg => "sgd_avg",
            Method::Sag => "sag",
            Method::BayesBasic => "bayes_basic",
            Method::BayesShape => "bayes_shape",
            Method::BayesShapeRate => "bayes_shape_rate",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub methods: Vec<Method>,
    pub learner: LearnerKind,
    pub pool_size: usize,
    pub subset_inclusion: f64,
    pub frozen_pool: bool,
    pub train_fraction: f64,
    pub trials: usize,
    pub seed: u64,
    pub base_loss: BaseLoss,
    pub shape_base_loss: BaseLoss,
    pub binary_scores: bool,
    pub loss_floor: f64,
    pub theta: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma: f64,
    pub sag_multiplier: f64,
    pub shape_a: f64,
    pub shape_b: f64,
    pub shape_c: f64,
    pub shape_cap: f64,
    pub rate_p: f64,
    pub rate_q: f64,
    pub rate_r: f64,
    pub rate_s: f64,
    pub rate_r_cap: f64,
    pub rate_s_cap: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            methods: vec![Method::BayesBasic],
            learner: LearnerKind::Perceptron,
            pool_size: 100,
            subset_inclusion: 0.5,
            frozen_pool: true,
            train_fraction: 0.1,
            trials: 5,
            seed: 1,
            base_loss: BaseLoss::Ramp,
            shape_base_loss: BaseLoss::Logistic,
            binary_scores: true,
            loss_floor: crate::loss::LOSS_FLOOR,
            theta: 0.1,
            alpha0: 1.0,
            beta0: 1.0,
            gamma: 1.0,
            sag_multiplier: 1.0,
            shape_a: 1.0,
            shape_b: 1.0,
            shape_c: 1.0,
            shape_cap: crate::bayes::SHAPE_CAP,
            rate_p: 1.0,
            rate_q: 1.0,
            rate_r: 1.5,
            rate_s: 1.0,
            rate_r_cap: crate::bayes::SHAPE_RATE_CAPS.0,
            rate_s_cap: crate::bayes::SHAPE_RATE_CAPS.1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("bad value `{value}` for `{key}`")))
}

fn base_loss_name(b: BaseLoss) -> &'static str {
    match b {
        BaseLoss::Ramp => "ramp",
        BaseLoss::Logistic => "logistic",
        BaseLoss::Hinge => "hinge",
        BaseLoss::ZeroOne => "zero_one",
    }
}

impl ExperimentConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "dataset" => self.dataset = PathBuf::from(v),
            "methods" | "method" => {
                self.methods = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            "learner" => self.learner = v.parse()?,
            "pool_size" => self.pool_size = parse(key, v)?,
            "subset_inclusion" => self.subset_inclusion = parse(key, v)?,
            "frozen_pool" => self.frozen_pool = parse(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "base_loss" => self.base_loss = v.parse()?,
            "shape_base_loss" => self.shape_base_loss = v.parse()?,
            "binary_scores" => self.binary_scores = parse(key, v)?,
            "loss_floor" => self.loss_floor = parse(key, v)?,
            "theta" => self.theta = parse(key, v)?,
            "alpha0" => self.alpha0 = parse(key, v)?,
            "beta0" => self.beta0 = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "sag_multiplier" => self.sag_multiplier = parse(key, v)?,
            "shape_a" => self.shape_a = parse(key, v)?,
            "shape_b" => self.shape_b = parse(key, v)?,
            "shape_c" => self.shape_c = parse(key, v)?,
            "shape_cap" => self.shape_cap = parse(key, v)?,
            "rate_p" => self.rate_p = parse(key, v)?,
            "rate_q" => self.rate_q = parse(key, v)?,
            "rate_r" => self.rate_r = parse(key, v)?,
            "rate_s" => self.rate_s = parse(key, v)?,
            "rate_r_cap" => self.rate_r_cap = parse(key, v)?,
            "rate_s_cap" => self.rate_s_cap = parse(key, v)?,
            other => return Err(Error::config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected `key = value`".into(),
            })?;
            cfg.set(k, v).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    /// Parse a file; a relative `dataset` is resolved against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if cfg.dataset.is_relative() && !cfg.dataset.as_os_str().is_empty() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("`{name}` must be positive, got {v}")))
            }
        };
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::config("`dataset` is not set"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods selected"));
        }
        if self.pool_size == 0 {
            return Err(Error::config("`pool_size` must be at least 1"));
        }
        if !(self.subset_inclusion > 0.0 && self.subset_inclusion <= 1.0) {
            return Err(Error::config("`subset_inclusion` must lie in (0, 1]"));
        }
        if self.trials == 0 {
            return Err(Error::config("`trials` must be at least 1"));
        }
        for (n, v) in [
            ("theta", self.theta),
            ("alpha0", self.alpha0),
            ("beta0", self.beta0),
            ("gamma", self.gamma),
            ("sag_multiplier", self.sag_multiplier),
            ("loss_floor", self.loss_floor),
        ] {
            pos(n, v)?;
        }
        let uses = |m: Method| self.methods.contains(&m);
        if uses(Method::BayesShape) {
            for (n, v) in [
                ("shape_a", self.shape_a),
                ("shape_b", self.shape_b),
                ("shape_c", self.shape_c),
                ("shape_cap", self.shape_cap),
            ] {
                pos(n, v)?;
            }
        }
        if uses(Method::BayesShapeRate) {
            for (n, v) in [
                ("rate_p", self.rate_p),
                ("rate_q", self.rate_q),
                ("rate_r", self.rate_r),
                ("rate_s", self.rate_s),
            ] {
                pos(n, v)?;
            }
            if self.rate_s >= self.rate_r || self.rate_s_cap >= self.rate_r_cap {
                return Err(Error::config("shape-rate variant needs rate_s < rate_r and rate_s_cap < rate_r_cap"));
            }
        }
        crate::data::SplitPlan::new(self.train_fraction, self.seed, self.trials)?;
        Ok(())
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        let learner = match self.learner {
            LearnerKind::Perceptron => "perceptron",
            LearnerKind::NaiveBayes => "naive_bayes",
        };
        format!(
            "dataset = {}\nmethods = {}\nlearner = {learner}\npool_size = {}\nsubset_inclusion = {:?}\n\
             frozen_pool = {}\ntrain_fraction = {:?}\ntrials = {}\nseed = {}\nbase_loss = {}\n\
             shape_base_loss = {}\nbinary_scores = {}\nloss_floor = {:?}\ntheta = {:?}\nalpha0 = {:?}\n\
             beta0 = {:?}\ngamma = {:?}\nsag_multiplier = {:?}\nshape_a = {:?}\nshape_b = {:?}\n\
             shape_c = {:?}\nshape_cap = {:?}\nrate_p = {:?}\nrate_q = {:?}\nrate_r = {:?}\nrate_s = {:?}\n\
             rate_r_cap = {:?}\nrate_s_cap = {:?}\n",
            self.dataset.display(),
            methods.join(","),
            self.pool_size,
            self.subset_inclusion,
            self.frozen_pool,
            self.train_fraction,
            self.trials,
            self.seed,
            base_loss_name(self.base_loss),
            base_loss_name(self.shape_base_loss),
            self.binary_scores,
            self.loss_floor,
            self.theta,
            self.alpha0,
            self.beta0,
            self.gamma,
            self.sag_multiplier,
            self.shape_a,
            self.shape_b,
            self.shape_c,
            self.shape_cap,
            self.rate_p,
            self.rate_q,
            self.rate_r,
            self.rate_s,
            self.rate_r_cap,
            self.rate_s_cap,
        )
    }
}
