//! Online estimation of classifier-ensemble weights by recursive Bayesian
//! posterior updates, with stochastic-gradient baselines, a prequential
//! (test-then-train) benchmark harness over LIBSVM datasets, and Monte Carlo
//! checks of the estimator's convergence behaviour.
//!
//! The closed-form path is [`bayes::GammaPosterior`]: an exponential
//! likelihood on each weak learner's loss with a Gamma prior on its weight,
//! whose posterior mean is `(alpha0 + t) / (beta0 + theta * sum(g))`.

pub mod baselines;
pub mod bayes;
pub mod data;
mod error;
pub mod harness;
pub mod loss;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod verify;
pub mod weak;

pub use error::{Error, Result};

/// Binary class label. Score ties map to [`Label::Pos`] everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    /// `+1` for `Pos`, `-1` for `Neg`.
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    /// Prediction rule for a real-valued score: `score >= 0` is positive.
    pub fn from_score(score: f64) -> Label {
        if score >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Pos => "+1",
            Label::Neg => "-1",
        })
    }
}
