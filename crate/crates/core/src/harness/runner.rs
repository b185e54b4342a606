//! Prequential runs: every method predicts, then sees the label, in lockstep
//! over one shared stream and pool.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use crate::baselines::{voting_predict, PolyakState, SagState, SgdState};
use crate::bayes::{
    candidate_losses, predict, predict_shape, predict_shape_rate, GammaPosterior, PairEstimate, ShapePosterior,
    ShapeRatePosterior, WeightEstimate,
};
use crate::data::{ordering, split, Dataset, Sample, SplitPlan};
use crate::loss::LossVector;
use crate::weak::{build_pool, build_single, PoolSpec, SubsetRule, WeakLearner, WeakPool};
use crate::{Error, Label, Result};

/// Prequential error trace of one method on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub dataset: String,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    /// Mistakes after each step; entry `k` covers steps `1..=k+1`.
    pub cumulative_errors: Vec<u32>,
    pub wall_time: Duration,
}

impl TrialRecord {
    pub fn steps(&self) -> usize {
        self.cumulative_errors.len()
    }

    pub fn mistakes(&self) -> u32 {
        self.cumulative_errors.last().copied().unwrap_or(0)
    }

    pub fn error_rate(&self) -> f64 {
        self.mistakes() as f64 / self.steps().max(1) as f64
    }

    /// `(step, cumulative error rate)` for steps `1..=steps`.
    pub fn curve(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cumulative_errors
            .iter()
            .enumerate()
            .map(|(k, &e)| (k + 1, e as f64 / (k + 1) as f64))
    }
}

enum Weights {
    Single,
    Voting,
    Sgd(SgdState),
    SgdAvg(PolyakState),
    Sag(SagState),
    Basic(GammaPosterior),
    Shape(ShapePosterior, WeightEstimate),
    ShapeRate(ShapeRatePosterior, PairEstimate),
}

/// What the methods see of one sample before its label is revealed.
pub struct Prediction {
    pub labels: Vec<Label>,
    pos: LossVector,
    neg: LossVector,
    shape: Option<(LossVector, LossVector)>,
}

/// Lockstep state of every method in a trial.
pub struct Stepper {
    cfg: ExperimentConfig,
    pool: WeakPool,
    single: Option<WeakLearner>,
    methods: Vec<(Method, Weights)>,
    t: usize,
}

impl Stepper {
    /// `horizon` is the stream length (SAG keeps one gradient slot per step).
    pub fn new(cfg: &ExperimentConfig, pool: WeakPool, single: Option<WeakLearner>, horizon: usize) -> Result<Self> {
        let m = pool.len();
        let lambda0 = cfg.alpha0 / cfg.beta0;
        let mut methods = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let w = match method {
                Method::Single => {
                    if single.is_none() {
                        return Err(Error::config("method `single` needs a single learner"));
                    }
                    Weights::Single
                }
                Method::Voting => Weights::Voting,
                Method::Sgd => Weights::Sgd(SgdState::new(m, lambda0, cfg.gamma, cfg.theta)?),
                Method::SgdAvg => Weights::SgdAvg(PolyakState::new(SgdState::new(m, lambda0, cfg.gamma, cfg.theta)?)),
                Method::Sag => Weights::Sag(SagState::new(m, horizon, lambda0, cfg.theta, cfg.sag_multiplier)?),
                Method::BayesBasic => Weights::Basic(GammaPosterior::new(m, cfg.alpha0, cfg.beta0, cfg.theta)?),
                Method::BayesShape => {
                    let mut post = ShapePosterior::new(m, cfg.shape_a, cfg.shape_b, cfg.shape_c, cfg.theta)?;
                    post.caps = (cfg.shape_cap, cfg.shape_cap);
                    let est = post.posterior_mean()?;
                    Weights::Shape(post, est)
                }
                Method::BayesShapeRate => {
                    let mut post = ShapeRatePosterior::new(m, cfg.rate_p, cfg.rate_q, cfg.rate_r, cfg.rate_s)?;
                    post.caps = (cfg.rate_r_cap, cfg.rate_s_cap);
                    let est = post.posterior_mean()?;
                    Weights::ShapeRate(post, est)
                }
            };
            methods.push((method, w));
        }
        Ok(Stepper {
            cfg: cfg.clone(),
            pool,
            single,
            methods,
            t: 0,
        })
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.iter().map(|(m, _)| *m).collect()
    }

    pub fn pool(&self) -> &WeakPool {
        &self.pool
    }

    /// Predictions of every method for `x`. Takes `&self`: nothing here can
    /// depend on, or record, `x.label`.
    pub fn predict(&self, x: &Sample) -> Result<Prediction> {
        let scores = self.pool.scores(x);
        let (pos, neg) = candidate_losses(&scores, self.cfg.base_loss, self.cfg.binary_scores);
        let needs_shape = self
            .methods
            .iter()
            .any(|(_, w)| matches!(w, Weights::Shape(..) | Weights::ShapeRate(..)));
        let shape = needs_shape.then(|| {
            let (p, n) = candidate_losses(&scores, self.cfg.shape_base_loss, self.cfg.binary_scores);
            (p.floored(self.cfg.loss_floor), n.floored(self.cfg.loss_floor))
        });
        let mut labels = Vec::with_capacity(self.methods.len());
        for (_, w) in &self.methods {
            let label = match w {
                Weights::Single => self.single.as_ref().expect("checked in new").predict(x),
                Weights::Voting => voting_predict(&scores),
                Weights::Sgd(s) => predict(&s.lambda, pos.as_slice(), neg.as_slice()),
                Weights::SgdAvg(s) => predict(&s.lambda_bar, pos.as_slice(), neg.as_slice()),
                Weights::Sag(s) => predict(&s.lambda, pos.as_slice(), neg.as_slice()),
                Weights::Basic(p) => predict(&p.posterior_mean().lambda, pos.as_slice(), neg.as_slice()),
                Weights::Shape(_, est) => {
                    let (sp, sn) = shape.as_ref().expect("computed above");
                    predict_shape(&est.lambda, sp.as_slice(), sn.as_slice(), self.cfg.theta)?
                }
                Weights::ShapeRate(_, est) => {
                    let (sp, sn) = shape.as_ref().expect("computed above");
                    predict_shape_rate(est, sp.as_slice(), sn.as_slice())?
                }
            };
            labels.push(label);
        }
        Ok(Prediction { labels, pos, neg, shape })
    }

    /// Reveal `x.label`: update every method's weights and, for an online
    /// pool, the learners themselves.
    pub fn update(&mut self, prediction: Prediction, x: &Sample) -> Result<()> {
        let pick = |p: LossVector, n: LossVector| if x.label == Label::Pos { p } else { n };
        let g = pick(prediction.pos, prediction.neg);
        let g_shape = prediction.shape.map(|(p, n)| pick(p, n));
        let t = self.t;
        for (_, w) in &mut self.methods {
            match w {
                Weights::Single | Weights::Voting => {}
                Weights::Sgd(s) => s.step(&g)?,
                Weights::SgdAvg(s) => s.step(&g)?,
                Weights::Sag(s) => s.step(&g, t)?,
                Weights::Basic(p) => p.update(&g)?,
                Weights::Shape(p, est) => {
                    p.update(g_shape.as_ref().expect("computed in predict"))?;
                    *est = p.posterior_mean()?;
                }
                Weights::ShapeRate(p, est) => {
                    p.update(g_shape.as_ref().expect("computed in predict"))?;
                    *est = p.posterior_mean()?;
                }
            }
        }
        if !self.pool.is_frozen() {
            self.pool.learn(x);
            if let Some(s) = &mut self.single {
                s.update(x);
            }
        }
        self.t += 1;
        Ok(())
    }
}

fn pool_spec(cfg: &ExperimentConfig) -> PoolSpec {
    PoolSpec {
        size: cfg.pool_size,
        kind: cfg.learner,
        rule: if cfg.subset_inclusion >= 1.0 {
            SubsetRule::All
        } else {
            SubsetRule::Bernoulli {
                inclusion: cfg.subset_inclusion,
                max_retries: 1000,
            }
        },
        frozen: cfg.frozen_pool,
    }
}

/// The pool, optional single learner, and ordered eval stream of a trial.
pub fn prepare_trial(cfg: &ExperimentConfig, dataset: &Dataset, trial: usize) -> Result<(WeakPool, Option<WeakLearner>, Vec<Sample>)> {
    let plan = SplitPlan::new(cfg.train_fraction, cfg.seed, cfg.trials)?;
    let (train, eval) = split(dataset, &plan, trial)?;
    if eval.is_empty() {
        return Err(Error::config("evaluation stream is empty"));
    }
    let dim = dataset.dimension();
    let pool = build_pool(train.samples(), dim, &pool_spec(cfg), cfg.seed, trial as u64)?;
    let single = if cfg.methods.contains(&Method::Single) {
        Some(build_single(&train, dim, cfg.learner)?)
    } else {
        None
    };
    let stream = ordering(eval.len(), cfg.seed, trial)
        .into_iter()
        .map(|i| eval.samples()[i].clone())
        .collect();
    Ok((pool, single, stream))
}

/// Run every configured method over a trial's stream; one record per method.
pub fn run_trial(cfg: &ExperimentConfig, dataset: &Dataset, trial: usize) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let start = Instant::now();
    let (pool, single, stream) = prepare_trial(cfg, dataset, trial)?;
    let mut stepper = Stepper::new(cfg, pool, single, stream.len())?;
    let k = cfg.methods.len();
    let mut mistakes = vec![0u32; k];
    let mut traces = vec![Vec::with_capacity(stream.len()); k];
    for (step, x) in stream.iter().enumerate() {
        let pred = stepper.predict(x).map_err(|e| e.at_step(step + 1))?;
        for j in 0..k {
            if pred.labels[j] != x.label {
                mistakes[j] += 1;
            }
            traces[j].push(mistakes[j]);
        }
        stepper.update(pred, x).map_err(|e| e.at_step(step + 1))?;
    }
    let wall_time = start.elapsed();
    Ok(cfg
        .methods
        .iter()
        .zip(traces)
        .map(|(&method, cumulative_errors)| TrialRecord {
            dataset: dataset.name.clone(),
            method,
            trial,
            seed: cfg.seed,
            cumulative_errors,
            wall_time,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_error: f64,
    /// Ordered by trial index.
    pub records: Vec<TrialRecord>,
}

impl MethodSummary {
    /// Sample standard deviation of the per-trial error rates (0 for one trial).
    pub fn std_error(&self) -> f64 {
        let n = self.records.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let var = self.records.iter().map(|r| (r.error_rate() - self.mean_error).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub dataset: String,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// All trials, in parallel, on an already loaded dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let results: Vec<Result<Vec<TrialRecord>>> =
        (0..cfg.trials).into_par_iter().map(|k| run_trial(cfg, dataset, k)).collect();
    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut per_trial = Vec::with_capacity(cfg.trials);
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => per_trial.push(v),
            Err(e) => {
                return Err(Error::Trial {
                    trial,
                    completed,
                    total: cfg.trials,
                    source: Box::new(e),
                })
            }
        }
    }
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let records: Vec<TrialRecord> = per_trial.iter().map(|t| t[j].clone()).collect();
            let mean_error = records.iter().map(TrialRecord::error_rate).sum::<f64>() / records.len() as f64;
            MethodSummary {
                method,
                mean_error,
                records,
            }
        })
        .collect();
    Ok(ExperimentSummary {
        dataset: dataset.name.clone(),
        methods,
    })
}

/// Load `cfg.dataset` and run every trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let dataset = Dataset::load(&cfg.dataset)?;
    run_experiment_on(cfg, &dataset)
}
