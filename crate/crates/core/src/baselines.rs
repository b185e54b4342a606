//! Non-Bayesian weight estimators over the same losses: SGD on the basic
//! loss, its Polyak average, SAG, and uniform voting.

use crate::loss::LossVector;
use crate::{Error, Label, Result};

/// Iterates never drop below this; `-log lambda` is undefined at zero.
pub const LAMBDA_MIN: f64 = 1e-6;

fn check_width(expected: usize, g: &LossVector) -> Result<()> {
    if g.len() == expected {
        Ok(())
    } else {
        Err(Error::domain(format!("loss vector has {} entries, state has {expected}", g.len())))
    }
}

/// SGD on `theta lambda g - log lambda` with step `gamma / (t + offset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub lambda: Vec<f64>,
    pub gamma: f64,
    pub theta: f64,
    pub t: u64,
    /// Added to `t` in the step size only; 0 gives the plain `gamma / t`.
    pub offset: u64,
}

impl SgdState {
    pub fn new(m: usize, lambda0: f64, gamma: f64, theta: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && gamma > 0.0 && theta > 0.0) {
            return Err(Error::config("sgd needs positive lambda0, gamma and theta"));
        }
        Ok(SgdState {
            lambda: vec![lambda0; m],
            gamma,
            theta,
            t: 0,
            offset: 0,
        })
    }

    pub fn step(&mut self, g: &LossVector) -> Result<()> {
        check_width(self.lambda.len(), g)?;
        self.t += 1;
        let eta = self.gamma / (self.t + self.offset) as f64;
        for (l, &gi) in self.lambda.iter_mut().zip(g.as_slice()) {
            *l = (*l - eta * (self.theta * gi - 1.0 / *l)).max(LAMBDA_MIN);
        }
        Ok(())
    }
}

/// SGD whose predictions use the running mean of the post-update iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyakState {
    pub sgd: SgdState,
    pub lambda_bar: Vec<f64>,
}

impl PolyakState {
    pub fn new(sgd: SgdState) -> Self {
        let lambda_bar = sgd.lambda.clone();
        PolyakState { sgd, lambda_bar }
    }

    pub fn step(&mut self, g: &LossVector) -> Result<()> {
        self.sgd.step(g)?;
        let t = self.sgd.t as f64;
        for (bar, &l) in self.lambda_bar.iter_mut().zip(&self.sgd.lambda) {
            *bar = ((t - 1.0) * *bar + l) / t;
        }
        Ok(())
    }
}

/// Stochastic average gradient over a horizon of `horizon` sample slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SagState {
    pub lambda: Vec<f64>,
    pub theta: f64,
    pub step_size: f64,
    memory: Vec<Vec<f64>>,
    sum: Vec<f64>,
}

impl SagState {
    /// Step size `multiplier / L`, where `L = 1 / lambda0^2` is the curvature
    /// of the per-sample loss at the starting point.
    pub fn new(m: usize, horizon: usize, lambda0: f64, theta: f64, multiplier: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("sag horizon must be at least 1"));
        }
        if !(lambda0 > 0.0 && theta > 0.0 && multiplier > 0.0) {
            return Err(Error::config("sag needs positive lambda0, theta and step multiplier"));
        }
        Ok(SagState {
            lambda: vec![lambda0; m],
            theta,
            step_size: multiplier * lambda0 * lambda0,
            memory: vec![vec![0.0; m]; horizon],
            sum: vec![0.0; m],
        })
    }

    pub fn horizon(&self) -> usize {
        self.memory.len()
    }

    pub fn gradient_sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn memory(&self, index: usize) -> Option<&[f64]> {
        self.memory.get(index).map(Vec::as_slice)
    }

    pub fn step(&mut self, g: &LossVector, index: usize) -> Result<()> {
        check_width(self.lambda.len(), g)?;
        let horizon = self.memory.len();
        let slot = self
            .memory
            .get_mut(index)
            .ok_or(Error::IndexOutOfRange { index, len: horizon })?;
        let scale = self.step_size / horizon as f64;
        for i in 0..self.lambda.len() {
            let grad = self.theta * g.as_slice()[i] - 1.0 / self.lambda[i];
            self.sum[i] += grad - slot[i];
            slot[i] = grad;
            self.lambda[i] = (self.lambda[i] - scale * self.sum[i]).max(LAMBDA_MIN);
        }
        Ok(())
    }
}

/// Majority vote of `sign(score)`; ties go to +1.
pub fn voting_predict(scores: &[f64]) -> Label {
    let pos = scores.iter().filter(|&&s| Label::from_score(s) == Label::Pos).count();
    if 2 * pos >= scores.len() {
        Label::Pos
    } else {
        Label::Neg
    }
}
