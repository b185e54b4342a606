//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function is a thin wrapper over a plain Rust function of the
//! same name with a `_native` suffix, so the logic is testable without a JS
//! host.

use bayes_ensemble::bayes::{GammaPosterior, ShapePosterior};
use bayes_ensemble::baselines::SgdState;
use bayes_ensemble::loss::LossVector;
use bayes_ensemble::verify::{
    predicted_variance_bayes, predicted_variance_sgd, run_replication, variance_with_half_width, Estimator,
    LossDistribution, SyntheticStream,
};
use bayes_ensemble::Error;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, Error>;

const MAX_STEPS: usize = 200_000;
const MAX_WORK: usize = 5_000_000;

/// Single-weight paths of the posterior mean and SGD on one synthetic stream.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Trajectory {
    bayes: Vec<f64>,
    sgd: Vec<f64>,
    target: f64,
}

#[wasm_bindgen]
impl Trajectory {
    pub fn bayes(&self) -> Vec<f64> {
        self.bayes.clone()
    }

    pub fn sgd(&self) -> Vec<f64> {
        self.sgd.clone()
    }

    /// `1 / (theta E[g])`, where both paths should settle.
    pub fn target(&self) -> f64 {
        self.target
    }
}

fn parse_dist(spec: &str) -> Result<LossDistribution> {
    let dist: LossDistribution = spec.parse()?;
    dist.validate()?;
    Ok(dist)
}

fn check_steps(t: usize) -> Result<()> {
    if t == 0 || t > MAX_STEPS {
        return Err(Error::Config(format!("steps must be in 1..={MAX_STEPS}, got {t}")));
    }
    Ok(())
}

pub fn trajectory_native(
    dist: &str,
    theta: f64,
    gamma_tilde: f64,
    offset: u32,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let dist = parse_dist(dist)?;
    check_steps(steps)?;
    let mut post = GammaPosterior::new(1, 1.0, 1.0, theta)?;
    let mut sgd = SgdState::new(1, 1.0, gamma_tilde / (theta * theta), theta)?;
    sgd.offset = offset as u64;
    let mut bayes = Vec::with_capacity(steps);
    let mut sgd_path = Vec::with_capacity(steps);
    for g in SyntheticStream::new(dist, seed, 0, steps) {
        let g = LossVector::new(vec![g])?;
        post.update(&g)?;
        sgd.step(&g)?;
        bayes.push(post.posterior_mean().lambda[0]);
        sgd_path.push(sgd.lambda[0]);
    }
    Ok(Trajectory {
        bayes,
        sgd: sgd_path,
        target: 1.0 / (theta * dist.mean()),
    })
}

#[wasm_bindgen]
pub fn trajectory(
    dist: &str,
    theta: f64,
    gamma_tilde: f64,
    offset: u32,
    steps: usize,
    seed: u64,
) -> std::result::Result<Trajectory, JsError> {
    trajectory_native(dist, theta, gamma_tilde, offset, steps, seed).map_err(|e| JsError::new(&e.to_string()))
}

/// Flat layout, one row per `gamma_tilde`:
/// `[gamma_tilde, predicted_sgd, empirical_sgd, half_width]`, followed by a
/// final row `[NaN, predicted_bayes, empirical_bayes, half_width]`.
/// A predicted value of NaN marks the slow regime.
pub fn variance_curve_native(
    dist: &str,
    theta: f64,
    gamma_tildes: &[f64],
    offset: u32,
    steps: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let dist = parse_dist(dist)?;
    check_steps(steps)?;
    if replications < 2 {
        return Err(Error::Config("need at least 2 replications".into()));
    }
    if steps * replications * (gamma_tildes.len() + 1) > MAX_WORK {
        return Err(Error::Config(format!(
            "steps x replications x curves exceeds {MAX_WORK}; lower one of them"
        )));
    }
    let target = 1.0 / (theta * dist.mean());
    let root_t = (steps as f64).sqrt();
    let empirical = |est: Estimator| -> Result<(f64, f64)> {
        let scaled = (0..replications as u64)
            .map(|r| run_replication(&dist, theta, &est, steps, seed, r).map(|l| root_t * (l - target)))
            .collect::<Result<Vec<_>>>()?;
        Ok(variance_with_half_width(&scaled))
    };
    let mut out = Vec::with_capacity(4 * (gamma_tildes.len() + 1));
    for &gt in gamma_tildes {
        if !(gt > 0.0 && gt.is_finite()) {
            return Err(Error::Config(format!("gamma_tilde must be positive, got {gt}")));
        }
        let (v, hw) = empirical(Estimator::Sgd {
            gamma_tilde: gt,
            lambda0: 1.0,
            offset: offset as u64,
        })?;
        let predicted = predicted_variance_sgd(&dist, theta, gt).unwrap_or(f64::NAN);
        out.extend([gt, predicted, v, hw]);
    }
    let (v, hw) = empirical(Estimator::Bayes { alpha0: 1.0, beta0: 1.0 })?;
    out.extend([f64::NAN, predicted_variance_bayes(&dist, theta), v, hw]);
    Ok(out)
}

#[wasm_bindgen]
pub fn variance_curve(
    dist: &str,
    theta: f64,
    gamma_tildes: Vec<f64>,
    offset: u32,
    steps: usize,
    replications: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    variance_curve_native(dist, theta, &gamma_tildes, offset, steps, replications, seed)
        .map_err(|e| JsError::new(&e.to_string()))
}

/// Density of the single-classifier shape posterior after observing `losses`,
/// on `points` evenly spaced values in `(0, lambda_max]`, normalized on that
/// grid. The last element is the quadrature posterior mean.
pub fn shape_density_native(
    losses: &[f64],
    a: f64,
    b: f64,
    c: f64,
    theta: f64,
    lambda_max: f64,
    points: usize,
) -> Result<Vec<f64>> {
    if !(2..=10_000).contains(&points) {
        return Err(Error::Config(format!("points must be in 2..=10000, got {points}")));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::Config(format!("lambda_max must be positive, got {lambda_max}")));
    }
    let mut post = ShapePosterior::new(1, a, b, c, theta)?;
    for &g in losses {
        post.update(&LossVector::new(vec![g])?)?;
    }
    let h = lambda_max / points as f64;
    let logs: Vec<f64> = (1..=points).map(|k| post.log_weight(0, k as f64 * h)).collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut dens: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let mass: f64 = dens.iter().sum::<f64>() * h;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Config("posterior has no mass on the grid".into()));
    }
    dens.iter_mut().for_each(|d| *d /= mass);
    dens.push(post.posterior_mean()?.lambda[0]);
    Ok(dens)
}

#[wasm_bindgen]
pub fn shape_density(
    losses: Vec<f64>,
    a: f64,
    b: f64,
    c: f64,
    theta: f64,
    lambda_max: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    shape_density_native(&losses, a, b, c, theta, lambda_max, points).map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_ends_near_target() {
        let tr = trajectory_native("exponential:2", 0.1, 0.5, 100, 20_000, 3).unwrap();
        assert_eq!(tr.bayes().len(), 20_000);
        let last = *tr.bayes().last().unwrap();
        assert!((last - tr.target()).abs() < 0.5, "{last}");
        assert!((tr.sgd().last().unwrap() - tr.target()).abs() < 1.0);
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        assert!(trajectory_native("gauss:1", 0.1, 0.5, 0, 10, 1).is_err());
        assert!(trajectory_native("exponential:2", 0.1, 0.5, 0, 0, 1).is_err());
        assert!(trajectory_native("exponential:2", -0.1, 0.5, 0, 10, 1).is_err());
    }

    #[test]
    fn variance_curve_layout() {
        let out = variance_curve_native("exponential:2", 0.1, &[0.1, 0.5], 100, 200, 20, 1).unwrap();
        assert_eq!(out.len(), 12);
        assert_eq!(out[0], 0.1);
        // 0.1 is below the slow-regime threshold 1/8
        assert!(out[1].is_nan());
        assert!((out[5] - 100.0 / 3.0).abs() < 1e-9);
        assert!(out[8].is_nan());
        assert!((out[9] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn variance_curve_caps_work() {
        assert!(variance_curve_native("exponential:2", 0.1, &[0.5], 0, 200_000, 1000, 1).is_err());
    }

    #[test]
    fn shape_density_integrates_to_one() {
        let out = shape_density_native(&[0.5, 1.0, 2.0], 1.0, 1.0, 1.0, 0.1, 60.0, 3000).unwrap();
        let (dens, mean) = out.split_at(3000);
        let h = 60.0 / 3000.0;
        assert!((dens.iter().sum::<f64>() * h - 1.0).abs() < 1e-9);
        let grid_mean: f64 = dens.iter().enumerate().map(|(k, d)| (k + 1) as f64 * h * d * h).sum();
        assert!((grid_mean - mean[0]).abs() / mean[0] < 1e-2, "{grid_mean} vs {}", mean[0]);
    }

    #[test]
    fn shape_density_rejects_zero_loss() {
        assert!(shape_density_native(&[0.0], 1.0, 1.0, 1.0, 0.1, 10.0, 100).is_err());
    }
}
