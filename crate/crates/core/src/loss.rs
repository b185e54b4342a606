//! Weak-learner base losses and the ensemble losses built on them.

use crate::special::{digamma, ln_gamma};
use crate::{Error, Label, Result};

/// Per-learner loss on the margin `z = y * score`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseLoss {
    /// `min(1, max(0, (1 - z) / 2))`: margin -1 -> 1, +1 -> 0.
    Ramp,
    /// `1 / (1 + e^z)`.
    Logistic,
    /// `max(0, 1 - z)`.
    Hinge,
    /// 1 when `z <= 0` (ties are errors), else 0.
    ZeroOne,
}

impl BaseLoss {
    pub fn of_margin(self, z: f64) -> f64 {
        match self {
            BaseLoss::Ramp => ((1.0 - z) / 2.0).clamp(0.0, 1.0),
            BaseLoss::Logistic => {
                if z >= 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                }
            }
            BaseLoss::Hinge => (1.0 - z).max(0.0),
            BaseLoss::ZeroOne => {
                if z <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn value(self, score: f64, label: Label) -> f64 {
        self.of_margin(label.sign() * score)
    }
}

impl std::str::FromStr for BaseLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ramp" => Ok(BaseLoss::Ramp),
            "logistic" => Ok(BaseLoss::Logistic),
            "hinge" => Ok(BaseLoss::Hinge),
            "zero_one" => Ok(BaseLoss::ZeroOne),
            _ => Err(Error::config(format!("unknown base loss `{s}`"))),
        }
    }
}

/// Lower bound applied to losses fed into the Gamma-likelihood variants,
/// whose losses contain `log g`.
pub const LOSS_FLOOR: f64 = 1e-12;

/// Map a raw learner score to the value the base loss sees: `sign(score)`
/// (ties to +1) for binary weak classifiers, the score itself otherwise.
pub fn effective_score(score: f64, binary: bool) -> f64 {
    if binary {
        Label::from_score(score).sign()
    } else {
        score
    }
}

/// One step's per-learner losses `g^t`: finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("loss {i} is {v}; losses must be finite and >= 0")));
        }
        Ok(LossVector(g))
    }

    /// Losses of every learner in `scores` against `label`.
    pub fn from_scores(scores: &[f64], label: Label, kind: BaseLoss, binary: bool) -> Self {
        LossVector(
            scores
                .iter()
                .map(|&s| kind.value(effective_score(s, binary), label))
                .collect(),
        )
    }

    /// Copy with every entry raised to at least `floor`.
    pub fn floored(&self, floor: f64) -> Self {
        LossVector(self.0.iter().map(|&g| g.max(floor)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::domain(format!("length mismatch: {a} weights vs {b} losses")))
    }
}

fn check_positive(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        None => Ok(()),
        Some(i) => Err(Error::domain(format!("{name}[{i}] = {} must be positive", v[i]))),
    }
}

/// `theta * sum(lambda_i g_i) - sum(log lambda_i)`.
pub fn ensemble_loss_basic(lambda: &[f64], g: &LossVector, theta: f64) -> Result<f64> {
    check_len(lambda.len(), g.len())?;
    check_positive("lambda", lambda)?;
    Ok(lambda
        .iter()
        .zip(g.as_slice())
        .map(|(&l, &gi)| theta * l * gi - l.ln())
        .sum())
}

pub fn ensemble_loss_basic_grad(lambda: &[f64], g: &LossVector, theta: f64) -> Result<Vec<f64>> {
    check_len(lambda.len(), g.len())?;
    check_positive("lambda", lambda)?;
    Ok(lambda.iter().zip(g.as_slice()).map(|(&l, &gi)| theta * gi - 1.0 / l).collect())
}

/// `sum((1 - lambda_i) log g_i) + theta sum(g_i) + sum(ln Γ(lambda_i)) - log(theta) sum(lambda_i)`.
pub fn ensemble_loss_gamma_shape(lambda: &[f64], g: &LossVector, theta: f64) -> Result<f64> {
    check_len(lambda.len(), g.len())?;
    check_positive("lambda", lambda)?;
    check_positive("g", g.as_slice())?;
    let lt = theta.ln();
    Ok(lambda
        .iter()
        .zip(g.as_slice())
        .map(|(&l, &gi)| (1.0 - l) * gi.ln() + theta * gi + ln_gamma(l) - lt * l)
        .sum())
}

pub fn ensemble_loss_gamma_shape_grad(lambda: &[f64], g: &LossVector, theta: f64) -> Result<Vec<f64>> {
    check_len(lambda.len(), g.len())?;
    check_positive("lambda", lambda)?;
    check_positive("g", g.as_slice())?;
    let lt = theta.ln();
    Ok(lambda
        .iter()
        .zip(g.as_slice())
        .map(|(&l, &gi)| -gi.ln() + digamma(l) - lt)
        .collect())
}

/// `sum(beta_i g_i) + sum((1 - alpha_i) log g_i) + sum(ln Γ(alpha_i)) - sum(alpha_i log beta_i)`.
pub fn ensemble_loss_gamma_shape_rate(alpha: &[f64], beta: &[f64], g: &LossVector) -> Result<f64> {
    check_len(alpha.len(), g.len())?;
    check_len(beta.len(), g.len())?;
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    check_positive("g", g.as_slice())?;
    Ok((0..g.len())
        .map(|i| {
            let (a, b, gi) = (alpha[i], beta[i], g.as_slice()[i]);
            b * gi + (1.0 - a) * gi.ln() + ln_gamma(a) - a * b.ln()
        })
        .sum())
}

/// Gradient as `(d/d alpha, d/d beta)`.
pub fn ensemble_loss_gamma_shape_rate_grad(
    alpha: &[f64],
    beta: &[f64],
    g: &LossVector,
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensemble_loss_gamma_shape_rate(alpha, beta, g)?;
    let gs = g.as_slice();
    let da = (0..gs.len()).map(|i| -gs[i].ln() + digamma(alpha[i]) - beta[i].ln()).collect();
    let db = (0..gs.len()).map(|i| gs[i] - alpha[i] / beta[i]).collect();
    Ok((da, db))
}

/// Which ensemble loss a cumulative objective sums, with its prior term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CumulativeLoss {
    /// Loss `theta lambda g - log lambda`; prior term
    /// `beta0 sum(lambda) - (alpha0 - 1) sum(log lambda)`.
    Basic { theta: f64, alpha0: f64, beta0: f64 },
    /// Shape-only Gamma likelihood; prior term is the negative log of
    /// `a^(lambda-1) theta^(c lambda) / Γ(lambda)^b`.
    GammaShape { theta: f64, a: f64, b: f64, c: f64 },
}

impl CumulativeLoss {
    pub fn prior_term(&self, lambda: &[f64]) -> Result<f64> {
        check_positive("lambda", lambda)?;
        Ok(match *self {
            CumulativeLoss::Basic { alpha0, beta0, .. } => lambda
                .iter()
                .map(|&l| beta0 * l - (alpha0 - 1.0) * l.ln())
                .sum(),
            CumulativeLoss::GammaShape { theta, a, b, c } => lambda
                .iter()
                .map(|&l| -(l - 1.0) * a.ln() - c * l * theta.ln() + b * ln_gamma(l))
                .sum(),
        })
    }

    pub fn step_term(&self, lambda: &[f64], g: &LossVector) -> Result<f64> {
        match *self {
            CumulativeLoss::Basic { theta, .. } => ensemble_loss_basic(lambda, g, theta),
            CumulativeLoss::GammaShape { theta, .. } => ensemble_loss_gamma_shape(lambda, g, theta),
        }
    }

    /// Prior term plus the sum of per-step losses over `history`.
    pub fn eval(&self, lambda: &[f64], history: &[LossVector]) -> Result<f64> {
        let mut total = self.prior_term(lambda)?;
        for g in history {
            total += self.step_term(lambda, g)?;
        }
        Ok(total)
    }
}

/// Shape-rate cumulative objective over `(alpha, beta)` pairs with prior
/// hyperparameters `(p, q, r, s)`.
pub fn cumulative_shape_rate(
    alpha: &[f64],
    beta: &[f64],
    hyper: (f64, f64, f64, f64),
    history: &[LossVector],
) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    let (p, q, r, s) = hyper;
    let mut total: f64 = (0..alpha.len())
        .map(|i| -(alpha[i] - 1.0) * p.ln() + q * beta[i] + r * ln_gamma(alpha[i]) - alpha[i] * s * beta[i].ln())
        .sum();
    for g in history {
        total += ensemble_loss_gamma_shape_rate(alpha, beta, g)?;
    }
    Ok(total)
}

/// Closed-form minimiser of the basic cumulative loss given the per-learner
/// loss sums after `t` steps: `(alpha0 - 1 + t) / (beta0 + theta * sum_g)`.
pub fn basic_minimizer(alpha0: f64, beta0: f64, theta: f64, t: u64, loss_sums: &[f64]) -> Vec<f64> {
    loss_sums
        .iter()
        .map(|&s| (alpha0 - 1.0 + t as f64) / (beta0 + theta * s))
        .collect()
}

/// Diagonal of the basic cumulative loss Hessian: `(alpha0 - 1 + t) / lambda_i^2`.
/// It depends on the losses only through `t`.
pub fn basic_hessian_diag(alpha0: f64, t: u64, lambda: &[f64]) -> Vec<f64> {
    lambda.iter().map(|&l| (alpha0 - 1.0 + t as f64) / (l * l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn lv(v: &[f64]) -> LossVector {
        LossVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn base_loss_reference_values() {
        assert_eq!(BaseLoss::Ramp.of_margin(1.0), 0.0);
        assert_eq!(BaseLoss::Ramp.of_margin(-1.0), 1.0);
        assert_eq!(BaseLoss::Ramp.of_margin(0.0), 0.5);
        assert_eq!(BaseLoss::Logistic.of_margin(0.0), 0.5);
        assert_eq!(BaseLoss::ZeroOne.of_margin(0.0), 1.0);
        assert_eq!(BaseLoss::ZeroOne.of_margin(1e-9), 0.0);
        assert_eq!(BaseLoss::Hinge.of_margin(-2.0), 3.0);
        assert_eq!(BaseLoss::Ramp.value(-3.0, Label::Neg), 0.0);
        assert!(BaseLoss::Logistic.of_margin(800.0) >= 0.0);
        assert!((BaseLoss::Logistic.of_margin(-800.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn base_losses_non_increasing_in_margin() {
        for kind in [BaseLoss::Ramp, BaseLoss::Logistic, BaseLoss::Hinge, BaseLoss::ZeroOne] {
            let mut prev = f64::INFINITY;
            for k in 0..1000 {
                let z = -10.0 + 20.0 * k as f64 / 999.0;
                let v = kind.of_margin(z);
                assert!(v.is_finite() && v >= 0.0);
                assert!(v <= prev, "{kind:?} increases at z={z}");
                prev = v;
            }
        }
    }

    #[test]
    fn loss_vector_rejects_bad_entries() {
        assert!(LossVector::new(vec![0.0, -1.0]).is_err());
        assert!(LossVector::new(vec![f64::NAN]).is_err());
        assert_eq!(lv(&[0.0, 2.0]).floored(LOSS_FLOOR).as_slice(), &[LOSS_FLOOR, 2.0]);
    }

    #[test]
    fn binary_scores_use_sign() {
        let g = LossVector::from_scores(&[3.5, -0.2, 0.0], Label::Pos, BaseLoss::Ramp, true);
        assert_eq!(g.as_slice(), &[0.0, 1.0, 0.0]);
        let g = LossVector::from_scores(&[0.5], Label::Pos, BaseLoss::Ramp, false);
        assert_eq!(g.as_slice(), &[0.25]);
    }

    #[test]
    fn basic_loss_examples() {
        assert_eq!(ensemble_loss_basic(&[1.0, 1.0], &lv(&[0.0, 0.0]), 0.1).unwrap(), 0.0);
        assert_eq!(ensemble_loss_basic(&[1.0], &lv(&[2.0]), 0.5).unwrap(), 1.0);
        let e = std::f64::consts::E;
        assert!((ensemble_loss_basic(&[e], &lv(&[0.0]), 1.0).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(ensemble_loss_basic(&[0.0], &lv(&[1.0]), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_shape_examples() {
        assert!((ensemble_loss_gamma_shape(&[1.0], &lv(&[1.0]), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((ensemble_loss_gamma_shape(&[2.0], &lv(&[1.0]), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(ensemble_loss_gamma_shape(&[1.0], &lv(&[0.0]), 1.0).is_err());
    }

    #[test]
    fn gamma_shape_rate_examples() {
        let v = ensemble_loss_gamma_shape_rate(&[1.0], &[1.0], &lv(&[1.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = ensemble_loss_gamma_shape_rate(&[1.0], &[2.0], &lv(&[1.0])).unwrap();
        assert!((v - (2.0 - 2f64.ln())).abs() < 1e-15);
        assert!(ensemble_loss_gamma_shape_rate(&[1.0], &[0.0], &lv(&[1.0])).is_err());
    }

    fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
        let h = 1e-5 * x[i].abs().max(1e-3);
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    }

    fn assert_rel(a: f64, b: f64, tol: f64) {
        let scale = a.abs().max(b.abs()).max(1e-3);
        assert!((a - b).abs() / scale < tol, "{a} vs {b}");
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let m = 4;
            let lambda: Vec<f64> = (0..m).map(|_| 0.2 + 5.0 * rng.next_f64()).collect();
            let beta: Vec<f64> = (0..m).map(|_| 0.2 + 5.0 * rng.next_f64()).collect();
            let g = lv(&(0..m).map(|_| 0.05 + rng.next_f64()).collect::<Vec<_>>());
            let theta = 0.05 + rng.next_f64();

            let grad = ensemble_loss_basic_grad(&lambda, &g, theta).unwrap();
            let grad_s = ensemble_loss_gamma_shape_grad(&lambda, &g, theta).unwrap();
            let (ga, gb) = ensemble_loss_gamma_shape_rate_grad(&lambda, &beta, &g).unwrap();
            for i in 0..m {
                assert_rel(grad[i], central_diff(|l| ensemble_loss_basic(l, &g, theta).unwrap(), &lambda, i), 1e-6);
                assert_rel(grad_s[i], central_diff(|l| ensemble_loss_gamma_shape(l, &g, theta).unwrap(), &lambda, i), 1e-6);
                assert_rel(ga[i], central_diff(|a| ensemble_loss_gamma_shape_rate(a, &beta, &g).unwrap(), &lambda, i), 1e-6);
                assert_rel(gb[i], central_diff(|b| ensemble_loss_gamma_shape_rate(&lambda, b, &g).unwrap(), &beta, i), 1e-6);
            }
        }
    }

    #[test]
    fn basic_loss_midpoint_convexity() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..500 {
            let g = lv(&[rng.next_f64() * 3.0]);
            let theta = 0.01 + rng.next_f64();
            let a = 1e-3 + 10.0 * rng.next_f64();
            let b = 1e-3 + 10.0 * rng.next_f64();
            let f = |l: f64| ensemble_loss_basic(&[l], &g, theta).unwrap();
            assert!(f(0.5 * (a + b)) <= 0.5 * (f(a) + f(b)) + 1e-12);
        }
    }

    fn random_history(rng: &mut SplitMix64, t: usize, m: usize) -> Vec<LossVector> {
        (0..t).map(|_| lv(&(0..m).map(|_| rng.next_f64() * 2.0).collect::<Vec<_>>())).collect()
    }

    #[test]
    fn cumulative_additivity_and_empty_history() {
        let mut rng = SplitMix64::new(8);
        let obj = CumulativeLoss::Basic { theta: 0.1, alpha0: 2.0, beta0: 1.5 };
        let lambda = [0.7, 3.0, 1.1];
        let hist = random_history(&mut rng, 12, 3);
        assert_eq!(obj.eval(&lambda, &[]).unwrap(), obj.prior_term(&lambda).unwrap());
        let full = obj.eval(&lambda, &hist).unwrap();
        let part = obj.eval(&lambda, &hist[..11]).unwrap() + obj.step_term(&lambda, &hist[11]).unwrap();
        assert!((full - part).abs() < 1e-12 * full.abs().max(1.0));
    }

    #[test]
    fn basic_minimizer_beats_random_probes() {
        let mut rng = SplitMix64::new(21);
        let (alpha0, beta0, theta) = (1.0, 1.0, 0.1);
        let obj = CumulativeLoss::Basic { theta, alpha0, beta0 };
        for t in [1usize, 5, 40] {
            let hist = random_history(&mut rng, t, 2);
            let sums: Vec<f64> = (0..2).map(|i| hist.iter().map(|g| g.as_slice()[i]).sum()).collect();
            let best = basic_minimizer(alpha0, beta0, theta, t as u64, &sums);
            let at_best = obj.eval(&best, &hist).unwrap();
            for _ in 0..100 {
                let probe: Vec<f64> = best.iter().map(|b| b * (0.2 + 2.0 * rng.next_f64())).collect();
                assert!(obj.eval(&probe, &hist).unwrap() >= at_best - 1e-12);
            }
        }
    }

    #[test]
    fn basic_hessian_matches_fd_and_ignores_losses() {
        let mut rng = SplitMix64::new(13);
        let (alpha0, beta0, theta) = (1.5, 1.0, 0.1);
        let obj = CumulativeLoss::Basic { theta, alpha0, beta0 };
        let lambda = [0.8, 2.5];
        let t = 9;
        let mut seen = None;
        for _ in 0..5 {
            let hist = random_history(&mut rng, t, 2);
            let diag = basic_hessian_diag(alpha0, t as u64, &lambda);
            for i in 0..2 {
                let h = 1e-4;
                let mut up = lambda;
                let mut dn = lambda;
                up[i] += h;
                dn[i] -= h;
                let fd = (obj.eval(&up, &hist).unwrap() - 2.0 * obj.eval(&lambda, &hist).unwrap()
                    + obj.eval(&dn, &hist).unwrap())
                    / (h * h);
                assert_rel(diag[i], fd, 1e-5);
                // Off-diagonal vanishes: the objective is separable.
                let mut pp = lambda;
                pp[0] += h;
                pp[1] += h;
                let mut pm = lambda;
                pm[0] += h;
                pm[1] -= h;
                let mut mp = lambda;
                mp[0] -= h;
                mp[1] += h;
                let mut mm = lambda;
                mm[0] -= h;
                mm[1] -= h;
                let cross = (obj.eval(&pp, &hist).unwrap() - obj.eval(&pm, &hist).unwrap()
                    - obj.eval(&mp, &hist).unwrap()
                    + obj.eval(&mm, &hist).unwrap())
                    / (4.0 * h * h);
                assert!(cross.abs() < 1e-4);
            }
            if let Some(prev) = &seen {
                assert_eq!(prev, &diag);
            }
            seen = Some(diag);
        }
    }
}
