//! Monte Carlo and plug-in checks of the estimator's asymptotic claims.

use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;

use crate::baselines::SgdState;
use crate::bayes::{candidate_losses, predict, GammaPosterior};
use crate::data::Sample;
use crate::loss::{BaseLoss, LossVector};
use crate::rng::{SplitMix64, Stream};
use crate::special::normal_cdf;
use crate::weak::WeakPool;
use crate::{Error, Label, Result};

/// Distribution of i.i.d. synthetic losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossDistribution {
    Exponential { mean: f64 },
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl LossDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LossDistribution::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            LossDistribution::Bernoulli { p } => p > 0.0 && p <= 1.0,
            LossDistribution::Uniform { lo, hi } => lo >= 0.0 && hi > lo && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid loss distribution {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LossDistribution::Exponential { mean } => mean,
            LossDistribution::Bernoulli { p } => p,
            LossDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            LossDistribution::Exponential { mean } => mean * mean,
            LossDistribution::Bernoulli { p } => p * (1.0 - p),
            LossDistribution::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
        }
    }

    pub fn sample(&self, rng: &mut SplitMix64) -> f64 {
        match *self {
            LossDistribution::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            LossDistribution::Bernoulli { p } => f64::from(u8::from(rng.bernoulli(p))),
            LossDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.next_f64(),
        }
    }
}

impl std::str::FromStr for LossDistribution {
    type Err = Error;

    /// `exponential:<mean>`, `bernoulli:<p>` or `uniform:<lo>:<hi>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::config(format!("bad distribution `{s}`")))
        };
        let d = match parts[0] {
            "exponential" => LossDistribution::Exponential { mean: num(1)? },
            "bernoulli" => LossDistribution::Bernoulli { p: num(1)? },
            "uniform" => LossDistribution::Uniform { lo: num(1)?, hi: num(2)? },
            _ => return Err(Error::config(format!("unknown distribution `{s}`"))),
        };
        d.validate()?;
        Ok(d)
    }
}

/// A reproducible i.i.d. loss stream for one replication.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    pub dist: LossDistribution,
    pub length: usize,
    rng: SplitMix64,
    emitted: usize,
}

impl SyntheticStream {
    pub fn new(dist: LossDistribution, seed: u64, replication: u64, length: usize) -> Self {
        SyntheticStream {
            dist,
            length,
            rng: SplitMix64::derive(seed, Stream::Synthetic, replication),
            emitted: 0,
        }
    }
}

impl Iterator for SyntheticStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.emitted == self.length {
            return None;
        }
        self.emitted += 1;
        Some(self.dist.sample(&mut self.rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Bayes { alpha0: f64, beta0: f64 },
    /// `gamma = gamma_tilde / theta^2`, started at `lambda0` with a step
    /// offset of `offset`.
    Sgd { gamma_tilde: f64, lambda0: f64, offset: u64 },
}

impl Estimator {
    pub fn name(&self) -> String {
        match *self {
            Estimator::Bayes { .. } => "bayes".into(),
            Estimator::Sgd { gamma_tilde, .. } => format!("sgd(gamma_tilde={gamma_tilde})"),
        }
    }
}

/// `Var(g) / (theta^2 E[g]^4)`.
pub fn predicted_variance_bayes(dist: &LossDistribution, theta: f64) -> f64 {
    dist.variance() / (theta * theta * dist.mean().powi(4))
}

/// Below this `gamma_tilde` SGD converges slower than `1/sqrt(T)`.
pub fn slow_regime_threshold(dist: &LossDistribution) -> f64 {
    1.0 / (2.0 * dist.mean().powi(2))
}

/// `gamma_tilde^2 Var(g) / (theta^2 (2 gamma_tilde E[g]^2 - 1))`, or `None`
/// in the slow regime.
pub fn predicted_variance_sgd(dist: &LossDistribution, theta: f64, gamma_tilde: f64) -> Option<f64> {
    if gamma_tilde <= slow_regime_threshold(dist) {
        return None;
    }
    let mu2 = dist.mean().powi(2);
    Some(gamma_tilde * gamma_tilde * dist.variance() / (theta * theta * (2.0 * gamma_tilde * mu2 - 1.0)))
}

/// The `gamma_tilde` at which the SGD variance meets the Bayesian one.
pub fn optimal_gamma_tilde(dist: &LossDistribution) -> f64 {
    1.0 / dist.mean().powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub estimator: String,
    pub t: usize,
    pub replications: usize,
    /// Sample variance of `sqrt(T) (lambda_T - lambda*)` across replications.
    pub empirical: f64,
    /// `None` in the slow regime.
    pub predicted: Option<f64>,
    /// 95% half-width of `empirical`, from the fourth sample moment.
    pub half_width: f64,
    pub slow_regime: bool,
}

/// Sample variance and its 95% half-width `1.96 sqrt((m4 - s^4) / n)`.
pub fn variance_with_half_width(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let s2 = m2 * n / (n - 1.0);
    (s2, 1.96 * ((m4 - s2 * s2).max(0.0) / n).sqrt())
}

/// Final estimate of one replication; replication `r` sees the same losses
/// for every estimator.
pub fn run_replication(
    dist: &LossDistribution,
    theta: f64,
    estimator: &Estimator,
    t: usize,
    seed: u64,
    replication: u64,
) -> Result<f64> {
    let stream = SyntheticStream::new(*dist, seed, replication, t);
    match *estimator {
        Estimator::Bayes { alpha0, beta0 } => {
            let mut post = GammaPosterior::new(1, alpha0, beta0, theta)?;
            for g in stream {
                post.update(&LossVector::new(vec![g])?)?;
            }
            Ok(post.posterior_mean().lambda[0])
        }
        Estimator::Sgd {
            gamma_tilde,
            lambda0,
            offset,
        } => {
            let mut sgd = SgdState::new(1, lambda0, gamma_tilde / (theta * theta), theta)?;
            sgd.offset = offset;
            for g in stream {
                sgd.step(&LossVector::new(vec![g])?)?;
            }
            Ok(sgd.lambda[0])
        }
    }
}

pub fn mc_variance(
    dist: &LossDistribution,
    theta: f64,
    estimator: &Estimator,
    t: usize,
    replications: usize,
    seed: u64,
) -> Result<VarianceReport> {
    dist.validate()?;
    if replications < 100 {
        return Err(Error::config("mc_variance needs at least 100 replications"));
    }
    if t == 0 {
        return Err(Error::config("mc_variance needs T >= 1"));
    }
    let target = 1.0 / (theta * dist.mean());
    let root_t = (t as f64).sqrt();
    let scaled: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| run_replication(dist, theta, estimator, t, seed, r).map(|l| root_t * (l - target)))
        .collect::<Result<_>>()?;
    let (empirical, half_width) = variance_with_half_width(&scaled);
    let (predicted, slow_regime) = match *estimator {
        Estimator::Bayes { .. } => (Some(predicted_variance_bayes(dist, theta)), false),
        Estimator::Sgd { gamma_tilde, .. } => {
            let p = predicted_variance_sgd(dist, theta, gamma_tilde);
            (p, p.is_none())
        }
    };
    Ok(VarianceReport {
        estimator: estimator.name(),
        t,
        replications,
        empirical,
        predicted,
        half_width,
        slow_regime,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub p: f64,
    /// Error rate of the weighted rule with the plug-in weights.
    pub error: f64,
    /// Infinite when some sample has zero loss under every flipped label.
    pub bound: f64,
    /// Learners dropped because their mean loss was zero.
    pub excluded: Vec<usize>,
}

impl BoundReport {
    pub fn slack(&self) -> f64 {
        self.bound - self.error
    }
}

/// Per-sample candidate losses `(g(x, y), g(x, -y))` for every learner.
pub fn true_and_flipped_losses(
    pool: &WeakPool,
    samples: &[Sample],
    kind: BaseLoss,
    binary: bool,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    samples
        .iter()
        .map(|s| {
            let (gp, gn) = candidate_losses(&pool.scores(s), kind, binary);
            let (gp, gn) = (gp.as_slice().to_vec(), gn.as_slice().to_vec());
            match s.label {
                Label::Pos => (gp, gn),
                Label::Neg => (gn, gp),
            }
        })
        .collect()
}

/// Plug-in check of the error bound for `p > 1`, with the population means
/// replaced by means over `losses` (the output of [`true_and_flipped_losses`]).
/// Weights are `lambda_i = 1 / (theta mean_i)`; the same means enter the bound.
pub fn check_bound(losses: &[(Vec<f64>, Vec<f64>)], labels: &[Label], theta: f64, p: f64) -> Result<BoundReport> {
    if !(p > 1.0) {
        return Err(Error::config(format!("bound exponent p must exceed 1, got {p}")));
    }
    if losses.is_empty() || losses.len() != labels.len() {
        return Err(Error::config("check_bound needs one label per non-empty loss row"));
    }
    let m = losses[0].0.len();
    let n = losses.len() as f64;
    let mut means = vec![0.0; m];
    for (g_true, _) in losses {
        for (acc, g) in means.iter_mut().zip(g_true) {
            *acc += g / n;
        }
    }
    let keep: Vec<usize> = (0..m).filter(|&i| means[i] > 0.0).collect();
    let excluded: Vec<usize> = (0..m).filter(|&i| means[i] <= 0.0).collect();
    if keep.is_empty() {
        return Err(Error::domain("every learner has zero mean loss; bound undefined"));
    }
    let lambda: Vec<f64> = keep.iter().map(|&i| 1.0 / (theta * means[i])).collect();

    let q = -1.0 / (p - 1.0);
    let mut mistakes = 0usize;
    let mut moment = 0.0;
    let mut gp = vec![0.0; keep.len()];
    let mut gn = vec![0.0; keep.len()];
    for ((g_true, g_flip), &y) in losses.iter().zip(labels) {
        for (k, &i) in keep.iter().enumerate() {
            let (pos, neg) = match y {
                Label::Pos => (g_true[i], g_flip[i]),
                Label::Neg => (g_flip[i], g_true[i]),
            };
            gp[k] = pos;
            gn[k] = neg;
        }
        if predict(&lambda, &gp, &gn) != y {
            mistakes += 1;
        }
        let ratio: f64 = keep.iter().map(|&i| g_flip[i] / means[i]).sum();
        moment += ratio.powf(q) / n;
    }
    let bound = (keep.len() as f64).powf(1.0 / p) * moment.powf((p - 1.0) / p);
    Ok(BoundReport {
        p,
        error: mistakes as f64 / n,
        bound,
        excluded,
    })
}

/// Kolmogorov-Smirnov distance between the sample and the standard normal.
pub fn ks_distance_normal(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub t: usize,
    pub samples: usize,
    pub ks_distance: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Draw from the exact Gamma posterior after `t` steps of a single-weight
/// stream, standardise by the square root of the cumulative-loss Hessian at
/// its minimiser, and measure the KS distance to N(0, 1).
#[allow(clippy::too_many_arguments)]
pub fn check_normality(
    dist: &LossDistribution,
    theta: f64,
    alpha0: f64,
    beta0: f64,
    t: usize,
    sample_count: usize,
    seed: u64,
    replication: u64,
) -> Result<NormalityReport> {
    dist.validate()?;
    if sample_count < 2 {
        return Err(Error::config("check_normality needs at least 2 samples"));
    }
    let mut post = GammaPosterior::new(1, alpha0, beta0, theta)?;
    for g in SyntheticStream::new(*dist, seed, replication, t) {
        post.update(&LossVector::new(vec![g])?)?;
    }
    let star = post.map()[0];
    if !(star > 0.0) {
        return Err(Error::domain("posterior mode is not positive; need alpha0 - 1 + t > 0"));
    }
    let hess = crate::loss::basic_hessian_diag(alpha0, t as u64, &[star])[0];
    let root_h = hess.sqrt();
    let gamma = Gamma::new(post.shape(), 1.0 / post.rates()[0])
        .map_err(|e| Error::domain(format!("posterior Gamma: {e}")))?;
    let mut rng = SplitMix64::derive(seed, Stream::Posterior, replication);
    let z: Vec<f64> = (0..sample_count).map(|_| root_h * (gamma.sample(&mut rng) - star)).collect();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let variance = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(NormalityReport {
        t,
        samples: sample_count,
        ks_distance: ks_distance_normal(z),
        mean,
        variance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapPoint {
    pub t: u64,
    /// `posterior_mean - argmin` per weight.
    pub gap: Vec<f64>,
    /// `gap * sqrt(t)`.
    pub scaled: Vec<f64>,
}

/// The mean-minus-minimiser gap after each prefix of `history`, starting at t = 0.
pub fn check_gap(history: &[LossVector], alpha0: f64, beta0: f64, theta: f64) -> Result<Vec<GapPoint>> {
    let m = history.first().map_or(1, LossVector::len);
    let mut post = GammaPosterior::new(m, alpha0, beta0, theta)?;
    let mut out = Vec::with_capacity(history.len() + 1);
    let point = |post: &GammaPosterior| {
        let mean = post.posterior_mean().lambda;
        let argmin = post.map();
        let gap: Vec<f64> = mean.iter().zip(&argmin).map(|(a, b)| a - b).collect();
        let rt = (post.t() as f64).sqrt();
        GapPoint {
            t: post.t(),
            scaled: gap.iter().map(|g| g * rt).collect(),
            gap,
        }
    };
    out.push(point(&post));
    for g in history {
        post.update(g)?;
        out.push(point(&post));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXP2: LossDistribution = LossDistribution::Exponential { mean: 2.0 };

    #[test]
    fn predicted_variances() {
        assert!((predicted_variance_bayes(&EXP2, 0.1) - 25.0).abs() < 1e-12);
        let opt = optimal_gamma_tilde(&EXP2);
        assert_eq!(opt, 0.25);
        assert!((predicted_variance_sgd(&EXP2, 0.1, opt).unwrap() - 25.0).abs() < 1e-12);
        for k in [0.25, 0.5, 2.0, 4.0] {
            match predicted_variance_sgd(&EXP2, 0.1, k * opt) {
                Some(v) => assert!(v > 25.0, "k={k}: {v}"),
                None => assert!(k * opt <= slow_regime_threshold(&EXP2)),
            }
        }
        assert!(predicted_variance_sgd(&EXP2, 0.1, 0.125).is_none());
    }

    #[test]
    fn distribution_parsing_and_moments() {
        let d: LossDistribution = "uniform:0:3".parse().unwrap();
        assert_eq!(d.mean(), 1.5);
        assert_eq!(d.variance(), 0.75);
        assert!("bernoulli:1.5".parse::<LossDistribution>().is_err());
        assert!("poisson:2".parse::<LossDistribution>().is_err());
        let mut rng = SplitMix64::new(1);
        let xs: Vec<f64> = (0..200_000).map(|_| EXP2.sample(&mut rng)).collect();
        let (v, _) = variance_with_half_width(&xs);
        assert!((xs.iter().sum::<f64>() / 2e5 - 2.0).abs() < 0.03);
        assert!((v - 4.0).abs() < 0.15);
    }

    #[test]
    fn synthetic_stream_is_reproducible() {
        let a: Vec<f64> = SyntheticStream::new(EXP2, 3, 7, 20).collect();
        let b: Vec<f64> = SyntheticStream::new(EXP2, 3, 7, 20).collect();
        let c: Vec<f64> = SyntheticStream::new(EXP2, 3, 8, 20).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn bayes_variance_is_near_prediction() {
        let rep = mc_variance(&EXP2, 0.1, &Estimator::Bayes { alpha0: 1.0, beta0: 1.0 }, 2000, 400, 5).unwrap();
        assert!((rep.empirical - 25.0).abs() < 0.25 * 25.0, "{rep:?}");
        assert!(rep.half_width > 0.0);
        let slow = Estimator::Sgd {
            gamma_tilde: 0.1,
            lambda0: 1.0,
            offset: 100,
        };
        assert!(mc_variance(&EXP2, 0.1, &slow, 100, 100, 5).unwrap().slow_regime);
        assert!(mc_variance(&EXP2, 0.1, &slow, 100, 50, 5).is_err());
    }

    #[test]
    fn ks_distance_reference() {
        assert!((ks_distance_normal(vec![0.0]) - 0.5).abs() < 1e-15);
        let mut rng = SplitMix64::new(9);
        let normal = rand_distr::StandardNormal;
        let z: Vec<f64> = (0..50_000).map(|_| Distribution::<f64>::sample(&normal, &mut rng)).collect();
        assert!(ks_distance_normal(z) < 0.01);
        let shifted: Vec<f64> = (0..50_000).map(|k| (k as f64 + 0.5) / 50_000.0 + 10.0).collect();
        assert!(ks_distance_normal(shifted) > 0.99);
    }

    #[test]
    fn normality_statistics_tighten_with_t() {
        let small = check_normality(&EXP2, 0.1, 1.0, 1.0, 10, 100_000, 4, 0).unwrap();
        let large = check_normality(&EXP2, 0.1, 1.0, 1.0, 10_000, 100_000, 4, 0).unwrap();
        assert!(large.ks_distance < small.ks_distance);
        assert!(large.mean.abs() < small.mean.abs());
        assert!((large.variance - 1.0).abs() < 0.03);
    }

    #[test]
    fn posterior_variance_identity() {
        let mut post = GammaPosterior::new(1, 1.0, 1.0, 0.1).unwrap();
        for g in SyntheticStream::new(EXP2, 1, 0, 30) {
            post.update(&LossVector::new(vec![g]).unwrap()).unwrap();
        }
        let r = 1.0 + 0.1 * post.loss_sums()[0];
        assert_eq!(post.posterior_variance()[0], 31.0 / (r * r));
    }

    #[test]
    fn gap_series() {
        let hist: Vec<LossVector> = (0..1000).map(|_| LossVector::new(vec![0.5]).unwrap()).collect();
        let pts = check_gap(&hist, 1.0, 2.0, 0.1).unwrap();
        assert_eq!(pts.len(), 1001);
        assert!((pts[0].gap[0] - 0.5).abs() < 1e-15);
        for p in &pts {
            let expected = 1.0 / (2.0 + 0.1 * 0.5 * p.t as f64);
            assert!((p.gap[0] - expected).abs() < 1e-12);
        }
        assert!(pts[1000].scaled[0] < pts[100].scaled[0]);

        let rand: Vec<LossVector> = SyntheticStream::new(EXP2, 2, 0, 500)
            .map(|g| LossVector::new(vec![g]).unwrap())
            .collect();
        let pts = check_gap(&rand, 1.0, 1.0, 0.1).unwrap();
        assert!(pts.windows(2).all(|w| w[1].gap[0] <= w[0].gap[0]));
    }

    fn toy_losses(rng: &mut SplitMix64, n: usize, m: usize) -> (Vec<(Vec<f64>, Vec<f64>)>, Vec<Label>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let g_true: Vec<f64> = (0..m).map(|_| if rng.bernoulli(0.3) { 1.0 } else { 0.0 }).collect();
            let g_flip: Vec<f64> = g_true.iter().map(|g| 1.0 - g).collect();
            rows.push((g_true, g_flip));
            labels.push(if rng.bernoulli(0.5) { Label::Pos } else { Label::Neg });
        }
        (rows, labels)
    }

    #[test]
    fn bound_dominates_error_on_random_instances() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..50 {
            let (rows, labels) = toy_losses(&mut rng, 80, 7);
            for p in [1.5, 2.0, 4.0] {
                let r = check_bound(&rows, &labels, 0.1, p).unwrap();
                assert!(r.bound >= 0.0);
                assert!(r.bound >= r.error, "{r:?}");
            }
        }
    }

    #[test]
    fn bound_edge_cases() {
        // One learner that is always right: error 0, bound tiny.
        let rows = vec![(vec![1e-9], vec![1.0]); 10];
        let labels = vec![Label::Pos; 10];
        let r = check_bound(&rows, &labels, 0.1, 2.0).unwrap();
        assert_eq!(r.error, 0.0);
        assert!(r.bound < 1e-3, "{r:?}");

        // Zero-mean learners are dropped.
        let rows = vec![(vec![0.0, 0.5], vec![1.0, 0.5]); 4];
        let r = check_bound(&rows, &vec![Label::Neg; 4], 0.1, 2.0).unwrap();
        assert_eq!(r.excluded, vec![0]);
        assert!(check_bound(&rows, &vec![Label::Neg; 4], 0.1, 1.0).is_err());

        // The m^(1/p) factor falls toward 1 as p grows.
        let f: Vec<f64> = [1.5, 2.0, 4.0, 50.0].iter().map(|p| 7f64.powf(1.0 / p)).collect();
        assert!(f.windows(2).all(|w| w[1] < w[0]));
    }
}
