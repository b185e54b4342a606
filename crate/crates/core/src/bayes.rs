//! Posterior state and prediction for the Bayesian ensemble weights.
//!
//! The basic variant is conjugate: an exponential likelihood
//! `theta * lambda * exp(-theta * lambda * g)` with a Gamma prior gives a
//! Gamma posterior whose mean is available in closed form. The two Gamma
//! likelihood variants need a 1-D quadrature per weight.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::loss::{BaseLoss, LossVector};
use crate::quadrature::{integrate, locate_support, QuadConfig};
use crate::special::ln_gamma;
use crate::{Error, Label, Result};

/// Posterior-mean weights, one per learner.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEstimate {
    pub lambda: Vec<f64>,
}

/// Posterior means of `(alpha_i, beta_i)` for the shape-rate variant.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEstimate {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_width(expected: usize, g: &LossVector) -> Result<()> {
    if g.len() == expected {
        Ok(())
    } else {
        Err(Error::domain(format!("loss vector has {} entries, posterior has {expected}", g.len())))
    }
}

/// Conjugate Gamma posterior of the basic variant.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPosterior {
    pub alpha0: f64,
    pub beta0: f64,
    pub theta: f64,
    t: u64,
    loss_sums: Vec<f64>,
}

impl GammaPosterior {
    pub fn new(m: usize, alpha0: f64, beta0: f64, theta: f64) -> Result<Self> {
        positive("alpha0", alpha0)?;
        positive("beta0", beta0)?;
        positive("theta", theta)?;
        Ok(GammaPosterior {
            alpha0,
            beta0,
            theta,
            t: 0,
            loss_sums: vec![0.0; m],
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn loss_sums(&self) -> &[f64] {
        &self.loss_sums
    }

    pub fn update(&mut self, g: &LossVector) -> Result<()> {
        check_width(self.loss_sums.len(), g)?;
        for (s, &gi) in self.loss_sums.iter_mut().zip(g.as_slice()) {
            *s += gi;
        }
        self.t += 1;
        Ok(())
    }

    /// Posterior rate for each weight: `beta0 + theta * sum_g`.
    pub fn rates(&self) -> Vec<f64> {
        self.loss_sums.iter().map(|&s| self.beta0 + self.theta * s).collect()
    }

    pub fn shape(&self) -> f64 {
        self.alpha0 + self.t as f64
    }

    /// `(alpha0 + t) / (beta0 + theta * sum_g)`.
    pub fn posterior_mean(&self) -> WeightEstimate {
        let a = self.shape();
        WeightEstimate {
            lambda: self.rates().into_iter().map(|r| a / r).collect(),
        }
    }

    /// `(alpha0 + t) / (beta0 + theta * sum_g)^2`.
    pub fn posterior_variance(&self) -> Vec<f64> {
        let a = self.shape();
        self.rates().into_iter().map(|r| a / (r * r)).collect()
    }

    /// Posterior mode, which is also the cumulative-loss minimiser:
    /// `(alpha0 - 1 + t) / (beta0 + theta * sum_g)`. Only positive once
    /// `alpha0 - 1 + t > 0`.
    pub fn map(&self) -> Vec<f64> {
        let a = self.shape() - 1.0;
        self.rates().into_iter().map(|r| a / r).collect()
    }

    /// ```text
    /// posterior gamma <m>
    /// alpha0 <v>
    /// beta0 <v>
    /// theta <v>
    /// t <n>
    /// loss_sums <v...>
    /// end
    /// ```
    pub fn to_snapshot(&self) -> String {
        let mut out = format!("posterior gamma {}\n", self.loss_sums.len());
        let _ = writeln!(out, "alpha0 {:?}\nbeta0 {:?}\ntheta {:?}\nt {}", self.alpha0, self.beta0, self.theta, self.t);
        let _ = writeln!(out, "loss_sums {}\nend", join(&self.loss_sums));
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut r = SnapshotReader::new(text, "gamma")?;
        let mut post = GammaPosterior::new(r.m, r.scalar("alpha0")?, r.scalar("beta0")?, r.scalar("theta")?)?;
        post.t = r.count("t")?;
        post.loss_sums = r.vector("loss_sums", true)?;
        r.finish()?;
        Ok(post)
    }
}

/// Posterior of the shape-only Gamma likelihood variant, where the loss
/// `g` is modelled as Gamma(lambda, rate theta).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePosterior {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub theta: f64,
    /// Caps on `b + t` and `c + t`.
    pub caps: (f64, f64),
    pub quad: QuadConfig,
    t: u64,
    log_prod: Vec<f64>,
}

pub const SHAPE_CAP: f64 = 1000.0;

impl ShapePosterior {
    pub fn new(m: usize, a: f64, b: f64, c: f64, theta: f64) -> Result<Self> {
        for (n, v) in [("a", a), ("b", b), ("c", c), ("theta", theta)] {
            positive(n, v)?;
        }
        Ok(ShapePosterior {
            a,
            b,
            c,
            theta,
            caps: (SHAPE_CAP, SHAPE_CAP),
            quad: QuadConfig::default(),
            t: 0,
            log_prod: vec![0.0; m],
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn log_prod(&self) -> &[f64] {
        &self.log_prod
    }

    /// Losses must already be strictly positive (floored).
    pub fn update(&mut self, g: &LossVector) -> Result<()> {
        check_width(self.log_prod.len(), g)?;
        if let Some(i) = g.as_slice().iter().position(|&x| x <= 0.0) {
            return Err(Error::domain(format!("loss {i} is zero; floor losses before a Gamma-likelihood update")));
        }
        for (s, &gi) in self.log_prod.iter_mut().zip(g.as_slice()) {
            *s += gi.ln();
        }
        self.t += 1;
        Ok(())
    }

    pub fn b_eff(&self) -> f64 {
        (self.b + self.t as f64).min(self.caps.0)
    }

    pub fn c_eff(&self) -> f64 {
        (self.c + self.t as f64).min(self.caps.1)
    }

    /// Unnormalised log posterior of weight `i` at `lambda`.
    pub fn log_weight(&self, i: usize, lambda: f64) -> f64 {
        (lambda - 1.0) * (self.a.ln() + self.log_prod[i]) + self.c_eff() * lambda * self.theta.ln()
            - self.b_eff() * ln_gamma(lambda)
    }

    fn mean_for(&self, log_prod: f64, cfg: &QuadConfig) -> Result<f64> {
        let tilt = self.a.ln() + log_prod;
        let (b, ct) = (self.b_eff(), self.c_eff() * self.theta.ln());
        let lw = |l: f64| (l - 1.0) * tilt + ct * l - b * ln_gamma(l);
        let sup = locate_support(lw, cfg.log_cutoff)?;
        let out = integrate(
            |l| {
                let w = (lw(l) - sup.peak).exp();
                [w, l * w]
            },
            &sup.breakpoints(),
            cfg,
        )?;
        Ok(out.value[1] / out.value[0])
    }

    pub fn posterior_mean(&self) -> Result<WeightEstimate> {
        self.posterior_mean_with(&self.quad)
    }

    /// Weights with identical sufficient statistics share one integration.
    pub fn posterior_mean_with(&self, cfg: &QuadConfig) -> Result<WeightEstimate> {
        let mut memo: HashMap<u64, f64> = HashMap::new();
        let mut lambda = Vec::with_capacity(self.log_prod.len());
        for &lp in &self.log_prod {
            let v = match memo.get(&lp.to_bits()) {
                Some(&v) => v,
                None => {
                    let v = self.mean_for(lp, cfg)?;
                    memo.insert(lp.to_bits(), v);
                    v
                }
            };
            lambda.push(v);
        }
        Ok(WeightEstimate { lambda })
    }

    /// ```text
    /// posterior shape <m>
    /// a <v>
    /// b <v>
    /// c <v>
    /// theta <v>
    /// caps <b_cap> <c_cap>
    /// t <n>
    /// log_prod <v...>
    /// end
    /// ```
    pub fn to_snapshot(&self) -> String {
        let mut out = format!("posterior shape {}\n", self.log_prod.len());
        let _ = writeln!(
            out,
            "a {:?}\nb {:?}\nc {:?}\ntheta {:?}\ncaps {:?} {:?}\nt {}",
            self.a, self.b, self.c, self.theta, self.caps.0, self.caps.1, self.t
        );
        let _ = writeln!(out, "log_prod {}\nend", join(&self.log_prod));
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut r = SnapshotReader::new(text, "shape")?;
        let mut post = ShapePosterior::new(r.m, r.scalar("a")?, r.scalar("b")?, r.scalar("c")?, r.scalar("theta")?)?;
        post.caps = r.pair("caps")?;
        post.t = r.count("t")?;
        post.log_prod = r.vector("log_prod", false)?;
        r.finish()?;
        Ok(post)
    }
}

/// Posterior of the shape-rate Gamma likelihood variant, `g ~ Gamma(alpha, beta)`
/// with the conjugate prior `p^(alpha-1) beta^(alpha s) e^(-q beta) / Γ(alpha)^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRatePosterior {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    /// Caps on `r + t` and `s + t`.
    pub caps: (f64, f64),
    pub quad: QuadConfig,
    t: u64,
    log_prod: Vec<f64>,
    loss_sums: Vec<f64>,
}

pub const SHAPE_RATE_CAPS: (f64, f64) = (200.5, 200.0);

impl ShapeRatePosterior {
    pub fn new(m: usize, p: f64, q: f64, r: f64, s: f64) -> Result<Self> {
        for (n, v) in [("p", p), ("q", q), ("r", r), ("s", s)] {
            positive(n, v)?;
        }
        if s >= r {
            return Err(Error::config(format!("need s < r for a proper posterior, got s={s}, r={r}")));
        }
        Ok(ShapeRatePosterior {
            p,
            q,
            r,
            s,
            caps: SHAPE_RATE_CAPS,
            quad: QuadConfig::default(),
            t: 0,
            log_prod: vec![0.0; m],
            loss_sums: vec![0.0; m],
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn update(&mut self, g: &LossVector) -> Result<()> {
        check_width(self.log_prod.len(), g)?;
        if let Some(i) = g.as_slice().iter().position(|&x| x <= 0.0) {
            return Err(Error::domain(format!("loss {i} is zero; floor losses before a Gamma-likelihood update")));
        }
        for (i, &gi) in g.as_slice().iter().enumerate() {
            self.log_prod[i] += gi.ln();
            self.loss_sums[i] += gi;
        }
        self.t += 1;
        Ok(())
    }

    pub fn r_eff(&self) -> f64 {
        (self.r + self.t as f64).min(self.caps.0)
    }

    pub fn s_eff(&self) -> f64 {
        (self.s + self.t as f64).min(self.caps.1)
    }

    /// Log of the alpha-marginal (beta integrated out) for weight `i`.
    pub fn log_alpha_marginal(&self, i: usize, alpha: f64) -> f64 {
        let (r, s) = (self.r_eff(), self.s_eff());
        let big_r = self.q + self.loss_sums[i];
        (alpha - 1.0) * (self.p.ln() + self.log_prod[i]) - r * ln_gamma(alpha) + ln_gamma(alpha * s + 1.0)
            - (alpha * s + 1.0) * big_r.ln()
    }

    /// `E[beta | alpha] = (alpha s_eff + 1) / (q + sum_g)`.
    pub fn beta_given_alpha(&self, i: usize, alpha: f64) -> f64 {
        (alpha * self.s_eff() + 1.0) / (self.q + self.loss_sums[i])
    }

    fn pair_for(&self, i: usize, cfg: &QuadConfig) -> Result<(f64, f64)> {
        let lw = |a: f64| self.log_alpha_marginal(i, a);
        let sup = locate_support(lw, cfg.log_cutoff)?;
        let out = integrate(
            |a| {
                let w = (lw(a) - sup.peak).exp();
                [w, a * w, self.beta_given_alpha(i, a) * w]
            },
            &sup.breakpoints(),
            cfg,
        )?;
        Ok((out.value[1] / out.value[0], out.value[2] / out.value[0]))
    }

    pub fn posterior_mean(&self) -> Result<PairEstimate> {
        self.posterior_mean_with(&self.quad)
    }

    pub fn posterior_mean_with(&self, cfg: &QuadConfig) -> Result<PairEstimate> {
        let m = self.log_prod.len();
        let mut memo: HashMap<(u64, u64), (f64, f64)> = HashMap::new();
        let mut est = PairEstimate {
            alpha: Vec::with_capacity(m),
            beta: Vec::with_capacity(m),
        };
        for i in 0..m {
            let key = (self.log_prod[i].to_bits(), self.loss_sums[i].to_bits());
            let (a, b) = match memo.get(&key) {
                Some(&v) => v,
                None => {
                    let v = self.pair_for(i, cfg)?;
                    memo.insert(key, v);
                    v
                }
            };
            est.alpha.push(a);
            est.beta.push(b);
        }
        Ok(est)
    }

    /// ```text
    /// posterior shape_rate <m>
    /// p <v>
    /// q <v>
    /// r <v>
    /// s <v>
    /// caps <r_cap> <s_cap>
    /// t <n>
    /// log_prod <v...>
    /// loss_sums <v...>
    /// end
    /// ```
    pub fn to_snapshot(&self) -> String {
        let mut out = format!("posterior shape_rate {}\n", self.log_prod.len());
        let _ = writeln!(
            out,
            "p {:?}\nq {:?}\nr {:?}\ns {:?}\ncaps {:?} {:?}\nt {}",
            self.p, self.q, self.r, self.s, self.caps.0, self.caps.1, self.t
        );
        let _ = writeln!(out, "log_prod {}\nloss_sums {}\nend", join(&self.log_prod), join(&self.loss_sums));
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut rd = SnapshotReader::new(text, "shape_rate")?;
        let mut post = ShapeRatePosterior::new(
            rd.m,
            rd.scalar("p")?,
            rd.scalar("q")?,
            rd.scalar("r")?,
            rd.scalar("s")?,
        )?;
        post.caps = rd.pair("caps")?;
        post.t = rd.count("t")?;
        post.log_prod = rd.vector("log_prod", false)?;
        post.loss_sums = rd.vector("loss_sums", true)?;
        rd.finish()?;
        Ok(post)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

struct SnapshotReader<'a> {
    lines: std::iter::Filter<std::iter::Enumerate<std::str::Lines<'a>>, fn(&(usize, &'a str)) -> bool>,
    m: usize,
}

impl<'a> SnapshotReader<'a> {
    fn new(text: &'a str, kind: &str) -> Result<Self> {
        fn non_blank(l: &(usize, &str)) -> bool {
            !l.1.trim().is_empty()
        }
        let mut lines = text.lines().enumerate().filter(non_blank as fn(&(usize, &'a str)) -> bool);
        let (n, head) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty snapshot".into(),
        })?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "posterior" || toks[1] != kind {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected `posterior {kind} <m>`"),
            });
        }
        let m = toks[2].parse().map_err(|_| Error::Parse {
            line: n + 1,
            message: "bad weight count".into(),
        })?;
        Ok(SnapshotReader { lines, m })
    }

    fn field(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("snapshot truncated before `{key}`"),
        })?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected `{key}`"),
            });
        }
        Ok((n + 1, toks.collect()))
    }

    fn numbers<T: std::str::FromStr>(line: usize, toks: &[&str]) -> Result<Vec<T>> {
        toks.iter()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number `{t}`"),
                })
            })
            .collect()
    }

    fn exactly<T: std::str::FromStr>(&mut self, key: &str, k: usize) -> Result<Vec<T>> {
        let (line, toks) = self.field(key)?;
        let v = Self::numbers(line, &toks)?;
        if v.len() != k {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` expects {k} values, found {}", v.len()),
            });
        }
        Ok(v)
    }

    fn scalar(&mut self, key: &str) -> Result<f64> {
        Ok(self.exactly(key, 1)?[0])
    }

    fn count(&mut self, key: &str) -> Result<u64> {
        Ok(self.exactly(key, 1)?[0])
    }

    fn pair(&mut self, key: &str) -> Result<(f64, f64)> {
        let v: Vec<f64> = self.exactly(key, 2)?;
        Ok((v[0], v[1]))
    }

    fn vector(&mut self, key: &str, non_negative: bool) -> Result<Vec<f64>> {
        let m = self.m;
        let v: Vec<f64> = self.exactly(key, m)?;
        if v.iter().any(|x| !x.is_finite() || (non_negative && *x < 0.0)) {
            return Err(Error::domain(format!("`{key}` holds an invalid entry")));
        }
        Ok(v)
    }

    fn finish(&mut self) -> Result<()> {
        self.field("end").map(|_| ())
    }
}

/// Losses of every learner under each candidate label, `(g(x,+1), g(x,-1))`.
pub fn candidate_losses(scores: &[f64], kind: BaseLoss, binary: bool) -> (LossVector, LossVector) {
    (
        LossVector::from_scores(scores, Label::Pos, kind, binary),
        LossVector::from_scores(scores, Label::Neg, kind, binary),
    )
}

/// +1 iff `sum(lambda g(x,+1)) <= sum(lambda g(x,-1))`.
pub fn predict(lambda: &[f64], g_pos: &[f64], g_neg: &[f64]) -> Label {
    let (mut sp, mut sn) = (0.0, 0.0);
    for i in 0..lambda.len() {
        sp += lambda[i] * g_pos[i];
        sn += lambda[i] * g_neg[i];
    }
    if sp <= sn {
        Label::Pos
    } else {
        Label::Neg
    }
}

fn strictly_positive(g: &[f64]) -> Result<()> {
    match g.iter().position(|&x| !(x > 0.0)) {
        None => Ok(()),
        Some(i) => Err(Error::domain(format!("candidate loss {i} is {}; needs a positive floor", g[i]))),
    }
}

/// +1 iff `sum((1 - lambda_i) log(g_i(x,+1)/g_i(x,-1))) + theta sum(g_i(x,+1) - g_i(x,-1)) <= 0`.
pub fn predict_shape(lambda: &[f64], g_pos: &[f64], g_neg: &[f64], theta: f64) -> Result<Label> {
    strictly_positive(g_pos)?;
    strictly_positive(g_neg)?;
    let mut d = 0.0;
    for i in 0..lambda.len() {
        d += (1.0 - lambda[i]) * (g_pos[i] / g_neg[i]).ln() + theta * (g_pos[i] - g_neg[i]);
    }
    Ok(Label::from_score(-d))
}

/// +1 iff `sum((1 - alpha_i) log(g_i(x,+1)/g_i(x,-1))) + sum(beta_i (g_i(x,+1) - g_i(x,-1))) <= 0`.
pub fn predict_shape_rate(est: &PairEstimate, g_pos: &[f64], g_neg: &[f64]) -> Result<Label> {
    strictly_positive(g_pos)?;
    strictly_positive(g_neg)?;
    let mut d = 0.0;
    for i in 0..est.alpha.len() {
        d += (1.0 - est.alpha[i]) * (g_pos[i] / g_neg[i]).ln() + est.beta[i] * (g_pos[i] - g_neg[i]);
    }
    Ok(Label::from_score(-d))
}
