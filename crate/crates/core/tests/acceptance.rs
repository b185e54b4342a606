//! Acceptance suite. Runs as a plain binary (`harness = false`) so the verdict
//! lines always reach stdout:
//!
//! ```text
//! cargo test -p bayes-ensemble --test acceptance
//! ```
//!
//! Each criterion prints one `PASS` or `FAIL` line. The process exits non-zero
//! on a FAIL only when `ACCEPTANCE_STRICT=1`; a panic or library error always
//! fails. All seeds are fixed up front and never tuned.

use std::path::PathBuf;
use std::time::Instant;

use bayes_ensemble::bayes::{GammaPosterior, ShapePosterior, ShapeRatePosterior};
use bayes_ensemble::data::Dataset;
use bayes_ensemble::harness::runner::prepare_trial;
use bayes_ensemble::harness::report::write_run;
use bayes_ensemble::harness::{run_experiment_on, ExperimentConfig, Method};
use bayes_ensemble::loss::{basic_minimizer, LossVector, LOSS_FLOOR};
use bayes_ensemble::rng::SplitMix64;
use bayes_ensemble::special::ln_gamma;
use bayes_ensemble::verify::{
    check_bound, check_normality, mc_variance, true_and_flipped_losses, Estimator, LossDistribution,
};
use bayes_ensemble::weak::LearnerKind;

const SEED: u64 = 1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(format!("{name}.libsvm"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn criterion_1() -> Verdict {
    let mut rng = SplitMix64::new(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = 1 + rng.below(5) as usize;
        let alpha0 = 0.5 + 3.0 * rng.next_f64();
        let beta0 = 0.1 + 3.0 * rng.next_f64();
        let theta = [0.01, 0.1, 1.0][rng.below(3) as usize];
        let mut post = GammaPosterior::new(m, alpha0, beta0, theta).unwrap();
        for _ in 0..rng.below(200) {
            let g: Vec<f64> = (0..m).map(|_| 2.0 * rng.next_f64()).collect();
            post.update(&LossVector::new(g).unwrap()).unwrap();
        }
        let mean = post.posterior_mean().lambda;
        let argmin = basic_minimizer(alpha0, beta0, theta, post.t(), post.loss_sums());
        for i in 0..m {
            let gap = 1.0 / (beta0 + theta * post.loss_sums()[i]);
            worst = worst.max((mean[i] - argmin[i] - gap).abs());
        }
    }
    Verdict {
        pass: worst <= 1e-12,
        detail: format!("max |mean - argmin - gap| = {worst:.2e} over 1000 histories"),
    }
}

fn criterion_2() -> Verdict {
    let dist = LossDistribution::Exponential { mean: 2.0 };
    let theta = 0.1;
    let (t, reps) = (10_000, 500);
    let bayes = mc_variance(&dist, theta, &Estimator::Bayes { alpha0: 1.0, beta0: 1.0 }, t, reps, SEED).unwrap();
    // optimal gamma_tilde is 1 / E[g]^2 = 0.25
    let sgd = mc_variance(
        &dist,
        theta,
        &Estimator::Sgd {
            gamma_tilde: 0.5,
            lambda0: 1.0,
            offset: 100,
        },
        t,
        reps,
        SEED,
    )
    .unwrap();
    let close = rel(bayes.empirical, 25.0) <= 0.15;
    let separated = sgd.empirical - sgd.half_width > bayes.empirical + bayes.half_width;
    Verdict {
        pass: close && separated,
        detail: format!(
            "bayes {:.2} +/- {:.2} (target 25), sgd {:.2} +/- {:.2} (predicted {:.2})",
            bayes.empirical,
            bayes.half_width,
            sgd.empirical,
            sgd.half_width,
            sgd.predicted.unwrap_or(f64::NAN)
        ),
    }
}

fn base_config(dataset: &str, learner: LearnerKind) -> ExperimentConfig {
    ExperimentConfig {
        dataset: data(dataset),
        methods: vec![Method::Sgd, Method::BayesBasic],
        learner,
        trials: 5,
        seed: SEED,
        ..ExperimentConfig::default()
    }
}

const BENCHMARKS: [(&str, f64); 4] = [
    ("breast-cancer_scale", 0.050),
    ("heart_scale", 0.239),
    ("australian_scale", 0.166),
    ("diabetes_scale", 0.363),
];

fn criterion_3() -> Verdict {
    let mut within = 0;
    let mut beats_sgd = 0;
    let mut parts = vec![];
    for (name, target) in BENCHMARKS {
        let cfg = base_config(name, LearnerKind::Perceptron);
        let ds = Dataset::load(&cfg.dataset).unwrap();
        let s = run_experiment_on(&cfg, &ds).unwrap();
        let bayes = s.method(Method::BayesBasic).unwrap().mean_error;
        let sgd = s.method(Method::Sgd).unwrap().mean_error;
        within += usize::from((bayes - target).abs() <= 0.03);
        beats_sgd += usize::from(bayes <= sgd);
        parts.push(format!("{name} {bayes:.3} vs {target:.3} (sgd {sgd:.3})"));
    }
    Verdict {
        pass: within == 4 && beats_sgd >= 3,
        detail: format!("{within}/4 within 0.03, bayes <= sgd on {beats_sgd}/4: {}", parts.join("; ")),
    }
}

fn criterion_4() -> Verdict {
    let mut ok = true;
    let mut parts = vec![];
    for (name, target) in [("heart_scale", 0.202), ("mushrooms", 0.031)] {
        let cfg = base_config(name, LearnerKind::NaiveBayes);
        let ds = Dataset::load(&cfg.dataset).unwrap();
        let bayes = run_experiment_on(&cfg, &ds).unwrap().method(Method::BayesBasic).unwrap().mean_error;
        ok &= (bayes - target).abs() <= 0.03;
        parts.push(format!("{name} {bayes:.4} vs {target:.3}"));
    }
    Verdict {
        pass: ok,
        detail: parts.join("; "),
    }
}

fn criterion_5() -> Verdict {
    let mut checked = 0;
    let mut violations = vec![];
    let mut min_slack = f64::INFINITY;
    for (name, _) in BENCHMARKS {
        let cfg = base_config(name, LearnerKind::Perceptron);
        let ds = Dataset::load(&cfg.dataset).unwrap();
        for trial in 0..cfg.trials {
            let (pool, _, stream) = prepare_trial(&cfg, &ds, trial).unwrap();
            let losses = true_and_flipped_losses(&pool, &stream, cfg.base_loss, cfg.binary_scores);
            let labels: Vec<_> = stream.iter().map(|s| s.label).collect();
            for p in [1.5, 2.0, 4.0] {
                let r = check_bound(&losses, &labels, cfg.theta, p).unwrap();
                checked += 1;
                min_slack = min_slack.min(r.slack());
                if !(r.bound >= r.error) {
                    violations.push(format!("{name} trial {trial} p={p}"));
                }
            }
        }
    }
    Verdict {
        pass: violations.is_empty(),
        detail: format!(
            "{checked} (dataset, trial, p) cases, min slack {min_slack:.4}, violations [{}]",
            violations.join(", ")
        ),
    }
}

/// Joint density of (alpha, beta) for one classifier after one loss `g`,
/// written out directly and integrated on a trapezoid grid.
fn shape_rate_brute_force(p: f64, q: f64, r: f64, s: f64, g: f64) -> (f64, f64) {
    let log_joint = |a: f64, b: f64| {
        let prior = (a - 1.0) * p.ln() + a * s * b.ln() - q * b - r * ln_gamma(a);
        // g ~ Gamma(shape a, rate b)
        let likelihood = a * b.ln() - ln_gamma(a) + (a - 1.0) * g.ln() - b * g;
        prior + likelihood
    };
    let (na, nb) = (1600usize, 1600usize);
    let (a_hi, b_hi) = (40.0, 80.0);
    let (ha, hb) = (a_hi / na as f64, b_hi / nb as f64);
    let (mut z, mut ma, mut mb) = (0.0, 0.0, 0.0);
    for i in 1..=na {
        let a = ha * i as f64;
        let wa = if i == na { 0.5 } else { 1.0 };
        for j in 1..=nb {
            let b = hb * j as f64;
            let wb = if j == nb { 0.5 } else { 1.0 };
            let w = wa * wb * log_joint(a, b).exp();
            z += w;
            ma += a * w;
            mb += b * w;
        }
    }
    (ma / z, mb / z)
}

fn criterion_6() -> Verdict {
    let mut rng = SplitMix64::new(SEED);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let m = 1 + rng.below(3) as usize;
        let steps = rng.below(400);
        let draw = |rng: &mut SplitMix64| -> LossVector {
            LossVector::new((0..m).map(|_| (3.0 * rng.next_f64()).max(LOSS_FLOOR)).collect()).unwrap()
        };
        if k % 2 == 0 {
            let theta = [0.1, 0.5, 1.0][rng.below(3) as usize];
            let mut post = ShapePosterior::new(m, 1.0, 1.0, 1.0, theta).unwrap();
            for _ in 0..steps {
                post.update(&draw(&mut rng)).unwrap();
            }
            let a = post.posterior_mean_with(&post.quad).unwrap().lambda;
            let b = post.posterior_mean_with(&post.quad.doubled()).unwrap().lambda;
            a.iter().zip(&b).for_each(|(x, y)| worst = worst.max(rel(*x, *y)));
        } else {
            let mut post = ShapeRatePosterior::new(m, 1.0, 1.0, 1.5, 1.0).unwrap();
            for _ in 0..steps {
                post.update(&draw(&mut rng)).unwrap();
            }
            let a = post.posterior_mean_with(&post.quad).unwrap();
            let b = post.posterior_mean_with(&post.quad.doubled()).unwrap();
            for i in 0..m {
                worst = worst.max(rel(a.alpha[i], b.alpha[i])).max(rel(a.beta[i], b.beta[i]));
            }
        }
    }
    let g = 0.7;
    let mut post = ShapeRatePosterior::new(1, 1.0, 1.0, 1.5, 1.0).unwrap();
    post.update(&LossVector::new(vec![g]).unwrap()).unwrap();
    let est = post.posterior_mean().unwrap();
    let (ba, bb) = shape_rate_brute_force(1.0, 1.0, 1.5, 1.0, g);
    let grid = rel(est.alpha[0], ba).max(rel(est.beta[0], bb));
    Verdict {
        pass: worst < 1e-6 && grid <= 1e-4,
        detail: format!(
            "max refinement change {worst:.2e} over 100 states; m=1,t=1 grid rel diff {grid:.2e} (alpha {:.6} vs {ba:.6}, beta {:.6} vs {bb:.6})",
            est.alpha[0], est.beta[0]
        ),
    }
}

fn criterion_7() -> Verdict {
    let dist = LossDistribution::Exponential { mean: 2.0 };
    let mut monotone = 0;
    let mut rows = vec![];
    for seed in 1..=10u64 {
        let ks: Vec<f64> = [100, 1_000, 10_000]
            .iter()
            .map(|&t| check_normality(&dist, 0.1, 1.0, 1.0, t, 200_000, seed, 0).unwrap().ks_distance)
            .collect();
        monotone += usize::from(ks[0] > ks[1] && ks[1] > ks[2]);
        rows.push(format!("{:.4}/{:.4}/{:.4}", ks[0], ks[1], ks[2]));
    }
    Verdict {
        pass: monotone >= 8,
        detail: format!("{monotone}/10 seeds decreasing; KS at T=1e2/1e3/1e4: {}", rows.join(" ")),
    }
}

fn criterion_8() -> Verdict {
    let cfg = ExperimentConfig {
        dataset: data("heart_scale"),
        methods: Method::ALL.to_vec(),
        trials: 3,
        seed: SEED,
        ..ExperimentConfig::default()
    };
    let ds = Dataset::load(&cfg.dataset).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = vec![];
    for d in &dirs {
        let summary = run_experiment_on(&cfg, &ds).unwrap();
        files = write_run(d.path(), &cfg, &summary).unwrap();
    }
    let mut compared = 0;
    let mut differing = vec![];
    for f in &files {
        let name = f.file_name().unwrap().to_str().unwrap().to_string();
        if name == "timings.csv" {
            continue;
        }
        let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
        compared += 1;
        if a != b {
            differing.push(name);
        }
    }
    Verdict {
        pass: differing.is_empty() && compared >= 3,
        detail: format!("{compared} files compared, differing [{}]", differing.join(", ")),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("closed-form gap identity", criterion_1),
        ("Monte Carlo variance ordering", criterion_2),
        ("Perceptron pool error rates", criterion_3),
        ("naive Bayes pool error rates", criterion_4),
        ("error bound holds", criterion_5),
        ("quadrature stability", criterion_6),
        ("normality trend", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        failed += usize::from(!v.pass);
        println!(
            "criterion {} {name}: {} ({:.1}s) {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {}/8 PASS", 8 - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
