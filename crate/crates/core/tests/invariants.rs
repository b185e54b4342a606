use bayes_ensemble::baselines::{SagState, SgdState, LAMBDA_MIN};
use bayes_ensemble::bayes::{predict, GammaPosterior, ShapePosterior};
use bayes_ensemble::loss::{basic_minimizer, BaseLoss, CumulativeLoss, LossVector, LOSS_FLOOR};
use bayes_ensemble::Label;
use proptest::prelude::*;

fn history(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..5.0, m), 0..60)
}

fn lv(g: &[f64]) -> LossVector {
    LossVector::new(g.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn posterior_mean_is_positive_and_order_free(h in history(3), alpha0 in 0.1f64..5.0, beta0 in 0.01f64..5.0, theta in 0.01f64..2.0) {
        let mut fwd = GammaPosterior::new(3, alpha0, beta0, theta).unwrap();
        let mut rev = fwd.clone();
        h.iter().for_each(|g| fwd.update(&lv(g)).unwrap());
        h.iter().rev().for_each(|g| rev.update(&lv(g)).unwrap());
        let (a, b) = (fwd.posterior_mean().lambda, rev.posterior_mean().lambda);
        for i in 0..3 {
            prop_assert!(a[i] > 0.0 && a[i].is_finite());
            prop_assert!((a[i] - b[i]).abs() <= 1e-12 * a[i].max(1.0));
        }
    }

    #[test]
    fn mean_exceeds_minimizer_by_exactly_one_over_rate(h in history(2), alpha0 in 1.0f64..5.0, beta0 in 0.1f64..5.0, theta in 0.01f64..2.0) {
        let mut post = GammaPosterior::new(2, alpha0, beta0, theta).unwrap();
        h.iter().for_each(|g| post.update(&lv(g)).unwrap());
        let mean = post.posterior_mean().lambda;
        let argmin = basic_minimizer(alpha0, beta0, theta, post.t(), post.loss_sums());
        for i in 0..2 {
            let rate = beta0 + theta * post.loss_sums()[i];
            prop_assert!((mean[i] - argmin[i] - 1.0 / rate).abs() < 1e-12);
        }
    }

    #[test]
    fn minimizer_beats_neighbours(h in history(1), alpha0 in 1.5f64..5.0, beta0 in 0.1f64..5.0, theta in 0.05f64..1.0) {
        let mut post = GammaPosterior::new(1, alpha0, beta0, theta).unwrap();
        h.iter().for_each(|g| post.update(&lv(g)).unwrap());
        let star = basic_minimizer(alpha0, beta0, theta, post.t(), post.loss_sums())[0];
        let hist: Vec<LossVector> = h.iter().map(|g| lv(g)).collect();
        let f = CumulativeLoss::Basic { theta, alpha0, beta0 };
        let at = f.eval(&[star], &hist).unwrap();
        for scale in [0.9, 0.99, 1.01, 1.1] {
            prop_assert!(f.eval(&[star * scale], &hist).unwrap() >= at - 1e-9 * at.abs().max(1.0));
        }
    }

    #[test]
    fn snapshot_round_trips(h in history(2)) {
        let mut post = GammaPosterior::new(2, 1.0, 1.0, 0.1).unwrap();
        h.iter().for_each(|g| post.update(&lv(g)).unwrap());
        let back = GammaPosterior::from_snapshot(&post.to_snapshot()).unwrap();
        prop_assert_eq!(back, post);
    }

    #[test]
    fn losses_are_nonnegative(score in -50.0f64..50.0, pos in any::<bool>()) {
        let label = if pos { Label::Pos } else { Label::Neg };
        for kind in [BaseLoss::Ramp, BaseLoss::Logistic, BaseLoss::Hinge, BaseLoss::ZeroOne] {
            let v = kind.value(score, label);
            prop_assert!(v >= 0.0 && v.is_finite(), "{:?} {}", kind, v);
        }
    }

    #[test]
    fn loss_vector_rejects_negative_or_nan(bad in prop_oneof![Just(f64::NAN), Just(f64::INFINITY), -10.0f64..-1e-9]) {
        prop_assert!(LossVector::new(vec![1.0, bad]).is_err());
    }

    #[test]
    fn sgd_never_drops_below_floor(h in history(2), gamma in 0.01f64..1e4, theta in 0.01f64..2.0) {
        let mut sgd = SgdState::new(2, 1.0, gamma, theta).unwrap();
        for g in &h {
            sgd.step(&lv(g)).unwrap();
            prop_assert!(sgd.lambda.iter().all(|&l| l >= LAMBDA_MIN && l.is_finite()));
        }
    }

    #[test]
    fn sag_sum_tracks_memory(h in prop::collection::vec((prop::collection::vec(0.0f64..3.0, 2), 0usize..8), 1..80)) {
        let mut sag = SagState::new(2, 8, 1.0, 0.1, 1.0).unwrap();
        for (g, idx) in &h {
            sag.step(&lv(g), *idx).unwrap();
            for i in 0..2 {
                let total: f64 = (0..8).map(|k| sag.memory(k).unwrap()[i]).sum();
                prop_assert!((total - sag.gradient_sum()[i]).abs() < 1e-9 * total.abs().max(1.0));
            }
        }
    }

    #[test]
    fn prediction_flips_with_swapped_losses(lambda in prop::collection::vec(0.01f64..10.0, 4), gp in prop::collection::vec(0.0f64..2.0, 4), gn in prop::collection::vec(0.0f64..2.0, 4)) {
        let a = predict(&lambda, &gp, &gn);
        let b = predict(&lambda, &gn, &gp);
        let dp: f64 = lambda.iter().zip(&gp).map(|(l, g)| l * g).sum();
        let dn: f64 = lambda.iter().zip(&gn).map(|(l, g)| l * g).sum();
        if dp != dn {
            prop_assert_eq!(a, b.flip());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shape_mean_is_positive_and_deterministic(h in prop::collection::vec(LOSS_FLOOR..4.0f64, 0..40), theta in 0.05f64..1.0) {
        let mut post = ShapePosterior::new(1, 1.0, 1.0, 1.0, theta).unwrap();
        h.iter().for_each(|&g| post.update(&lv(&[g])).unwrap());
        let a = post.posterior_mean().unwrap().lambda[0];
        let b = post.clone().posterior_mean().unwrap().lambda[0];
        prop_assert!(a > 0.0 && a.is_finite());
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}
