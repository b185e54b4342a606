use bayes_ensemble::data::Dataset;
use bayes_ensemble::harness::runner::prepare_trial;
use bayes_ensemble::harness::ExperimentConfig;
use bayes_ensemble::verify::{check_bound, true_and_flipped_losses};
use bayes_ensemble::Result;

/// One row per trial and exponent. Means are taken over the trial's own
/// eval stream, which is also where the error is measured.
pub fn bound_csv(cfg: &ExperimentConfig, ps: &[f64]) -> Result<String> {
    cfg.validate()?;
    let data = Dataset::load(&cfg.dataset)?;
    let mut out = String::from("dataset,trial,p,error,bound,slack,excluded,moments\n");
    for trial in 0..cfg.trials {
        let (pool, _, stream) = prepare_trial(cfg, &data, trial)?;
        let losses = true_and_flipped_losses(&pool, &stream, cfg.base_loss, cfg.binary_scores);
        let labels: Vec<_> = stream.iter().map(|s| s.label).collect();
        for &p in ps {
            let r = check_bound(&losses, &labels, cfg.theta, p)?;
            out.push_str(&format!(
                "{},{trial},{p},{:.6},{:.6},{:.6},{},plug_in_eval\n",
                data.name,
                r.error,
                r.bound,
                r.slack(),
                r.excluded.len()
            ));
        }
    }
    Ok(out)
}
