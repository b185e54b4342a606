use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bayes_ensemble::harness::report::{self, TableFormat};
use bayes_ensemble::harness::{run_experiment, ExperimentConfig};
use bayes_ensemble::loss::LossVector;
use bayes_ensemble::verify::{self, Estimator, LossDistribution};

mod bound;

#[derive(Parser)]
#[command(name = "bayes-ensemble", version, about = "Online ensemble weights by Bayesian posterior updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a prequential experiment and write CSV outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated methods, overriding the file.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Extra `key=value` overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Tabulate mean error rates from one or more run directories.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Monte Carlo and plug-in checks; writes CSV to stdout or `--out`.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Variance,
    Bound,
    Normality,
    Gap,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    check: Check,
    /// `exponential:<mean>`, `bernoulli:<p>` or `uniform:<lo>:<hi>`.
    #[arg(long, default_value = "exponential:2")]
    dist: String,
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    /// Stream length (variance, gap).
    #[arg(long, default_value_t = 10_000)]
    t: usize,
    #[arg(long, default_value_t = 500)]
    replications: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// SGD step constants as multiples of the optimal one (variance).
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
    gamma_multiples: Vec<f64>,
    /// SGD step offset: the step is gamma / (t + offset).
    #[arg(long, default_value_t = 100)]
    sgd_offset: u64,
    /// Stream lengths (normality).
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    ts: Vec<usize>,
    /// Posterior draws per stream length (normality).
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
    /// Independent seeds, starting at `--seed` (normality).
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Experiment config supplying dataset and pool (bound).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Bound exponents (bound).
    #[arg(long, value_delimiter = ',', default_value = "1.5,2,4")]
    p: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn load_config(path: &Path) -> AnyResult<ExperimentConfig> {
    ExperimentConfig::from_file(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn run(cmd: Command) -> AnyResult<()> {
    match cmd {
        Command::Run {
            config,
            method,
            trials,
            seed,
            dataset,
            set,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(m) = method {
                cfg.set("methods", &m)?;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = dataset {
                cfg.dataset = d;
            }
            for kv in &set {
                let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
                cfg.set(k, v)?;
            }
            let summary = run_experiment(&cfg).map_err(|e| format!("{}: {e}", cfg.dataset.display()))?;
            report::write_run(&out, &cfg, &summary)?;
            print!("{}", report::summary_csv(std::slice::from_ref(&summary)));
            Ok(())
        }
        Command::Report { input, format } => {
            let format: TableFormat = format.parse()?;
            let rows = report::collect_trials(&input)?;
            print!("{}", report::render_table(&rows, format));
            Ok(())
        }
        Command::Verify(args) => {
            let csv = verify_csv(&args)?;
            match &args.out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn verify_csv(a: &VerifyArgs) -> AnyResult<String> {
    let dist: LossDistribution = a.dist.parse()?;
    let mut out = String::new();
    match a.check {
        Check::Variance => {
            out.push_str("estimator,gamma_multiple,t,replications,empirical,predicted,half_width,slow_regime\n");
            let bayes = Estimator::Bayes {
                alpha0: a.alpha0,
                beta0: a.beta0,
            };
            let mut rows = vec![(f64::NAN, bayes)];
            let opt = verify::optimal_gamma_tilde(&dist);
            for &k in &a.gamma_multiples {
                rows.push((
                    k,
                    Estimator::Sgd {
                        gamma_tilde: k * opt,
                        lambda0: a.alpha0 / a.beta0,
                        offset: a.sgd_offset,
                    },
                ));
            }
            for (k, est) in rows {
                let r = verify::mc_variance(&dist, a.theta, &est, a.t, a.replications, a.seed)?;
                let mult = if k.is_nan() { String::new() } else { k.to_string() };
                let pred = r.predicted.map(|v| format!("{v:.6}")).unwrap_or_default();
                out.push_str(&format!(
                    "{},{mult},{},{},{:.6},{pred},{:.6},{}\n",
                    r.estimator, r.t, r.replications, r.empirical, r.half_width, r.slow_regime
                ));
            }
        }
        Check::Normality => {
            out.push_str("seed,t,samples,ks_distance,mean,variance\n");
            for s in a.seed..a.seed + a.seeds {
                for &t in &a.ts {
                    let r = verify::check_normality(&dist, a.theta, a.alpha0, a.beta0, t, a.samples, s, 0)?;
                    out.push_str(&format!(
                        "{s},{t},{},{:.6},{:.6},{:.6}\n",
                        r.samples, r.ks_distance, r.mean, r.variance
                    ));
                }
            }
        }
        Check::Gap => {
            out.push_str("t,gap,gap_sqrt_t\n");
            let history: Vec<LossVector> = verify::SyntheticStream::new(dist, a.seed, 0, a.t)
                .map(|g| LossVector::new(vec![g]))
                .collect::<Result<_, _>>()?;
            for p in verify::check_gap(&history, a.alpha0, a.beta0, a.theta)? {
                out.push_str(&format!("{},{:e},{:e}\n", p.t, p.gap[0], p.scaled[0]));
            }
        }
        Check::Bound => {
            let mut cfg = match &a.config {
                Some(p) => load_config(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(d) = &a.dataset {
                cfg.dataset = d.clone();
            }
            cfg.theta = a.theta;
            out.push_str(&bound::bound_csv(&cfg, &a.p)?);
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
