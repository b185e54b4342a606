//! Online weak learners over random feature subsets.

use std::fmt::Write as _;

use crate::data::{Dataset, Sample};
use crate::rng::{SplitMix64, Stream};
use crate::{Error, Label, Result};

/// Sorted, non-empty set of 1-based feature indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSubset {
    indices: Vec<u32>,
}

impl FeatureSubset {
    pub fn new(mut indices: Vec<u32>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() || indices[0] == 0 {
            return Err(Error::domain("feature subset must be non-empty and 1-based"));
        }
        Ok(FeatureSubset { indices })
    }

    pub fn all(dimension: u32) -> Result<Self> {
        FeatureSubset::new((1..=dimension).collect())
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Walk the subset in order, handing each position its value in `sample`
    /// (0 for absent features).
    fn for_each_value(&self, sample: &Sample, mut f: impl FnMut(usize, f64)) {
        let feats = sample.features();
        let mut k = 0;
        for (pos, &idx) in self.indices.iter().enumerate() {
            while k < feats.len() && feats[k].0 < idx {
                k += 1;
            }
            let v = if k < feats.len() && feats[k].0 == idx { feats[k].1 } else { 0.0 };
            f(pos, v);
        }
    }

    /// Like `for_each_value` but skips absent (zero) features.
    fn for_each_present(&self, sample: &Sample, mut f: impl FnMut(usize, f64)) {
        let feats = sample.features();
        let (mut a, mut b) = (0, 0);
        while a < self.indices.len() && b < feats.len() {
            match self.indices[a].cmp(&feats[b].0) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    f(a, feats[b].1);
                    a += 1;
                    b += 1;
                }
            }
        }
    }
}

/// How learner feature subsets are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsetRule {
    /// Every feature of the dataset.
    All,
    /// Each feature kept independently with this probability; empty draws are
    /// redrawn up to `max_retries` times.
    Bernoulli { inclusion: f64, max_retries: u32 },
}

impl Default for SubsetRule {
    fn default() -> Self {
        SubsetRule::Bernoulli {
            inclusion: 0.5,
            max_retries: 1000,
        }
    }
}

impl SubsetRule {
    pub fn draw(&self, dimension: u32, rng: &mut SplitMix64) -> Result<FeatureSubset> {
        match *self {
            SubsetRule::All => FeatureSubset::all(dimension),
            SubsetRule::Bernoulli { inclusion, max_retries } => {
                for _ in 0..=max_retries {
                    let picked: Vec<u32> = (1..=dimension).filter(|_| rng.bernoulli(inclusion)).collect();
                    if !picked.is_empty() {
                        return FeatureSubset::new(picked);
                    }
                }
                Err(Error::config(format!(
                    "feature subset still empty after {max_retries} redraws (dimension {dimension}, p={inclusion})"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Perceptron,
    NaiveBayes,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perceptron" => Ok(LearnerKind::Perceptron),
            "naive_bayes" | "nb" => Ok(LearnerKind::NaiveBayes),
            _ => Err(Error::config(format!("unknown learner kind `{s}`"))),
        }
    }
}

/// Mistake-driven perceptron: `w += rate * y * x`, `b += rate * y` on errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Perceptron {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub learning_rate: f64,
}

impl Perceptron {
    pub fn new(width: usize, learning_rate: f64) -> Self {
        Perceptron {
            weights: vec![0.0; width],
            bias: 0.0,
            learning_rate,
        }
    }
}

/// Gaussian naive Bayes with per-class Welford moments.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// Indexed `[neg, pos]`.
    pub counts: [u64; 2],
    pub means: [Vec<f64>; 2],
    pub m2: [Vec<f64>; 2],
    pub variance_floor: f64,
}

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-9;

impl GaussianNb {
    pub fn new(width: usize, variance_floor: f64) -> Self {
        GaussianNb {
            counts: [0, 0],
            means: [vec![0.0; width], vec![0.0; width]],
            m2: [vec![0.0; width], vec![0.0; width]],
            variance_floor,
        }
    }

    /// Population variance of feature `j` in class `c`, floored.
    pub fn variance(&self, c: usize, j: usize) -> f64 {
        let n = self.counts[c];
        if n == 0 {
            return self.variance_floor;
        }
        (self.m2[c][j] / n as f64).max(self.variance_floor)
    }
}

fn class_slot(label: Label) -> usize {
    match label {
        Label::Neg => 0,
        Label::Pos => 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnerState {
    Perceptron(Perceptron),
    NaiveBayes(GaussianNb),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakLearner {
    pub subset: FeatureSubset,
    pub state: LearnerState,
}

impl WeakLearner {
    pub fn new(kind: LearnerKind, subset: FeatureSubset) -> Self {
        let width = subset.len();
        let state = match kind {
            LearnerKind::Perceptron => LearnerState::Perceptron(Perceptron::new(width, 1.0)),
            LearnerKind::NaiveBayes => LearnerState::NaiveBayes(GaussianNb::new(width, DEFAULT_VARIANCE_FLOOR)),
        };
        WeakLearner { subset, state }
    }

    pub fn kind(&self) -> LearnerKind {
        match self.state {
            LearnerState::Perceptron(_) => LearnerKind::Perceptron,
            LearnerState::NaiveBayes(_) => LearnerKind::NaiveBayes,
        }
    }

    /// Perceptron: `w . x + b`. Naive Bayes: `log P(+1|x) - log P(-1|x)`,
    /// 0 until both classes have been seen apart from the class-prior term.
    pub fn score(&self, sample: &Sample) -> f64 {
        match &self.state {
            LearnerState::Perceptron(p) => {
                let mut s = p.bias;
                self.subset.for_each_present(sample, |j, v| s += p.weights[j] * v);
                s
            }
            LearnerState::NaiveBayes(nb) => {
                // Laplace add-one on class counts.
                let prior = ((nb.counts[1] + 1) as f64).ln() - ((nb.counts[0] + 1) as f64).ln();
                if nb.counts[0] == 0 || nb.counts[1] == 0 {
                    return prior;
                }
                let mut s = prior;
                self.subset.for_each_value(sample, |j, x| {
                    let (vn, vp) = (nb.variance(0, j), nb.variance(1, j));
                    let dn = x - nb.means[0][j];
                    let dp = x - nb.means[1][j];
                    s += 0.5 * (vn / vp).ln() + dn * dn / (2.0 * vn) - dp * dp / (2.0 * vp);
                });
                s
            }
        }
    }

    pub fn predict(&self, sample: &Sample) -> Label {
        Label::from_score(self.score(sample))
    }

    pub fn update(&mut self, sample: &Sample) {
        let y = sample.label;
        match &mut self.state {
            LearnerState::Perceptron(p) => {
                let mut s = p.bias;
                self.subset.for_each_present(sample, |j, v| s += p.weights[j] * v);
                if Label::from_score(s) != y {
                    let step = p.learning_rate * y.sign();
                    let w = &mut p.weights;
                    self.subset.for_each_present(sample, |j, v| w[j] += step * v);
                    p.bias += step;
                }
            }
            LearnerState::NaiveBayes(nb) => {
                let c = class_slot(y);
                nb.counts[c] += 1;
                let n = nb.counts[c] as f64;
                let (means, m2) = (&mut nb.means[c], &mut nb.m2[c]);
                self.subset.for_each_value(sample, |j, x| {
                    let delta = x - means[j];
                    means[j] += delta / n;
                    m2[j] += delta * (x - means[j]);
                });
            }
        }
    }
}

/// Pool construction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolSpec {
    pub size: usize,
    pub kind: LearnerKind,
    pub rule: SubsetRule,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakPool {
    learners: Vec<WeakLearner>,
    frozen: bool,
}

impl WeakPool {
    pub fn from_learners(learners: Vec<WeakLearner>, frozen: bool) -> Result<Self> {
        if learners.is_empty() {
            return Err(Error::config("pool needs at least one learner"));
        }
        Ok(WeakPool { learners, frozen })
    }

    pub fn learners(&self) -> &[WeakLearner] {
        &self.learners
    }

    pub fn len(&self) -> usize {
        self.learners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learners.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn scores_into(&self, sample: &Sample, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.learners.iter().map(|l| l.score(sample)));
    }

    pub fn scores(&self, sample: &Sample) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        self.scores_into(sample, &mut v);
        v
    }

    /// Online update of every learner; frozen pools are left untouched.
    pub fn learn(&mut self, sample: &Sample) {
        if self.frozen {
            return;
        }
        for l in &mut self.learners {
            l.update(sample);
        }
    }

    /// Text snapshot, one block per learner:
    ///
    /// ```text
    /// pool <m> frozen=<true|false>
    /// learner <k> perceptron|naive_bayes
    /// subset <i1> <i2> ...
    /// weights <w...>        | counts <n_neg> <n_pos>
    /// bias <b>              | mean_neg <...>
    /// rate <eta>            | m2_neg <...>
    ///                       | mean_pos <...>
    ///                       | m2_pos <...>
    ///                       | floor <v>
    /// end
    /// ```
    ///
    /// Floats are written in shortest round-trip form.
    pub fn to_snapshot(&self) -> String {
        let mut out = format!("pool {} frozen={}\n", self.len(), self.frozen);
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        for (k, l) in self.learners.iter().enumerate() {
            let idx: Vec<String> = l.subset.indices().iter().map(u32::to_string).collect();
            match &l.state {
                LearnerState::Perceptron(p) => {
                    let _ = write!(
                        out,
                        "learner {k} perceptron\nsubset {}\nweights {}\nbias {:?}\nrate {:?}\nend\n",
                        idx.join(" "),
                        join(&p.weights),
                        p.bias,
                        p.learning_rate
                    );
                }
                LearnerState::NaiveBayes(nb) => {
                    let _ = write!(
                        out,
                        "learner {k} naive_bayes\nsubset {}\ncounts {} {}\nmean_neg {}\nm2_neg {}\nmean_pos {}\nm2_pos {}\nfloor {:?}\nend\n",
                        idx.join(" "),
                        nb.counts[0],
                        nb.counts[1],
                        join(&nb.means[0]),
                        join(&nb.m2[0]),
                        join(&nb.means[1]),
                        join(&nb.m2[1]),
                        nb.variance_floor
                    );
                }
            }
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let perr = |line: usize, message: &str| Error::Parse {
            line: line + 1,
            message: message.to_string(),
        };
        let (n0, header) = lines.next().ok_or(Error::EmptyDataset)?;
        let mut head = header.split_whitespace();
        if head.next() != Some("pool") {
            return Err(perr(n0, "expected `pool` header"));
        }
        let m: usize = head
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| perr(n0, "bad pool size"))?;
        let frozen = match head.next() {
            Some("frozen=true") => true,
            Some("frozen=false") => false,
            _ => return Err(perr(n0, "bad frozen flag")),
        };

        let mut field = |key: &str| -> Result<(usize, Vec<String>)> {
            let (n, line) = lines.next().ok_or_else(|| perr(0, "truncated snapshot"))?;
            let mut toks = line.split_whitespace();
            if toks.next() != Some(key) {
                return Err(perr(n, &format!("expected `{key}`")));
            }
            Ok((n, toks.map(str::to_string).collect()))
        };
        fn nums<T: std::str::FromStr>(n: usize, toks: &[String]) -> Result<Vec<T>> {
            toks.iter()
                .map(|t| {
                    t.parse().map_err(|_| Error::Parse {
                        line: n + 1,
                        message: format!("bad number `{t}`"),
                    })
                })
                .collect()
        }

        let mut learners = Vec::with_capacity(m);
        for _ in 0..m {
            let (n, head) = field("learner")?;
            let kind = head.get(1).map(String::as_str);
            let (sn, sub) = field("subset")?;
            let subset = FeatureSubset::new(nums(sn, &sub)?)?;
            let width = subset.len();
            let check = |n: usize, v: &Vec<f64>| {
                if v.len() == width { Ok(()) } else { Err(perr(n, "vector width does not match subset")) }
            };
            let state = match kind {
                Some("perceptron") => {
                    let (wn, w) = field("weights")?;
                    let weights: Vec<f64> = nums(wn, &w)?;
                    check(wn, &weights)?;
                    let (bn, b) = field("bias")?;
                    let (rn, r) = field("rate")?;
                    LearnerState::Perceptron(Perceptron {
                        weights,
                        bias: *nums::<f64>(bn, &b)?.first().ok_or_else(|| perr(bn, "missing bias"))?,
                        learning_rate: *nums::<f64>(rn, &r)?.first().ok_or_else(|| perr(rn, "missing rate"))?,
                    })
                }
                Some("naive_bayes") => {
                    let (cn, c) = field("counts")?;
                    let counts: Vec<u64> = nums(cn, &c)?;
                    if counts.len() != 2 {
                        return Err(perr(cn, "expected two counts"));
                    }
                    let mut vecs = Vec::new();
                    for key in ["mean_neg", "m2_neg", "mean_pos", "m2_pos"] {
                        let (vn, v) = field(key)?;
                        let v: Vec<f64> = nums(vn, &v)?;
                        check(vn, &v)?;
                        vecs.push(v);
                    }
                    let (fn_, f) = field("floor")?;
                    let floor = *nums::<f64>(fn_, &f)?.first().ok_or_else(|| perr(fn_, "missing floor"))?;
                    let m2_pos = vecs.pop().unwrap();
                    let mean_pos = vecs.pop().unwrap();
                    let m2_neg = vecs.pop().unwrap();
                    let mean_neg = vecs.pop().unwrap();
                    LearnerState::NaiveBayes(GaussianNb {
                        counts: [counts[0], counts[1]],
                        means: [mean_neg, mean_pos],
                        m2: [m2_neg, m2_pos],
                        variance_floor: floor,
                    })
                }
                _ => return Err(perr(n, "unknown learner kind")),
            };
            field("end")?;
            learners.push(WeakLearner { subset, state });
        }
        WeakPool::from_learners(learners, frozen)
    }
}

/// Draw `spec.size` learners over random subsets of `1..=dimension` and give
/// each one ordered pass over `train`.
///
/// Randomness comes from the `(seed, Pool, stream)` SplitMix64 stream.
pub fn build_pool(train: &[Sample], dimension: u32, spec: &PoolSpec, seed: u64, stream: u64) -> Result<WeakPool> {
    if spec.size == 0 {
        return Err(Error::config("pool size must be at least 1"));
    }
    if train.is_empty() && spec.frozen {
        return Err(Error::config("a frozen pool needs training data"));
    }
    let mut rng = SplitMix64::derive(seed, Stream::Pool, stream);
    let mut learners = Vec::with_capacity(spec.size);
    for _ in 0..spec.size {
        let subset = spec.rule.draw(dimension, &mut rng)?;
        let mut l = WeakLearner::new(spec.kind, subset);
        for s in train {
            l.update(s);
        }
        learners.push(l);
    }
    WeakPool::from_learners(learners, spec.frozen)
}

/// Single learner on every feature, trained by one pass over `train`.
pub fn build_single(train: &Dataset, dimension: u32, kind: LearnerKind) -> Result<WeakLearner> {
    let mut l = WeakLearner::new(kind, FeatureSubset::all(dimension)?);
    for s in train.samples() {
        l.update(s);
    }
    Ok(l)
}
