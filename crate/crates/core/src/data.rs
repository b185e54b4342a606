//! LIBSVM-format datasets, train/eval splits and seeded stream orderings.
//!
//! Grammar, one record per line: `<label> (<index>:<value>)*`, tokens
//! separated by whitespace, `#` starts a comment running to end of line,
//! blank lines are skipped. Labels `+1`/`1` are positive, `-1`/`0`/`2` are
//! negative; indices are 1-based and strictly increasing within a line.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::rng::{SplitMix64, Stream};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: Label,
    /// `(index, value)` pairs, indices 1-based and strictly increasing.
    features: Vec<(u32, f64)>,
}

impl Sample {
    pub fn new(label: Label, features: Vec<(u32, f64)>) -> Result<Self> {
        let mut prev = 0u32;
        for &(idx, v) in &features {
            if idx == 0 || idx <= prev {
                return Err(Error::domain(format!(
                    "feature index {idx} not strictly increasing from {prev}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::domain(format!("feature {idx} is not finite")));
            }
            prev = idx;
        }
        Ok(Sample { label, features })
    }

    pub fn features(&self) -> &[(u32, f64)] {
        &self.features
    }

    /// Largest feature index present (0 when there are no features).
    pub fn max_index(&self) -> u32 {
        self.features.last().map_or(0, |&(i, _)| i)
    }

    /// Value of feature `index` (1-based); absent features are 0.
    pub fn get(&self, index: u32) -> f64 {
        self.features
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |k| self.features[k].1)
    }

    /// Gather the values at the sorted `indices`, 0 for absent features.
    pub fn gather(&self, indices: &[u32], out: &mut Vec<f64>) {
        out.clear();
        let mut k = 0;
        for &idx in indices {
            while k < self.features.len() && self.features[k].0 < idx {
                k += 1;
            }
            if k < self.features.len() && self.features[k].0 == idx {
                out.push(self.features[k].1);
            } else {
                out.push(0.0);
            }
        }
    }

    pub fn with_label(&self, label: Label) -> Sample {
        Sample {
            label,
            features: self.features.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    samples: Vec<Sample>,
    dimension: u32,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dimension = samples.iter().map(Sample::max_index).max().unwrap_or(0);
        Ok(Dataset {
            name: name.into(),
            samples,
            dimension,
        })
    }

    /// Same as [`Dataset::new`] but keeps a caller-supplied dimension (used
    /// by splits so both halves share the parent's feature space).
    fn with_dimension(name: String, samples: Vec<Sample>, dimension: u32) -> Self {
        Dataset {
            name,
            samples,
            dimension,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        parse_libsvm(std::io::BufReader::new(file), name)
    }

    /// Canonical LIBSVM text: `+1`/`-1` labels, shortest round-trip floats.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(if s.label == Label::Pos { "+1" } else { "-1" });
            for &(i, v) in &s.features {
                let _ = write!(out, " {i}:{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

fn parse_label(tok: &str) -> Option<Label> {
    let v: f64 = tok.parse().ok()?;
    if v == 1.0 {
        Some(Label::Pos)
    } else if v == -1.0 || v == 0.0 || v == 2.0 {
        Some(Label::Neg)
    } else {
        None
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<Sample>> {
    let body = line.split('#').next().unwrap_or("");
    let mut toks = body.split_whitespace();
    let Some(first) = toks.next() else {
        return Ok(None);
    };
    let err = |message: String| Error::Parse {
        line: lineno,
        message,
    };
    let label = parse_label(first).ok_or_else(|| err(format!("bad label `{first}`")))?;
    let mut features = Vec::new();
    let mut prev = 0u32;
    for tok in toks {
        let (i, v) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected index:value, got `{tok}`")))?;
        let idx: u32 = i
            .parse()
            .map_err(|_| err(format!("bad feature index `{i}`")))?;
        let val: f64 = v
            .parse()
            .map_err(|_| err(format!("bad feature value `{v}`")))?;
        if idx == 0 {
            return Err(err("feature indices are 1-based".into()));
        }
        if idx == prev {
            return Err(err(format!("duplicate feature index {idx}")));
        }
        if idx < prev {
            return Err(err(format!("feature index {idx} follows {prev}")));
        }
        if !val.is_finite() {
            return Err(err(format!("non-finite value for feature {idx}")));
        }
        features.push((idx, val));
        prev = idx;
    }
    Ok(Some(Sample { label, features }))
}

/// Parse a whole LIBSVM stream.
pub fn parse_libsvm<R: BufRead>(reader: R, name: impl Into<String>) -> Result<Dataset> {
    let mut samples = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(s) = parse_line(&line, k + 1)? {
            samples.push(s);
        }
    }
    Dataset::new(name, samples)
}

pub fn parse_libsvm_str(text: &str, name: impl Into<String>) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), name)
}

/// How each trial partitions a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub seed: u64,
    pub trial_count: usize,
}

impl SplitPlan {
    pub fn new(train_fraction: f64, seed: u64, trial_count: usize) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction <= 0.1) {
            return Err(Error::config(format!(
                "train_fraction must lie in (0, 0.1], got {train_fraction}"
            )));
        }
        if trial_count == 0 {
            return Err(Error::config("trial_count must be at least 1"));
        }
        Ok(SplitPlan {
            train_fraction,
            seed,
            trial_count,
        })
    }

    pub fn train_size(&self, n: usize) -> usize {
        (self.train_fraction * n as f64).floor() as usize
    }
}

/// Indices of the train and eval halves, both in shuffled order (files are
/// often sorted by class, and pretraining is a single ordered pass).
pub fn split_indices(n: usize, plan: &SplitPlan, trial_index: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if trial_index >= plan.trial_count {
        return Err(Error::config(format!(
            "trial {trial_index} outside 0..{}",
            plan.trial_count
        )));
    }
    let n_train = plan.train_size(n);
    if n_train == 0 {
        return Err(Error::config(format!(
            "train fraction {} of {n} samples leaves an empty training split",
            plan.train_fraction
        )));
    }
    let mut rng = SplitMix64::derive(plan.seed, Stream::Split, trial_index as u64);
    let perm = rng.permutation(n);
    Ok((perm[..n_train].to_vec(), perm[n_train..].to_vec()))
}

/// Unstratified uniform split; `|train| = floor(train_fraction * N)`.
pub fn split(dataset: &Dataset, plan: &SplitPlan, trial_index: usize) -> Result<(Dataset, Dataset)> {
    let (train, eval) = split_indices(dataset.len(), plan, trial_index)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset.samples[i].clone()).collect();
    Ok((
        Dataset::with_dimension(format!("{}-train", dataset.name), pick(&train), dataset.dimension),
        Dataset::with_dimension(format!("{}-eval", dataset.name), pick(&eval), dataset.dimension),
    ))
}

/// Presentation order of the eval stream for one trial.
pub fn ordering(n: usize, seed: u64, trial_index: usize) -> Vec<usize> {
    SplitMix64::derive(seed, Stream::Ordering, trial_index as u64).permutation(n)
}
