//! CSV outputs of a run and the cross-run summary table.
//!
//! A run directory holds:
//!
//! - `trials.csv`: `dataset,method,trial,seed,steps,mistakes,error_rate`
//! - `summary.csv`: `dataset,method,trials,mean_error,std_error`
//! - `curve_<dataset>_<method>.csv`: `step,trial_0,...,trial_k,mean`, the
//!   cumulative error rate after each step
//! - `timings.csv`: `dataset,trial,wall_ms` (the only non-deterministic file)
//! - `config.txt`: the effective configuration

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Method};
use super::runner::{ExperimentSummary, TrialRecord};
use crate::{Error, Result};

/// Rates are written with this many decimals everywhere.
const DECIMALS: usize = 6;

fn rate(v: f64) -> String {
    format!("{v:.DECIMALS$}")
}

pub fn trials_csv(summaries: &[ExperimentSummary]) -> String {
    let mut out = String::from("dataset,method,trial,seed,steps,mistakes,error_rate\n");
    for s in summaries {
        for m in &s.methods {
            for r in &m.records {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.dataset,
                    r.method,
                    r.trial,
                    r.seed,
                    r.steps(),
                    r.mistakes(),
                    rate(r.error_rate())
                );
            }
        }
    }
    out
}

pub fn summary_csv(summaries: &[ExperimentSummary]) -> String {
    let mut out = String::from("dataset,method,trials,mean_error,std_error\n");
    for s in summaries {
        for m in &s.methods {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.dataset,
                m.method,
                m.records.len(),
                rate(m.mean_error),
                rate(m.std_error())
            );
        }
    }
    out
}

/// Per-trial and mean cumulative error curves; all records must share a length.
pub fn curve_csv(records: &[TrialRecord]) -> Result<String> {
    let n = records.first().map_or(0, TrialRecord::steps);
    if records.iter().any(|r| r.steps() != n) {
        return Err(Error::domain("curve records have different lengths"));
    }
    let mut out = String::from("step");
    for r in records {
        let _ = write!(out, ",trial_{}", r.trial);
    }
    out.push_str(",mean\n");
    for k in 0..n {
        let _ = write!(out, "{}", k + 1);
        let mut sum = 0.0;
        for r in records {
            let v = r.cumulative_errors[k] as f64 / (k + 1) as f64;
            sum += v;
            let _ = write!(out, ",{}", rate(v));
        }
        let _ = writeln!(out, ",{}", rate(sum / records.len() as f64));
    }
    Ok(out)
}

pub fn curve_file_name(dataset: &str, method: Method) -> String {
    format!("curve_{dataset}_{method}.csv")
}

/// Write every run artefact for `summary` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, summary: &ExperimentSummary) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    let all = std::slice::from_ref(summary);
    put("trials.csv".into(), trials_csv(all))?;
    put("summary.csv".into(), summary_csv(all))?;
    for m in &summary.methods {
        put(curve_file_name(&summary.dataset, m.method), curve_csv(&m.records)?)?;
    }
    let mut timings = String::from("dataset,trial,wall_ms\n");
    if let Some(m) = summary.methods.first() {
        for r in &m.records {
            let _ = writeln!(timings, "{},{},{:.3}", r.dataset, r.trial, r.wall_time.as_secs_f64() * 1e3);
        }
    }
    put("timings.csv".into(), timings)?;
    put("config.txt".into(), cfg.to_text())?;
    Ok(written)
}

/// One row of a `trials.csv` file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub dataset: String,
    pub method: String,
    pub trial: usize,
    pub error_rate: f64,
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRow>> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h.trim()).unwrap_or("");
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let (cd, cm, ct, ce) = (find("dataset")?, find("method")?, find("trial")?, find("error_rate")?);
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| Error::Parse {
            line: n + 1,
            message: format!("bad {what}"),
        };
        if f.len() != cols.len() {
            return Err(bad("field count"));
        }
        rows.push(TrialRow {
            dataset: f[cd].to_string(),
            method: f[cm].to_string(),
            trial: f[ct].parse().map_err(|_| bad("trial"))?,
            error_rate: f[ce].parse().map_err(|_| bad("error_rate"))?,
        });
    }
    Ok(rows)
}

/// Rows from `dir/trials.csv` and `dir/*/trials.csv`.
pub fn collect_trials(dir: &Path) -> Result<Vec<TrialRow>> {
    let mut files = Vec::new();
    let top = dir.join("trials.csv");
    if top.is_file() {
        files.push(top);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        let f = d.join("trials.csv");
        if f.is_file() {
            files.push(f);
        }
    }
    if files.is_empty() {
        return Err(Error::config(format!("no trials.csv under {}", dir.display())));
    }
    let mut rows = Vec::new();
    for f in files {
        rows.extend(parse_trials_csv(&fs::read_to_string(&f)?)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            _ => Err(Error::config(format!("unknown table format `{s}`"))),
        }
    }
}

/// Dataset-by-method table of mean error rates over trials.
pub fn render_table(rows: &[TrialRow], format: TableFormat) -> String {
    let mut cells: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    let mut datasets: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        let e = cells.entry((&r.dataset, &r.method)).or_insert((0.0, 0));
        e.0 += r.error_rate;
        e.1 += 1;
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    // Known methods in their canonical order, unknown ones after.
    let order = |m: &str| Method::ALL.iter().position(|k| k.as_str() == m).unwrap_or(Method::ALL.len());
    methods.sort_by_key(|m| order(m));
    datasets.sort();
    let cell = |d: &str, m: &str| {
        cells
            .get(&(d, m))
            .map(|(s, n)| format!("{:.3}", s / *n as f64))
            .unwrap_or_else(|| "-".into())
    };
    let mut grid: Vec<Vec<String>> = vec![std::iter::once("dataset".to_string())
        .chain(methods.iter().map(|m| m.to_string()))
        .collect()];
    for d in &datasets {
        grid.push(
            std::iter::once(d.to_string())
                .chain(methods.iter().map(|m| cell(d, m)))
                .collect(),
        );
    }
    match format {
        TableFormat::Csv => grid.iter().map(|r| r.join(",") + "\n").collect(),
        TableFormat::Markdown => {
            let widths: Vec<usize> = (0..grid[0].len())
                .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0).max(3))
                .collect();
            let line = |r: &[String]| {
                let padded: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
                format!("| {} |\n", padded.join(" | "))
            };
            let mut out = line(&grid[0]);
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
            for r in &grid[1..] {
                out.push_str(&line(r));
            }
            out
        }
    }
}
