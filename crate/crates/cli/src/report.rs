//! Per-trial metric rows, their aggregates and the CSV format.
//!
//! A report file starts with the resolved configuration as `# ` comment lines,
//! followed by a header and one row per (group, criterion, trial, metric).
//! Aggregate rows (`aggregate = true`, empty `trial`) hold the mean and sample
//! standard deviation of the matching trial rows. Rows with neither flag set
//! are summaries such as fitted slopes or medians.
//!
//! Wall-clock measurements live in the `wall_time_s` column and in the values
//! of metrics whose name starts with `time_`; everything else is a pure
//! function of the configuration and seed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricRow {
    pub aggregate: bool,
    /// Experimental condition, e.g. `case=3` or `alpha=0.2`.
    pub group: String,
    pub criterion: String,
    pub trial: Option<usize>,
    pub metric: String,
    pub value: Option<f64>,
    pub std: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub failure: Option<String>,
}

impl MetricRow {
    pub fn trial(group: &str, criterion: &str, trial: usize, metric: &str, value: f64) -> Self {
        Self {
            group: group.to_owned(),
            criterion: criterion.to_owned(),
            trial: Some(trial),
            metric: metric.to_owned(),
            value: Some(value),
            ..Self::default()
        }
    }

    /// A trial whose training call returned an error.
    pub fn failed(group: &str, criterion: &str, trial: usize, metric: &str, reason: String) -> Self {
        Self {
            group: group.to_owned(),
            criterion: criterion.to_owned(),
            trial: Some(trial),
            metric: metric.to_owned(),
            failure: Some(reason),
            ..Self::default()
        }
    }

    pub fn summary(group: &str, criterion: &str, metric: &str, value: Option<f64>) -> Self {
        Self {
            group: group.to_owned(),
            criterion: criterion.to_owned(),
            metric: metric.to_owned(),
            value,
            ..Self::default()
        }
    }

    pub fn with_wall_time(mut self, seconds: f64) -> Self {
        self.wall_time_s = Some(seconds);
        self
    }

    pub fn with_iterations(mut self, iterations: usize, converged: bool) -> Self {
        self.iterations = Some(iterations);
        self.converged = Some(converged);
        self
    }

    pub fn is_trial(&self) -> bool {
        !self.aggregate && self.trial.is_some()
    }

    fn key(&self) -> (&str, &str, &str) {
        (&self.group, &self.criterion, &self.metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub task: String,
    /// Resolved configuration as TOML.
    pub config: String,
    pub rows: Vec<MetricRow>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); `None` below two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ExperimentReport {
    pub fn new(task: &str, config: String) -> Self {
        Self {
            task: task.to_owned(),
            config,
            rows: Vec::new(),
        }
    }

    /// Aggregate rows recomputed from the trial rows, in first-seen order.
    pub fn compute_aggregates(&self) -> Vec<MetricRow> {
        let mut keys: Vec<(&str, &str, &str)> = Vec::new();
        for row in self.rows.iter().filter(|r| r.is_trial()) {
            if !keys.contains(&row.key()) {
                keys.push(row.key());
            }
        }
        keys.into_iter()
            .map(|key| {
                let trials: Vec<&MetricRow> = self.rows.iter().filter(|r| r.is_trial() && r.key() == key).collect();
                let ok: Vec<&MetricRow> = trials.iter().copied().filter(|r| r.failure.is_none()).collect();
                let values: Vec<f64> = ok.iter().filter_map(|r| r.value).collect();
                let times: Vec<f64> = ok.iter().filter_map(|r| r.wall_time_s).collect();
                let flags: Vec<bool> = ok.iter().filter_map(|r| r.converged).collect();
                let failed = trials.len() - ok.len();
                MetricRow {
                    aggregate: true,
                    group: key.0.to_owned(),
                    criterion: key.1.to_owned(),
                    trial: None,
                    metric: key.2.to_owned(),
                    value: (!values.is_empty()).then(|| mean(&values)),
                    std: sample_std(&values),
                    wall_time_s: (!times.is_empty()).then(|| mean(&times)),
                    iterations: None,
                    converged: (!flags.is_empty()).then(|| flags.iter().all(|c| *c)),
                    failure: (failed > 0).then(|| format!("{failed} of {} trials failed", trials.len())),
                }
            })
            .collect()
    }

    /// Replaces any aggregate rows with freshly computed ones, appended at the end.
    pub fn finalize(&mut self) {
        self.rows.retain(|r| !r.aggregate);
        let aggregates = self.compute_aggregates();
        self.rows.extend(aggregates);
    }

    pub fn aggregate(&self, group: &str, criterion: &str, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.aggregate && r.key() == (group, criterion, metric))
    }

    pub fn summary(&self, group: &str, criterion: &str, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| !r.aggregate && r.trial.is_none() && r.key() == (group, criterion, metric))
    }

    pub fn trial_rows<'a>(
        &'a self,
        group: &'a str,
        criterion: &'a str,
        metric: &'a str,
    ) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.is_trial() && r.key() == (group, criterion, metric))
    }

    /// Copy with every wall-clock measurement removed.
    pub fn without_wall_times(&self) -> Self {
        let mut copy = self.clone();
        for row in &mut copy.rows {
            row.wall_time_s = None;
            if row.metric.starts_with("time_") {
                row.value = None;
                row.std = None;
            }
        }
        copy
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        if self.rows.is_empty() {
            return Err(CliError::Report("report has no rows".into()));
        }
        let mut text = String::new();
        for line in std::iter::once(format!("task = \"{}\"", self.task)).chain(
            self.config
                .lines()
                .filter(|l| !l.starts_with("task = "))
                .map(str::to_owned),
        ) {
            text.push_str("# ");
            text.push_str(&line);
            text.push('\n');
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row)?;
        }
        let body = writer.into_inner().map_err(|e| CliError::Report(e.to_string()))?;
        text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(text)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let text = self.to_csv_string()?;
        std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn parse_csv(text: &str) -> Result<Self, CliError> {
        let header: Vec<&str> = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(&l[1..]))
            .collect();
        let task = header
            .first()
            .and_then(|l| l.strip_prefix("task = \""))
            .and_then(|l| l.strip_suffix('"'))
            .ok_or_else(|| CliError::Report("missing `# task = ...` header line".into()))?
            .to_owned();
        let config = header.iter().map(|l| format!("{l}\n")).collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let rows = reader.deserialize().collect::<Result<Vec<MetricRow>, _>>()?;
        Ok(Self { task, config, rows })
    }

    pub fn read_csv(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse_csv(&text)
    }
}
