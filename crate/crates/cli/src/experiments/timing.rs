//! Wall time against sample size for the exact information potential (MEE)
//! and its quantized form (QMEE), with log-log slopes.

use std::time::Instant;

use qmee::datagen::{gen_linear_regression_trial, Background, MixtureNoiseSpec};
use qmee::rng::{substream, Purpose};
use qmee::{
    information_potential, qmee_potential, quantize_stream, solve_fixed_point_mee, solve_fixed_point_qmee, ErrorVector,
    FixedPointConfig, KernelWidth,
};

use super::{group_label, timed};
use crate::config::{ExperimentConfig, Task, TimingConfig};
use crate::plot::{LinePlot, Series};
use crate::report::{median, ExperimentReport, MetricRow};
use crate::CliError;

const CRITERIA: [&str; 2] = ["mee", "qmee"];

fn noise_spec(case: u8) -> Result<MixtureNoiseSpec, CliError> {
    Ok(match case {
        0 => MixtureNoiseSpec {
            occurrence_prob: 0.0,
            background: Background::Gaussian,
            outlier_mean: 0.0,
            outlier_variance: 0.0,
        },
        c => MixtureNoiseSpec::regression_case(c)?,
    })
}

/// Calls `f` until `min_duration` has elapsed (at least once) and returns the
/// mean time per call together with the last result.
fn time_per_call<R>(min_duration: f64, mut f: impl FnMut() -> R) -> (R, f64) {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        let out = std::hint::black_box(f());
        calls += 1;
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= min_duration {
            return (out, elapsed / f64::from(calls));
        }
    }
}

/// Least-squares slope of `log t` on `log n`; `None` for fewer than two points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    config.validate(Task::Timing)?;
    let cfg = &config.timing;
    let mut report = ExperimentReport::new("timing", config.resolved(Task::Timing));
    let metric = if cfg.mode == "evaluate" {
        "time_eval_s"
    } else {
        "time_train_s"
    };
    let mut medians: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    // Measurements run sequentially so they do not compete for the core.
    for (idx, &n) in cfg.n_values.iter().enumerate() {
        let group = group_label("n", n);
        let rows = if cfg.mode == "evaluate" {
            measure_evaluate(cfg, config.seed, idx as u64, n, &group)?
        } else {
            measure_train(cfg, config.seed, idx as u64, n, &group)?
        };
        for (c, criterion) in CRITERIA.iter().enumerate() {
            let times: Vec<f64> = rows
                .iter()
                .filter(|r| r.criterion == *criterion && r.metric == metric)
                .filter_map(|r| r.value)
                .collect();
            let m = median(&times);
            medians[c].push((n as f64, m));
            report
                .rows
                .push(MetricRow::summary(&group, criterion, "time_median_s", Some(m)));
        }
        report.rows.extend(rows);
    }
    for (c, criterion) in CRITERIA.iter().enumerate() {
        report.rows.push(MetricRow::summary(
            "all",
            criterion,
            "time_loglog_slope",
            loglog_slope(&medians[c]),
        ));
    }
    report.finalize();
    Ok(report)
}

fn measure_evaluate(
    cfg: &TimingConfig,
    seed: u64,
    idx: u64,
    n: usize,
    group: &str,
) -> Result<Vec<MetricRow>, CliError> {
    let spec = noise_spec(cfg.noise_case)?;
    let mut rng = substream(seed, idx, Purpose::Data);
    let errors = ErrorVector::new((0..n).map(|_| spec.sample(&mut rng).value).collect())?;
    let sigma = KernelWidth::new(cfg.sigma)?;
    let mut rows = Vec::new();
    let codebook = quantize_stream(&errors, cfg.epsilon)?.codebook;
    rows.push(MetricRow::summary(
        group,
        "mee",
        "potential",
        Some(information_potential(&errors, sigma)),
    ));
    rows.push(MetricRow::summary(
        group,
        "qmee",
        "potential",
        Some(qmee_potential(&errors, &codebook, sigma)?),
    ));
    rows.push(MetricRow::summary(
        group,
        "qmee",
        "codebook_size",
        Some(codebook.len() as f64),
    ));
    for repeat in 0..cfg.repeats {
        let (_, t) = time_per_call(cfg.min_duration_s, || {
            information_potential(std::hint::black_box(&errors), sigma)
        });
        rows.push(MetricRow::trial(group, "mee", repeat, "time_eval_s", t));
        let (result, t) = time_per_call(cfg.min_duration_s, || {
            let errors = std::hint::black_box(&errors);
            let codebook = quantize_stream(errors, cfg.epsilon)?.codebook;
            qmee_potential(errors, &codebook, sigma)
        });
        result?;
        rows.push(MetricRow::trial(group, "qmee", repeat, "time_eval_s", t));
    }
    Ok(rows)
}

fn measure_train(cfg: &TimingConfig, seed: u64, idx: u64, n: usize, group: &str) -> Result<Vec<MetricRow>, CliError> {
    let data = gen_linear_regression_trial(n, &noise_spec(cfg.noise_case)?, seed, idx)?;
    let fp = FixedPointConfig::new(cfg.max_iterations, KernelWidth::new(cfg.sigma)?, cfg.epsilon);
    let mut rows = Vec::new();
    for repeat in 0..cfg.repeats {
        for criterion in CRITERIA {
            let solver = if criterion == "mee" {
                solve_fixed_point_mee
            } else {
                solve_fixed_point_qmee
            };
            let (result, t) = timed(|| solver(&data.inputs, &data.targets, &fp));
            let row = match result {
                Ok((_, trace)) => MetricRow::trial(group, criterion, repeat, "time_train_s", t)
                    .with_iterations(trace.iterations_used, trace.converged),
                Err(e) => MetricRow::failed(group, criterion, repeat, "time_train_s", e.to_string()),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn plot(report: &ExperimentReport) -> String {
    let series = CRITERIA
        .iter()
        .map(|criterion| {
            let points = report
                .rows
                .iter()
                .filter(|r| r.criterion == *criterion && r.metric == "time_median_s" && r.trial.is_none())
                .filter_map(|r| {
                    let n: f64 = r.group.strip_prefix("n=")?.parse().ok()?;
                    Some((n, r.value?))
                })
                .collect();
            let slope = report
                .summary("all", criterion, "time_loglog_slope")
                .and_then(|r| r.value)
                .map(|s| format!(" (slope {s:.2})"))
                .unwrap_or_default();
            Series {
                name: format!("{}{slope}", criterion.to_uppercase()),
                points,
            }
        })
        .collect();
    LinePlot {
        title: "Time versus number of samples".into(),
        x_label: "N".into(),
        y_label: "median wall time (s)".into(),
        log_x: true,
        log_y: true,
        series,
    }
    .to_svg()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [500.0, 1000.0, 2000.0].iter().map(|&n| (n, 3e-9 * n * n)).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..1]), None);
    }
}
