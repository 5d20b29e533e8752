//! ELM regression: RELM, ELM-MEE and ELM-QMEE readouts on the same random
//! hidden layer per trial, scored by test RMSE after debiasing.
//!
//! Without a dataset the task is `sinc(x)` on `[-10, 10]` with impulsive noise
//! on the training targets only; `x` is used unscaled because sigmoids with
//! unit-range weights on `[0, 1]` inputs are too flat to resolve the sinc
//! lobes. With a CSV file every trial draws its own random train/test split and
//! features are min-max scaled with the map fitted on the training split.
//! Targets are used as given.
//!
//! MEE and QMEE leave the output offset free, so their predictions are shifted
//! by the mean training error (`shift = "mean"`). Under heavy-tailed training
//! noise that mean is itself noisy; `shift = "median"` uses the median instead.

use nalgebra::{DMatrix, DVector};
use qmee::datagen::{
    gen_sinc_regression, load_csv_dataset, minmax_normalize, MixtureNoiseSpec, RegressionDataset, TargetColumn,
};
use qmee::elm::{rmse, train_elm, ElmCriterion};
use qmee::rng::{substream, Purpose};
use qmee::{ElmTrainConfig, KernelWidth};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::timed;
use crate::config::{ElmConfig, ExperimentConfig, Task};
use crate::report::{median, ExperimentReport, MetricRow};
use crate::CliError;

struct Split {
    train_x: DMatrix<f64>,
    train_y: DVector<f64>,
    test_x: DMatrix<f64>,
    test_y: DVector<f64>,
}

fn select(ds: &RegressionDataset, idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(idx.len(), ds.dim(), |i, j| ds.inputs[(j, idx[i])]);
    let y = DVector::from_fn(idx.len(), |i, _| ds.targets[idx[i]]);
    (x, y)
}

fn split(cfg: &ElmConfig, dataset: Option<&RegressionDataset>, seed: u64, trial: u64) -> Result<Split, CliError> {
    let (train_x, train_y, test_x, test_y) = match dataset {
        Some(ds) => {
            let mut order: Vec<usize> = (0..ds.len()).collect();
            order.shuffle(&mut substream(seed, trial, Purpose::Split));
            let n_train = ((ds.len() as f64) * cfg.train_fraction).round() as usize;
            if n_train < 2 || n_train >= ds.len() {
                return Err(CliError::Config(format!(
                    "elm.train_fraction leaves {n_train} of {} rows for training",
                    ds.len()
                )));
            }
            let (a, b) = order.split_at(n_train);
            let (tx, ty) = select(ds, a);
            let (vx, vy) = select(ds, b);
            (tx, ty, vx, vy)
        }
        None => {
            let total = cfg.n_train + cfg.n_test;
            let ds = gen_sinc_regression(total, &MixtureNoiseSpec::none(), seed, trial)?;
            let train: Vec<usize> = (0..cfg.n_train).collect();
            let test: Vec<usize> = (cfg.n_train..total).collect();
            let (tx, mut ty) = select(&ds, &train);
            let (vx, vy) = select(&ds, &test);
            if cfg.noise_case > 0 {
                let spec = MixtureNoiseSpec::regression_case(cfg.noise_case)?;
                let mut rng = substream(seed, trial, Purpose::Noise);
                for t in ty.iter_mut() {
                    *t += spec.sample(&mut rng).value;
                }
            }
            return Ok(Split {
                train_x: tx,
                train_y: ty,
                test_x: vx,
                test_y: vy,
            });
        }
    };
    let (train_x, test_x, _) = minmax_normalize(&train_x, &test_x)?;
    Ok(Split {
        train_x,
        train_y,
        test_x,
        test_y,
    })
}

fn parse_criterion(name: &str) -> ElmCriterion {
    match name {
        "relm" => ElmCriterion::Relm,
        "mee" => ElmCriterion::Mee,
        "qmee" => ElmCriterion::Qmee,
        other => unreachable!("criterion `{other}` passed validation"),
    }
}

fn target_column(cfg: &ElmConfig) -> TargetColumn {
    match &cfg.target {
        Some(name) => TargetColumn::Name(name.clone()),
        None => TargetColumn::Last,
    }
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    config.validate(Task::Elm)?;
    let cfg = &config.elm;
    let dataset = match &cfg.dataset {
        Some(path) => Some(load_csv_dataset(path, &target_column(cfg))?),
        None => None,
    };
    let group = match &cfg.dataset {
        Some(path) => format!(
            "dataset={}",
            path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default()
        ),
        None => format!("sinc case={}", cfg.noise_case),
    };
    let mut report = ExperimentReport::new("elm", config.resolved(Task::Elm));
    let per_trial: Vec<Vec<MetricRow>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, dataset.as_ref(), &group, config.seed, trial))
        .collect::<Result<_, _>>()?;
    report.rows.extend(per_trial.into_iter().flatten());
    report.finalize();
    Ok(report)
}

fn run_trial(
    cfg: &ElmConfig,
    dataset: Option<&RegressionDataset>,
    group: &str,
    seed: u64,
    trial: usize,
) -> Result<Vec<MetricRow>, CliError> {
    let data = split(cfg, dataset, seed, trial as u64)?;
    let mut rows = Vec::new();
    for name in &cfg.criteria {
        let criterion = parse_criterion(name);
        let train_cfg = ElmTrainConfig {
            hidden_nodes: cfg.hidden_nodes,
            lambda: if criterion == ElmCriterion::Relm {
                cfg.relm_lambda
            } else {
                cfg.lambda_prime
            },
            max_iterations: cfg.max_iterations,
            sigma: KernelWidth::new(cfg.sigma)?,
            epsilon: cfg.epsilon,
            convergence_tol: cfg.convergence_tol,
            seed,
        };
        let (fit, seconds) = timed(|| train_elm(&data.train_x, &data.train_y, criterion, &train_cfg, trial as u64));
        let scored = fit.and_then(|mut f| {
            if criterion.shift_invariant() && cfg.shift == "median" {
                f.shift = 0.0;
                let residual = &data.train_y - f.predict(&data.train_x)?;
                f.shift = median(residual.as_slice());
            }
            Ok((rmse(&data.test_y, &f.predict(&data.test_x)?)?, f.trace))
        });
        let row = match scored {
            Ok((score, trace)) => {
                let row = MetricRow::trial(group, name, trial, "rmse", score).with_wall_time(seconds);
                match trace {
                    Some(t) => row.with_iterations(t.iterations_used, t.converged),
                    None => row,
                }
            }
            Err(e) => MetricRow::failed(group, name, trial, "rmse", e.to_string()).with_wall_time(seconds),
        };
        rows.push(row);
    }
    Ok(rows)
}
