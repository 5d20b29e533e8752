//! Linear regression under impulsive noise: MSE, MCC, MEE and QMEE fits of
//! `y = w^T x + v` over Monte Carlo trials, scored by weight RMSE.

use qmee::datagen::{gen_linear_regression_trial, MixtureNoiseSpec};
use qmee::{
    rmse_weights, solve_fixed_point_mcc, solve_fixed_point_mee, solve_fixed_point_qmee, solve_mse, FixedPointConfig,
    KernelWidth, LinearModel,
};
use rayon::prelude::*;

use super::{group_label, timed};
use crate::config::{ExperimentConfig, LinregConfig, Task};
use crate::report::{ExperimentReport, MetricRow};
use crate::CliError;

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    config.validate(Task::Linreg)?;
    let cfg = &config.linreg;
    let mut report = ExperimentReport::new("linreg", config.resolved(Task::Linreg));
    for &case in &cfg.cases {
        let spec = match case {
            0 => MixtureNoiseSpec::none(),
            c => MixtureNoiseSpec::regression_case(c)?,
        };
        let per_trial: Vec<Vec<MetricRow>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, case, &spec, config.seed, trial))
            .collect::<Result<_, _>>()?;
        report.rows.extend(per_trial.into_iter().flatten());
    }
    report.finalize();
    Ok(report)
}

fn run_trial(
    cfg: &LinregConfig,
    case: u8,
    spec: &MixtureNoiseSpec,
    seed: u64,
    trial: usize,
) -> Result<Vec<MetricRow>, CliError> {
    let data = gen_linear_regression_trial(cfg.n, spec, seed, trial as u64)?;
    let target = LinearModel::new(data.true_omega.clone().expect("synthetic data carries its weights"))?;
    let group = group_label("case", case);
    let k = usize::from(case.max(1) - 1);
    let mut rows = Vec::with_capacity(cfg.criteria.len());
    for criterion in &cfg.criteria {
        let fit = |sigma: f64,
                   epsilon: f64,
                   solver: Solver|
         -> Result<(LinearModel, Option<(usize, bool)>), qmee::QmeeError> {
            let mut fp = FixedPointConfig::new(cfg.max_iterations, KernelWidth::new(sigma)?, epsilon);
            fp.convergence_tol = cfg.convergence_tol;
            let (model, trace) = solver(&data.inputs, &data.targets, &fp)?;
            Ok((model, Some((trace.iterations_used, trace.converged))))
        };
        let (result, seconds) = timed(|| match criterion.as_str() {
            "mse" => solve_mse(&data.inputs, &data.targets).map(|m| (m, None)),
            "mcc" => fit(cfg.mcc_sigma[k], 0.0, solve_fixed_point_mcc),
            "mee" => fit(cfg.mee_sigma[k], 0.0, solve_fixed_point_mee),
            "qmee" => fit(cfg.qmee_sigma[k], cfg.qmee_epsilon[k], solve_fixed_point_qmee),
            other => unreachable!("criterion `{other}` passed validation"),
        });
        rows.push(match result {
            Ok((model, trace)) => {
                let row = MetricRow::trial(&group, criterion, trial, "rmse", rmse_weights(&model, &target)?)
                    .with_wall_time(seconds);
                match trace {
                    Some((iterations, converged)) => row.with_iterations(iterations, converged),
                    None => row,
                }
            }
            Err(e) => MetricRow::failed(&group, criterion, trial, "rmse", e.to_string()).with_wall_time(seconds),
        });
    }
    Ok(rows)
}

type Solver = fn(
    &nalgebra::DMatrix<f64>,
    &nalgebra::DVector<f64>,
    &FixedPointConfig,
) -> qmee::Result<(LinearModel, qmee::TrainTrace)>;
