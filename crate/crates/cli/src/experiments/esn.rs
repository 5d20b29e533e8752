//! Echo state network on Mackey-Glass one-step prediction with impulsive noise
//! on the training targets. Readouts: plain least squares, ridge, and
//! RMSProp-trained MEE and QMEE; the entropy readouts are debiased by the mean
//! training error before scoring test NRMSE.

use nalgebra::DVector;
use qmee::datagen::{embed_and_split, gen_mackey_glass, EmbedConfig, MackeyGlassConfig, MixtureNoiseSpec};
use qmee::esn::{nrmse, run_reservoir, solve_esn_ls, train_esn_mee, train_esn_qmee, ReservoirConfig};
use qmee::{EsnModel, KernelWidth, QmeeError, RmsPropConfig};
use rayon::prelude::*;

use super::{group_label, timed};
use crate::config::{EsnConfig, ExperimentConfig, Task};
use crate::report::{median, ExperimentReport, MetricRow};
use crate::CliError;

/// Parameters of one experimental condition.
struct Condition {
    group: String,
    noise: Option<MixtureNoiseSpec>,
    ridge: f64,
    mee_sigma: f64,
    qmee_sigma: f64,
    qmee_epsilon: f64,
}

fn conditions(cfg: &EsnConfig) -> Vec<Condition> {
    let make = |k: usize, group: String, noise| Condition {
        group,
        noise,
        ridge: cfg.ridge_lambda[k],
        mee_sigma: cfg.mee_sigma[k],
        qmee_sigma: cfg.qmee_sigma[k],
        qmee_epsilon: cfg.qmee_epsilon[k],
    };
    if cfg.noise {
        cfg.alphas
            .iter()
            .enumerate()
            .map(|(k, &a)| make(k, group_label("alpha", a), Some(MixtureNoiseSpec::time_series(a))))
            .collect()
    } else {
        vec![make(0, "noise=none".into(), None)]
    }
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    config.validate(Task::Esn)?;
    let cfg = &config.esn;
    let embed = EmbedConfig {
        lags: cfg.lags.clone(),
        train: cfg.train,
        test: cfg.test,
        washout: cfg.washout,
    };
    let max_lag = *cfg.lags.iter().max().expect("validated nonempty");
    let mg = MackeyGlassConfig {
        dt: cfg.mg_dt,
        transient: cfg.mg_transient,
        ..MackeyGlassConfig::default()
    };
    let raw = gen_mackey_glass(max_lag + cfg.washout + cfg.train + cfg.test, &mg)?;
    let reservoir = ReservoirConfig {
        inputs: cfg.lags.len(),
        size: cfg.reservoir_size,
        spectral_radius: cfg.spectral_radius,
        sparsity: cfg.sparsity,
    };

    let mut report = ExperimentReport::new("esn", config.resolved(Task::Esn));
    for cond in conditions(cfg) {
        let per_trial: Vec<Vec<MetricRow>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, &cond, &raw, &embed, &reservoir, config.seed, trial))
            .collect::<Result<_, _>>()?;
        let rows: Vec<MetricRow> = per_trial.into_iter().flatten().collect();
        for criterion in &cfg.criteria {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| &r.criterion == criterion && r.failure.is_none())
                .filter_map(|r| r.value)
                .collect();
            let m = (!values.is_empty()).then(|| median(&values));
            report
                .rows
                .push(MetricRow::summary(&cond.group, criterion, "nrmse_median", m));
        }
        let mean_time = |name: &str| {
            let t: Vec<f64> = rows
                .iter()
                .filter(|r| r.criterion == name && r.failure.is_none())
                .filter_map(|r| r.wall_time_s)
                .collect();
            (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64)
        };
        if let (Some(mee), Some(qmee)) = (mean_time("mee"), mean_time("qmee")) {
            report.rows.push(MetricRow::summary(
                &cond.group,
                "mee/qmee",
                "time_ratio",
                Some(mee / qmee),
            ));
        }
        report.rows.extend(rows);
    }
    report.finalize();
    Ok(report)
}

fn run_trial(
    cfg: &EsnConfig,
    cond: &Condition,
    raw: &[f64],
    embed: &EmbedConfig,
    reservoir: &ReservoirConfig,
    seed: u64,
    trial: usize,
) -> Result<Vec<MetricRow>, CliError> {
    let data = embed_and_split(raw, cond.noise.as_ref(), embed, seed, trial as u64)?;
    let model = EsnModel::new(reservoir, seed, trial as u64)?;
    let states = run_reservoir(&model, &data.inputs, cfg.washout)?;
    let phi_train = states.columns(data.train.clone())?;
    let phi_test = states.columns(data.test.clone())?;
    let y = DVector::from_column_slice(&data.targets[data.train.clone()]);
    let clean_test = &data.clean_targets[data.test.clone()];

    let rms = |sigma: f64, epsilon: f64| -> Result<RmsPropConfig, QmeeError> {
        let mut c = RmsPropConfig::new(cfg.eta, cfg.epochs, KernelWidth::new(sigma)?, epsilon);
        c.rho = cfg.rho;
        c.r = cfg.r;
        c.seed = seed;
        Ok(c)
    };
    let mut rows = Vec::new();
    for criterion in &cfg.criteria {
        let (result, seconds) = timed(|| -> Result<(DVector<f64>, Option<usize>), QmeeError> {
            match criterion.as_str() {
                "ls" => Ok((solve_esn_ls(&phi_train, &y, 0.0)?, None)),
                "ridge" => Ok((solve_esn_ls(&phi_train, &y, cond.ridge)?, None)),
                "mee" => {
                    train_esn_mee(&phi_train, &y, &rms(cond.mee_sigma, 0.0)?).map(|(w, t)| (w, Some(t.iterations_used)))
                }
                "qmee" => train_esn_qmee(&phi_train, &y, &rms(cond.qmee_sigma, cond.qmee_epsilon)?)
                    .map(|(w, t)| (w, Some(t.iterations_used))),
                other => unreachable!("criterion `{other}` passed validation"),
            }
        });
        let scored = result.and_then(|(w, epochs)| {
            let shift = if criterion == "mee" || criterion == "qmee" {
                (&y - phi_train.tr_mul(&w)).mean()
            } else {
                0.0
            };
            let outputs = phi_test.tr_mul(&w).add_scalar(shift);
            Ok((nrmse(clean_test, outputs.as_slice())?, epochs))
        });
        let scored = scored.map_err(|e| e.to_string()).and_then(|(score, epochs)| {
            if score.is_finite() {
                Ok((score, epochs))
            } else {
                Err(format!("readout diverged: test NRMSE is {score}"))
            }
        });
        let row = match scored {
            Ok((score, epochs)) => {
                let mut row = MetricRow::trial(&cond.group, criterion, trial, "nrmse", score).with_wall_time(seconds);
                row.iterations = epochs;
                row
            }
            Err(e) => MetricRow::failed(&cond.group, criterion, trial, "nrmse", e).with_wall_time(seconds),
        };
        rows.push(row);
    }
    Ok(rows)
}
