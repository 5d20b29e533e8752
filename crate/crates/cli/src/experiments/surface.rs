//! Cost surfaces over a lattice of linear weights `(w1, w2)` on one fixed
//! dataset, with the grid optimum of every criterion compared to `w*`.

use std::path::Path;

use nalgebra::DVector;
use qmee::datagen::{gen_linear_regression_trial, MixtureNoiseSpec};
use qmee::{
    correntropy_cost, information_potential, mse_cost, qmee_potential, quantize_stream, ErrorVector, KernelWidth,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SurfaceConfig, Task};
use crate::plot::{even_levels, ContourPlot, Marker};
use crate::report::{ExperimentReport, MetricRow};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub criterion: String,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// `values[j][i]` is the cost at `(w1[i], w2[j])`.
    pub values: Vec<Vec<f64>>,
    pub maximize: bool,
    pub target: [f64; 2],
}

impl SurfaceGrid {
    /// Grid optimum `(w1, w2, value)`; the first in row-major order on ties.
    pub fn optimum(&self) -> (f64, f64, f64) {
        let mut best = (self.w1[0], self.w2[0], self.values[0][0]);
        for (j, row) in self.values.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                let better = if self.maximize { v > best.2 } else { v < best.2 };
                if better {
                    best = (self.w1[i], self.w2[j], v);
                }
            }
        }
        best
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["w1", "w2", "value"])?;
        for (j, row) in self.values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                writer.serialize((self.w1[i], self.w2[j], v))?;
            }
        }
        writer.flush().map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

pub struct SurfaceOutput {
    pub report: ExperimentReport,
    pub grids: Vec<SurfaceGrid>,
}

fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64)
        .collect()
}

fn cost(criterion: &str, errors: &ErrorVector, cfg: &SurfaceConfig) -> Result<f64, CliError> {
    Ok(match criterion {
        "mse" => mse_cost(errors),
        "mcc" => correntropy_cost(errors, KernelWidth::new(cfg.mcc_sigma)?),
        "mee" => information_potential(errors, KernelWidth::new(cfg.mee_sigma)?),
        "qmee" => {
            let codebook = quantize_stream(errors, cfg.qmee_epsilon)?.codebook;
            qmee_potential(errors, &codebook, KernelWidth::new(cfg.qmee_sigma)?)?
        }
        other => unreachable!("criterion `{other}` passed validation"),
    })
}

fn sigma_of(criterion: &str, cfg: &SurfaceConfig) -> Option<f64> {
    match criterion {
        "mcc" => Some(cfg.mcc_sigma),
        "mee" => Some(cfg.mee_sigma),
        "qmee" => Some(cfg.qmee_sigma),
        _ => None,
    }
}

pub fn run(config: &ExperimentConfig) -> Result<SurfaceOutput, CliError> {
    config.validate(Task::Surface)?;
    let cfg = &config.surface;
    let spec = match cfg.noise_case {
        0 => MixtureNoiseSpec::none(),
        c => MixtureNoiseSpec::regression_case(c)?,
    };
    let data = gen_linear_regression_trial(cfg.n, &spec, config.seed, 0)?;
    let star = data.true_omega.clone().expect("synthetic data carries its weights");
    let target = [star[0], star[1]];
    let w1 = axis(cfg.w1_range, cfg.grid_size);
    let w2 = axis(cfg.w2_range, cfg.grid_size);

    let mut report = ExperimentReport::new("surface", config.resolved(Task::Surface));
    let mut grids = Vec::new();
    for criterion in &cfg.criteria {
        let values: Vec<Vec<f64>> = w2
            .par_iter()
            .map(|&b| {
                w1.iter()
                    .map(|&a| {
                        let residual = &data.targets - data.inputs.tr_mul(&DVector::from_column_slice(&[a, b]));
                        cost(criterion, &ErrorVector::new(residual.as_slice().to_vec())?, cfg)
                    })
                    .collect::<Result<Vec<f64>, CliError>>()
            })
            .collect::<Result<_, _>>()?;
        let grid = SurfaceGrid {
            criterion: criterion.clone(),
            w1: w1.clone(),
            w2: w2.clone(),
            values,
            maximize: criterion != "mse",
            target,
        };
        let (a, b, v) = grid.optimum();
        let group = "grid";
        report
            .rows
            .push(MetricRow::summary(group, criterion, "opt_w1", Some(a)));
        report
            .rows
            .push(MetricRow::summary(group, criterion, "opt_w2", Some(b)));
        report
            .rows
            .push(MetricRow::summary(group, criterion, "opt_value", Some(v)));
        report.rows.push(MetricRow::summary(
            group,
            criterion,
            "opt_distance",
            Some(((a - target[0]).powi(2) + (b - target[1]).powi(2)).sqrt()),
        ));
        if let Some(sigma) = sigma_of(criterion, cfg) {
            let peak = KernelWidth::new(sigma)?.peak();
            let violations = grid.values.iter().flatten().filter(|&&v| v > peak + 1e-12).count();
            report.rows.push(MetricRow::summary(
                group,
                criterion,
                "bound_violations",
                Some(violations as f64),
            ));
        }
        grids.push(grid);
    }
    report
        .rows
        .push(MetricRow::summary("grid", "target", "w1", Some(target[0])));
    report
        .rows
        .push(MetricRow::summary("grid", "target", "w2", Some(target[1])));
    report.finalize();
    Ok(SurfaceOutput { report, grids })
}

pub fn plot(grid: &SurfaceGrid, config: &ExperimentConfig) -> String {
    let (a, b, _) = grid.optimum();
    let kind = if grid.maximize { "max" } else { "min" };
    ContourPlot {
        title: format!("{} cost surface", grid.criterion.to_uppercase()),
        x_label: "w1".into(),
        y_label: "w2".into(),
        xs: grid.w1.clone(),
        ys: grid.w2.clone(),
        levels: even_levels(&grid.values, config.surface.contour_levels),
        values: grid.values.clone(),
        markers: vec![
            Marker {
                label: format!("grid {kind}"),
                x: a,
                y: b,
            },
            Marker {
                label: "target w*".into(),
                x: grid.target[0],
                y: grid.target[1],
            },
        ],
    }
    .to_svg()
}
