//! Synthetic data, normalization and CSV datasets.
//!
//! Impulsive noise follows `v = (1 - a) A + a B` with a Bernoulli(c) gate `a`,
//! a background process `A` and an outlier process `B`. All generators are
//! deterministic functions of their parameters and seed (see [`crate::rng`]).

use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, invalid, QmeeError, Result};
use crate::rng::{substream, Purpose, StreamRng};

/// Background noise `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    /// `0.5 N(3, 1) + 0.5 N(-3, 1)`
    SymmetricMixture,
    /// `2/3 N(-5, 1) + 1/3 N(2, 1)`
    AsymmetricMixture,
    /// `-2` or `+2` with equal probability
    Binary,
    /// `N(0, 1)`
    Gaussian,
    /// `0.5 N(alpha, 0.01) + 0.5 N(-alpha, 0.01)`
    AlphaMixture { alpha: f64 },
    /// Identically zero.
    Zero,
}

impl Background {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        let unit = |rng: &mut StreamRng, mean: f64, std: f64| Normal::new(mean, std).expect("valid std").sample(rng);
        match *self {
            Background::SymmetricMixture => {
                let mean = if rng.random_bool(0.5) { 3.0 } else { -3.0 };
                unit(rng, mean, 1.0)
            }
            Background::AsymmetricMixture => {
                let mean = if rng.random_bool(2.0 / 3.0) { -5.0 } else { 2.0 };
                unit(rng, mean, 1.0)
            }
            Background::Binary => {
                if rng.random_bool(0.5) {
                    2.0
                } else {
                    -2.0
                }
            }
            Background::Gaussian => unit(rng, 0.0, 1.0),
            Background::AlphaMixture { alpha } => {
                let mean = if rng.random_bool(0.5) { alpha } else { -alpha };
                unit(rng, mean, 0.1)
            }
            Background::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureNoiseSpec {
    /// Probability `c` that a sample is an outlier.
    pub occurrence_prob: f64,
    pub background: Background,
    pub outlier_mean: f64,
    pub outlier_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraw {
    pub value: f64,
    pub outlier: bool,
}

impl MixtureNoiseSpec {
    /// Regression noise case 1..=4 (symmetric mixture, asymmetric mixture,
    /// binary, Gaussian background) with `c = 0.1` and outlier variance 10000.
    pub fn regression_case(case: u8) -> Result<Self> {
        let background = match case {
            1 => Background::SymmetricMixture,
            2 => Background::AsymmetricMixture,
            3 => Background::Binary,
            4 => Background::Gaussian,
            other => return Err(invalid("noise case", format!("expected 1..=4, got {other}"))),
        };
        Ok(Self {
            occurrence_prob: 0.1,
            background,
            outlier_mean: 0.0,
            outlier_variance: 10_000.0,
        })
    }

    /// Training-target noise of the time-series task: `c = 0.2`, outlier
    /// variance 0.01, background `0.5 N(alpha, 0.01) + 0.5 N(-alpha, 0.01)`.
    pub fn time_series(alpha: f64) -> Self {
        Self {
            occurrence_prob: 0.2,
            background: Background::AlphaMixture { alpha },
            outlier_mean: 0.0,
            outlier_variance: 0.01,
        }
    }

    pub fn none() -> Self {
        Self {
            occurrence_prob: 0.0,
            background: Background::Zero,
            outlier_mean: 0.0,
            outlier_variance: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.occurrence_prob) {
            return Err(invalid("occurrence_prob", "must lie in [0, 1]"));
        }
        if !(self.outlier_variance >= 0.0) || !self.outlier_mean.is_finite() {
            return Err(invalid("outlier", "variance must be >= 0 and mean finite"));
        }
        if let Background::AlphaMixture { alpha } = self.background {
            if !alpha.is_finite() {
                return Err(invalid("alpha", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut StreamRng) -> NoiseDraw {
        let outlier = rng.random_bool(self.occurrence_prob);
        let value = if outlier {
            Normal::new(self.outlier_mean, self.outlier_variance.sqrt())
                .expect("validated variance")
                .sample(rng)
        } else {
            self.background.sample(rng)
        };
        NoiseDraw { value, outlier }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    /// `d x N`, one sample per column.
    pub inputs: DMatrix<f64>,
    pub targets: DVector<f64>,
    pub true_omega: Option<DVector<f64>>,
    pub seed: Option<u64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.nrows()
    }

    /// Features as `N x d` rows.
    pub fn feature_rows(&self) -> DMatrix<f64> {
        self.inputs.transpose()
    }
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// `y = w*^T x + v` with `x` uniform on `[-2, 2]^2` and `w* = [2, 1]`.
pub fn gen_linear_regression(n: usize, spec: &MixtureNoiseSpec, seed: u64) -> Result<RegressionDataset> {
    gen_linear_regression_trial(n, spec, seed, 0)
}

/// As [`gen_linear_regression`] on the substreams of trial `trial`.
pub fn gen_linear_regression_trial(
    n: usize,
    spec: &MixtureNoiseSpec,
    seed: u64,
    trial: u64,
) -> Result<RegressionDataset> {
    gen_linear_system(n, &[2.0, 1.0], 2.0, spec, seed, trial)
}

/// Linear system with arbitrary target weights and inputs uniform on
/// `[-half_width, half_width]^d`.
pub fn gen_linear_system(
    n: usize,
    omega: &[f64],
    half_width: f64,
    spec: &MixtureNoiseSpec,
    seed: u64,
    trial: u64,
) -> Result<RegressionDataset> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    if omega.is_empty() {
        return Err(invalid("omega", "need at least one weight"));
    }
    spec.validate()?;
    let mut data_rng = substream(seed, trial, Purpose::Data);
    let mut noise_rng = substream(seed, trial, Purpose::Noise);
    let d = omega.len();
    let inputs = DMatrix::from_fn(d, n, |_, _| data_rng.random_range(-half_width..=half_width));
    let omega = DVector::from_column_slice(omega);
    let clean = inputs.tr_mul(&omega);
    let targets = DVector::from_fn(n, |i, _| clean[i] + spec.sample(&mut noise_rng).value);
    Ok(RegressionDataset {
        inputs,
        targets,
        true_omega: Some(omega),
        seed: Some(seed),
        feature_names: default_names(d),
        target_name: "y".into(),
    })
}

/// `y = sin(x) / x + v` with `x` uniform on `[-10, 10]`, a standard nonlinear
/// benchmark for single-hidden-layer networks.
pub fn gen_sinc_regression(n: usize, spec: &MixtureNoiseSpec, seed: u64, trial: u64) -> Result<RegressionDataset> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    spec.validate()?;
    let mut data_rng = substream(seed, trial, Purpose::Data);
    let mut noise_rng = substream(seed, trial, Purpose::Noise);
    let xs: Vec<f64> = (0..n).map(|_| data_rng.random_range(-10.0..=10.0)).collect();
    let targets = DVector::from_fn(n, |i, _| {
        let x = xs[i];
        let clean = if x == 0.0 { 1.0 } else { x.sin() / x };
        clean + spec.sample(&mut noise_rng).value
    });
    Ok(RegressionDataset {
        inputs: DMatrix::from_row_slice(1, n, &xs),
        targets,
        true_omega: None,
        seed: Some(seed),
        feature_names: default_names(1),
        target_name: "y".into(),
    })
}

/// Integration settings for `dx/dt = a x(t) + b x(t - tau) / (1 + x(t - tau)^10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MackeyGlassConfig {
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    /// RK4 step; `1 / dt` and `tau / dt` must be whole numbers.
    pub dt: f64,
    /// Constant value of `x(t)` for `t <= 0`.
    pub history: f64,
    /// Time discarded before sampling starts (1000 steps at the default step).
    pub transient: f64,
}

impl Default for MackeyGlassConfig {
    fn default() -> Self {
        Self {
            tau: 17.0,
            a: -0.1,
            b: 0.2,
            dt: 0.1,
            history: 1.2,
            transient: 100.0,
        }
    }
}

fn whole_steps(value: f64, dt: f64, name: &'static str) -> Result<usize> {
    let steps = (value / dt).round();
    if steps < 0.0 || ((steps * dt) - value).abs() > 1e-9 * value.abs().max(1.0) {
        return Err(invalid(name, format!("{value} is not a whole number of steps of {dt}")));
    }
    Ok(steps as usize)
}

/// Mackey-Glass series sampled at unit spacing after the transient.
///
/// Fourth-order Runge-Kutta on a grid of step `dt`. Delayed values at half
/// steps come from cubic Hermite interpolation between grid points, using the
/// stored derivatives, so the scheme stays fourth order.
pub fn gen_mackey_glass(length: usize, cfg: &MackeyGlassConfig) -> Result<Vec<f64>> {
    if !(cfg.dt > 0.0 && cfg.dt <= 1.0) {
        return Err(invalid("dt", "must lie in (0, 1]"));
    }
    if !(cfg.tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    let per_unit = whole_steps(1.0, cfg.dt, "dt")?;
    let delay = whole_steps(cfg.tau, cfg.dt, "tau")?;
    let skip = whole_steps(cfg.transient, cfg.dt, "transient")?;
    let total = skip + length.saturating_sub(1) * per_unit;

    let rhs = |x: f64, lagged: f64| cfg.a * x + cfg.b * lagged / (1.0 + lagged.powi(10));
    let h = cfg.dt;
    // x[j] and dx[j] at t = j h for j >= 0
    let mut x = Vec::with_capacity(total + 1);
    let mut dx = Vec::with_capacity(total + 1);
    let lagged_at = |x: &[f64], dx: &[f64], j: isize| -> (f64, f64) {
        if j < 0 {
            (cfg.history, 0.0)
        } else {
            (x[j as usize], dx[j as usize])
        }
    };
    x.push(cfg.history);
    dx.push(rhs(cfg.history, cfg.history));

    for n in 0..total {
        let j = n as isize - delay as isize;
        let (l0, d0) = lagged_at(&x, &dx, j);
        let (l1, d1) = lagged_at(&x, &dx, j + 1);
        let mid = 0.5 * (l0 + l1) + h * (d0 - d1) / 8.0;
        let xn = x[n];
        let k1 = rhs(xn, l0);
        let k2 = rhs(xn + 0.5 * h * k1, mid);
        let k3 = rhs(xn + 0.5 * h * k2, mid);
        let k4 = rhs(xn + h * k3, l1);
        let next = xn + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let (lag_next, _) = lagged_at(&x, &dx, j + 1);
        x.push(next);
        dx.push(rhs(next, lag_next));
    }
    Ok((0..length).map(|k| x[skip + k * per_unit]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    /// Lags of the input vector, oldest first.
    pub lags: Vec<usize>,
    pub train: usize,
    pub test: usize,
    /// Leading samples fed to the reservoir but excluded from training.
    pub washout: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            lags: vec![24, 18, 12, 6],
            train: 900,
            test: 400,
            washout: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub raw: Vec<f64>,
    /// `P x T` delay vectors, one per column.
    pub inputs: DMatrix<f64>,
    /// Targets with training noise applied.
    pub targets: Vec<f64>,
    pub clean_targets: Vec<f64>,
    /// Index into `raw` of the first embedded sample.
    pub origin: usize,
    pub washout: Range<usize>,
    pub train: Range<usize>,
    pub test: Range<usize>,
    /// Outlier gate of every training target (empty when noise is disabled).
    pub outliers: Vec<bool>,
}

/// Delay-embeds `raw` and adds noise to the training targets only.
///
/// Sample `s` has target `x(t)` with `t = max_lag + s` and input
/// `[x(t - lag) for lag in lags]`. Layout is washout, then train, then test.
pub fn embed_and_split(
    raw: &[f64],
    noise: Option<&MixtureNoiseSpec>,
    cfg: &EmbedConfig,
    seed: u64,
    trial: u64,
) -> Result<TimeSeriesDataset> {
    let max_lag = *cfg.lags.iter().max().ok_or(QmeeError::Empty("lags"))?;
    if cfg.lags.contains(&0) {
        return Err(invalid("lags", "lags must be positive"));
    }
    let total = cfg.washout + cfg.train + cfg.test;
    let needed = max_lag + total;
    if raw.len() < needed {
        return Err(QmeeError::InsufficientLength {
            needed,
            available: raw.len(),
        });
    }
    let inputs = DMatrix::from_fn(cfg.lags.len(), total, |r, s| raw[max_lag + s - cfg.lags[r]]);
    let clean_targets: Vec<f64> = raw[max_lag..max_lag + total].to_vec();
    let mut targets = clean_targets.clone();
    let train = cfg.washout..cfg.washout + cfg.train;
    let mut outliers = Vec::new();
    if let Some(spec) = noise {
        spec.validate()?;
        let mut rng = substream(seed, trial, Purpose::Noise);
        for t in &mut targets[train.clone()] {
            let draw = spec.sample(&mut rng);
            *t += draw.value;
            outliers.push(draw.outlier);
        }
    }
    Ok(TimeSeriesDataset {
        raw: raw.to_vec(),
        inputs,
        targets,
        clean_targets,
        origin: max_lag,
        washout: 0..cfg.washout,
        test: train.end..total,
        train,
        outliers,
    })
}

/// Per-feature affine map onto `[0, 1]` fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Fit on the columns of `rows` (`N x d`).
    pub fn fit(rows: &DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(QmeeError::Empty("training features"));
        }
        let mut min = Vec::with_capacity(rows.ncols());
        let mut max = Vec::with_capacity(rows.ncols());
        for (feature, col) in rows.column_iter().enumerate() {
            let lo = col.min();
            let hi = col.max();
            if !(hi > lo) {
                return Err(QmeeError::ZeroRange { feature });
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("scaler features", self.min.len(), rows.ncols())?;
        Ok(DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| {
            (rows[(i, j)] - self.min[j]) / (self.max[j] - self.min[j])
        }))
    }

    pub fn inverse_transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("scaler features", self.min.len(), rows.ncols())?;
        Ok(DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| {
            self.min[j] + rows[(i, j)] * (self.max[j] - self.min[j])
        }))
    }
}

/// Scales train and test features with the map fitted on train. Test values
/// outside the training range map outside `[0, 1]`; nothing is clipped.
pub fn minmax_normalize(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(train)?;
    Ok((scaler.transform(train)?, scaler.transform(test)?, scaler))
}

/// Column holding the regression target.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
    Last,
}

/// Reads a comma-separated numeric table with a header row.
///
/// Rows and columns in error messages are 1-based file lines and fields.
pub fn load_csv_dataset(path: &Path, target: &TargetColumn) -> Result<RegressionDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => QmeeError::Io(io),
            other => QmeeError::Csv {
                row: 1,
                column: 0,
                message: format!("{other:?}"),
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| QmeeError::Csv {
            row: 1,
            column: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let width = headers.len();
    let target_index = match target {
        TargetColumn::Name(name) => headers.iter().position(|h| h == name).ok_or_else(|| QmeeError::Csv {
            row: 1,
            column: 0,
            message: format!("no column named `{name}`"),
        })?,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => {
            return Err(QmeeError::Csv {
                row: 1,
                column: i + 1,
                message: format!("target column {} out of range for {width} columns", i + 1),
            })
        }
        TargetColumn::Last => width.checked_sub(1).ok_or(QmeeError::Empty("csv header"))?,
    };
    if width < 2 {
        return Err(QmeeError::Csv {
            row: 1,
            column: 0,
            message: "need at least one feature and one target column".into(),
        });
    }

    let mut features: Vec<f64> = Vec::new();
    let mut targets = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| QmeeError::Csv {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(QmeeError::Csv {
                row: line,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| QmeeError::Csv {
                row: line,
                column: j + 1,
                message: if cell.is_empty() {
                    "blank cell".into()
                } else {
                    format!("non-numeric cell `{cell}`")
                },
            })?;
            if !value.is_finite() {
                return Err(QmeeError::Csv {
                    row: line,
                    column: j + 1,
                    message: format!("non-finite cell `{cell}`"),
                });
            }
            if j == target_index {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if targets.is_empty() {
        return Err(QmeeError::Empty("csv data rows"));
    }
    let d = width - 1;
    let n = targets.len();
    let mut names = headers.clone();
    let target_name = names.remove(target_index);
    Ok(RegressionDataset {
        inputs: DMatrix::from_column_slice(d, n, &features),
        targets: DVector::from_vec(targets),
        true_omega: None,
        seed: None,
        feature_names: names,
        target_name,
    })
}

/// Writes features then target, one sample per row. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv_dataset(path: &Path, dataset: &RegressionDataset) -> Result<()> {
    check_dim("feature names", dataset.dim(), dataset.feature_names.len())?;
    let mut writer = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = dataset.feature_names.clone();
    header.push(dataset.target_name.clone());
    writer.write_record(&header).map_err(csv_io)?;
    for i in 0..dataset.len() {
        let mut row: Vec<String> = dataset.inputs.column(i).iter().map(|v| v.to_string()).collect();
        row.push(dataset.targets[i].to_string());
        writer.write_record(&row).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> QmeeError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => QmeeError::Io(io),
        other => QmeeError::Csv {
            row: 0,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn variance(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
    }

    fn draws(spec: &MixtureNoiseSpec, n: usize, seed: u64) -> Vec<NoiseDraw> {
        let mut rng = substream(seed, 0, Purpose::Noise);
        (0..n).map(|_| spec.sample(&mut rng)).collect()
    }

    #[test]
    fn gaussian_background_moments() {
        let spec = MixtureNoiseSpec {
            occurrence_prob: 0.0,
            ..MixtureNoiseSpec::regression_case(4).unwrap()
        };
        let v: Vec<f64> = draws(&spec, 100_000, 1).iter().map(|d| d.value).collect();
        assert!((variance(&v) - 1.0).abs() < 0.03);
    }

    #[test]
    fn pure_outlier_moments() {
        let spec = MixtureNoiseSpec {
            occurrence_prob: 1.0,
            ..MixtureNoiseSpec::regression_case(1).unwrap()
        };
        let v: Vec<f64> = draws(&spec, 100_000, 2).iter().map(|d| d.value).collect();
        assert!((variance(&v) / 10_000.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn gate_frequency() {
        let spec = MixtureNoiseSpec::time_series(0.1);
        let d = draws(&spec, 100_000, 3);
        let freq = d.iter().filter(|d| d.outlier).count() as f64 / d.len() as f64;
        assert!((freq - 0.2).abs() < 0.01);
        // three standard errors
        let se = (0.2f64 * 0.8 / 100_000.0).sqrt();
        assert!((freq - 0.2).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn binary_background_values() {
        let spec = MixtureNoiseSpec {
            occurrence_prob: 0.0,
            ..MixtureNoiseSpec::regression_case(3).unwrap()
        };
        for d in draws(&spec, 1000, 4) {
            assert!(d.value == 2.0 || d.value == -2.0);
        }
    }

    #[test]
    fn zero_noise_regression_is_exact() {
        let data = gen_linear_regression(50, &MixtureNoiseSpec::none(), 5).unwrap();
        let clean = data.inputs.tr_mul(data.true_omega.as_ref().unwrap());
        assert_eq!(clean, data.targets);
        assert!(data.inputs.iter().all(|v| (-2.0..=2.0).contains(v)));
        assert_eq!(data.dim(), 2);
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = MixtureNoiseSpec::regression_case(2).unwrap();
        let a = gen_linear_regression_trial(200, &spec, 9, 4).unwrap();
        let b = gen_linear_regression_trial(200, &spec, 9, 4).unwrap();
        let c = gen_linear_regression_trial(200, &spec, 9, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.targets, c.targets);
        assert!(MixtureNoiseSpec::regression_case(0).is_err());
    }

    #[test]
    fn mackey_glass_pure_decay() {
        let cfg = MackeyGlassConfig {
            b: 0.0,
            transient: 0.0,
            ..Default::default()
        };
        let series = gen_mackey_glass(60, &cfg).unwrap();
        for (t, &x) in series.iter().enumerate() {
            let exact = 1.2 * (-0.1 * t as f64).exp();
            assert_relative_eq!(x, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn mackey_glass_step_refinement() {
        let coarse = gen_mackey_glass(100, &MackeyGlassConfig::default()).unwrap();
        let fine = gen_mackey_glass(
            100,
            &MackeyGlassConfig {
                dt: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        let worst = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "max difference {worst}");
    }

    #[test]
    fn mackey_glass_is_aperiodic() {
        let series = gen_mackey_glass(1500, &MackeyGlassConfig::default()).unwrap();
        assert!(series.iter().all(|x| x.is_finite() && *x > 0.0 && *x < 2.0));
        let window = 500;
        for period in 1..=500 {
            let gap = (0..window)
                .map(|t| (series[t + period] - series[t]).abs())
                .fold(0.0, f64::max);
            assert!(gap > 1e-6, "series repeats with period {period}");
        }
    }

    #[test]
    fn mackey_glass_rejects_bad_step() {
        let cfg = MackeyGlassConfig {
            dt: 0.3,
            ..Default::default()
        };
        assert!(gen_mackey_glass(10, &cfg).is_err());
    }

    #[test]
    fn embedding_layout() {
        let raw: Vec<f64> = (0..1400).map(|t| t as f64).collect();
        let cfg = EmbedConfig::default();
        let ds = embed_and_split(&raw, None, &cfg, 0, 0).unwrap();
        assert_eq!(ds.train.len(), 900);
        assert_eq!(ds.test.len(), 400);
        assert_eq!(ds.washout, 0..50);
        for s in [0, 10, 949, 1349] {
            let t = 24 + s;
            assert_eq!(ds.targets[s], raw[t]);
            assert_eq!(
                ds.inputs.column(s).iter().copied().collect::<Vec<_>>(),
                vec![raw[t - 24], raw[t - 18], raw[t - 12], raw[t - 6]]
            );
        }
        assert!(matches!(
            embed_and_split(&raw[..1000], None, &cfg, 0, 0),
            Err(QmeeError::InsufficientLength { needed: 1374, .. })
        ));
    }

    #[test]
    fn embedding_noise_only_on_train() {
        let raw: Vec<f64> = (0..1400).map(|t| (t as f64 * 0.1).sin()).collect();
        let cfg = EmbedConfig::default();
        let ds = embed_and_split(&raw, Some(&MixtureNoiseSpec::time_series(0.2)), &cfg, 7, 0).unwrap();
        for s in ds.washout.clone().chain(ds.test.clone()) {
            assert_eq!(ds.targets[s], ds.clean_targets[s]);
        }
        assert!(ds.train.clone().all(|s| ds.targets[s] != ds.clean_targets[s]));
        assert_eq!(ds.outliers.len(), 900);
    }

    #[test]
    fn minmax_examples() {
        let train = DMatrix::from_column_slice(3, 1, &[0.0, 5.0, 10.0]);
        let test = DMatrix::from_column_slice(2, 1, &[-5.0, 20.0]);
        let (tr, te, scaler) = minmax_normalize(&train, &test).unwrap();
        assert_eq!(tr.as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!(te.as_slice(), &[-0.5, 2.0]);
        assert_relative_eq!(scaler.inverse_transform(&te).unwrap(), test, epsilon = 1e-12);

        let flat = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 3.0]);
        assert!(matches!(
            MinMaxScaler::fit(&flat),
            Err(QmeeError::ZeroRange { feature: 1 })
        ));
    }

    #[test]
    fn minmax_round_trip() {
        let data = gen_linear_system(40, &[1.0, -2.0, 0.5], 7.0, &MixtureNoiseSpec::none(), 3, 0).unwrap();
        let rows = data.feature_rows();
        let (scaled, _, scaler) = minmax_normalize(&rows, &rows).unwrap();
        assert!(scaled.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = scaler.inverse_transform(&scaled).unwrap();
        assert!((back - rows).amax() <= 1e-12);
    }

    #[test]
    fn csv_toy_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, "a,b,target\n1,2,3\n4,5,6\n7,8,9\n").unwrap();
        let ds = load_csv_dataset(&path, &TargetColumn::Name("target".into())).unwrap();
        assert_eq!(ds.inputs.shape(), (2, 3));
        assert_eq!(ds.targets.as_slice(), &[3.0, 6.0, 9.0]);
        assert_eq!(ds.inputs.column(1).as_slice(), &[4.0, 5.0]);
        let by_index = load_csv_dataset(&path, &TargetColumn::Index(0)).unwrap();
        assert_eq!(by_index.targets.as_slice(), &[1.0, 4.0, 7.0]);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let blank = dir.path().join("blank.csv");
        std::fs::write(&blank, "a,b,y\n1,2,3\n4,,6\n").unwrap();
        match load_csv_dataset(&blank, &TargetColumn::Last) {
            Err(QmeeError::Csv {
                row: 3,
                column: 2,
                message,
            }) => assert!(message.contains("blank")),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "a,b,y\n1,2,3\n4,5\n").unwrap();
        assert!(matches!(
            load_csv_dataset(&ragged, &TargetColumn::Last),
            Err(QmeeError::Csv { row: 3, .. })
        ));
        let text = dir.path().join("text.csv");
        std::fs::write(&text, "a,y\n1,x\n").unwrap();
        assert!(matches!(
            load_csv_dataset(&text, &TargetColumn::Last),
            Err(QmeeError::Csv { row: 2, column: 2, .. })
        ));
        assert!(matches!(
            load_csv_dataset(&dir.path().join("missing.csv"), &TargetColumn::Last),
            Err(QmeeError::Io(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.csv");
        let data = gen_linear_regression(30, &MixtureNoiseSpec::regression_case(1).unwrap(), 11).unwrap();
        write_csv_dataset(&path, &data).unwrap();
        let back = load_csv_dataset(&path, &TargetColumn::Last).unwrap();
        assert_eq!(back.inputs, data.inputs);
        assert_eq!(back.targets, data.targets);
        assert_eq!(back.feature_names, data.feature_names);
    }
}
