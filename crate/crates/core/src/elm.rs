//! Extreme learning machine: a random, frozen hidden layer and a trained
//! linear readout.
//!
//! Inputs are `N x d` (one sample per row) throughout this module, matching
//! the hidden matrix `H` whose row `i` is the hidden response to sample `i`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::criteria::{check_epsilon, KernelWidth};
use crate::error::{check_dim, invalid, QmeeError, Result};
use crate::rng::{substream, Purpose};
use crate::solvers::{fixed_point, solve_symmetric, CodebookPolicy, TrainTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    LogisticSigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LogisticSigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    /// `L x d`, row `j` is `w_j`.
    pub hidden_weights: DMatrix<f64>,
    pub hidden_biases: DVector<f64>,
    pub output_weights: DVector<f64>,
    pub activation: Activation,
}

/// `N x L` hidden responses.
pub type HiddenMatrix = DMatrix<f64>;

impl ElmModel {
    /// Random hidden layer with zero output weights.
    pub fn random(d: usize, hidden: usize, seed: u64, trial: u64) -> Result<Self> {
        let (hidden_weights, hidden_biases) = init_hidden_layer_trial(d, hidden, seed, trial)?;
        Ok(Self {
            hidden_weights,
            hidden_biases,
            output_weights: DVector::zeros(hidden),
            activation: Activation::LogisticSigmoid,
        })
    }

    pub fn hidden_nodes(&self) -> usize {
        self.hidden_biases.len()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_weights.ncols()
    }
}

/// Hidden weights and biases i.i.d. uniform on `[-1, 1]`.
pub fn init_hidden_layer(d: usize, hidden: usize, seed: u64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    init_hidden_layer_trial(d, hidden, seed, 0)
}

pub fn init_hidden_layer_trial(d: usize, hidden: usize, seed: u64, trial: u64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if d == 0 || hidden == 0 {
        return Err(invalid("hidden layer", "d and L must be at least 1"));
    }
    let mut rng = substream(seed, trial, Purpose::HiddenLayer);
    let weights = DMatrix::from_fn(hidden, d, |_, _| rng.random_range(-1.0..=1.0));
    let biases = DVector::from_fn(hidden, |_, _| rng.random_range(-1.0..=1.0));
    Ok((weights, biases))
}

pub fn hidden_map(model: &ElmModel, inputs: &DMatrix<f64>) -> Result<HiddenMatrix> {
    check_dim("elm input features", model.input_dim(), inputs.ncols())?;
    let mut h = inputs * model.hidden_weights.transpose();
    for mut row in h.row_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = model.activation.apply(*v + model.hidden_biases[j]);
        }
    }
    Ok(h)
}

/// `beta = (H^T H + lambda I)^{-1} H^T T`.
pub fn solve_relm(h: &HiddenMatrix, targets: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_dim("relm targets", h.nrows(), targets.len())?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "must be finite and nonnegative"));
    }
    let mut a = h.tr_mul(h);
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let b = h.tr_mul(targets);
    solve_symmetric(a, &b).ok_or_else(|| QmeeError::Singular {
        context: format!("H^T H + {lambda} I"),
        iteration: None,
    })
}

/// Ridge weight of the fixed-point readout from the regularization constant
/// of the entropy objective: `lambda' = 2 lambda N^2 sigma^2`.
pub fn lambda_prime(lambda: f64, n: usize, sigma: KernelWidth) -> f64 {
    let n = n as f64;
    2.0 * lambda * n * n * sigma.get() * sigma.get()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmTrainConfig {
    pub hidden_nodes: usize,
    /// Ridge term: `lambda` for RELM, `lambda'` for the fixed-point readouts.
    pub lambda: f64,
    pub max_iterations: usize,
    pub sigma: KernelWidth,
    pub epsilon: f64,
    pub convergence_tol: f64,
    pub seed: u64,
}

impl ElmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_nodes == 0 {
            return Err(invalid("hidden_nodes", "need at least one hidden node"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("lambda", "must be finite and nonnegative"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "need at least one iteration"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(invalid("convergence_tol", "must be positive"));
        }
        check_epsilon(self.epsilon)
    }
}

fn fixed_point_readout(
    h: &HiddenMatrix,
    targets: &DVector<f64>,
    config: &ElmTrainConfig,
    epsilon: f64,
) -> Result<(DVector<f64>, TrainTrace)> {
    config.validate()?;
    check_dim("elm targets", h.nrows(), targets.len())?;
    if targets.is_empty() {
        return Err(QmeeError::Empty("elm targets"));
    }
    let trace = fixed_point(
        &h.transpose(),
        targets,
        config.sigma,
        CodebookPolicy::Quantize(epsilon),
        config.lambda,
        config.max_iterations,
        config.convergence_tol,
        DVector::zeros(h.ncols()),
    )?;
    let beta = trace.weights.last().expect("trace holds the initial point").clone();
    Ok((beta, trace))
}

/// Fixed-point readout `beta_k = (A + lambda' I)^{-1} B` with `beta_0 = 0`;
/// `config.lambda` is `lambda'`.
pub fn solve_elm_qmee(
    h: &HiddenMatrix,
    targets: &DVector<f64>,
    config: &ElmTrainConfig,
) -> Result<(DVector<f64>, TrainTrace)> {
    fixed_point_readout(h, targets, config, config.epsilon)
}

/// [`solve_elm_qmee`] with a zero threshold; `config.epsilon` is ignored.
pub fn solve_elm_mee(
    h: &HiddenMatrix,
    targets: &DVector<f64>,
    config: &ElmTrainConfig,
) -> Result<(DVector<f64>, TrainTrace)> {
    fixed_point_readout(h, targets, config, 0.0)
}

pub fn elm_predict(model: &ElmModel, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_dim("elm output weights", model.hidden_nodes(), model.output_weights.len())?;
    Ok(hidden_map(model, inputs)? * &model.output_weights)
}

/// Shifts predictions by the mean training error (`target - output`), which
/// entropy criteria leave undetermined.
pub fn debias_shift_invariant(train_errors: &[f64], outputs: &DVector<f64>) -> DVector<f64> {
    if train_errors.is_empty() {
        return outputs.clone();
    }
    let shift = train_errors.iter().sum::<f64>() / train_errors.len() as f64;
    outputs.add_scalar(shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElmCriterion {
    Relm,
    Mee,
    Qmee,
}

impl ElmCriterion {
    pub fn shift_invariant(self) -> bool {
        !matches!(self, ElmCriterion::Relm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmFit {
    pub model: ElmModel,
    pub trace: Option<TrainTrace>,
    /// Added to raw predictions; nonzero only for shift-invariant criteria.
    pub shift: f64,
}

impl ElmFit {
    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(elm_predict(&self.model, inputs)?.add_scalar(self.shift))
    }
}

/// Builds the hidden layer from `config.seed` (trial `trial`), fits the readout
/// and, for MEE/QMEE, records the debiasing shift.
pub fn train_elm(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    criterion: ElmCriterion,
    config: &ElmTrainConfig,
    trial: u64,
) -> Result<ElmFit> {
    config.validate()?;
    check_dim("elm targets", inputs.nrows(), targets.len())?;
    let mut model = ElmModel::random(inputs.ncols(), config.hidden_nodes, config.seed, trial)?;
    let h = hidden_map(&model, inputs)?;
    let (beta, trace) = match criterion {
        ElmCriterion::Relm => (solve_relm(&h, targets, config.lambda)?, None),
        ElmCriterion::Mee => {
            let (b, t) = solve_elm_mee(&h, targets, config)?;
            (b, Some(t))
        }
        ElmCriterion::Qmee => {
            let (b, t) = solve_elm_qmee(&h, targets, config)?;
            (b, Some(t))
        }
    };
    let shift = if criterion.shift_invariant() {
        let residual = targets - &h * &beta;
        residual.mean()
    } else {
        0.0
    };
    model.output_weights = beta;
    Ok(ElmFit { model, trace, shift })
}

pub fn rmse(targets: &DVector<f64>, outputs: &DVector<f64>) -> Result<f64> {
    check_dim("rmse outputs", targets.len(), outputs.len())?;
    if targets.is_empty() {
        return Err(QmeeError::Empty("rmse targets"));
    }
    Ok(((targets - outputs).norm_squared() / targets.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    /// Mean held-out RMSE of every candidate, in input order.
    pub scores: Vec<f64>,
    pub best: usize,
}

/// k-fold cross-validation over candidate configurations. Fold membership is a
/// seeded shuffle shared by all candidates.
pub fn grid_search(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    criterion: ElmCriterion,
    candidates: &[ElmTrainConfig],
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    check_dim("cv targets", inputs.nrows(), targets.len())?;
    if candidates.is_empty() {
        return Err(QmeeError::Empty("grid candidates"));
    }
    let n = targets.len();
    if folds < 2 || folds > n {
        return Err(invalid("folds", format!("need 2 <= folds <= N = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, 0, Purpose::Split));

    let mut scores = Vec::with_capacity(candidates.len());
    for config in candidates {
        let mut total = 0.0;
        for fold in 0..folds {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| k % folds == fold);
            let held: Vec<usize> = held.into_iter().map(|k| order[k]).collect();
            let kept: Vec<usize> = kept.into_iter().map(|k| order[k]).collect();
            let fit = train_elm(
                &inputs.select_rows(&kept),
                &targets.select_rows(&kept),
                criterion,
                config,
                0,
            )?;
            let out = fit.predict(&inputs.select_rows(&held))?;
            total += rmse(&targets.select_rows(&held), &out)?;
        }
        scores.push(total / folds as f64);
    }
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty candidates");
    Ok(GridSearchResult { scores, best })
}
