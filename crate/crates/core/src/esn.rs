//! Echo state network with a fixed sparse reservoir and a linear readout.
//!
//! States follow `x(k) = tanh(W_x x(k-1) + W_in u(k))` from `x(0) = 0` with no
//! output feedback. The readout sees `phi(k) = (u(k); x(k))` and is trained by
//! least squares or by RMSProp ascent on the quantized information potential.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::criteria::{check_epsilon, kernel_factors, kernel_factors_into, Gaussian, KernelWidth};
use crate::error::{check_dim, invalid, QmeeError, Result};
use crate::quantizer::{quantize_values, Codebook};
use crate::rng::{substream, Purpose};
use crate::solvers::{solve_symmetric, TrainTrace};

const MAX_RESERVOIR_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirConfig {
    pub inputs: usize,
    pub size: usize,
    pub spectral_radius: f64,
    /// Fraction of nonzero entries in `W_x`.
    pub sparsity: f64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            inputs: 4,
            size: 400,
            spectral_radius: 0.95,
            sparsity: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsnModel {
    /// `L x P`
    pub w_in: DMatrix<f64>,
    /// `L x L`
    pub w_x: DMatrix<f64>,
    /// `Q x (P + L)`
    pub w_out: DMatrix<f64>,
    pub spectral_radius: f64,
    pub sparsity: f64,
}

impl EsnModel {
    /// Random reservoir with a zero single-output readout.
    pub fn new(config: &ReservoirConfig, seed: u64, trial: u64) -> Result<Self> {
        let (w_in, w_x) = build_reservoir_trial(config, seed, trial)?;
        Ok(Self {
            w_out: DMatrix::zeros(1, config.inputs + config.size),
            w_in,
            w_x,
            spectral_radius: config.spectral_radius,
            sparsity: config.sparsity,
        })
    }

    pub fn inputs(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn size(&self) -> usize {
        self.w_x.nrows()
    }

    pub fn diagnostics(&self) -> ReservoirDiagnostics {
        ReservoirDiagnostics::of(&self.w_x)
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone_owned()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// The configured radius is what gets enforced; the echo-state literature also
/// cites `sigma_max < 1`, which a radius of 0.95 does not imply, so both are
/// reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirDiagnostics {
    pub spectral_radius: f64,
    pub max_singular_value: f64,
}

impl ReservoirDiagnostics {
    pub fn of(w_x: &DMatrix<f64>) -> Self {
        Self {
            spectral_radius: spectral_radius(w_x),
            max_singular_value: w_x.singular_values().max(),
        }
    }
}

/// `(W_in, W_x)` with `W_in` dense uniform on `[-1, 1]` and `W_x` holding
/// exactly `round(sparsity * L^2)` uniform entries, rescaled to the target
/// spectral radius.
pub fn build_reservoir(
    p: usize,
    l: usize,
    spectral_radius: f64,
    sparsity: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    build_reservoir_trial(
        &ReservoirConfig {
            inputs: p,
            size: l,
            spectral_radius,
            sparsity,
        },
        seed,
        0,
    )
}

pub fn build_reservoir_trial(config: &ReservoirConfig, seed: u64, trial: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, l) = (config.inputs, config.size);
    if p == 0 || l == 0 {
        return Err(invalid("reservoir", "P and L must be at least 1"));
    }
    if !(config.spectral_radius > 0.0) || !config.spectral_radius.is_finite() {
        return Err(invalid("spectral_radius", "must be positive"));
    }
    if !(config.sparsity > 0.0 && config.sparsity <= 1.0) {
        return Err(invalid("sparsity", "must lie in (0, 1]"));
    }
    let mut rng = substream(seed, trial, Purpose::Reservoir);
    let w_in = DMatrix::from_fn(l, p, |_, _| rng.random_range(-1.0..=1.0));
    let cells = l * l;
    let nonzeros = ((config.sparsity * cells as f64).round() as usize).clamp(1, cells);
    for _ in 0..MAX_RESERVOIR_ATTEMPTS {
        let mut w_x = DMatrix::zeros(l, l);
        for cell in index::sample(&mut rng, cells, nonzeros) {
            let mut v = 0.0;
            while v == 0.0 {
                v = rng.random_range(-1.0..=1.0);
            }
            w_x[(cell % l, cell / l)] = v;
        }
        let radius = spectral_radius(&w_x);
        // nilpotent draws (common for very sparse matrices) cannot be rescaled
        if radius > 1e-8 {
            w_x *= config.spectral_radius / radius;
            return Ok((w_in, w_x));
        }
    }
    Err(QmeeError::DegenerateReservoir {
        attempts: MAX_RESERVOIR_ATTEMPTS,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateCollection {
    /// `(P + L) x T`, column `k` is `phi(k)`.
    pub phi: DMatrix<f64>,
    /// Leading columns excluded from training.
    pub washout: usize,
}

impl StateCollection {
    pub fn len(&self) -> usize {
        self.phi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.ncols() == 0
    }

    /// Copy of the columns in `range`.
    pub fn columns(&self, range: Range<usize>) -> Result<DMatrix<f64>> {
        if range.start < self.washout || range.end > self.len() || range.is_empty() {
            return Err(invalid(
                "state range",
                format!("{range:?} must be nonempty and within {}..{}", self.washout, self.len()),
            ));
        }
        Ok(self.phi.columns(range.start, range.len()).into_owned())
    }
}

/// Drives the reservoir with the columns of `inputs` (`P x T`).
pub fn run_reservoir(model: &EsnModel, inputs: &DMatrix<f64>, washout: usize) -> Result<StateCollection> {
    check_dim("reservoir inputs", model.inputs(), inputs.nrows())?;
    let (p, l) = (model.inputs(), model.size());
    let t = inputs.ncols();
    let drive = &model.w_in * inputs;
    let mut phi = DMatrix::zeros(p + l, t);
    let mut x = DVector::zeros(l);
    let mut next = DVector::zeros(l);
    for k in 0..t {
        next.copy_from(&drive.column(k));
        next.gemv(1.0, &model.w_x, &x, 1.0);
        next.apply(|v| *v = v.tanh());
        std::mem::swap(&mut x, &mut next);
        phi.view_mut((0, k), (p, 1)).copy_from(&inputs.column(k));
        phi.view_mut((p, k), (l, 1)).copy_from(&x);
    }
    Ok(StateCollection { phi, washout })
}

/// Least-squares readout over the columns of `phi`.
///
/// With `ridge > 0` this solves `(X X^T + ridge I) w = X y` by Cholesky. With
/// `ridge = 0` it solves the plain problem through a QR factorization of
/// `X^T`, which avoids squaring the condition number of reservoir states.
pub fn solve_esn_ls(phi: &DMatrix<f64>, targets: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    check_dim("esn targets", phi.ncols(), targets.len())?;
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(invalid("ridge", "must be finite and nonnegative"));
    }
    let singular = || QmeeError::Singular {
        context: format!("readout Gram matrix with ridge {ridge}"),
        iteration: None,
    };
    if ridge > 0.0 {
        let mut gram = phi * phi.transpose();
        for i in 0..gram.nrows() {
            gram[(i, i)] += ridge;
        }
        return solve_symmetric(gram, &(phi * targets)).ok_or_else(singular);
    }
    let dim = phi.nrows();
    if phi.ncols() < dim {
        return Err(singular());
    }
    let qr = phi.transpose().qr();
    let r = qr.r();
    let largest = r.diagonal().amax();
    let floor = largest * f64::EPSILON * phi.ncols() as f64;
    if !(largest > 0.0) || r.diagonal().iter().any(|d| d.abs() <= floor) {
        return Err(singular());
    }
    let rhs = qr.q().tr_mul(targets);
    r.solve_upper_triangular(&rhs)
        .filter(|w| w.iter().all(|v| v.is_finite()))
        .ok_or_else(singular)
}

/// Ascent direction of the quantized potential for one readout row, codebook
/// frozen: `(1/(N^2 sigma^2)) sum_k sum_m M_m G(e_k - c_m)(e_k - c_m) phi(k)`.
pub fn qmee_esn_gradient(
    w_out_row: &DVector<f64>,
    phi: &DMatrix<f64>,
    targets: &DVector<f64>,
    codebook: &Codebook,
    sigma: KernelWidth,
) -> Result<DVector<f64>> {
    check_dim("readout row", phi.nrows(), w_out_row.len())?;
    check_dim("esn targets", phi.ncols(), targets.len())?;
    if codebook.total_count() != targets.len() {
        return Err(QmeeError::CodebookMismatch {
            counts: codebook.total_count(),
            samples: targets.len(),
        });
    }
    let errors = targets - phi.tr_mul(w_out_row);
    let (_, moment) = kernel_factors(errors.as_slice(), codebook, &Gaussian::new(sigma));
    let n = targets.len() as f64;
    let s = sigma.get();
    Ok(phi * DVector::from_vec(moment) / (n * n * s * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// One update per epoch from the gradient summed over all samples.
    #[default]
    FullBatch,
    /// One update per sample in a shuffled order; the codebook is still built
    /// once per epoch.
    PerSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropConfig {
    pub eta: f64,
    pub rho: f64,
    pub r: f64,
    pub epochs: usize,
    pub sigma: KernelWidth,
    pub epsilon: f64,
    /// Drives the per-sample shuffle.
    pub seed: u64,
    pub mode: GradientMode,
    /// Starting readout; zero when `None`.
    pub initial: Option<DVector<f64>>,
}

impl RmsPropConfig {
    pub fn new(eta: f64, epochs: usize, sigma: KernelWidth, epsilon: f64) -> Self {
        Self {
            eta,
            rho: 0.9,
            r: 1e-6,
            epochs,
            sigma,
            epsilon,
            seed: 0,
            mode: GradientMode::FullBatch,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(invalid("eta", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid("rho", "must lie in [0, 1)"));
        }
        if !(self.r > 0.0) {
            return Err(invalid("r", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "need at least one epoch"));
        }
        check_epsilon(self.epsilon)
    }
}

/// RMSProp on `J = -I_Q`: per epoch the errors and codebook are rebuilt, then
/// `v = rho v + (1 - rho) g^2` and `w += eta g / sqrt(v + r)` with `g` the
/// ascent direction. `trace.costs[k]` is the potential after `k` epochs.
pub fn train_esn_qmee(
    phi: &DMatrix<f64>,
    targets: &DVector<f64>,
    config: &RmsPropConfig,
) -> Result<(DVector<f64>, TrainTrace)> {
    config.validate()?;
    check_dim("esn targets", phi.ncols(), targets.len())?;
    if targets.is_empty() {
        return Err(QmeeError::Empty("esn targets"));
    }
    let dim = phi.nrows();
    let mut w = match &config.initial {
        Some(w0) => {
            check_dim("initial readout", dim, w0.len())?;
            w0.clone()
        }
        None => DVector::zeros(dim),
    };
    let g = Gaussian::new(config.sigma);
    let n = targets.len() as f64;
    let s = config.sigma.get();
    let scale = 1.0 / (n * n * s * s);
    let mut v = DVector::zeros(dim);
    let mut grad = DVector::zeros(dim);
    let mut errors = targets.clone();
    let mut weight = DVector::zeros(targets.len());
    let mut moment = DVector::zeros(targets.len());
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut shuffle = substream(config.seed, 0, Purpose::Shuffle);
    let mut trace = TrainTrace {
        weights: vec![w.clone()],
        ..Default::default()
    };

    for epoch in 0..=config.epochs {
        residuals_forward(phi, targets, &w, &mut errors);
        if !errors.iter().all(|e| e.is_finite()) {
            trace.costs.push(f64::NAN);
            return Err(QmeeError::Diverged {
                epoch,
                trace: Box::new(trace),
            });
        }
        let codebook = quantize_values(errors.as_slice(), config.epsilon);
        kernel_factors_into(
            errors.as_slice(),
            &codebook,
            &g,
            weight.as_mut_slice(),
            moment.as_mut_slice(),
        );
        let cost = weight.iter().sum::<f64>() / (n * n);
        trace.costs.push(cost);
        if !cost.is_finite() {
            return Err(QmeeError::Diverged {
                epoch,
                trace: Box::new(trace),
            });
        }
        if epoch == config.epochs {
            break;
        }

        match config.mode {
            GradientMode::FullBatch => {
                weighted_sum_reverse(phi, &moment, scale, &mut grad);
                rmsprop_step(&mut w, &mut v, &grad, config);
            }
            GradientMode::PerSample => {
                order.shuffle(&mut shuffle);
                for &k in &order {
                    let col = phi.column(k);
                    let e = targets[k] - col.dot(&w);
                    let m1: f64 = codebook
                        .words()
                        .iter()
                        .zip(codebook.counts())
                        .map(|(&c, &m)| m as f64 * g.eval(e - c) * (e - c))
                        .sum();
                    grad.copy_from(&col);
                    grad *= m1 * scale;
                    rmsprop_step(&mut w, &mut v, &grad, config);
                }
            }
        }
        trace.weights.push(w.clone());
        trace.iterations_used = epoch + 1;
    }
    Ok((w, trace))
}

/// [`train_esn_qmee`] with a zero threshold; `config.epsilon` is ignored.
pub fn train_esn_mee(
    phi: &DMatrix<f64>,
    targets: &DVector<f64>,
    config: &RmsPropConfig,
) -> Result<(DVector<f64>, TrainTrace)> {
    train_esn_qmee(
        phi,
        targets,
        &RmsPropConfig {
            epsilon: 0.0,
            ..config.clone()
        },
    )
}

// The two passes over `phi` per epoch run in opposite column orders so each
// starts on the columns the previous one left in cache.
fn residuals_forward(phi: &DMatrix<f64>, targets: &DVector<f64>, w: &DVector<f64>, out: &mut DVector<f64>) {
    let rows = phi.nrows();
    let w = w.as_slice();
    for ((col, &t), e) in phi
        .as_slice()
        .chunks_exact(rows)
        .zip(targets.iter())
        .zip(out.iter_mut())
    {
        *e = t - dot(col, w);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn weighted_sum_reverse(phi: &DMatrix<f64>, coeffs: &DVector<f64>, scale: f64, out: &mut DVector<f64>) {
    let rows = phi.nrows();
    out.fill(0.0);
    let acc = out.as_mut_slice();
    for (col, &c) in phi.as_slice().chunks_exact(rows).zip(coeffs.iter()).rev() {
        for (a, &x) in acc.iter_mut().zip(col) {
            *a += c * x;
        }
    }
    for a in acc.iter_mut() {
        *a *= scale;
    }
}

fn rmsprop_step(w: &mut DVector<f64>, v: &mut DVector<f64>, grad: &DVector<f64>, config: &RmsPropConfig) {
    for ((wi, vi), &gi) in w.iter_mut().zip(v.iter_mut()).zip(grad.iter()) {
        *vi = config.rho * *vi + (1.0 - config.rho) * gi * gi;
        *wi += config.eta * gi / (*vi + config.r).sqrt();
    }
}

/// `sqrt(sum (t - y)^2 / (N var(t)))` with the population variance of `t`.
pub fn nrmse(targets: &[f64], outputs: &[f64]) -> Result<f64> {
    check_dim("nrmse outputs", targets.len(), outputs.len())?;
    if targets.is_empty() {
        return Err(QmeeError::Empty("nrmse targets"));
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(QmeeError::ZeroVariance);
    }
    let sse: f64 = targets.iter().zip(outputs).map(|(t, y)| (t - y) * (t - y)).sum();
    Ok((sse / (n * var)).sqrt())
}
