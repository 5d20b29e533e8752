//! Linear regression under MSE, MCC, MEE and QMEE.
//!
//! The kernel criteria are trained with the fixed-point map
//! `w_k = R(w_{k-1})^{-1} P(w_{k-1})` where
//!
//! ```text
//! R = sum_i sum_m M_m G(e_i - c_m) x_i x_i^T
//! P = sum_i sum_m M_m G(e_i - c_m) (y_i - c_m) x_i
//! ```
//!
//! MEE is the zero-threshold case and MCC pins the codebook to the single word
//! `0`. The codebook is rebuilt from scratch at every iteration and held fixed
//! while R and P are assembled.

use nalgebra::{DMatrix, DVector};

use crate::criteria::{check_epsilon, kernel_factors, ErrorVector, Gaussian, KernelWidth};
use crate::error::{check_dim, invalid, QmeeError, Result};
use crate::quantizer::{quantize_stream, Codebook};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub omega: DVector<f64>,
}

impl LinearModel {
    pub fn new(omega: DVector<f64>) -> Result<Self> {
        if let Some(index) = omega.iter().position(|w| !w.is_finite()) {
            return Err(QmeeError::NonFinite { what: "weights", index });
        }
        Ok(Self { omega })
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// `w^T x` for every column of `inputs`.
    pub fn predict(&self, inputs: &DMatrix<f64>) -> DVector<f64> {
        inputs.tr_mul(&self.omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    pub max_iterations: usize,
    pub sigma: KernelWidth,
    /// Quantization threshold; ignored by the MCC solver.
    pub epsilon: f64,
    /// Stop once `||w_k - w_{k-1}||_2` falls below this.
    pub convergence_tol: f64,
    /// Starting weights; zero when `None`.
    pub initial_omega: Option<DVector<f64>>,
    /// Diagonal jitter added to R before solving.
    pub ridge: f64,
}

impl FixedPointConfig {
    pub fn new(max_iterations: usize, sigma: KernelWidth, epsilon: f64) -> Self {
        Self {
            max_iterations,
            sigma,
            epsilon,
            convergence_tol: 1e-8,
            initial_omega: None,
            ridge: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "need at least one iteration"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(invalid("convergence_tol", "must be positive"));
        }
        if !(self.ridge >= 0.0) {
            return Err(invalid("ridge", "must be nonnegative"));
        }
        check_epsilon(self.epsilon)
    }
}

/// Per-iteration record of an iterative trainer.
///
/// `weights[k]` and `costs[k]` describe the iterate after `k` updates, so both
/// hold `iterations_used + 1` entries including the initial point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub weights: Vec<DVector<f64>>,
    pub costs: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// How the codebook is produced at each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodebookPolicy {
    /// Online quantization with the given threshold.
    Quantize(f64),
    /// A single fixed word carrying every sample.
    Pinned(f64),
}

impl CodebookPolicy {
    pub fn build(self, errors: &ErrorVector) -> Result<Codebook> {
        match self {
            CodebookPolicy::Quantize(eps) => Ok(quantize_stream(errors, eps)?.codebook),
            CodebookPolicy::Pinned(word) => Ok(Codebook::pinned(word, errors.len())),
        }
    }
}

fn check_problem(inputs: &DMatrix<f64>, targets: &DVector<f64>) -> Result<()> {
    check_dim("targets", inputs.ncols(), targets.len())?;
    if inputs.ncols() < inputs.nrows() {
        return Err(invalid(
            "inputs",
            format!("need at least d = {} samples, got {}", inputs.nrows(), inputs.ncols()),
        ));
    }
    Ok(())
}

/// Least squares `w = (X X^T)^{-1} X y` with samples in the columns of `X`.
pub fn solve_mse(inputs: &DMatrix<f64>, targets: &DVector<f64>) -> Result<LinearModel> {
    check_problem(inputs, targets)?;
    let gram = inputs * inputs.transpose();
    let rhs = inputs * targets;
    let omega = solve_symmetric(gram, &rhs).ok_or_else(|| QmeeError::Singular {
        context: format!("normal equations (rank-deficient {0}x{0} Gram matrix)", inputs.nrows()),
        iteration: None,
    })?;
    LinearModel::new(omega)
}

/// Cholesky solve; `None` when the matrix is not numerically positive definite.
pub(crate) fn solve_symmetric(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.cholesky()?.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `(R, P)` of the weighted normal equations for the current errors and codebook.
pub fn assemble_qmee_normal_system(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    errors: &ErrorVector,
    codebook: &Codebook,
    sigma: KernelWidth,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_dim("targets", inputs.ncols(), targets.len())?;
    check_dim("errors", inputs.ncols(), errors.len())?;
    if codebook.total_count() != errors.len() {
        return Err(QmeeError::CodebookMismatch {
            counts: codebook.total_count(),
            samples: errors.len(),
        });
    }
    let (weight, moment) = kernel_factors(errors.as_slice(), codebook, &Gaussian::new(sigma));
    Ok(normal_system(inputs, targets, errors.as_slice(), &weight, &moment))
}

/// With `s_i = sum_m M_m G_im` and `t_i = sum_m M_m G_im (e_i - c_m)`, the
/// quantity `sum_m M_m G_im (y_i - c_m)` equals `t_i + s_i (y_i - e_i)`.
fn normal_system(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    errors: &[f64],
    weight: &[f64],
    moment: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let d = inputs.nrows();
    let mut weighted = inputs.clone();
    let mut rhs_weight = DVector::zeros(inputs.ncols());
    for i in 0..inputs.ncols() {
        weighted.column_mut(i).scale_mut(weight[i]);
        rhs_weight[i] = moment[i] + weight[i] * (targets[i] - errors[i]);
    }
    let mut r = DMatrix::zeros(d, d);
    r.gemm(1.0, &weighted, &inputs.transpose(), 0.0);
    r.fill_lower_triangle_with_upper_triangle();
    let p = inputs * rhs_weight;
    (r, p)
}

/// Fixed-point engine shared by the linear and ELM trainers.
///
/// `design` is `d x N` with samples in columns.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fixed_point(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    sigma: KernelWidth,
    policy: CodebookPolicy,
    ridge: f64,
    max_iterations: usize,
    tol: f64,
    initial: DVector<f64>,
) -> Result<TrainTrace> {
    let g = Gaussian::new(sigma);
    let n = targets.len() as f64;
    let d = design.nrows();
    let mut omega = initial;
    let mut trace = TrainTrace::default();
    trace.weights.push(omega.clone());

    for k in 1..=max_iterations {
        let errors = ErrorVector::new((targets - design.tr_mul(&omega)).as_slice().to_vec()).map_err(|_| {
            QmeeError::Singular {
                context: "fixed-point iteration produced non-finite errors".into(),
                iteration: Some(k),
            }
        })?;
        let codebook = policy.build(&errors)?;
        let (weight, moment) = kernel_factors(errors.as_slice(), &codebook, &g);
        // cost of the iterate that produced these errors
        trace.costs.push(weight.iter().sum::<f64>() / (n * n));

        let (mut r, p) = normal_system(design, targets, errors.as_slice(), &weight, &moment);
        if ridge > 0.0 {
            for i in 0..d {
                r[(i, i)] += ridge;
            }
        }
        let next = solve_symmetric(r, &p).ok_or_else(|| QmeeError::Singular {
            context: "fixed-point normal matrix".into(),
            iteration: Some(k),
        })?;
        let step = (&next - &omega).norm();
        omega = next;
        trace.weights.push(omega.clone());
        trace.iterations_used = k;
        if step < tol {
            trace.converged = true;
            break;
        }
    }

    let errors =
        ErrorVector::new((targets - design.tr_mul(&omega)).as_slice().to_vec()).map_err(|_| QmeeError::Singular {
            context: "fixed-point iteration produced non-finite errors".into(),
            iteration: Some(trace.iterations_used),
        })?;
    let codebook = policy.build(&errors)?;
    let (weight, _) = kernel_factors(errors.as_slice(), &codebook, &g);
    trace.costs.push(weight.iter().sum::<f64>() / (n * n));
    Ok(trace)
}

fn run_linear(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    config: &FixedPointConfig,
    policy: CodebookPolicy,
) -> Result<(LinearModel, TrainTrace)> {
    config.validate()?;
    check_problem(inputs, targets)?;
    let initial = match &config.initial_omega {
        Some(w) => {
            check_dim("initial_omega", inputs.nrows(), w.len())?;
            w.clone()
        }
        None => DVector::zeros(inputs.nrows()),
    };
    let trace = fixed_point(
        inputs,
        targets,
        config.sigma,
        policy,
        config.ridge,
        config.max_iterations,
        config.convergence_tol,
        initial,
    )?;
    let model = LinearModel::new(trace.weights.last().expect("trace holds the initial point").clone())?;
    Ok((model, trace))
}

pub fn solve_fixed_point_qmee(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    config: &FixedPointConfig,
) -> Result<(LinearModel, TrainTrace)> {
    run_linear(inputs, targets, config, CodebookPolicy::Quantize(config.epsilon))
}

/// QMEE with a zero threshold; `config.epsilon` is ignored.
pub fn solve_fixed_point_mee(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    config: &FixedPointConfig,
) -> Result<(LinearModel, TrainTrace)> {
    run_linear(inputs, targets, config, CodebookPolicy::Quantize(0.0))
}

/// QMEE with the codebook pinned to `{0}`; `config.epsilon` is ignored.
pub fn solve_fixed_point_mcc(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    config: &FixedPointConfig,
) -> Result<(LinearModel, TrainTrace)> {
    run_linear(inputs, targets, config, CodebookPolicy::Pinned(0.0))
}

/// `sqrt(||w - w*||^2 / d)`.
pub fn rmse_weights(estimated: &LinearModel, target: &LinearModel) -> Result<f64> {
    check_dim("rmse weights", target.dim(), estimated.dim())?;
    Ok(((&estimated.omega - &target.omega).norm_squared() / target.dim() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{qmee_gradient_linear, qmee_potential};
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn width(s: f64) -> KernelWidth {
        KernelWidth::new(s).unwrap()
    }

    fn noiseless(seed: u64, n: usize, omega: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = seeded(seed);
        let d = omega.len();
        let x = DMatrix::from_fn(d, n, |_, _| rng.random_range(-2.0..2.0));
        let y = x.tr_mul(&DVector::from_column_slice(omega));
        (x, y)
    }

    #[test]
    fn mse_examples() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![2.0, 4.0]);
        assert_relative_eq!(solve_mse(&x, &y).unwrap().omega[0], 2.0, max_relative = 1e-14);

        let (x, y) = noiseless(1, 50, &[2.0, 1.0, -0.5]);
        let w = solve_mse(&x, &y).unwrap().omega;
        assert!((w - DVector::from_vec(vec![2.0, 1.0, -0.5])).amax() < 1e-10);
    }

    #[test]
    fn mse_singular_gram() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let err = solve_mse(&x, &y).unwrap_err();
        assert!(matches!(err, QmeeError::Singular { .. }));
        assert!(err.to_string().contains("rank-deficient"));
    }

    #[test]
    fn too_few_samples() {
        let x = DMatrix::zeros(3, 2);
        assert!(solve_mse(&x, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn assembly_matches_double_loop() {
        let mut rng = seeded(2);
        let (d, n) = (2, 5);
        let x = DMatrix::from_fn(d, n, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let w = DVector::from_vec(vec![0.4, -0.2]);
        let e = ErrorVector::from_linear(&x, &y, &w).unwrap();
        let cb = quantize_stream(&e, 0.5).unwrap().codebook;
        let s = 0.9;
        let (r, p) = assemble_qmee_normal_system(&x, &y, &e, &cb, width(s)).unwrap();

        let g = |v: f64| (-v * v / (2.0 * s * s)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * s);
        let mut r_ref = DMatrix::zeros(d, d);
        let mut p_ref = DVector::zeros(d);
        for i in 0..n {
            for (&c, &m) in cb.words().iter().zip(cb.counts()) {
                let lam = m as f64 * g(e.as_slice()[i] - c);
                assert!(lam <= m as f64 / ((2.0 * std::f64::consts::PI).sqrt() * s));
                for a in 0..d {
                    p_ref[a] += lam * (y[i] - c) * x[(a, i)];
                    for b in 0..d {
                        r_ref[(a, b)] += lam * x[(a, i)] * x[(b, i)];
                    }
                }
            }
        }
        assert!((&r - &r_ref).amax() <= 1e-12 * r_ref.amax());
        assert!((&p - &p_ref).amax() <= 1e-12 * p_ref.amax());
        assert_eq!(r, r.transpose());
    }

    #[test]
    fn uniform_weighting_limit() {
        let (x, mut y) = noiseless(3, 30, &[1.0, -1.0]);
        y.iter_mut().enumerate().for_each(|(i, v)| *v += (i as f64 * 0.7).sin());
        let e = ErrorVector::from_linear(&x, &y, &DVector::zeros(2)).unwrap();
        let cb = Codebook::pinned(0.0, 30);
        let s = width(1e6);
        let (r, p) = assemble_qmee_normal_system(&x, &y, &e, &cb, s).unwrap();
        let scale = 30.0 * s.peak();
        let gram = &x * x.transpose() * scale;
        let xy = &x * &y * scale;
        assert!((&r - &gram).amax() <= 1e-9 * gram.amax());
        assert!((&p - &xy).amax() <= 1e-9 * xy.amax());
    }

    #[test]
    fn noise_free_converges_fast() {
        let (x, y) = noiseless(4, 100, &[2.0, 1.0]);
        let cfg = FixedPointConfig::new(100, width(1.5), 0.3);
        let target = LinearModel::new(DVector::from_vec(vec![2.0, 1.0])).unwrap();
        for solve in [solve_fixed_point_qmee, solve_fixed_point_mee, solve_fixed_point_mcc] {
            let (model, trace) = solve(&x, &y, &cfg).unwrap();
            assert!(rmse_weights(&model, &target).unwrap() < 1e-10);
            assert!(trace.converged);
        }
        // correntropy weights give exact weighted least squares from the first step
        let (_, trace) = solve_fixed_point_mcc(&x, &y, &cfg).unwrap();
        assert!(trace.iterations_used <= 3, "took {}", trace.iterations_used);
        // the entropy criteria contract linearly from zero but stop at once from the exact fit
        let mut warm = cfg.clone();
        warm.initial_omega = Some(target.omega.clone());
        for solve in [solve_fixed_point_qmee, solve_fixed_point_mee] {
            let (_, trace) = solve(&x, &y, &warm).unwrap();
            assert!(trace.iterations_used <= 3, "took {}", trace.iterations_used);
        }
    }

    #[test]
    fn special_cases_collapse() {
        let mut rng = seeded(5);
        let (x, mut y) = noiseless(5, 80, &[2.0, 1.0]);
        y.iter_mut().for_each(|v| *v += rng.random_range(-1.0..1.0));
        let cfg = FixedPointConfig::new(20, width(1.1), 0.0);
        let (mee, mee_trace) = solve_fixed_point_mee(&x, &y, &cfg).unwrap();
        let (qmee, qmee_trace) = solve_fixed_point_qmee(&x, &y, &cfg).unwrap();
        assert_eq!(mee, qmee);
        assert_eq!(mee_trace, qmee_trace);

        let mut cfg = FixedPointConfig::new(20, width(3.0), 0.0);
        let (mcc, mcc_trace) = solve_fixed_point_mcc(&x, &y, &cfg).unwrap();
        cfg.epsilon = f64::INFINITY;
        // a pinned {0} codebook equals the infinite-threshold quantizer only when
        // the first error is 0, so compare against the engine directly
        let direct = fixed_point(
            &x,
            &y,
            cfg.sigma,
            CodebookPolicy::Pinned(0.0),
            0.0,
            20,
            1e-8,
            DVector::zeros(2),
        )
        .unwrap();
        assert_eq!(mcc_trace, direct);
        assert_eq!(&mcc.omega, direct.weights.last().unwrap());
    }

    #[test]
    fn fixed_point_is_stationary() {
        let mut rng = seeded(6);
        let (x, mut y) = noiseless(6, 150, &[2.0, 1.0]);
        y.iter_mut()
            .for_each(|v| *v += if rng.random_bool(0.5) { 2.0 } else { -2.0 });
        let cfg = FixedPointConfig::new(200, width(1.0), 0.3);
        let (model, trace) = solve_fixed_point_qmee(&x, &y, &cfg).unwrap();
        assert!(trace.converged);
        let e = ErrorVector::from_linear(&x, &y, &model.omega).unwrap();
        let cb = quantize_stream(&e, 0.3).unwrap().codebook;
        let (r, p) = assemble_qmee_normal_system(&x, &y, &e, &cb, cfg.sigma).unwrap();
        let residual = (&p - &r * &model.omega).norm();
        assert!(residual <= 10.0 * cfg.convergence_tol * p.norm(), "residual {residual}");
        let grad = qmee_gradient_linear(&e, &x, &cb, cfg.sigma).unwrap();
        assert!(grad.amax() < 1e-9, "gradient {grad}");
        assert_eq!(trace.costs.len(), trace.iterations_used + 1);
        assert_relative_eq!(
            *trace.costs.last().unwrap(),
            qmee_potential(&e, &cb, cfg.sigma).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn singular_iteration_reports_index() {
        // every input is zero so R vanishes
        let x = DMatrix::zeros(2, 10);
        let y = DVector::from_element(10, 1.0);
        let cfg = FixedPointConfig::new(5, width(1.0), 0.1);
        match solve_fixed_point_qmee(&x, &y, &cfg) {
            Err(QmeeError::Singular { iteration: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = cfg;
        cfg.ridge = 1e-3;
        assert!(solve_fixed_point_qmee(&x, &y, &cfg).is_ok());
    }

    #[test]
    fn config_validation() {
        let (x, y) = noiseless(7, 10, &[1.0]);
        let mut cfg = FixedPointConfig::new(0, width(1.0), 0.1);
        assert!(solve_fixed_point_qmee(&x, &y, &cfg).is_err());
        cfg.max_iterations = 3;
        cfg.convergence_tol = 0.0;
        assert!(solve_fixed_point_qmee(&x, &y, &cfg).is_err());
        cfg.convergence_tol = 1e-8;
        cfg.initial_omega = Some(DVector::zeros(3));
        assert!(matches!(
            solve_fixed_point_qmee(&x, &y, &cfg),
            Err(QmeeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rmse_examples() {
        let m = |v: &[f64]| LinearModel::new(DVector::from_column_slice(v)).unwrap();
        assert_eq!(rmse_weights(&m(&[2.0, 1.0]), &m(&[2.0, 1.0])).unwrap(), 0.0);
        assert_relative_eq!(
            rmse_weights(&m(&[3.0, 2.0]), &m(&[2.0, 1.0])).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            rmse_weights(&m(&[2.3, 0.6]), &m(&[2.0, 1.0])).unwrap(),
            0.353_553_390_593_273_8,
            max_relative = 1e-12
        );
        assert!(rmse_weights(&m(&[1.0]), &m(&[1.0, 2.0])).is_err());
    }
}
