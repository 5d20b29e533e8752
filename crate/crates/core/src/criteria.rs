//! Error-entropy family cost functions.
//!
//! All quantities use the normalized Gaussian kernel
//! `G_sigma(x) = exp(-x^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)`. The quadratic
//! information potential (IP) is the mean Parzen density of the errors at the
//! errors themselves; its quantized variant replaces the inner sum over samples
//! by a sum over code words weighted by their occupancy counts.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, QmeeError, Result};
use crate::quantizer::{quantize_stream, Codebook};

/// Exponent arguments below this evaluate to exactly zero.
pub const KERNEL_UNDERFLOW: f64 = -700.0;

/// Finite, nonempty sequence of prediction errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector(Vec<f64>);

impl ErrorVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(QmeeError::Empty("error vector"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(QmeeError::NonFinite {
                what: "error vector",
                index,
            });
        }
        Ok(Self(values))
    }

    /// Errors `y_i - w^T x_i` of a linear model with samples in columns.
    pub fn from_linear(inputs: &DMatrix<f64>, targets: &DVector<f64>, omega: &DVector<f64>) -> Result<Self> {
        check_dim("linear model inputs", omega.len(), inputs.nrows())?;
        check_dim("linear model targets", inputs.ncols(), targets.len())?;
        let fitted = inputs.tr_mul(omega);
        Self::new((targets - fitted).as_slice().to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ErrorVector {
    type Error = QmeeError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl TryFrom<&[f64]> for ErrorVector {
    type Error = QmeeError;

    fn try_from(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }
}

/// Gaussian kernel bandwidth, strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct KernelWidth(f64);

impl KernelWidth {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self(sigma))
        } else {
            Err(invalid(
                "sigma",
                format!("kernel width must be positive and finite, got {sigma}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Kernel peak `1 / (sqrt(2 pi) sigma)`, the supremum of every potential.
    pub fn peak(self) -> f64 {
        1.0 / ((2.0 * PI).sqrt() * self.0)
    }
}

/// Precomputed constants of `G_sigma`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Gaussian {
    norm: f64,
    inv_two_var: f64,
}

impl Gaussian {
    pub(crate) fn new(sigma: KernelWidth) -> Self {
        let s = sigma.get();
        Self {
            norm: sigma.peak(),
            inv_two_var: 1.0 / (2.0 * s * s),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let arg = -x * x * self.inv_two_var;
        if arg < KERNEL_UNDERFLOW {
            0.0
        } else {
            self.norm * arg.exp()
        }
    }
}

pub fn gaussian_kernel(x: f64, sigma: KernelWidth) -> f64 {
    Gaussian::new(sigma).eval(x)
}

/// Parzen estimate `(1/N) sum_j G(x - e_j)`.
pub fn parzen_density(x: f64, errors: &ErrorVector, sigma: KernelWidth) -> f64 {
    let g = Gaussian::new(sigma);
    let sum: f64 = errors.as_slice().iter().map(|&e| g.eval(x - e)).sum();
    sum / errors.len() as f64
}

/// Quadratic information potential, the O(N^2) double sum.
pub fn information_potential(errors: &ErrorVector, sigma: KernelWidth) -> f64 {
    let g = Gaussian::new(sigma);
    let e = errors.as_slice();
    let mut total = 0.0;
    for &ei in e {
        let mut row = 0.0;
        for &ej in e {
            row += g.eval(ei - ej);
        }
        total += row;
    }
    let n = e.len() as f64;
    total / (n * n)
}

fn check_counts(errors: &ErrorVector, codebook: &Codebook) -> Result<()> {
    let counts = codebook.total_count();
    if counts != errors.len() {
        return Err(QmeeError::CodebookMismatch {
            counts,
            samples: errors.len(),
        });
    }
    Ok(())
}

/// Quantized information potential `(1/N^2) sum_i sum_m M_m G(e_i - c_m)`, O(MN).
pub fn qmee_potential(errors: &ErrorVector, codebook: &Codebook, sigma: KernelWidth) -> Result<f64> {
    check_counts(errors, codebook)?;
    let g = Gaussian::new(sigma);
    let mut total = 0.0;
    for &e in errors.as_slice() {
        let mut row = 0.0;
        for (&c, &m) in codebook.words().iter().zip(codebook.counts()) {
            row += m as f64 * g.eval(e - c);
        }
        total += row;
    }
    let n = errors.len() as f64;
    Ok(total / (n * n))
}

/// Same value as [`qmee_potential`], computed as `sum_m alpha_m p(c_m)` with
/// `alpha_m = M_m / N`.
pub fn qmee_weighted_form(errors: &ErrorVector, codebook: &Codebook, sigma: KernelWidth) -> Result<f64> {
    check_counts(errors, codebook)?;
    Ok(codebook
        .weights()
        .iter()
        .zip(codebook.words())
        .map(|(alpha, &c)| alpha * parzen_density(c, errors, sigma))
        .sum())
}

/// Second-order expansion of the quantized potential for large kernel widths:
/// `peak - sum_m alpha_m mu_m / (2 sqrt(2 pi) sigma^3)` where `mu_m` is the
/// mean squared distance of the errors to code word `c_m`. Only accurate when
/// sigma dominates the error spread.
pub fn qmee_large_sigma_approx(errors: &ErrorVector, codebook: &Codebook, sigma: KernelWidth) -> Result<f64> {
    check_counts(errors, codebook)?;
    let n = errors.len() as f64;
    let s = sigma.get();
    let moment: f64 = codebook
        .weights()
        .iter()
        .zip(codebook.words())
        .map(|(alpha, &c)| {
            let mu = errors.as_slice().iter().map(|&e| (e - c) * (e - c)).sum::<f64>() / n;
            alpha * mu
        })
        .sum();
    Ok(sigma.peak() - moment / (2.0 * (2.0 * PI).sqrt() * s * s * s))
}

/// Per-sample factors `sum_m M_m G(e_i - c_m)` and `sum_m M_m G(e_i - c_m)(e_i - c_m)`.
///
/// Every quantized gradient and normal system in the crate reduces to these two
/// sums, so they are computed in a single pass over the codebook.
pub(crate) fn kernel_factors(errors: &[f64], codebook: &Codebook, g: &Gaussian) -> (Vec<f64>, Vec<f64>) {
    let mut weight = vec![0.0; errors.len()];
    let mut moment = vec![0.0; errors.len()];
    kernel_factors_into(errors, codebook, g, &mut weight, &mut moment);
    (weight, moment)
}

/// [`kernel_factors`] into caller-owned buffers of length N.
pub(crate) fn kernel_factors_into(
    errors: &[f64],
    codebook: &Codebook,
    g: &Gaussian,
    weight: &mut [f64],
    moment: &mut [f64],
) {
    let words = codebook.words();
    let counts: Vec<f64> = codebook.counts().iter().map(|&m| m as f64).collect();
    for ((&e, w_out), m_out) in errors.iter().zip(weight.iter_mut()).zip(moment.iter_mut()) {
        let (mut w, mut m1) = (0.0, 0.0);
        for (&c, &m) in words.iter().zip(&counts) {
            let k = m * g.eval(e - c);
            w += k;
            m1 += k * (e - c);
        }
        *w_out = w;
        *m_out = m1;
    }
}

/// Gradient of the quantized potential for `f(x) = w^T x`, codebook held fixed.
///
/// `inputs` is `d x N` with samples in columns and `errors` are the current
/// residuals `y_i - w^T x_i`. The result equals `(P - R w) / (N^2 sigma^2)`.
pub fn qmee_gradient_linear(
    errors: &ErrorVector,
    inputs: &DMatrix<f64>,
    codebook: &Codebook,
    sigma: KernelWidth,
) -> Result<DVector<f64>> {
    check_dim("gradient inputs/errors", errors.len(), inputs.ncols())?;
    check_counts(errors, codebook)?;
    let (_, moment) = kernel_factors(errors.as_slice(), codebook, &Gaussian::new(sigma));
    let n = errors.len() as f64;
    let s = sigma.get();
    let scale = 1.0 / (n * n * s * s);
    Ok(inputs * DVector::from_vec(moment) * scale)
}

pub fn mse_cost(errors: &ErrorVector) -> f64 {
    errors.as_slice().iter().map(|e| e * e).sum::<f64>() / errors.len() as f64
}

/// Empirical correntropy `(1/N) sum_i G(e_i)`, i.e. the Parzen density at zero.
pub fn correntropy_cost(errors: &ErrorVector, sigma: KernelWidth) -> f64 {
    parzen_density(0.0, errors, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriterionKind {
    Mse,
    Mcc,
    Mee,
    Qmee,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Mse => "MSE",
            CriterionKind::Mcc => "MCC",
            CriterionKind::Mee => "MEE",
            CriterionKind::Qmee => "QMEE",
        }
    }

    /// MSE is minimized; the three kernel criteria are maximized.
    pub fn maximize(self) -> bool {
        !matches!(self, CriterionKind::Mse)
    }
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CriterionKind {
    type Err = QmeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(CriterionKind::Mse),
            "mcc" => Ok(CriterionKind::Mcc),
            "mee" => Ok(CriterionKind::Mee),
            "qmee" => Ok(CriterionKind::Qmee),
            other => Err(invalid("criterion", format!("unknown criterion `{other}`"))),
        }
    }
}

/// A criterion together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionSpec {
    kind: CriterionKind,
    sigma: Option<KernelWidth>,
    epsilon: Option<f64>,
}

impl CriterionSpec {
    pub fn mse() -> Self {
        Self {
            kind: CriterionKind::Mse,
            sigma: None,
            epsilon: None,
        }
    }

    pub fn mcc(sigma: KernelWidth) -> Self {
        Self {
            kind: CriterionKind::Mcc,
            sigma: Some(sigma),
            epsilon: None,
        }
    }

    pub fn mee(sigma: KernelWidth) -> Self {
        Self {
            kind: CriterionKind::Mee,
            sigma: Some(sigma),
            epsilon: None,
        }
    }

    pub fn qmee(sigma: KernelWidth, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            kind: CriterionKind::Qmee,
            sigma: Some(sigma),
            epsilon: Some(epsilon),
        })
    }

    pub fn kind(&self) -> CriterionKind {
        self.kind
    }

    pub fn sigma(&self) -> Option<KernelWidth> {
        self.sigma
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Cost value of `errors`. QMEE quantizes the errors with its own threshold.
    pub fn evaluate(&self, errors: &ErrorVector) -> f64 {
        match (self.kind, self.sigma, self.epsilon) {
            (CriterionKind::Mse, _, _) => mse_cost(errors),
            (CriterionKind::Mcc, Some(s), _) => correntropy_cost(errors, s),
            (CriterionKind::Mee, Some(s), _) => information_potential(errors, s),
            (CriterionKind::Qmee, Some(s), Some(eps)) => {
                let q = quantize_stream(errors, eps).expect("epsilon validated at construction");
                qmee_potential(errors, &q.codebook, s).expect("codebook built from the same errors")
            }
            _ => unreachable!("constructors always set sigma for kernel criteria"),
        }
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "epsilon",
            format!("quantization threshold must be >= 0, got {epsilon}"),
        ))
    }
}
