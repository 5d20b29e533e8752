//! Quantized minimum error entropy (QMEE).
//!
//! The quadratic information potential of a set of errors is a double sum of
//! Gaussian kernels over all error pairs, O(N^2). Quantizing the errors online
//! into a small codebook turns the inner sum into a sum over M code words,
//! giving an O(MN) cost that stays within `eps * exp(-1/2) / sigma` of the
//! exact value.
//!
//! Modules:
//! - [`criteria`]: MSE, correntropy, information potential and the quantized
//!   potential with its gradient.
//! - [`quantizer`]: the online codebook builder.
//! - [`solvers`]: fixed-point linear regression under MCC, MEE and QMEE.
//! - [`elm`]: extreme learning machine readout training.
//! - [`esn`]: echo state network with an RMSProp-trained QMEE readout.
//! - [`datagen`]: impulsive-noise regression data, Mackey-Glass series, CSV IO.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod datagen;
pub mod elm;
pub mod error;
pub mod esn;
pub mod quantizer;
pub mod rng;
pub mod solvers;

pub use criteria::{
    correntropy_cost, gaussian_kernel, information_potential, mse_cost, parzen_density, qmee_gradient_linear,
    qmee_large_sigma_approx, qmee_potential, qmee_weighted_form, CriterionKind, CriterionSpec, ErrorVector,
    KernelWidth,
};
pub use datagen::{MixtureNoiseSpec, RegressionDataset, TimeSeriesDataset};
pub use elm::{ElmModel, ElmTrainConfig};
pub use error::{QmeeError, Result};
pub use esn::{EsnModel, RmsPropConfig, StateCollection};
pub use quantizer::{nearest_word, quantize_stream, Codebook, QuantizationResult};
pub use solvers::{
    assemble_qmee_normal_system, rmse_weights, solve_fixed_point_mcc, solve_fixed_point_mee, solve_fixed_point_qmee,
    solve_mse, FixedPointConfig, LinearModel, TrainTrace,
};
