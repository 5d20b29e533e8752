//! Experiment configuration.
//!
//! One TOML file per run: common keys at the top level and one table per
//! task. Every key has a default, so an empty file is a valid configuration.
//! Per-case and per-alpha parameters are arrays indexed like `cases` and
//! `alphas`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    /// Worker threads for trials; 0 lets the pool decide.
    pub threads: usize,
    pub linreg: LinregConfig,
    pub elm: ElmConfig,
    pub esn: EsnConfig,
    pub timing: TimingConfig,
    pub surface: SurfaceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            threads: 0,
            linreg: LinregConfig::default(),
            elm: ElmConfig::default(),
            esn: EsnConfig::default(),
            timing: TimingConfig::default(),
            surface: SurfaceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Linreg,
    Elm,
    Esn,
    Timing,
    Surface,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Linreg => "linreg",
            Task::Elm => "elm",
            Task::Esn => "esn",
            Task::Timing => "timing",
            Task::Surface => "surface",
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub n: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                Self::parse(&text)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_owned()))
    }

    /// Applies overrides; `n` maps to the sample-size key of `task`.
    pub fn apply(&mut self, task: Task, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(trials) = o.trials {
            self.trials = trials;
        }
        if let Some(n) = o.n {
            match task {
                Task::Linreg => self.linreg.n = n,
                Task::Elm => self.elm.n_train = n,
                Task::Esn => self.esn.train = n,
                Task::Timing => self.timing.n_values = vec![n],
                Task::Surface => self.surface.n = n,
            }
        }
    }

    pub fn validate(&self, task: Task) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        match task {
            Task::Linreg => self.linreg.validate(),
            Task::Elm => self.elm.validate(),
            Task::Esn => self.esn.validate(),
            Task::Timing => self.timing.validate(),
            Task::Surface => self.surface.validate(),
        }
    }

    /// The full configuration with defaults expanded.
    pub fn resolved(&self, task: Task) -> String {
        let mut text = format!("task = \"{}\"\n", task.name());
        text.push_str(&toml::to_string(self).expect("config serializes"));
        text
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg.into()))
    }
}

fn check_criteria(list: &[String], allowed: &[&str], section: &str) -> Result<(), CliError> {
    check(!list.is_empty(), format!("{section}.criteria must not be empty"))?;
    for c in list {
        check(
            allowed.contains(&c.as_str()),
            format!("{section}.criteria: unknown `{c}` (expected one of {allowed:?})"),
        )?;
    }
    Ok(())
}

fn check_positive(values: &[f64], name: &str) -> Result<(), CliError> {
    check(
        values.iter().all(|v| *v > 0.0 && v.is_finite()),
        format!("{name} entries must be positive"),
    )
}

/// Linear regression under impulsive noise, one table row per case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinregConfig {
    pub n: usize,
    /// Noise cases 1..=4; case 0 is noise-free and uses the case 1 settings.
    pub cases: Vec<u8>,
    pub criteria: Vec<String>,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    /// Indexed by case - 1.
    pub mcc_sigma: Vec<f64>,
    pub mee_sigma: Vec<f64>,
    pub qmee_sigma: Vec<f64>,
    pub qmee_epsilon: Vec<f64>,
}

impl Default for LinregConfig {
    fn default() -> Self {
        Self {
            n: 200,
            cases: vec![1, 2, 3, 4],
            criteria: ["mse", "mcc", "mee", "qmee"].map(String::from).to_vec(),
            max_iterations: 100,
            convergence_tol: 1e-8,
            mcc_sigma: vec![10.0, 15.0, 8.0, 2.8],
            mee_sigma: vec![1.1, 1.1, 0.7, 0.6],
            qmee_sigma: vec![1.5, 1.5, 1.0, 4.0],
            qmee_epsilon: vec![0.3, 0.3, 0.3, 0.1],
        }
    }
}

impl LinregConfig {
    fn validate(&self) -> Result<(), CliError> {
        check(self.n >= 2, "linreg.n must be at least 2")?;
        check(self.max_iterations >= 1, "linreg.max_iterations must be at least 1")?;
        check(self.convergence_tol > 0.0, "linreg.convergence_tol must be positive")?;
        check(!self.cases.is_empty(), "linreg.cases must not be empty")?;
        check(self.cases.iter().all(|c| *c <= 4), "linreg.cases entries must be 0..=4")?;
        check_criteria(&self.criteria, &["mse", "mcc", "mee", "qmee"], "linreg")?;
        for (name, v) in [
            ("linreg.mcc_sigma", &self.mcc_sigma),
            ("linreg.mee_sigma", &self.mee_sigma),
            ("linreg.qmee_sigma", &self.qmee_sigma),
        ] {
            check(v.len() == 4, format!("{name} needs 4 entries"))?;
            check_positive(v, name)?;
        }
        check(self.qmee_epsilon.len() == 4, "linreg.qmee_epsilon needs 4 entries")?;
        check(
            self.qmee_epsilon.iter().all(|e| *e >= 0.0),
            "linreg.qmee_epsilon entries must be nonnegative",
        )
    }
}

/// ELM regression on the synthetic sinc task or a user CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElmConfig {
    /// CSV dataset; the synthetic sinc task when absent.
    pub dataset: Option<PathBuf>,
    /// Target column name; the last column when absent.
    pub target: Option<String>,
    /// Fraction of CSV rows used for training.
    pub train_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Impulsive noise case (1..=4) added to synthetic training targets; 0 for none.
    pub noise_case: u8,
    pub criteria: Vec<String>,
    pub hidden_nodes: usize,
    pub relm_lambda: f64,
    /// Ridge of the fixed-point readouts.
    pub lambda_prime: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    /// Offset estimator for the MEE/QMEE predictions: `mean` or `median` of
    /// the training errors.
    pub shift: String,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            target: None,
            train_fraction: 0.7,
            n_train: 500,
            n_test: 500,
            noise_case: 4,
            criteria: ["relm", "mee", "qmee"].map(String::from).to_vec(),
            hidden_nodes: 20,
            relm_lambda: 1e-3,
            lambda_prime: 1.0,
            sigma: 1.0,
            epsilon: 0.1,
            max_iterations: 100,
            convergence_tol: 1e-8,
            shift: "mean".into(),
        }
    }
}

impl ElmConfig {
    fn validate(&self) -> Result<(), CliError> {
        check(self.hidden_nodes >= 1, "elm.hidden_nodes must be at least 1")?;
        check(
            self.n_train >= 2 && self.n_test >= 1,
            "elm.n_train >= 2 and elm.n_test >= 1 required",
        )?;
        check(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "elm.train_fraction must lie in (0, 1)",
        )?;
        check(self.noise_case <= 4, "elm.noise_case must be 0..=4")?;
        check_criteria(&self.criteria, &["relm", "mee", "qmee"], "elm")?;
        check(self.relm_lambda >= 0.0, "elm.relm_lambda must be nonnegative")?;
        check(self.lambda_prime >= 0.0, "elm.lambda_prime must be nonnegative")?;
        check_positive(&[self.sigma], "elm.sigma")?;
        check(self.epsilon >= 0.0, "elm.epsilon must be nonnegative")?;
        check(self.max_iterations >= 1, "elm.max_iterations must be at least 1")?;
        check(self.convergence_tol > 0.0, "elm.convergence_tol must be positive")?;
        check(
            self.shift == "mean" || self.shift == "median",
            "elm.shift must be `mean` or `median`",
        )
    }
}

/// Echo state network on the Mackey-Glass series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnConfig {
    pub alphas: Vec<f64>,
    /// Add impulsive noise to the training targets.
    pub noise: bool,
    pub criteria: Vec<String>,
    pub train: usize,
    pub test: usize,
    pub washout: usize,
    pub lags: Vec<usize>,
    pub reservoir_size: usize,
    pub spectral_radius: f64,
    pub sparsity: f64,
    /// Indexed like `alphas`.
    pub ridge_lambda: Vec<f64>,
    pub mee_sigma: Vec<f64>,
    pub qmee_sigma: Vec<f64>,
    pub qmee_epsilon: Vec<f64>,
    pub eta: f64,
    pub epochs: usize,
    pub rho: f64,
    pub r: f64,
    pub mg_dt: f64,
    pub mg_transient: f64,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.1, 0.2, 0.3, 0.4],
            noise: true,
            criteria: ["ls", "ridge", "mee", "qmee"].map(String::from).to_vec(),
            train: 900,
            test: 400,
            washout: 50,
            lags: vec![24, 18, 12, 6],
            reservoir_size: 400,
            spectral_radius: 0.95,
            sparsity: 0.01,
            ridge_lambda: vec![0.01, 0.01, 0.1, 0.1],
            mee_sigma: vec![0.06, 0.07, 0.08, 0.08],
            qmee_sigma: vec![0.8, 0.7, 0.7, 0.7],
            qmee_epsilon: vec![0.07, 0.01, 0.02, 0.03],
            eta: 1e-3,
            epochs: 500,
            rho: 0.9,
            r: 1e-6,
            mg_dt: 0.1,
            mg_transient: 100.0,
        }
    }
}

impl EsnConfig {
    fn validate(&self) -> Result<(), CliError> {
        let k = self.alphas.len();
        check(k >= 1, "esn.alphas must not be empty")?;
        check_criteria(&self.criteria, &["ls", "ridge", "mee", "qmee"], "esn")?;
        for (name, v) in [
            ("esn.ridge_lambda", &self.ridge_lambda),
            ("esn.mee_sigma", &self.mee_sigma),
            ("esn.qmee_sigma", &self.qmee_sigma),
            ("esn.qmee_epsilon", &self.qmee_epsilon),
        ] {
            check(v.len() == k, format!("{name} needs one entry per alpha ({k})"))?;
        }
        check_positive(&self.ridge_lambda, "esn.ridge_lambda")?;
        check_positive(&self.mee_sigma, "esn.mee_sigma")?;
        check_positive(&self.qmee_sigma, "esn.qmee_sigma")?;
        check(
            self.qmee_epsilon.iter().all(|e| *e >= 0.0),
            "esn.qmee_epsilon entries must be nonnegative",
        )?;
        check(
            self.train >= 1 && self.test >= 1,
            "esn.train and esn.test must be positive",
        )?;
        check(!self.lags.is_empty(), "esn.lags must not be empty")?;
        check(self.reservoir_size >= 1, "esn.reservoir_size must be at least 1")?;
        check(self.epochs >= 1, "esn.epochs must be at least 1")?;
        check(self.eta > 0.0, "esn.eta must be positive")?;
        check((0.0..1.0).contains(&self.rho), "esn.rho must lie in [0, 1)")?;
        check(self.r > 0.0, "esn.r must be positive")
    }
}

/// Wall time against sample size for the O(N^2) and O(MN) criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub n_values: Vec<usize>,
    /// `evaluate` times one criterion evaluation on a fixed error sample;
    /// `train` times fixed-point training on linear regression data.
    pub mode: String,
    pub repeats: usize,
    /// Each measurement repeats the timed call until this much time has passed.
    pub min_duration_s: f64,
    pub sigma: f64,
    pub epsilon: f64,
    /// Noise case of the errors (`evaluate`) or the data (`train`); 0 means
    /// standard normal errors.
    pub noise_case: u8,
    pub max_iterations: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            n_values: vec![500, 1000, 2000, 4000, 8000],
            mode: "evaluate".into(),
            repeats: 3,
            min_duration_s: 0.05,
            sigma: 1.0,
            epsilon: 0.3,
            noise_case: 0,
            max_iterations: 10,
        }
    }
}

impl TimingConfig {
    fn validate(&self) -> Result<(), CliError> {
        check(!self.n_values.is_empty(), "timing.n_values must not be empty")?;
        check(
            self.n_values.windows(2).all(|w| w[0] < w[1]),
            "timing.n_values must be strictly ascending",
        )?;
        check(self.n_values[0] >= 2, "timing.n_values entries must be at least 2")?;
        check(
            self.mode == "evaluate" || self.mode == "train",
            "timing.mode must be `evaluate` or `train`",
        )?;
        check(self.repeats >= 1, "timing.repeats must be at least 1")?;
        check(self.min_duration_s >= 0.0, "timing.min_duration_s must be nonnegative")?;
        check_positive(&[self.sigma], "timing.sigma")?;
        check(self.epsilon >= 0.0, "timing.epsilon must be nonnegative")?;
        check(self.noise_case <= 4, "timing.noise_case must be 0..=4")?;
        check(self.max_iterations >= 1, "timing.max_iterations must be at least 1")
    }
}

/// Cost surfaces of every criterion over a lattice of linear weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub n: usize,
    /// 0 for noise-free data.
    pub noise_case: u8,
    pub grid_size: usize,
    pub w1_range: [f64; 2],
    pub w2_range: [f64; 2],
    pub criteria: Vec<String>,
    pub mcc_sigma: f64,
    pub mee_sigma: f64,
    pub qmee_sigma: f64,
    pub qmee_epsilon: f64,
    pub contour_levels: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            n: 200,
            noise_case: 1,
            grid_size: 101,
            w1_range: [0.0, 4.0],
            w2_range: [-1.0, 3.0],
            criteria: ["mse", "mcc", "mee", "qmee"].map(String::from).to_vec(),
            mcc_sigma: 10.0,
            mee_sigma: 1.1,
            qmee_sigma: 1.5,
            qmee_epsilon: 0.3,
            contour_levels: 12,
        }
    }
}

impl SurfaceConfig {
    fn validate(&self) -> Result<(), CliError> {
        check(self.n >= 2, "surface.n must be at least 2")?;
        check(self.noise_case <= 4, "surface.noise_case must be 0..=4")?;
        check(self.grid_size >= 2, "surface.grid_size must be at least 2")?;
        check(
            self.w1_range[0] < self.w1_range[1] && self.w2_range[0] < self.w2_range[1],
            "surface ranges must be increasing",
        )?;
        check_criteria(&self.criteria, &["mse", "mcc", "mee", "qmee"], "surface")?;
        check_positive(&[self.mcc_sigma, self.mee_sigma, self.qmee_sigma], "surface sigmas")?;
        check(self.qmee_epsilon >= 0.0, "surface.qmee_epsilon must be nonnegative")?;
        check(self.contour_levels >= 1, "surface.contour_levels must be at least 1")
    }
}
