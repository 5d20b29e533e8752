//! Acceptance criteria, run in order in a single process.
//!
//! Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 4 5`.

#![allow(clippy::field_reassign_with_default)]

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use qmee::datagen::{gen_sinc_regression, MixtureNoiseSpec};
use qmee::elm::{hidden_map, solve_elm_mee, solve_elm_qmee, solve_relm, ElmModel};
use qmee::esn::qmee_esn_gradient;
use qmee::rng::{substream, Purpose, StreamRng};
use qmee::{
    information_potential, qmee_gradient_linear, qmee_potential, qmee_weighted_form, quantize_stream, Codebook,
    ElmTrainConfig, ErrorVector, KernelWidth,
};
use qmee_cli::experiments::{esn, linreg, timing};
use qmee_cli::{run_task, ExperimentConfig, ExperimentReport, Task};
use rand::Rng;

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(instance: u64, purpose: Purpose) -> StreamRng {
    substream(SEED, instance, purpose)
}

/// Random error sample of length 1..=200 from one of several shapes,
/// including heavy ties and impulsive outliers.
fn random_errors(r: &mut StreamRng) -> ErrorVector {
    let n = r.random_range(1..=200);
    let shape = r.random_range(0..4);
    let scale = 10f64.powf(r.random_range(-2.0..1.5));
    let spec = MixtureNoiseSpec::regression_case(r.random_range(1..=4)).unwrap();
    let values = (0..n)
        .map(|_| match shape {
            0 => scale * r.random_range(-1.0..1.0),
            1 => spec.sample(r).value,
            2 => (r.random_range(-5..=5) as f64) * 0.5 * scale,
            _ => scale * r.random_range(0.0f64..1.0).powi(3),
        })
        .collect();
    ErrorVector::new(values).unwrap()
}

fn random_sigma(r: &mut StreamRng) -> KernelWidth {
    KernelWidth::new(10f64.powf(r.random_range(-1.3..1.3))).unwrap()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Instances shared by criteria 1 to 3: (errors, sigma, epsilon).
fn instances(purpose: Purpose, zero_threshold: bool) -> Vec<(ErrorVector, KernelWidth, f64)> {
    (0..1000)
        .map(|i| {
            let mut r = rng(i, purpose);
            let errors = random_errors(&mut r);
            let sigma = random_sigma(&mut r);
            let eps = if zero_threshold {
                0.0
            } else {
                10f64.powf(r.random_range(-3.0..0.5))
            };
            (errors, sigma, eps)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (errors, sigma, _) in instances(Purpose::Data, true) {
        let cb = quantize_stream(&errors, 0.0).unwrap().codebook;
        let q = qmee_potential(&errors, &cb, sigma).unwrap();
        worst = worst.max(rel_diff(q, information_potential(&errors, sigma)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 10.0,
        format!(
            "eps = 0 exactness over 1000 samples: max relative difference {worst:.2e} (<= 1e-12), {secs:.2} s (< 10 s)"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for (errors, sigma, eps) in instances(Purpose::Noise, false) {
        let cb = quantize_stream(&errors, eps).unwrap().codebook;
        let diff = (qmee_potential(&errors, &cb, sigma).unwrap() - information_potential(&errors, sigma)).abs();
        let bound = eps * (-0.5f64).exp() / sigma.get();
        if diff > bound {
            violations += 1;
        }
        tightest = tightest.max(diff / bound);
    }
    outcome(
        violations == 0,
        format!("|QMEE - IP| <= eps exp(-1/2) / sigma over 1000 triples: {violations} violations, largest diff/bound {tightest:.3}"),
    )
}

fn criterion_3() -> Outcome {
    let mut bound_violations = 0;
    let mut worst_identity: f64 = 0.0;
    let mut count = 0;
    for (errors, sigma, eps) in instances(Purpose::Data, true)
        .into_iter()
        .chain(instances(Purpose::Noise, false))
    {
        let cb = quantize_stream(&errors, eps).unwrap().codebook;
        for codebook in [cb, Codebook::pinned(0.0, errors.len())] {
            let q = qmee_potential(&errors, &codebook, sigma).unwrap();
            if q > sigma.peak() + 1e-12 {
                bound_violations += 1;
            }
            let w = qmee_weighted_form(&errors, &codebook, sigma).unwrap();
            worst_identity = worst_identity.max(rel_diff(q, w));
            count += 1;
        }
    }
    outcome(
        bound_violations == 0 && worst_identity <= 1e-12,
        format!(
            "{count} instances: QMEE <= 1/(sqrt(2 pi) sigma) violated {bound_violations} times; weighted-form identity max relative difference {worst_identity:.2e} (<= 1e-12)"
        ),
    )
}

fn linreg_config(case: u8, criteria: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.trials = 100;
    cfg.linreg.n = 200;
    cfg.linreg.max_iterations = 100;
    cfg.linreg.cases = vec![case];
    cfg.linreg.criteria = criteria.iter().map(|s| s.to_string()).collect();
    cfg
}

fn mean_rmse(report: &ExperimentReport, group: &str, criterion: &str) -> f64 {
    report
        .aggregate(group, criterion, "rmse")
        .and_then(|r| r.value)
        .unwrap_or(f64::NAN)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let report = linreg::run(&linreg_config(1, &["mse", "qmee"])).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let q = mean_rmse(&report, "case=1", "qmee");
    let m = mean_rmse(&report, "case=1", "mse");
    outcome(
        (0.02..=0.10).contains(&q) && (0.6..=2.0).contains(&m) && secs < 300.0,
        format!("case 1, 100 trials: QMEE mean RMSE {q:.4} in [0.02, 0.10], MSE mean RMSE {m:.4} in [0.6, 2.0], {secs:.1} s (< 300 s)"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let report = linreg::run(&linreg_config(3, &["qmee"])).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let q = mean_rmse(&report, "case=3", "qmee");
    let worst = report
        .trial_rows("case=3", "qmee", "rmse")
        .filter_map(|r| r.value)
        .fold(0.0, f64::max);
    outcome(
        q < 5e-3 && secs < 300.0,
        format!("case 3, 100 trials: QMEE mean RMSE {q:.3e} (< 5e-3), worst trial {worst:.3e}, {secs:.1} s (< 300 s)"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.timing.n_values = vec![500, 1000, 2000, 4000, 8000];
    cfg.timing.mode = "evaluate".into();
    let report = timing::run(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let slope = |c: &str| {
        report
            .summary("all", c, "time_loglog_slope")
            .and_then(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    let max_m = report
        .rows
        .iter()
        .filter(|r| r.metric == "codebook_size")
        .filter_map(|r| r.value)
        .fold(0.0, f64::max);
    let (ip, q) = (slope("mee"), slope("qmee"));
    outcome(
        (1.7..=2.3).contains(&ip) && (0.8..=1.3).contains(&q) && max_m < 50.0 && secs < 600.0,
        format!("log-log slopes over N = 500..8000: IP {ip:.3} in [1.7, 2.3], QMEE {q:.3} in [0.8, 1.3], max M = {max_m} (< 50), {secs:.1} s (< 600 s)"),
    )
}

fn central_difference(f: impl Fn(&DVector<f64>) -> f64, w: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(w.len(), |j, _| {
        let h = 1e-6 * w[j].abs().max(1.0);
        let mut up = w.clone();
        let mut down = w.clone();
        up[j] += h;
        down[j] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

fn criterion_7() -> Outcome {
    let mut worst_linear: f64 = 0.0;
    let mut worst_esn: f64 = 0.0;
    for i in 0..100 {
        let mut r = rng(i, Purpose::Shuffle);
        let d = r.random_range(1..=5);
        let n = r.random_range(d.max(5)..=60);
        let sigma = KernelWidth::new(r.random_range(0.3..3.0)).unwrap();
        let eps = r.random_range(0.0..0.5);
        let x = DMatrix::from_fn(d, n, |_, _| r.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| r.random_range(-2.0..2.0));
        let w = DVector::from_fn(d, |_, _| r.random_range(-1.0..1.0));
        let errors_at = |w: &DVector<f64>| ErrorVector::new((&y - x.tr_mul(w)).as_slice().to_vec()).unwrap();
        let cb = quantize_stream(&errors_at(&w), eps).unwrap().codebook;
        let analytic = qmee_gradient_linear(&errors_at(&w), &x, &cb, sigma).unwrap();
        let fd = central_difference(|w| qmee_potential(&errors_at(w), &cb, sigma).unwrap(), &w);
        worst_linear = worst_linear.max((&analytic - &fd).amax() / fd.amax().max(f64::MIN_POSITIVE));

        // Readout over reservoir-like features in (-1, 1).
        let dim = r.random_range(2..=12);
        let phi = DMatrix::from_fn(dim, n, |_, _| r.random_range(-1.0f64..1.0).tanh());
        let t = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
        let w = DVector::from_fn(dim, |_, _| r.random_range(-0.5..0.5));
        let errors_at = |w: &DVector<f64>| ErrorVector::new((&t - phi.tr_mul(w)).as_slice().to_vec()).unwrap();
        let cb = quantize_stream(&errors_at(&w), eps).unwrap().codebook;
        let analytic = qmee_esn_gradient(&w, &phi, &t, &cb, sigma).unwrap();
        let fd = central_difference(|w| qmee_potential(&errors_at(w), &cb, sigma).unwrap(), &w);
        worst_esn = worst_esn.max((&analytic - &fd).amax() / fd.amax().max(f64::MIN_POSITIVE));
    }
    outcome(
        worst_linear <= 1e-5 && worst_esn <= 1e-5,
        format!("100 instances each, codebook frozen: max |analytic - fd| / |fd|_inf linear {worst_linear:.2e}, ESN readout {worst_esn:.2e} (<= 1e-5)"),
    )
}

fn criterion_8() -> Outcome {
    let mut identical = 0;
    let total = 20;
    for trial in 0..total {
        let data = gen_sinc_regression(150, &MixtureNoiseSpec::regression_case(4).unwrap(), SEED, trial).unwrap();
        let model = ElmModel::random(1, 12, SEED, trial).unwrap();
        let h = hidden_map(&model, &data.feature_rows()).unwrap();
        let cfg = ElmTrainConfig {
            hidden_nodes: 12,
            lambda: 1e-3,
            max_iterations: 30,
            sigma: KernelWidth::new(1.0).unwrap(),
            epsilon: 0.0,
            convergence_tol: 1e-8,
            seed: SEED,
        };
        let (_, q) = solve_elm_qmee(&h, &data.targets, &cfg).unwrap();
        let (_, m) = solve_elm_mee(&h, &data.targets, &ElmTrainConfig { epsilon: 0.7, ..cfg }).unwrap();
        let bits = |t: &qmee::TrainTrace| -> Vec<u64> { t.weights.iter().flatten().map(|v| v.to_bits()).collect() };
        if bits(&q) == bits(&m) && q.weights.len() == m.weights.len() && q.weights.len() > 1 {
            identical += 1;
        }
    }
    outcome(
        identical == total,
        format!("ELM-QMEE(eps = 0) and ELM-MEE beta trajectories bit-identical on {identical} of {total} seeded sinc problems"),
    )
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let mut r = rng(i, Purpose::Split);
        let n = r.random_range(20..=200);
        let d = r.random_range(1..=6);
        let l = r.random_range(2..=30);
        let lambda = 10f64.powf(r.random_range(-4.0..1.0));
        let inputs = DMatrix::from_fn(n, d, |_, _| r.random_range(0.0..1.0));
        let t = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
        let model = ElmModel::random(d, l, SEED, i).unwrap();
        let h = hidden_map(&model, &inputs).unwrap();
        let beta = solve_relm(&h, &t, lambda).unwrap();
        let grad = h.tr_mul(&(&h * &beta - &t)) * 2.0 + &beta * (2.0 * lambda);
        worst = worst.max(grad.amax());
    }
    outcome(
        worst <= 1e-8,
        format!("gradient of |H beta - T|^2 + lambda |beta|^2 at the RELM solution, 100 instances: max |grad| {worst:.2e} (<= 1e-8)"),
    )
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.trials = 10;
    cfg.esn.alphas = vec![0.2];
    cfg.esn.ridge_lambda = vec![0.01];
    cfg.esn.mee_sigma = vec![0.07];
    cfg.esn.qmee_sigma = vec![0.7];
    cfg.esn.qmee_epsilon = vec![0.01];
    cfg.esn.criteria = ["ls", "mee", "qmee"].map(String::from).to_vec();
    let report = esn::run(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let med = |c: &str| {
        report
            .summary("alpha=0.2", c, "nrmse_median")
            .and_then(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    let ratio = report
        .summary("alpha=0.2", "mee/qmee", "time_ratio")
        .and_then(|r| r.value)
        .unwrap_or(f64::NAN);
    let (q, ls, m) = (med("qmee"), med("ls"), med("mee"));
    let failures = report.rows.iter().filter(|r| r.failure.is_some()).count();
    outcome(
        q < ls && ratio > 10.0 && secs < 900.0 && failures == 0,
        format!(
            "alpha = 0.2, 10 runs: median NRMSE QMEE {q:.4} < LS {ls:.4} (MEE {m:.4}); training time ratio MEE/QMEE {ratio:.2} (> 10); {failures} failed runs; {secs:.1} s (< 900 s)"
        ),
    )
}

fn run_all_small(out: &Path, threads: usize) {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 77;
    cfg.trials = 3;
    cfg.threads = threads;
    cfg.linreg.n = 60;
    cfg.elm.n_train = 80;
    cfg.elm.n_test = 40;
    cfg.esn.alphas = vec![0.3];
    cfg.esn.ridge_lambda = vec![0.1];
    cfg.esn.mee_sigma = vec![0.08];
    cfg.esn.qmee_sigma = vec![0.7];
    cfg.esn.qmee_epsilon = vec![0.02];
    cfg.esn.reservoir_size = 60;
    cfg.esn.sparsity = 0.05;
    cfg.esn.train = 200;
    cfg.esn.test = 100;
    cfg.esn.epochs = 40;
    cfg.timing.n_values = vec![100, 200];
    cfg.timing.min_duration_s = 0.0;
    cfg.surface.n = 50;
    cfg.surface.grid_size = 21;
    for task in [Task::Linreg, Task::Elm, Task::Esn, Task::Timing, Task::Surface] {
        run_task(task, &cfg, out).unwrap();
    }
}

fn csv_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

/// Files of `b` that differ from `a` modulo wall times. With `rows_only` the
/// embedded configuration headers are not compared.
fn mismatches(a: &Path, b: &Path, rows_only: bool) -> Vec<String> {
    let mut out = Vec::new();
    for name in csv_names(a) {
        let (pa, pb) = (a.join(&name), b.join(&name));
        let same = match ExperimentReport::read_csv(&pa) {
            Ok(ra) => {
                let rb = ExperimentReport::read_csv(&pb).unwrap();
                let (sa, sb) = (ra.without_wall_times(), rb.without_wall_times());
                if rows_only {
                    sa.rows == sb.rows
                } else {
                    sa.to_csv_string().unwrap() == sb.to_csv_string().unwrap()
                }
            }
            // Surface grids are plain tables without a report header.
            Err(_) => std::fs::read(&pa).unwrap() == std::fs::read(&pb).unwrap(),
        };
        if !same {
            out.push(name);
        }
    }
    out
}

fn criterion_11() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    run_all_small(dirs[0].path(), 1);
    run_all_small(dirs[1].path(), 1);
    run_all_small(dirs[2].path(), 3);
    let count = csv_names(dirs[0].path()).len();
    let rerun = mismatches(dirs[0].path(), dirs[1].path(), false);
    let threads = mismatches(dirs[0].path(), dirs[2].path(), true);
    outcome(
        rerun.is_empty() && threads.is_empty() && count >= 9,
        format!(
            "all five tasks rerun, {count} CSV files compared modulo wall times: identical config mismatches {rerun:?}; 1 vs 3 worker threads row mismatches {threads:?}"
        ),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = Vec::new();
    for (id, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let result = check();
        println!(
            "criterion {id:>2}: {}  {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
