//! One module per task. Each `run` returns a finalized report whose rows are
//! in a fixed order regardless of how trials were scheduled.

pub mod elm;
pub mod esn;
pub mod linreg;
pub mod surface;
pub mod timing;

use std::time::Instant;

/// Runs `f` once and returns its result with the elapsed monotonic time.
pub(crate) fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

pub(crate) fn group_label(name: &str, value: impl std::fmt::Display) -> String {
    format!("{name}={value}")
}
