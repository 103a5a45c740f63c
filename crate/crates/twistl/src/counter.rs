use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

/// Machine-independent work counters.
#[derive(Debug, Default)]
pub struct EvalCounter {
    lift_evals: AtomicU64,
    lift_derivative_evals: AtomicU64,
    char_evals: AtomicU64,
}

/// Plain snapshot of an [`EvalCounter`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CounterSnapshot {
    pub lift_evals: u64,
    pub lift_deriv_evals: u64,
    pub char_evals: u64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_lift(&self, n: u64) {
        self.lift_evals.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_derivatives(&self, n: u64) {
        self.lift_derivative_evals.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_chars(&self, n: u64) {
        self.char_evals.fetch_add(n, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            lift_evals: self.lift_evals.load(Ordering::Relaxed),
            lift_deriv_evals: self.lift_derivative_evals.load(Ordering::Relaxed),
            char_evals: self.char_evals.load(Ordering::Relaxed),
        }
    }
}
