//! Per-thread work counters.
//!
//! Solvers bump these as they run so callers can verify how much dynamic
//! programming a training loop actually performed. Counters are thread-local:
//! concurrent tests never observe each other's work.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

thread_local! {
    static SOFT_VI_SOLVES: Cell<u64> = const { Cell::new(0) };
    static OPERATOR_BUILDS: Cell<u64> = const { Cell::new(0) };
    static FACTORIZATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Snapshot of the counters on the current thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub soft_vi_solves: u64,
    pub operator_builds: u64,
    pub factorizations: u64,
}

impl Counts {
    /// Work performed between `earlier` and `self`.
    pub fn since(&self, earlier: &Counts) -> Counts {
        Counts {
            soft_vi_solves: self.soft_vi_solves - earlier.soft_vi_solves,
            operator_builds: self.operator_builds - earlier.operator_builds,
            factorizations: self.factorizations - earlier.factorizations,
        }
    }
}

pub fn snapshot() -> Counts {
    Counts {
        soft_vi_solves: SOFT_VI_SOLVES.with(Cell::get),
        operator_builds: OPERATOR_BUILDS.with(Cell::get),
        factorizations: FACTORIZATIONS.with(Cell::get),
    }
}

pub(crate) fn record_soft_vi_solve() {
    SOFT_VI_SOLVES.with(|c| c.set(c.get() + 1));
}

pub(crate) fn record_operator_build() {
    OPERATOR_BUILDS.with(|c| c.set(c.get() + 1));
}

pub(crate) fn record_factorization() {
    FACTORIZATIONS.with(|c| c.set(c.get() + 1));
}
