//! Shared solver context: the problem, LP limits, the LP-call budget and run counters.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use relucert_kernel::model::{Problem, VariableLayout};
use relucert_kernel::store::NormalizedSystem;
use relucert_kernel::SparseRow;

use crate::lp::{self, LpError, LpLimits, SysFeasibility, SysOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("LP-call budget exhausted")]
    Budget,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Default)]
pub struct Counters {
    pub lp_calls: AtomicU64,
    pub gate_invocations: AtomicU64,
    pub gate_refinements: AtomicU64,
    pub stabilized_units: AtomicU64,
    pub splits: AtomicU64,
    pub lemmas: AtomicU64,
    pub clauses: AtomicU64,
    pub nodes: AtomicU64,
    pub tgct_rows: AtomicU64,
    /// Gate runs that exceeded |U| refinements or failed to exclude a prior point.
    pub gate_bound_violations: AtomicU64,
}

impl Counters {
    pub fn bump(counter: &AtomicU64, by: u64) {
        counter.fetch_add(by, Ordering::Relaxed);
    }

    pub fn get(counter: &AtomicU64) -> u64 {
        counter.load(Ordering::Relaxed)
    }
}

pub struct Engine<'p> {
    pub problem: &'p Problem,
    pub layout: VariableLayout,
    pub lp_limits: LpLimits,
    pub lp_budget: Option<u64>,
    pub counters: Counters,
}

impl<'p> Engine<'p> {
    pub fn new(problem: &'p Problem) -> Self {
        Engine {
            problem,
            layout: problem.layout(),
            lp_limits: LpLimits::default(),
            lp_budget: None,
            counters: Counters::default(),
        }
    }

    pub fn with_budget(mut self, budget: Option<u64>) -> Self {
        self.lp_budget = budget;
        self
    }

    fn charge(&self) -> Result<(), EngineError> {
        let used = self.counters.lp_calls.fetch_add(1, Ordering::Relaxed) + 1;
        match self.lp_budget {
            Some(b) if used > b => Err(EngineError::Budget),
            _ => Ok(()),
        }
    }

    pub fn lp_max(&self, sys: &NormalizedSystem, g: &SparseRow) -> Result<SysOutcome, EngineError> {
        self.charge()?;
        Ok(lp::lp_max(sys, g, self.lp_limits)?)
    }

    pub fn lp_min(&self, sys: &NormalizedSystem, g: &SparseRow) -> Result<SysOutcome, EngineError> {
        self.charge()?;
        Ok(lp::lp_min(sys, g, self.lp_limits)?)
    }

    pub fn lp_feasible(&self, sys: &NormalizedSystem) -> Result<SysFeasibility, EngineError> {
        self.charge()?;
        Ok(lp::lp_feasible(sys, self.lp_limits)?)
    }
}
