//! Exactness gate: exact ReLU semantics on a growing subset `S` of the
//! unstable units, decided by DPLL over phase literals with LP theory checks.

use relucert_kernel::certs::{GuardedCertificate, RowRef};
use relucert_kernel::model::{validate_witness, Problem, Region, UnitId, VariableLayout};
use relucert_kernel::store::{
    guard_rows, GuardLiteral, NormalizedSystem, Origin, Phase, PhaseAssignment, RowId, Store,
};
use relucert_kernel::Rational;
use thiserror::Error;

use crate::emit::GateNode;
use crate::engine::{Counters, Engine, EngineError};
use crate::learn::Knowledge;
use crate::lp::SysFeasibility;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeferReason {
    /// An exact-feasible point exists that is not a counterexample.
    ExactNonCounterexample,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateOutcome {
    Sat(Vec<Rational>),
    Prune(GateNode),
    Defer(DeferReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateReport {
    pub outcome: GateOutcome,
    pub refinements: usize,
    pub unstable: usize,
    /// Refinements whose new unit was checked to exclude the previous point.
    pub eliminations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GateError {
    #[error("violation set is empty")]
    EmptyViolationSet,
}

/// `|ẑ − max(0, ŝ)|` for each unit, in the order given.
pub fn residuals(layout: &VariableLayout, point: &[Rational], units: &[UnitId]) -> Vec<(UnitId, Rational)> {
    units
        .iter()
        .map(|u| {
            let s = &point[layout.unit_s(*u)];
            let z = &point[layout.unit_z(*u)];
            let relu = s.clone().max(Rational::zero());
            (*u, (z - &relu).abs())
        })
        .collect()
}

/// Units with a strictly positive residual.
pub fn violation_set(layout: &VariableLayout, point: &[Rational], units: &[UnitId]) -> Vec<(UnitId, Rational)> {
    residuals(layout, point, units).into_iter().filter(|(_, r)| r.is_positive()).collect()
}

/// The unit of largest residual; ties go to the earliest unit in `(layer, neuron)` order.
pub fn select_violated(v: &[(UnitId, Rational)]) -> Result<UnitId, GateError> {
    let mut best: Option<&(UnitId, Rational)> = None;
    for e in v {
        best = match best {
            Some(b) if b.1 > e.1 || (b.1 == e.1 && b.0 < e.0) => Some(b),
            _ => Some(e),
        };
    }
    best.map(|b| b.0).ok_or(GateError::EmptyViolationSet)
}

pub enum ExactResult {
    Unsat(GateNode),
    Model { point: Vec<Rational> },
    Limit,
}

struct Dpll<'a, 'p> {
    engine: &'a Engine<'p>,
    store: &'a Store,
    base: NormalizedSystem,
    units: &'a [UnitId],
    region: &'a Region,
    alpha: &'a PhaseAssignment,
    knowledge: &'a Knowledge,
    calls: u64,
    budget: Option<u64>,
}

impl Dpll<'_, '_> {
    fn guard_id(&self, depth: usize, k: usize) -> RowId {
        RowId::pos(self.store.len() + 3 * depth + k)
    }

    fn system(&self, path: &[GuardLiteral]) -> NormalizedSystem {
        let mut sys = self.base.clone();
        for (d, lit) in path.iter().enumerate() {
            for (k, (row, rhs)) in guard_rows(self.store.layout(), *lit).into_iter().enumerate() {
                sys.push(self.guard_id(d, k), row, rhs);
            }
        }
        sys
    }

    fn to_ref(&self, id: RowId, path: &[GuardLiteral]) -> RowRef {
        if id.constraint < self.store.len() {
            RowRef::Store(id)
        } else {
            let off = id.constraint - self.store.len();
            RowRef::Guard { literal: path[off / 3], k: off % 3 }
        }
    }

    fn solve(&mut self, path: &mut Vec<GuardLiteral>) -> Result<ExactResult, EngineError> {
        let mut assigned = self.alpha.clone();
        for l in path.iter() {
            assigned.assign(*l);
        }
        if let Some(index) = self.knowledge.find_clause(self.region, &assigned) {
            let guards = self.knowledge.clause(index).expect("clause exists").guards;
            return Ok(ExactResult::Unsat(GateNode::Clause { index, guards }));
        }
        if self.budget.is_some_and(|b| self.calls >= b) {
            return Ok(ExactResult::Limit);
        }
        self.calls += 1;
        let point = match self.engine.lp_feasible(&self.system(path))? {
            SysFeasibility::Infeasible(f) => {
                let lambda = f.lambda.iter().map(|(r, l)| (self.to_ref(*r, path), l.clone())).collect();
                return Ok(ExactResult::Unsat(GateNode::Infeasible(GuardedCertificate {
                    guards: path.clone(),
                    lambda,
                })));
            }
            SysFeasibility::Feasible(p) => p,
        };
        let depth = path.len();
        let layout = self.store.layout();
        if violation_set(layout, &point, &self.units[depth..]).is_empty() {
            return Ok(ExactResult::Model { point });
        }
        let unit = self.units[depth];
        let mut children = Vec::with_capacity(2);
        for phase in [Phase::Active, Phase::Inactive] {
            path.push(GuardLiteral::new(unit, phase));
            let r = self.solve(path);
            path.pop();
            match r? {
                ExactResult::Unsat(n) => children.push(n),
                other => return Ok(other),
            }
        }
        let inactive = children.pop().expect("two children");
        let active = children.pop().expect("two children");
        Ok(ExactResult::Unsat(GateNode::Branch { unit, active: Box::new(active), inactive: Box::new(inactive) }))
    }
}

/// Active store rows, less the hull rows of units in `s`.
pub fn reduced_system(store: &Store, s: &[UnitId]) -> NormalizedSystem {
    store.normalize_where(|c| !matches!(c.origin, Origin::Hull { unit, .. } if s.contains(&unit)))
}

/// Decides the store with exact semantics on `s`. `calls` accumulates LP calls
/// against `budget`.
pub fn exact_solve(
    engine: &Engine<'_>,
    store: &Store,
    region: &Region,
    s: &[UnitId],
    knowledge: &Knowledge,
    calls: &mut u64,
    budget: Option<u64>,
) -> Result<ExactResult, EngineError> {
    let mut dpll = Dpll {
        engine,
        store,
        base: reduced_system(store, s),
        units: s,
        region,
        alpha: store.alpha(),
        knowledge,
        calls: *calls,
        budget,
    };
    let r = dpll.solve(&mut Vec::new());
    *calls = dpll.calls;
    r
}

fn input_part(problem: &Problem, point: &[Rational]) -> Vec<Rational> {
    point[..problem.network.input_dim()].to_vec()
}

/// True when `point` violates some row of each phase of `unit`.
pub fn excluded_by_both_phases(layout: &VariableLayout, point: &[Rational], unit: UnitId) -> bool {
    [Phase::Active, Phase::Inactive]
        .into_iter()
        .all(|phase| guard_rows(layout, GuardLiteral::new(unit, phase)).iter().any(|(row, rhs)| row.dot(point) > *rhs))
}

/// Runs the refinement loop from `S = ∅` (`full = false`) or from `S = U`.
pub fn exactness_gate(
    engine: &Engine<'_>,
    store: &Store,
    region: &Region,
    knowledge: &Knowledge,
    budget: Option<u64>,
    full: bool,
) -> Result<GateReport, EngineError> {
    Counters::bump(&engine.counters.gate_invocations, 1);
    let unstable = store.unstable();
    let layout = store.layout();
    let mut s: Vec<UnitId> = if full { unstable.clone() } else { Vec::new() };
    let mut report = GateReport {
        outcome: GateOutcome::Defer(DeferReason::Budget),
        refinements: 0,
        unstable: unstable.len(),
        eliminations: 0,
    };
    let mut calls = 0u64;
    loop {
        let point = match exact_solve(engine, store, region, &s, knowledge, &mut calls, budget)? {
            ExactResult::Unsat(node) => {
                report.outcome = GateOutcome::Prune(node);
                break;
            }
            ExactResult::Limit => break,
            ExactResult::Model { point } => point,
        };
        let x = input_part(engine.problem, &point);
        if validate_witness(engine.problem, &x).is_accepted() {
            report.outcome = GateOutcome::Sat(x);
            break;
        }
        let rest: Vec<UnitId> = unstable.iter().filter(|u| !s.contains(u)).copied().collect();
        let v = violation_set(layout, &point, &rest);
        let Ok(unit) = select_violated(&v) else {
            report.outcome = GateOutcome::Defer(DeferReason::ExactNonCounterexample);
            break;
        };
        if excluded_by_both_phases(layout, &point, unit) {
            report.eliminations += 1;
        }
        s.push(unit);
        report.refinements += 1;
    }
    Counters::bump(&engine.counters.gate_refinements, report.refinements as u64);
    Ok(report)
}
