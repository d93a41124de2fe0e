//! Ground truth by enumeration: every phase pattern of the unstable units is
//! a purely linear system, solved by one LP each.

use thiserror::Error;

use relucert_kernel::model::{interval_bounds, validate_witness, Problem};
use relucert_kernel::store::{base_constraints, guard_consequences, GuardLiteral, NormalizedSystem, Phase, RowId};
use relucert_kernel::Rational;

use crate::lp::{lp_feasible, LpError, LpLimits, SysFeasibility};

pub const DEFAULT_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    Sat(Vec<Rational>),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{unstable} unstable units exceed the cap of {cap}")]
    CapExceeded { unstable: usize, cap: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub verdict: OracleVerdict,
    pub unstable: usize,
    pub lp_calls: usize,
}

pub fn oracle_verify(problem: &Problem, cap: usize) -> Result<OracleReport, OracleError> {
    let layout = problem.layout();
    let ia = interval_bounds(&problem.network, &problem.region);
    let mut fixed = Vec::new();
    let mut free = Vec::new();
    for unit in problem.network.relu_units() {
        let (l, u) = &ia[unit.layer][unit.neuron];
        if !l.is_negative() {
            fixed.push(GuardLiteral::new(unit, Phase::Active));
        } else if !u.is_positive() {
            fixed.push(GuardLiteral::new(unit, Phase::Inactive));
        } else {
            free.push(unit);
        }
    }
    if free.len() > cap {
        return Err(OracleError::CapExceeded { unstable: free.len(), cap });
    }
    let mut base = base_constraints(problem, &problem.region, &layout);
    for lit in &fixed {
        base.extend(guard_consequences(&layout, *lit));
    }
    let mut lp_calls = 0;
    for mask in 0u64..(1u64 << free.len()) {
        let mut cs = base.clone();
        for (k, unit) in free.iter().enumerate() {
            let phase = if mask >> k & 1 == 0 { Phase::Active } else { Phase::Inactive };
            cs.extend(guard_consequences(&layout, GuardLiteral::new(*unit, phase)));
        }
        let mut sys = NormalizedSystem::new(layout.total());
        for (i, c) in cs.iter().enumerate() {
            for (negated, row, rhs) in c.normalized() {
                sys.push(RowId { constraint: i, negated }, row, rhs);
            }
        }
        lp_calls += 1;
        if let SysFeasibility::Feasible(point) = lp_feasible(&sys, LpLimits::default())? {
            let x = point[..problem.network.input_dim()].to_vec();
            if validate_witness(problem, &x).is_accepted() {
                return Ok(OracleReport { verdict: OracleVerdict::Sat(x), unstable: free.len(), lp_calls });
            }
        }
    }
    Ok(OracleReport { verdict: OracleVerdict::Unsat, unstable: free.len(), lp_calls })
}
