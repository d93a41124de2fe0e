//! Certificate objects and their exact checkers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::{Accumulator, SparseRow};
use crate::model::{Network, UnitId, VariableLayout};
use crate::rational::Rational;
use crate::store::{guard_rows, GuardLiteral, NormalizedSystem, Phase, RowId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("unknown row {0}")]
    UnknownRow(String),
    #[error("unknown unit {0}")]
    UnknownUnit(UnitId),
    #[error("rejected: {0}")]
    Reject(Rejection),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("negative multiplier on row {0}")]
    NegativeMultiplier(String),
    #[error("row reaches past the variable vector")]
    Width,
    #[error("combination λᵀA does not match the target")]
    CombinationMismatch,
    #[error("λᵀb = {value} exceeds bound {beta}")]
    BoundExceeded { value: Box<Rational>, beta: Box<Rational> },
    #[error("λᵀb = {0} is not negative")]
    NotNegative(Box<Rational>),
    #[error("sign bound {0} does not fix the phase")]
    WrongSign(Box<Rational>),
}

/// Operation counts of one check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckStats {
    pub multiplications: u64,
    pub rows_referenced: usize,
}

/// `λᵀA` and `λᵀb` for multipliers addressed through `lookup`.
pub fn combine<'a, K: std::fmt::Debug>(
    width: usize,
    lambda: &[(K, Rational)],
    lookup: impl Fn(&K) -> Option<(&'a SparseRow, &'a Rational)>,
) -> Result<(SparseRow, Rational, CheckStats), CertError> {
    let mut acc = Accumulator::new(width);
    let mut rhs = Rational::zero();
    for (key, l) in lambda {
        if l.is_negative() {
            return Err(CertError::Reject(Rejection::NegativeMultiplier(format!("{key:?}"))));
        }
        let (row, b) = lookup(key).ok_or_else(|| CertError::UnknownRow(format!("{key:?}")))?;
        if l.is_zero() {
            continue;
        }
        if !acc.add_scaled(row, l) {
            return Err(CertError::Reject(Rejection::Width));
        }
        rhs += &(l * b);
        acc.multiplications += 1;
    }
    let stats = CheckStats { multiplications: acc.multiplications, rows_referenced: lambda.len() };
    Ok((acc.into_row(), rhs, stats))
}

/// Proves `gᵀv ≤ β` over `A v ≤ b` by `λ ≥ 0, λᵀA = gᵀ, λᵀb ≤ β`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualBoundCertificate {
    pub g: SparseRow,
    pub beta: Rational,
    pub lambda: Vec<(RowId, Rational)>,
}

/// Proves `A v ≤ b` infeasible by `λ ≥ 0, λᵀA = 0, λᵀb < 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub lambda: Vec<(RowId, Rational)>,
}

pub fn check_dual(sys: &NormalizedSystem, cert: &DualBoundCertificate) -> Result<CheckStats, CertError> {
    let (combo, value, stats) = combine(sys.width(), &cert.lambda, |id| sys.row(*id).map(|r| (&r.coeffs, &r.rhs)))?;
    if combo != cert.g {
        return Err(CertError::Reject(Rejection::CombinationMismatch));
    }
    if value > cert.beta {
        return Err(CertError::Reject(Rejection::BoundExceeded {
            value: Box::new(value),
            beta: Box::new(cert.beta.clone()),
        }));
    }
    Ok(stats)
}

pub fn check_farkas(sys: &NormalizedSystem, cert: &FarkasCertificate) -> Result<CheckStats, CertError> {
    let (combo, value, stats) = combine(sys.width(), &cert.lambda, |id| sys.row(*id).map(|r| (&r.coeffs, &r.rhs)))?;
    if !combo.is_empty() {
        return Err(CertError::Reject(Rejection::CombinationMismatch));
    }
    if !value.is_negative() {
        return Err(CertError::Reject(Rejection::NotNegative(Box::new(value))));
    }
    Ok(stats)
}

/// A row of a guarded system: either a store row or the `k`-th normalized
/// consequence row of a guard literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowRef {
    Store(RowId),
    Guard { literal: GuardLiteral, k: usize },
}

/// Farkas certificate for the store extended by the consequences of `guards`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardedCertificate {
    pub guards: Vec<GuardLiteral>,
    pub lambda: Vec<(RowRef, Rational)>,
}

impl GuardedCertificate {
    /// Guards whose consequence rows carry a nonzero multiplier.
    pub fn used_guards(&self) -> Vec<GuardLiteral> {
        let mut g: Vec<GuardLiteral> = self
            .lambda
            .iter()
            .filter(|(_, l)| !l.is_zero())
            .filter_map(|(r, _)| match r {
                RowRef::Guard { literal, .. } => Some(*literal),
                RowRef::Store(_) => None,
            })
            .collect();
        g.sort();
        g.dedup();
        g
    }
}

pub fn check_guarded(
    sys: &NormalizedSystem,
    net: &Network,
    layout: &VariableLayout,
    cert: &GuardedCertificate,
) -> Result<CheckStats, CertError> {
    let mut extra: HashMap<(GuardLiteral, usize), (SparseRow, Rational)> = HashMap::new();
    for (i, lit) in cert.guards.iter().enumerate() {
        if !net.is_relu_unit(lit.unit) {
            return Err(CertError::UnknownUnit(lit.unit));
        }
        if cert.guards[..i].iter().any(|o| o.unit == lit.unit && o.phase != lit.phase) {
            return Err(CertError::Reject(Rejection::CombinationMismatch));
        }
        for (k, row) in guard_rows(layout, *lit).into_iter().enumerate() {
            extra.insert((*lit, k), row);
        }
    }
    let (combo, value, stats) = combine(sys.width(), &cert.lambda, |r| match r {
        RowRef::Store(id) => sys.row(*id).map(|r| (&r.coeffs, &r.rhs)),
        RowRef::Guard { literal, k } => extra.get(&(*literal, *k)).map(|(a, b)| (a, b)),
    })?;
    if !combo.is_empty() {
        return Err(CertError::Reject(Rejection::CombinationMismatch));
    }
    if !value.is_negative() {
        return Err(CertError::Reject(Rejection::NotNegative(Box::new(value))));
    }
    Ok(stats)
}

/// `⋁_{ℓ ∈ G} ¬ℓ`; stored as the guard set `G` itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConflictClause {
    pub guards: Vec<GuardLiteral>,
}

impl ConflictClause {
    /// Negated literals of the clause.
    pub fn literals(&self) -> Vec<GuardLiteral> {
        self.guards.iter().map(|g| GuardLiteral::new(g.unit, g.phase.flip())).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.guards.is_empty()
    }
}

/// The clause of an accepted guarded certificate, restricted to the guards it uses.
pub fn derive_conflict_clause(
    sys: &NormalizedSystem,
    net: &Network,
    layout: &VariableLayout,
    cert: &GuardedCertificate,
) -> Result<ConflictClause, CertError> {
    check_guarded(sys, net, layout, cert)?;
    Ok(ConflictClause { guards: cert.used_guards() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityEvidence {
    /// Interval arithmetic bound on the pre-activation.
    Interval { bound: Rational },
    /// Dual certificate for `−s ≤ β` (active) or `s ≤ β` (inactive) with `β ≤ 0`.
    Dual(DualBoundCertificate),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub unit: UnitId,
    pub phase: Phase,
    pub evidence: StabilityEvidence,
}

/// `interval` supplies the interval bounds `(l, u)` of the unit for interval evidence.
pub fn check_stability(
    sys: &NormalizedSystem,
    layout: &VariableLayout,
    cert: &StabilityCertificate,
    interval: Option<(&Rational, &Rational)>,
) -> Result<CheckStats, CertError> {
    match &cert.evidence {
        StabilityEvidence::Interval { bound } => {
            let (l, u) = interval.ok_or(CertError::UnknownUnit(cert.unit))?;
            let ok = match cert.phase {
                Phase::Active => bound == l && !bound.is_negative(),
                Phase::Inactive => bound == u && !bound.is_positive(),
            };
            if ok {
                Ok(CheckStats::default())
            } else {
                Err(CertError::Reject(Rejection::WrongSign(Box::new(bound.clone()))))
            }
        }
        StabilityEvidence::Dual(d) => {
            let s = SparseRow::unit(layout.unit_s(cert.unit));
            let target = match cert.phase {
                Phase::Active => s.negated(),
                Phase::Inactive => s,
            };
            if d.g != target {
                return Err(CertError::Reject(Rejection::CombinationMismatch));
            }
            if d.beta.is_positive() {
                return Err(CertError::Reject(Rejection::WrongSign(Box::new(d.beta.clone()))));
            }
            check_dual(sys, d)
        }
    }
}
