//! Proof-log format and the independent checker.
//!
//! A log is a pre-order list of tree nodes. Every node carries its descriptor
//! (region and phase assignment); leaves carry a derivation (rows inlined by
//! value, each with a justification) and a closure certificate. Certificates
//! index rows of the derivation by position. Every recorded value must be
//! exactly the value the checker recomputes, so the format has a single valid
//! encoding for a given proof.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certs::combine;
use crate::linear::SparseRow;
use crate::model::{interval_bounds, LayerBounds, Problem, Region, UnitId, VariableLayout};
use crate::rational::Rational;
use crate::store::{base_constraints, guard_consequences, guard_rows, hull_rows, GuardLiteral, Phase, PhaseAssignment};

pub const PROOF_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofLog {
    pub version: u32,
    pub digest: String,
    pub lemmas: Vec<LemmaEntry>,
    pub clauses: Vec<ClauseEntry>,
    pub nodes: Vec<ProofNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub region: Region,
    pub alpha: PhaseAssignment,
}

impl Descriptor {
    pub fn root(problem: &Problem) -> Self {
        Descriptor { region: problem.region.clone(), alpha: PhaseAssignment::new() }
    }

    /// The two children produced by `split`, or `None` if the split is not applicable.
    pub fn split(&self, problem: &Problem, split: &SplitKind) -> Option<[Descriptor; 2]> {
        match split {
            SplitKind::Domain { dim, at } => {
                let r = &self.region;
                if *dim >= r.dim() || !(r.lower[*dim] < *at && *at < r.upper[*dim]) {
                    return None;
                }
                let (lo, hi) = r.bisect_at(*dim, at);
                Some([
                    Descriptor { region: lo, alpha: self.alpha.clone() },
                    Descriptor { region: hi, alpha: self.alpha.clone() },
                ])
            }
            SplitKind::Phase { unit } => {
                if !problem.network.is_relu_unit(*unit) || self.alpha.contains_unit(*unit) {
                    return None;
                }
                let child = |phase| Descriptor {
                    region: self.region.clone(),
                    alpha: self.alpha.with(GuardLiteral::new(*unit, phase)).expect("unit is unassigned"),
                };
                Some([child(Phase::Active), child(Phase::Inactive)])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitKind {
    Domain { dim: usize, at: Rational },
    Phase { unit: UnitId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedRow {
    pub row: SparseRow,
    pub rhs: Rational,
    pub by: Justification,
}

/// A bound on a pre-activation, either from interval arithmetic over the
/// descriptor's box or from an earlier derivation row `±s ≤ ±value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundRef {
    Interval { value: Rational },
    Row { index: usize, value: Rational },
}

impl BoundRef {
    pub fn value(&self) -> &Rational {
        match self {
            BoundRef::Interval { value } | BoundRef::Row { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Justification {
    /// Affine, margin, box, negated-property or guard row of the descriptor.
    Base,
    /// One of the four triangle rows for the recorded bounds.
    Hull { unit: UnitId, lower: BoundRef, upper: BoundRef },
    /// Nonnegative combination of earlier rows, reproducing row and rhs exactly.
    Tgct { lambda: SparseRow },
    /// Linear specialization of a unit whose sign is fixed by `evidence`.
    Stability { unit: UnitId, phase: Phase, evidence: BoundRef },
    /// Row of a learned lemma whose scope covers the descriptor.
    Lemma { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofNode {
    pub descriptor: Descriptor,
    pub content: NodeContent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeContent {
    Split { split: SplitKind, children: Vec<usize> },
    Leaf { derivation: Vec<DerivedRow>, closure: Closure },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// `λᵀA = e_aux`, `λᵀb = beta < threshold + ε`.
    PruneBound { lambda: SparseRow, beta: Rational },
    /// `λᵀA = 0`, `λᵀb = value < 0`.
    PruneInfeasible { lambda: SparseRow, value: Rational },
    /// Exhaustive case split over guard literals, each case refuted.
    Gate { tree: GateTree },
    /// A learned conflict clause whose guards all hold in the descriptor.
    Clause { index: usize },
}

/// Guard rows of the path are appended after the derivation, three per literal,
/// in path order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateTree {
    Branch { unit: UnitId, active: Box<GateTree>, inactive: Box<GateTree> },
    Infeasible { lambda: SparseRow, value: Rational },
    Clause { index: usize },
}

/// `template·v ≤ bound` on the scope, merged from the two children of `split`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaEntry {
    pub scope: Descriptor,
    pub split: SplitKind,
    pub template: SparseRow,
    pub bound: Rational,
    pub children: Vec<LemmaChild>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaChild {
    pub descriptor: Descriptor,
    pub derivation: Vec<DerivedRow>,
    pub lambda: SparseRow,
    pub beta: Rational,
}

/// Infeasibility of the descriptor `(region, guards)`: on `region`, some guard is false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClauseEntry {
    pub region: Region,
    pub guards: PhaseAssignment,
    pub derivation: Vec<DerivedRow>,
    pub lambda: SparseRow,
    pub value: Rational,
}

impl ClauseEntry {
    /// Applicable where the region is inside the clause region and every guard holds.
    pub fn applies(&self, region: &Region, alpha: &PhaseAssignment) -> bool {
        region.is_within(&self.region) && self.guards.is_subset_of(alpha)
    }
}

impl ProofLog {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.content, NodeContent::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {reason}")]
pub struct ProofReject {
    pub path: String,
    pub reason: String,
}

fn reject<T>(path: impl fmt::Display, reason: impl fmt::Display) -> Result<T, ProofReject> {
    Err(ProofReject { path: path.to_string(), reason: reason.to_string() })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProofStats {
    pub nodes: usize,
    pub leaves: usize,
    pub derived_rows: usize,
    pub multiplications: u64,
}

struct Checker<'a> {
    problem: &'a Problem,
    layout: VariableLayout,
    lemmas: &'a [LemmaEntry],
    clauses: &'a [ClauseEntry],
    stats: ProofStats,
}

/// Everything the checker derives from a descriptor.
struct Frame {
    base: HashSet<(SparseRow, Rational)>,
    ia: LayerBounds,
}

fn check_sparse(row: &SparseRow, limit: usize, what: &str, path: &str) -> Result<(), ProofReject> {
    if !row.is_canonical() {
        return reject(path, format!("{what} is not in canonical sparse form"));
    }
    if row.max_index().is_some_and(|m| m >= limit) {
        return reject(path, format!("{what} index out of range"));
    }
    Ok(())
}

fn check_lambda(lambda: &SparseRow, limit: usize, path: &str) -> Result<(), ProofReject> {
    check_sparse(lambda, limit, "multiplier vector", path)?;
    if lambda.iter().any(|(_, l)| !l.is_positive()) {
        return reject(path, "multipliers must be positive");
    }
    Ok(())
}

impl<'a> Checker<'a> {
    fn check_descriptor(&self, d: &Descriptor, path: &str) -> Result<(), ProofReject> {
        let n = self.problem.network.input_dim();
        if d.region.lower.len() != n || d.region.upper.len() != n {
            return reject(path, "region dimension mismatch");
        }
        if let Some(lit) = d.alpha.literals().find(|l| !self.problem.network.is_relu_unit(l.unit)) {
            return reject(path, format!("unknown unit {}", lit.unit));
        }
        Ok(())
    }

    fn frame(&self, d: &Descriptor) -> Frame {
        let mut cs = base_constraints(self.problem, &d.region, &self.layout);
        for lit in d.alpha.literals() {
            cs.extend(guard_consequences(&self.layout, lit));
        }
        let base = cs.iter().flat_map(|c| c.normalized()).map(|(_, r, b)| (r, b)).collect();
        Frame { base, ia: interval_bounds(&self.problem.network, &d.region) }
    }

    #[allow(clippy::too_many_arguments)]
    fn bound(
        &self,
        frame: &Frame,
        rows: &[DerivedRow],
        at: usize,
        unit: UnitId,
        upper: bool,
        b: &BoundRef,
        path: &str,
    ) -> Result<(), ProofReject> {
        let (l, u) = &frame.ia[unit.layer][unit.neuron];
        match b {
            BoundRef::Interval { value } => {
                let expect = if upper { u } else { l };
                if value != expect {
                    return reject(path, format!("interval bound {value} differs from {expect}"));
                }
            }
            BoundRef::Row { index, value } => {
                if *index >= at {
                    return reject(path, "bound row must precede its use");
                }
                let s = SparseRow::unit(self.layout.unit_s(unit));
                let (want_row, want_rhs) = if upper { (s, value.clone()) } else { (s.negated(), -value) };
                let r = &rows[*index];
                if r.row != want_row || r.rhs != want_rhs {
                    return reject(path, format!("row {index} is not the recorded bound"));
                }
            }
        }
        Ok(())
    }

    fn check_derivation(
        &mut self,
        d: &Descriptor,
        rows: &[DerivedRow],
        lemma_limit: usize,
        path: &str,
    ) -> Result<(), ProofReject> {
        let frame = self.frame(d);
        let width = self.layout.total();
        let mut seen: HashSet<(&SparseRow, &Rational)> = HashSet::new();
        for (i, r) in rows.iter().enumerate() {
            let p = format!("{path}.derivation[{i}]");
            check_sparse(&r.row, width, "row", &p)?;
            if r.row.is_empty() {
                return reject(&p, "empty row");
            }
            if !seen.insert((&r.row, &r.rhs)) {
                return reject(&p, "duplicate row");
            }
            match &r.by {
                Justification::Base => {
                    if !frame.base.contains(&(r.row.clone(), r.rhs.clone())) {
                        return reject(&p, "not a base row of the descriptor");
                    }
                }
                Justification::Hull { unit, lower, upper } => {
                    if !self.problem.network.is_relu_unit(*unit) {
                        return reject(&p, format!("unknown unit {unit}"));
                    }
                    self.bound(&frame, rows, i, *unit, false, lower, &p)?;
                    self.bound(&frame, rows, i, *unit, true, upper, &p)?;
                    let (l, u) = (lower.value(), upper.value());
                    if !(l.is_negative() && u.is_positive()) {
                        return reject(&p, "hull requires l < 0 < u");
                    }
                    if !hull_rows(&self.layout, *unit, l, u).iter().any(|(a, b)| *a == r.row && *b == r.rhs) {
                        return reject(&p, "not a hull row for the recorded bounds");
                    }
                }
                Justification::Tgct { lambda } => {
                    check_lambda(lambda, i, &p)?;
                    let (combo, value, st) =
                        combine(width, lambda.entries(), |k| rows.get(*k).map(|x| (&x.row, &x.rhs)))
                            .map_err(|e| ProofReject { path: p.clone(), reason: e.to_string() })?;
                    self.stats.multiplications += st.multiplications;
                    if combo != r.row {
                        return reject(&p, "combination does not reproduce the row");
                    }
                    if value != r.rhs {
                        return reject(&p, format!("combined rhs {value} differs from {}", r.rhs));
                    }
                }
                Justification::Stability { unit, phase, evidence } => {
                    if !self.problem.network.is_relu_unit(*unit) {
                        return reject(&p, format!("unknown unit {unit}"));
                    }
                    let upper = *phase == Phase::Inactive;
                    self.bound(&frame, rows, i, *unit, upper, evidence, &p)?;
                    let v = evidence.value();
                    let fixed = if upper { !v.is_positive() } else { !v.is_negative() };
                    if !fixed {
                        return reject(&p, format!("bound {v} does not fix the phase"));
                    }
                    let lit = GuardLiteral::new(*unit, *phase);
                    if !guard_rows(&self.layout, lit).iter().any(|(a, b)| *a == r.row && *b == r.rhs) {
                        return reject(&p, "not a specialization row of the phase");
                    }
                }
                Justification::Lemma { index } => {
                    if *index >= lemma_limit {
                        return reject(&p, format!("lemma {index} is not available here"));
                    }
                    let lemma = &self.lemmas[*index];
                    if !(d.region.is_within(&lemma.scope.region) && lemma.scope.alpha.is_subset_of(&d.alpha)) {
                        return reject(&p, format!("lemma {index} scope does not cover the descriptor"));
                    }
                    if lemma.template != r.row || lemma.bound != r.rhs {
                        return reject(&p, format!("row differs from lemma {index}"));
                    }
                }
            }
        }
        self.stats.derived_rows += rows.len();
        Ok(())
    }

    /// Combination over `rows` followed by `extra`.
    fn combination(
        &mut self,
        rows: &[DerivedRow],
        extra: &[(SparseRow, Rational)],
        lambda: &SparseRow,
        path: &str,
    ) -> Result<(SparseRow, Rational), ProofReject> {
        check_lambda(lambda, rows.len() + extra.len(), path)?;
        let (combo, value, st) = combine(self.layout.total(), lambda.entries(), |k| {
            if *k < rows.len() {
                Some((&rows[*k].row, &rows[*k].rhs))
            } else {
                extra.get(*k - rows.len()).map(|(a, b)| (a, b))
            }
        })
        .map_err(|e| ProofReject { path: path.to_string(), reason: e.to_string() })?;
        self.stats.multiplications += st.multiplications;
        Ok((combo, value))
    }

    fn farkas(
        &mut self,
        rows: &[DerivedRow],
        extra: &[(SparseRow, Rational)],
        lambda: &SparseRow,
        value: &Rational,
        path: &str,
    ) -> Result<(), ProofReject> {
        let (combo, v) = self.combination(rows, extra, lambda, path)?;
        if !combo.is_empty() {
            return reject(path, "farkas combination is not zero");
        }
        if v != *value {
            return reject(path, format!("farkas value {v} differs from recorded {value}"));
        }
        if !v.is_negative() {
            return reject(path, format!("farkas value {v} is not negative"));
        }
        Ok(())
    }

    fn check_lemma(&mut self, index: usize) -> Result<(), ProofReject> {
        let lemma = &self.lemmas[index];
        let path = format!("lemmas[{index}]");
        self.check_descriptor(&lemma.scope, &path)?;
        check_sparse(&lemma.template, self.layout.total(), "template", &path)?;
        if lemma.template.is_empty() {
            return reject(&path, "empty template");
        }
        let Some(expect) = lemma.scope.split(self.problem, &lemma.split) else {
            return reject(&path, "split does not apply to the scope");
        };
        if lemma.children.len() != 2 {
            return reject(&path, "a merge needs exactly two children");
        }
        let mut betas = Vec::with_capacity(2);
        for (c, (child, want)) in lemma.children.iter().zip(&expect).enumerate() {
            let p = format!("{path}.children[{c}]");
            if child.descriptor != *want {
                return reject(&p, "child descriptor does not match the split");
            }
            self.check_derivation(&child.descriptor, &child.derivation, index, &p)?;
            let (combo, value) = self.combination(&child.derivation, &[], &child.lambda, &p)?;
            if combo != lemma.template {
                return reject(&p, "dual combination does not equal the template");
            }
            if value != child.beta {
                return reject(&p, format!("dual value {value} differs from recorded {}", child.beta));
            }
            betas.push(value);
        }
        let merged = betas[0].clone().max(betas[1].clone());
        if merged != lemma.bound {
            return reject(&path, format!("bound {} is not the maximum {merged}", lemma.bound));
        }
        Ok(())
    }

    fn check_clause(&mut self, index: usize) -> Result<(), ProofReject> {
        let clause = &self.clauses[index];
        let path = format!("clauses[{index}]");
        let d = Descriptor { region: clause.region.clone(), alpha: clause.guards.clone() };
        self.check_descriptor(&d, &path)?;
        self.check_derivation(&d, &clause.derivation, self.lemmas.len(), &path)?;
        self.farkas(&clause.derivation, &[], &clause.lambda, &clause.value, &path)
    }

    fn clause_applies(
        &self,
        index: usize,
        region: &Region,
        alpha: &PhaseAssignment,
        path: &str,
    ) -> Result<(), ProofReject> {
        match self.clauses.get(index) {
            None => reject(path, format!("unknown clause {index}")),
            Some(c) if c.applies(region, alpha) => Ok(()),
            Some(_) => reject(path, format!("clause {index} does not apply")),
        }
    }

    /// Checks a gate tree; returns the path depths whose guard rows the subtree uses.
    fn check_gate(
        &mut self,
        d: &Descriptor,
        rows: &[DerivedRow],
        path_lits: &mut Vec<GuardLiteral>,
        tree: &GateTree,
        path: &str,
    ) -> Result<HashSet<usize>, ProofReject> {
        match tree {
            GateTree::Infeasible { lambda, value } => {
                let extra: Vec<(SparseRow, Rational)> =
                    path_lits.iter().flat_map(|l| guard_rows(&self.layout, *l)).collect();
                self.farkas(rows, &extra, lambda, value, path)?;
                Ok(lambda.iter().filter(|(k, _)| *k >= rows.len()).map(|(k, _)| (*k - rows.len()) / 3).collect())
            }
            GateTree::Clause { index } => {
                let mut alpha = d.alpha.clone();
                for l in path_lits.iter() {
                    alpha.assign(*l);
                }
                self.clause_applies(*index, &d.region, &alpha, path)?;
                let guards = &self.clauses[*index].guards;
                Ok((0..path_lits.len()).filter(|&k| guards.satisfies(&path_lits[k])).collect())
            }
            GateTree::Branch { unit, active, inactive } => {
                if !self.problem.network.is_relu_unit(*unit)
                    || d.alpha.contains_unit(*unit)
                    || path_lits.iter().any(|l| l.unit == *unit)
                {
                    return reject(path, format!("cannot branch on unit {unit}"));
                }
                let depth = path_lits.len();
                let mut used = HashSet::new();
                for (phase, sub, tag) in [(Phase::Active, active, "active"), (Phase::Inactive, inactive, "inactive")] {
                    path_lits.push(GuardLiteral::new(*unit, phase));
                    let r = self.check_gate(d, rows, path_lits, sub, &format!("{path}.{tag}"));
                    path_lits.pop();
                    used.extend(r?);
                }
                if !used.remove(&depth) {
                    return reject(path, format!("branch on {unit} is never used"));
                }
                Ok(used)
            }
        }
    }

    fn check_leaf(
        &mut self,
        d: &Descriptor,
        rows: &[DerivedRow],
        closure: &Closure,
        path: &str,
    ) -> Result<(), ProofReject> {
        self.check_derivation(d, rows, self.lemmas.len(), path)?;
        let cp = format!("{path}.closure");
        match closure {
            Closure::PruneBound { lambda, beta } => {
                let aux = self.layout.aux().expect("problem layout has an auxiliary");
                let (combo, value) = self.combination(rows, &[], lambda, &cp)?;
                if combo != SparseRow::unit(aux) {
                    return reject(&cp, "dual combination is not the margin");
                }
                if value != *beta {
                    return reject(&cp, format!("dual value {value} differs from recorded {beta}"));
                }
                if *beta >= self.problem.property.violation_level() {
                    return reject(&cp, format!("bound {beta} does not exclude the violation"));
                }
                Ok(())
            }
            Closure::PruneInfeasible { lambda, value } => self.farkas(rows, &[], lambda, value, &cp),
            Closure::Clause { index } => self.clause_applies(*index, &d.region, &d.alpha, &cp),
            Closure::Gate { tree } => {
                let used = self.check_gate(d, rows, &mut Vec::new(), tree, &format!("{cp}.tree"))?;
                debug_assert!(used.is_empty());
                Ok(())
            }
        }
    }

    fn check_tree(&mut self, nodes: &[ProofNode]) -> Result<(), ProofReject> {
        if nodes.is_empty() {
            return reject("nodes", "empty tree");
        }
        if nodes[0].descriptor != Descriptor::root(self.problem) {
            return reject("nodes[0]", "root descriptor is not the problem domain");
        }
        let mut stack = vec![0usize];
        let mut expected = 0usize;
        while let Some(i) = stack.pop() {
            let path = format!("nodes[{i}]");
            if i != expected || i >= nodes.len() {
                return reject(&path, "nodes are not a tree in pre-order");
            }
            expected += 1;
            let node = &nodes[i];
            self.check_descriptor(&node.descriptor, &path)?;
            self.stats.nodes += 1;
            match &node.content {
                NodeContent::Split { split, children } => {
                    let Some(want) = node.descriptor.split(self.problem, split) else {
                        return reject(&path, "split does not apply to the descriptor");
                    };
                    if children.len() != 2 {
                        return reject(&path, "a split has exactly two children");
                    }
                    for (c, w) in children.iter().zip(&want) {
                        match nodes.get(*c) {
                            Some(child) if child.descriptor == *w => {}
                            _ => return reject(&path, format!("child {c} does not match the split")),
                        }
                    }
                    stack.push(children[1]);
                    stack.push(children[0]);
                }
                NodeContent::Leaf { derivation, closure } => {
                    self.stats.leaves += 1;
                    self.check_leaf(&node.descriptor, derivation, closure, &path)?;
                }
            }
        }
        if expected != nodes.len() {
            return reject("nodes", "unreachable nodes in the log");
        }
        Ok(())
    }
}

/// Replays a proof log against the problem. Acceptance means the safety
/// property holds on the whole input box.
pub fn check_proof(problem: &Problem, log: &ProofLog) -> Result<ProofStats, ProofReject> {
    if log.version != PROOF_VERSION {
        return reject("version", format!("unsupported version {}", log.version));
    }
    if log.digest != problem.digest() {
        return reject("digest", "proof was produced for a different problem");
    }
    let mut checker = Checker {
        problem,
        layout: problem.layout(),
        lemmas: &log.lemmas,
        clauses: &log.clauses,
        stats: ProofStats::default(),
    };
    for i in 0..log.lemmas.len() {
        checker.check_lemma(i)?;
    }
    for i in 0..log.clauses.len() {
        checker.check_clause(i)?;
    }
    checker.check_tree(&log.nodes)?;
    Ok(checker.stats)
}

/// Parses and checks; malformed text is a rejection.
pub fn check_proof_str(problem: &Problem, text: &str) -> Result<ProofStats, ProofReject> {
    let log = ProofLog::from_json_str(text).map_err(|e| ProofReject { path: "$".into(), reason: e.to_string() })?;
    check_proof(problem, &log)
}

/// Appends every lemma row whose scope covers a leaf to that leaf's derivation
/// and re-checks the whole log. Gate certificates address guard rows after the
/// derivation and are shifted along; every other multiplier keeps its row.
pub fn recheck_with_lemmas(problem: &Problem, log: &ProofLog) -> Result<ProofStats, ProofReject> {
    let mut extended = log.clone();
    for node in &mut extended.nodes {
        let NodeContent::Leaf { derivation, closure } = &mut node.content else { continue };
        let before = derivation.len();
        for (index, lemma) in log.lemmas.iter().enumerate() {
            let covers = node.descriptor.region.is_within(&lemma.scope.region)
                && lemma.scope.alpha.is_subset_of(&node.descriptor.alpha);
            let present = derivation.iter().any(|r| r.row == lemma.template && r.rhs == lemma.bound);
            if covers && !present {
                derivation.push(DerivedRow {
                    row: lemma.template.clone(),
                    rhs: lemma.bound.clone(),
                    by: Justification::Lemma { index },
                });
            }
        }
        if let Closure::Gate { tree } = closure {
            shift_guard_rows(tree, before, derivation.len() - before);
        }
    }
    check_proof(problem, &extended)
}

/// Guard rows follow the derivation, so growing it moves them by `by`.
fn shift_guard_rows(tree: &mut GateTree, from: usize, by: usize) {
    match tree {
        GateTree::Infeasible { lambda, .. } => {
            *lambda =
                SparseRow::from_entries(lambda.iter().map(|(k, l)| (if *k >= from { k + by } else { *k }, l.clone())));
        }
        GateTree::Clause { .. } => {}
        GateTree::Branch { active, inactive, .. } => {
            shift_guard_rows(active, from, by);
            shift_guard_rows(inactive, from, by);
        }
    }
}
