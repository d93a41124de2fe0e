//! Translation of store-level certificates into proof-log entries: rows are
//! inlined by value in dependency order and multipliers re-addressed by position.

use std::collections::{BTreeSet, HashMap};

use relucert_kernel::certs::{DualBoundCertificate, FarkasCertificate, GuardedCertificate, RowRef};
use relucert_kernel::model::{Region, UnitId};
use relucert_kernel::prooflog::{
    BoundRef, ClauseEntry, Closure, DerivedRow, Descriptor, GateTree, Justification, LemmaChild,
};
use relucert_kernel::store::{guard_rows, BoundSource, GuardLiteral, Origin, Phase, PhaseAssignment, RowId, Store};
use relucert_kernel::{Rational, SparseRow};

use crate::learn::Knowledge;

/// Rows of `roots` together with every row their justifications cite, transitively.
pub fn support(store: &Store, roots: impl IntoIterator<Item = RowId>) -> BTreeSet<RowId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<RowId> = roots.into_iter().collect();
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        match &store.constraint(id.constraint).origin {
            Origin::Hull { lower_src, upper_src, .. } => {
                for src in [lower_src, upper_src] {
                    if let BoundSource::Row(r) = src {
                        stack.push(*r);
                    }
                }
            }
            Origin::Tgct { lambda } => stack.extend(lambda.iter().map(|(r, _)| *r)),
            Origin::Stability { evidence: BoundSource::Row(r), .. } => stack.push(*r),
            _ => {}
        }
    }
    seen
}

/// Phase literals the rows of `rows` depend on: guard rows of the assignment
/// and the scopes of cited lemmas.
pub fn support_guards(store: &Store, rows: &BTreeSet<RowId>, knowledge: &Knowledge) -> PhaseAssignment {
    let mut out = PhaseAssignment::new();
    for id in rows {
        match &store.constraint(id.constraint).origin {
            Origin::Guard(lit) => {
                out.assign(*lit);
            }
            Origin::Lemma { id } => {
                if let Some(rec) = knowledge.lemma(*id) {
                    for lit in rec.row.alpha.literals() {
                        out.assign(lit);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// A derivation under construction.
#[derive(Debug, Default)]
pub struct Derivation {
    pub rows: Vec<DerivedRow>,
    index: HashMap<RowId, usize>,
    by_value: HashMap<(SparseRow, Rational), usize>,
}

impl Derivation {
    /// Inlines the support of `roots` ordered by row id; rows equal by value share an index.
    pub fn from_store(store: &Store, roots: impl IntoIterator<Item = RowId>) -> Self {
        let mut d = Derivation::default();
        for id in support(store, roots) {
            let (row, rhs) = store.norm_row(id).expect("support rows exist");
            if let Some(&k) = d.by_value.get(&(row.clone(), rhs.clone())) {
                d.index.insert(id, k);
                continue;
            }
            let by = d.justify(store, id);
            let k = d.rows.len();
            d.by_value.insert((row.clone(), rhs.clone()), k);
            d.index.insert(id, k);
            d.rows.push(DerivedRow { row, rhs, by });
        }
        d
    }

    fn bound(&self, value: &Rational, src: &BoundSource) -> BoundRef {
        match src {
            BoundSource::Interval => BoundRef::Interval { value: value.clone() },
            BoundSource::Row(r) => BoundRef::Row { index: self.index[r], value: value.clone() },
        }
    }

    fn justify(&self, store: &Store, id: RowId) -> Justification {
        match &store.constraint(id.constraint).origin {
            Origin::Base | Origin::Guard(_) => Justification::Base,
            Origin::Hull { unit, lower, upper, lower_src, upper_src } => Justification::Hull {
                unit: *unit,
                lower: self.bound(lower, lower_src),
                upper: self.bound(upper, upper_src),
            },
            Origin::Tgct { lambda } => Justification::Tgct { lambda: self.lambda(lambda) },
            Origin::Stability { unit, phase, bound, evidence } => {
                Justification::Stability { unit: *unit, phase: *phase, evidence: self.bound(bound, evidence) }
            }
            Origin::Lemma { id } => Justification::Lemma { index: *id },
        }
    }

    /// Appends a base row unless an equal row is present; returns its index.
    pub fn push_base(&mut self, row: SparseRow, rhs: Rational) -> usize {
        if let Some(&k) = self.by_value.get(&(row.clone(), rhs.clone())) {
            return k;
        }
        let k = self.rows.len();
        self.by_value.insert((row.clone(), rhs.clone()), k);
        self.rows.push(DerivedRow { row, rhs, by: Justification::Base });
        k
    }

    pub fn index(&self, id: RowId) -> usize {
        self.index[&id]
    }

    pub fn lambda(&self, lambda: &[(RowId, Rational)]) -> SparseRow {
        SparseRow::from_entries(lambda.iter().map(|(r, l)| (self.index[r], l.clone())))
    }

    /// `λᵀb` over the derivation rows followed by `extra`.
    pub fn value(&self, lambda: &SparseRow, extra: &[(SparseRow, Rational)]) -> Rational {
        let mut acc = Rational::zero();
        for (k, l) in lambda.iter() {
            let rhs = if *k < self.rows.len() { &self.rows[*k].rhs } else { &extra[*k - self.rows.len()].1 };
            acc += &(l * rhs);
        }
        acc
    }
}

pub fn prune_infeasible(store: &Store, cert: &FarkasCertificate) -> (Vec<DerivedRow>, Closure) {
    let d = Derivation::from_store(store, cert.lambda.iter().map(|(r, _)| *r));
    let lambda = d.lambda(&cert.lambda);
    let value = d.value(&lambda, &[]);
    (d.rows, Closure::PruneInfeasible { lambda, value })
}

pub fn prune_bound(store: &Store, cert: &DualBoundCertificate) -> (Vec<DerivedRow>, Closure) {
    let d = Derivation::from_store(store, cert.lambda.iter().map(|(r, _)| *r));
    let lambda = d.lambda(&cert.lambda);
    let beta = d.value(&lambda, &[]);
    (d.rows, Closure::PruneBound { lambda, beta })
}

pub fn lemma_child(store: &Store, descriptor: &Descriptor, cert: &DualBoundCertificate) -> LemmaChild {
    let d = Derivation::from_store(store, cert.lambda.iter().map(|(r, _)| *r));
    let lambda = d.lambda(&cert.lambda);
    let beta = d.value(&lambda, &[]);
    LemmaChild { descriptor: descriptor.clone(), derivation: d.rows, lambda, beta }
}

/// The clause of a guarded refutation: its guard set `G` collects the path
/// literals it uses and the literals its store rows depend on.
pub fn clause_entry(store: &Store, region: &Region, cert: &GuardedCertificate, knowledge: &Knowledge) -> ClauseEntry {
    let store_rows: Vec<RowId> = cert
        .lambda
        .iter()
        .filter_map(|(r, _)| match r {
            RowRef::Store(id) => Some(*id),
            RowRef::Guard { .. } => None,
        })
        .collect();
    let mut d = Derivation::from_store(store, store_rows.iter().copied());
    let mut guards = support_guards(store, &support(store, store_rows), knowledge);
    for lit in cert.used_guards() {
        guards.assign(lit);
    }
    let layout = store.layout();
    let mut entries = Vec::with_capacity(cert.lambda.len());
    for (r, l) in &cert.lambda {
        let k = match r {
            RowRef::Store(id) => d.index(*id),
            RowRef::Guard { literal, k } => {
                let (row, rhs) = guard_rows(layout, *literal).swap_remove(*k);
                d.push_base(row, rhs)
            }
        };
        entries.push((k, l.clone()));
    }
    let lambda = SparseRow::from_entries(entries);
    let value = d.value(&lambda, &[]);
    ClauseEntry { region: region.clone(), guards, derivation: d.rows, lambda, value }
}

/// Case tree of the exactness gate, in store terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateNode {
    Branch {
        unit: UnitId,
        active: Box<GateNode>,
        inactive: Box<GateNode>,
    },
    Infeasible(GuardedCertificate),
    /// Closed by a learned clause with the given guard set.
    Clause {
        index: usize,
        guards: PhaseAssignment,
    },
}

/// Removes branches whose literal no refutation below uses; returns the units used.
pub fn collapse(node: GateNode, alpha: &PhaseAssignment) -> (GateNode, BTreeSet<UnitId>) {
    match node {
        GateNode::Infeasible(cert) => {
            let used = cert.used_guards().into_iter().map(|l| l.unit).collect();
            (GateNode::Infeasible(cert), used)
        }
        GateNode::Clause { index, guards } => {
            let used = guards.literals().filter(|l| !alpha.contains_unit(l.unit)).map(|l| l.unit).collect();
            (GateNode::Clause { index, guards }, used)
        }
        GateNode::Branch { unit, active, inactive } => {
            let (a, mut ua) = collapse(*active, alpha);
            if !ua.contains(&unit) {
                return (a, ua);
            }
            let (i, ui) = collapse(*inactive, alpha);
            if !ui.contains(&unit) {
                return (i, ui);
            }
            ua.extend(ui);
            ua.remove(&unit);
            (GateNode::Branch { unit, active: Box::new(a), inactive: Box::new(i) }, ua)
        }
    }
}

fn store_roots(node: &GateNode, out: &mut Vec<RowId>) {
    match node {
        GateNode::Infeasible(cert) => out.extend(cert.lambda.iter().filter_map(|(r, _)| match r {
            RowRef::Store(id) => Some(*id),
            RowRef::Guard { .. } => None,
        })),
        GateNode::Clause { .. } => {}
        GateNode::Branch { active, inactive, .. } => {
            store_roots(active, out);
            store_roots(inactive, out);
        }
    }
}

fn gate_tree(d: &Derivation, store: &Store, node: &GateNode, path: &mut Vec<GuardLiteral>) -> GateTree {
    match node {
        GateNode::Infeasible(cert) => {
            let n = d.rows.len();
            let extra: Vec<(SparseRow, Rational)> = path.iter().flat_map(|l| guard_rows(store.layout(), *l)).collect();
            let lambda = SparseRow::from_entries(cert.lambda.iter().map(|(r, l)| {
                let k = match r {
                    RowRef::Store(id) => d.index(*id),
                    RowRef::Guard { literal, k } => {
                        let pos = path.iter().position(|p| p == literal).expect("guard on the path");
                        n + 3 * pos + k
                    }
                };
                (k, l.clone())
            }));
            let value = d.value(&lambda, &extra);
            GateTree::Infeasible { lambda, value }
        }
        GateNode::Clause { index, .. } => GateTree::Clause { index: *index },
        GateNode::Branch { unit, active, inactive } => {
            let sub = |phase, child: &GateNode, path: &mut Vec<GuardLiteral>| {
                path.push(GuardLiteral::new(*unit, phase));
                let t = gate_tree(d, store, child, path);
                path.pop();
                Box::new(t)
            };
            let a = sub(Phase::Active, active, path);
            let i = sub(Phase::Inactive, inactive, path);
            GateTree::Branch { unit: *unit, active: a, inactive: i }
        }
    }
}

/// Leaf for a gate refutation. Clause references keep their store-wide ids.
pub fn gate_leaf(store: &Store, node: GateNode) -> (Vec<DerivedRow>, Closure) {
    let (node, _) = collapse(node, store.alpha());
    let mut roots = Vec::new();
    store_roots(&node, &mut roots);
    let d = Derivation::from_store(store, roots);
    let tree = gate_tree(&d, store, &node, &mut Vec::new());
    let closure = match tree {
        GateTree::Infeasible { lambda, value } => Closure::PruneInfeasible { lambda, value },
        GateTree::Clause { index } => Closure::Clause { index },
        tree => Closure::Gate { tree },
    };
    (d.rows, closure)
}
