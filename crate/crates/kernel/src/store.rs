//! The relaxation store: tagged linear constraints, guard literals, normalization
//! to `A v ≤ b`, and per-unit bound bookkeeping.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linear::SparseRow;
use crate::model::{interval_bounds, Problem, Region, UnitId, VariableLayout};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Active,
    Inactive,
}

impl Phase {
    pub fn flip(self) -> Phase {
        match self {
            Phase::Active => Phase::Inactive,
            Phase::Inactive => Phase::Active,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GuardLiteral {
    pub unit: UnitId,
    pub phase: Phase,
}

impl GuardLiteral {
    pub fn new(unit: UnitId, phase: Phase) -> Self {
        GuardLiteral { unit, phase }
    }
}

impl fmt::Display for GuardLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.phase {
            Phase::Active => "act",
            Phase::Inactive => "inact",
        };
        write!(f, "{}:{p}", self.unit)
    }
}

/// Partial map from units to phases.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<GuardLiteral>", try_from = "Vec<GuardLiteral>")]
pub struct PhaseAssignment(BTreeMap<UnitId, Phase>);

impl PhaseAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, unit: UnitId) -> Option<Phase> {
        self.0.get(&unit).copied()
    }

    pub fn contains_unit(&self, unit: UnitId) -> bool {
        self.0.contains_key(&unit)
    }

    /// Holds `lit` exactly (same unit, same phase).
    pub fn satisfies(&self, lit: &GuardLiteral) -> bool {
        self.get(lit.unit) == Some(lit.phase)
    }

    /// Returns false if the unit already carries the other phase.
    pub fn assign(&mut self, lit: GuardLiteral) -> bool {
        match self.0.get(&lit.unit) {
            Some(p) => *p == lit.phase,
            None => {
                self.0.insert(lit.unit, lit.phase);
                true
            }
        }
    }

    pub fn with(&self, lit: GuardLiteral) -> Option<Self> {
        let mut out = self.clone();
        out.assign(lit).then_some(out)
    }

    pub fn literals(&self) -> impl Iterator<Item = GuardLiteral> + '_ {
        self.0.iter().map(|(u, p)| GuardLiteral::new(*u, *p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every literal of `self` is in `other`.
    pub fn is_subset_of(&self, other: &PhaseAssignment) -> bool {
        self.literals().all(|l| other.satisfies(&l))
    }
}

impl From<PhaseAssignment> for Vec<GuardLiteral> {
    fn from(a: PhaseAssignment) -> Self {
        a.literals().collect()
    }
}

impl TryFrom<Vec<GuardLiteral>> for PhaseAssignment {
    type Error = String;

    fn try_from(v: Vec<GuardLiteral>) -> Result<Self, String> {
        let mut out = PhaseAssignment::new();
        for lit in v {
            if out.contains_unit(lit.unit) {
                return Err(format!("unit {} assigned twice", lit.unit));
            }
            out.assign(lit);
        }
        Ok(out)
    }
}

impl FromIterator<GuardLiteral> for PhaseAssignment {
    fn from_iter<I: IntoIterator<Item = GuardLiteral>>(iter: I) -> Self {
        let mut out = PhaseAssignment::new();
        for l in iter {
            out.assign(l);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    LessEq,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    Aff,
    Domain,
    NegP,
    Rel,
    Learn,
    GuardConseq,
}

/// A normalized row: constraint id plus which side of an equality it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId {
    pub constraint: usize,
    pub negated: bool,
}

impl RowId {
    pub fn pos(constraint: usize) -> Self {
        RowId { constraint, negated: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundSource {
    Interval,
    Row(RowId),
}

/// Why a constraint is valid on the node's exact set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Base,
    Guard(GuardLiteral),
    Hull {
        unit: UnitId,
        lower: Rational,
        upper: Rational,
        lower_src: BoundSource,
        upper_src: BoundSource,
    },
    /// Tight dual certificate: `Σ λ_r a_r` equals the row and `Σ λ_r b_r` equals the rhs.
    Tgct {
        lambda: Vec<(RowId, Rational)>,
    },
    Stability {
        unit: UnitId,
        phase: Phase,
        /// Lower bound (active) or upper bound (inactive) establishing the sign.
        bound: Rational,
        evidence: BoundSource,
    },
    Lemma {
        id: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub row: SparseRow,
    pub relation: Relation,
    pub rhs: Rational,
    pub block: Block,
    pub origin: Origin,
}

impl LinearConstraint {
    pub fn leq(row: SparseRow, rhs: Rational, block: Block, origin: Origin) -> Self {
        LinearConstraint { row, relation: Relation::LessEq, rhs, block, origin }
    }

    pub fn eq(row: SparseRow, rhs: Rational, block: Block, origin: Origin) -> Self {
        LinearConstraint { row, relation: Relation::Eq, rhs, block, origin }
    }

    pub fn is_satisfied(&self, point: &[Rational]) -> bool {
        let lhs = self.row.dot(point);
        match self.relation {
            Relation::LessEq => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }

    /// The `≤` rows this constraint contributes, in normalization order.
    pub fn normalized(&self) -> Vec<(bool, SparseRow, Rational)> {
        match self.relation {
            Relation::LessEq => vec![(false, self.row.clone(), self.rhs.clone())],
            Relation::Eq => vec![(false, self.row.clone(), self.rhs.clone()), (true, self.row.negated(), -&self.rhs)],
        }
    }
}

/// Affine layer equalities, the margin definition, box rows and the negated property.
pub fn base_constraints(problem: &Problem, region: &Region, layout: &VariableLayout) -> Vec<LinearConstraint> {
    let mut out = Vec::new();
    for (i, layer) in problem.network.layers().iter().enumerate() {
        for (j, (w, b)) in layer.weights.iter().zip(&layer.bias).enumerate() {
            let mut entries = vec![(layout.s(i, j), Rational::one())];
            entries.extend(w.iter().enumerate().map(|(k, c)| (layout.layer_input(i, k), -c)));
            out.push(LinearConstraint::eq(SparseRow::from_entries(entries), b.clone(), Block::Aff, Origin::Base));
        }
    }
    if let Some(aux) = layout.aux() {
        let mut entries = vec![(aux, Rational::one())];
        entries.extend(problem.property.margin.iter().map(|(o, c)| (layout.output(*o), -c)));
        out.push(LinearConstraint::eq(SparseRow::from_entries(entries), Rational::zero(), Block::Aff, Origin::Base));
    }
    for k in 0..region.dim() {
        let x = SparseRow::unit(layout.x(k));
        out.push(LinearConstraint::leq(x.clone(), region.upper[k].clone(), Block::Domain, Origin::Base));
        out.push(LinearConstraint::leq(x.negated(), -&region.lower[k], Block::Domain, Origin::Base));
    }
    if let Some(aux) = layout.aux() {
        out.push(LinearConstraint::leq(
            SparseRow::unit(aux).negated(),
            -problem.property.violation_level(),
            Block::NegP,
            Origin::Base,
        ));
    }
    out
}

/// Rows implied by a phase: active gives `z − s = 0, −s ≤ 0`; inactive gives `z = 0, s ≤ 0`.
pub fn guard_consequences(layout: &VariableLayout, lit: GuardLiteral) -> Vec<LinearConstraint> {
    let s = layout.unit_s(lit.unit);
    let z = layout.unit_z(lit.unit);
    let origin = Origin::Guard(lit);
    match lit.phase {
        Phase::Active => vec![
            LinearConstraint::eq(
                SparseRow::from_entries([(z, Rational::one()), (s, -Rational::one())]),
                Rational::zero(),
                Block::GuardConseq,
                origin.clone(),
            ),
            LinearConstraint::leq(SparseRow::unit(s).negated(), Rational::zero(), Block::GuardConseq, origin),
        ],
        Phase::Inactive => vec![
            LinearConstraint::eq(SparseRow::unit(z), Rational::zero(), Block::GuardConseq, origin.clone()),
            LinearConstraint::leq(SparseRow::unit(s), Rational::zero(), Block::GuardConseq, origin),
        ],
    }
}

/// The three `≤` rows of a phase literal, in a fixed order.
pub fn guard_rows(layout: &VariableLayout, lit: GuardLiteral) -> Vec<(SparseRow, Rational)> {
    guard_consequences(layout, lit).iter().flat_map(|c| c.normalized()).map(|(_, r, b)| (r, b)).collect()
}

/// Bounds whose denominator needs more bits than this are rounded outward to
/// a multiple of `2^-HULL_GRID_BITS` before a hull is built on them.
/// Otherwise the hull slope carries each bound's size into the next round of
/// LPs and sizes double per propagation iteration.
pub const HULL_GRID_BITS: u32 = 16;

/// The bound a hull is actually built on: `v` itself, or `v` rounded away
/// from the interval (`upper` rounds up).
pub fn hull_bound(v: &Rational, upper: bool) -> Rational {
    if v.denom().bits() <= u64::from(HULL_GRID_BITS) {
        v.clone()
    } else {
        v.round_dyadic(HULL_GRID_BITS, upper)
    }
}

/// The triangle envelope of `z = max(0, s)` on `l ≤ s ≤ u` with `l < 0 < u`,
/// after widening through [`hull_bound`]:
/// `−z ≤ 0`, `s − z ≤ 0`, `(u−l) z − u s ≤ −u l`, `z ≤ u`.
pub fn hull_rows(layout: &VariableLayout, unit: UnitId, l: &Rational, u: &Rational) -> [(SparseRow, Rational); 4] {
    let (l, u) = (&hull_bound(l, false), &hull_bound(u, true));
    let s = layout.unit_s(unit);
    let z = layout.unit_z(unit);
    let slope = u / &(u - l);
    [
        (SparseRow::unit(z).negated(), Rational::zero()),
        (SparseRow::from_entries([(s, Rational::one()), (z, -Rational::one())]), Rational::zero()),
        (SparseRow::from_entries([(z, Rational::one()), (s, -&slope)]), -(&slope * l)),
        (SparseRow::unit(z), u.clone()),
    ]
}

/// A learned row together with the descriptor it is valid on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaRow {
    pub id: usize,
    pub region: Region,
    pub alpha: PhaseAssignment,
    pub row: SparseRow,
    pub rhs: Rational,
}

impl LemmaRow {
    /// True when the lemma is valid on every node with descriptor `(region, alpha)`.
    pub fn covers(&self, region: &Region, alpha: &PhaseAssignment) -> bool {
        region.is_within(&self.region) && self.alpha.is_subset_of(alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitBounds {
    pub lower: Rational,
    pub upper: Rational,
    pub lower_src: BoundSource,
    pub upper_src: BoundSource,
}

impl UnitBounds {
    pub fn is_unstable(&self) -> bool {
        self.lower.is_negative() && self.upper.is_positive()
    }

    /// Bounds on the post-activation implied by the pre-activation bounds.
    pub fn post(&self) -> (Rational, Rational) {
        (self.lower.clone().max(Rational::zero()), self.upper.clone().max(Rational::zero()))
    }
}

/// Pre-activation bounds per ReLU unit; intervals only ever shrink.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundsMap(BTreeMap<UnitId, UnitBounds>);

impl BoundsMap {
    pub fn from_intervals(problem: &Problem, region: &Region) -> Self {
        let ia = interval_bounds(&problem.network, region);
        let mut map = BTreeMap::new();
        for unit in problem.network.relu_units() {
            let (l, u) = &ia[unit.layer][unit.neuron];
            map.insert(
                unit,
                UnitBounds {
                    lower: l.clone(),
                    upper: u.clone(),
                    lower_src: BoundSource::Interval,
                    upper_src: BoundSource::Interval,
                },
            );
        }
        BoundsMap(map)
    }

    pub fn get(&self, unit: UnitId) -> Option<&UnitBounds> {
        self.0.get(&unit)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UnitId, &UnitBounds)> {
        self.0.iter()
    }

    /// Raises the lower bound if `value` is strictly tighter.
    pub fn tighten_lower(&mut self, unit: UnitId, value: Rational, src: BoundSource) -> bool {
        match self.0.get_mut(&unit) {
            Some(b) if value > b.lower => {
                b.lower = value;
                b.lower_src = src;
                true
            }
            _ => false,
        }
    }

    /// Lowers the upper bound if `value` is strictly tighter.
    pub fn tighten_upper(&mut self, unit: UnitId, value: Rational, src: BoundSource) -> bool {
        match self.0.get_mut(&unit) {
            Some(b) if value < b.upper => {
                b.upper = value;
                b.upper_src = src;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormRow {
    pub id: RowId,
    pub coeffs: SparseRow,
    pub rhs: Rational,
}

/// `A v ≤ b` with provenance for every row.
#[derive(Debug, Clone, Default)]
pub struct NormalizedSystem {
    width: usize,
    rows: Vec<NormRow>,
    index: HashMap<RowId, usize>,
}

impl NormalizedSystem {
    pub fn new(width: usize) -> Self {
        NormalizedSystem { width, rows: Vec::new(), index: HashMap::new() }
    }

    /// Rows get positional ids `RowId::pos(k)`.
    pub fn from_rows(width: usize, rows: impl IntoIterator<Item = (SparseRow, Rational)>) -> Self {
        let mut sys = NormalizedSystem::new(width);
        for (k, (coeffs, rhs)) in rows.into_iter().enumerate() {
            sys.push(RowId::pos(k), coeffs, rhs);
        }
        sys
    }

    pub fn push(&mut self, id: RowId, coeffs: SparseRow, rhs: Rational) {
        self.index.insert(id, self.rows.len());
        self.rows.push(NormRow { id, coeffs, rhs });
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[NormRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: RowId) -> Option<&NormRow> {
        self.index.get(&id).map(|&k| &self.rows[k])
    }

    pub fn position(&self, id: RowId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn is_satisfied(&self, point: &[Rational]) -> bool {
        self.rows.iter().all(|r| r.coeffs.dot(point) <= r.rhs)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    constraint: LinearConstraint,
    active: bool,
}

/// Constraint store of one node. Ids are never reused; retired rows stay
/// addressable so certificates that cite them remain checkable.
#[derive(Debug, Clone)]
pub struct Store {
    layout: VariableLayout,
    entries: Vec<Entry>,
    dedup: HashMap<(SparseRow, Relation, Rational), usize>,
    bounds: BoundsMap,
    alpha: PhaseAssignment,
    stabilized: BTreeMap<UnitId, Phase>,
}

impl Store {
    pub fn empty(layout: VariableLayout) -> Self {
        Store {
            layout,
            entries: Vec::new(),
            dedup: HashMap::new(),
            bounds: BoundsMap::default(),
            alpha: PhaseAssignment::new(),
            stabilized: BTreeMap::new(),
        }
    }

    /// Affine rows, box, negated property, guard consequences of `alpha`, and every
    /// lemma whose scope covers `(region, alpha)`. Bounds come from interval arithmetic.
    pub fn build_initial(problem: &Problem, region: &Region, alpha: &PhaseAssignment, lemmas: &[LemmaRow]) -> Self {
        let layout = problem.layout();
        let mut store = Store::empty(layout.clone());
        for c in base_constraints(problem, region, &layout) {
            store.add(c);
        }
        for lit in alpha.literals() {
            for c in guard_consequences(&layout, lit) {
                store.add(c);
            }
        }
        store.alpha = alpha.clone();
        for lemma in lemmas {
            store.inject_lemma(lemma, region);
        }
        store.bounds = BoundsMap::from_intervals(problem, region);
        store
    }

    /// Adds the lemma row if it covers this node; returns true if a row was added.
    pub fn inject_lemma(&mut self, lemma: &LemmaRow, region: &Region) -> bool {
        if !lemma.covers(region, &self.alpha) {
            return false;
        }
        self.add(LinearConstraint::leq(
            lemma.row.clone(),
            lemma.rhs.clone(),
            Block::Learn,
            Origin::Lemma { id: lemma.id },
        ))
        .1
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn alpha(&self) -> &PhaseAssignment {
        &self.alpha
    }

    /// Adds a constraint unless an identical one exists; an identical retired
    /// constraint is reactivated. Returns the id and whether the active set grew.
    pub fn add(&mut self, c: LinearConstraint) -> (usize, bool) {
        debug_assert!(!c.row.is_empty(), "empty constraint row");
        debug_assert!(c.row.max_index().is_none_or(|m| m < self.layout.total()));
        let key = (c.row.clone(), c.relation, c.rhs.clone());
        if let Some(&id) = self.dedup.get(&key) {
            let was = self.entries[id].active;
            self.entries[id].active = true;
            return (id, !was);
        }
        let id = self.entries.len();
        self.entries.push(Entry { constraint: c, active: true });
        self.dedup.insert(key, id);
        (id, true)
    }

    pub fn retire(&mut self, id: usize) {
        if let Some(e) = self.entries.get_mut(id) {
            e.active = false;
        }
    }

    pub fn is_active(&self, id: usize) -> bool {
        self.entries.get(id).is_some_and(|e| e.active)
    }

    pub fn constraint(&self, id: usize) -> &LinearConstraint {
        &self.entries[id].constraint
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.entries.iter().filter(|e| e.active).count()
    }

    /// Ids of active constraints in insertion order.
    pub fn active_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().enumerate().filter(|(_, e)| e.active).map(|(i, _)| i)
    }

    /// Normalized row for `id`, whether or not it is still active.
    pub fn norm_row(&self, id: RowId) -> Option<(SparseRow, Rational)> {
        let c = &self.entries.get(id.constraint)?.constraint;
        match (c.relation, id.negated) {
            (_, false) => Some((c.row.clone(), c.rhs.clone())),
            (Relation::Eq, true) => Some((c.row.negated(), -&c.rhs)),
            (Relation::LessEq, true) => None,
        }
    }

    pub fn normalize(&self) -> NormalizedSystem {
        self.normalize_where(|_| true)
    }

    /// Normalizes the active constraints accepted by `keep`.
    pub fn normalize_where(&self, keep: impl Fn(&LinearConstraint) -> bool) -> NormalizedSystem {
        let mut sys = NormalizedSystem::new(self.layout.total());
        for (id, e) in self.entries.iter().enumerate() {
            if !e.active || !keep(&e.constraint) {
                continue;
            }
            for (negated, row, rhs) in e.constraint.normalized() {
                sys.push(RowId { constraint: id, negated }, row, rhs);
            }
        }
        sys
    }

    pub fn bounds(&self) -> &BoundsMap {
        &self.bounds
    }

    pub fn bounds_mut(&mut self) -> &mut BoundsMap {
        &mut self.bounds
    }

    /// Phase fixed by the assignment or by stabilization, if any.
    pub fn fixed_phase(&self, unit: UnitId) -> Option<Phase> {
        self.alpha.get(unit).or_else(|| self.stabilized.get(&unit).copied())
    }

    pub fn stabilized(&self) -> &BTreeMap<UnitId, Phase> {
        &self.stabilized
    }

    pub fn mark_stabilized(&mut self, unit: UnitId, phase: Phase) {
        self.stabilized.insert(unit, phase);
    }

    /// Units with `l < 0 < u` whose phase is not fixed.
    pub fn unstable(&self) -> Vec<UnitId> {
        self.bounds
            .iter()
            .filter(|(u, b)| b.is_unstable() && self.fixed_phase(**u).is_none())
            .map(|(u, _)| *u)
            .collect()
    }

    /// Active constraints violated by `point`.
    pub fn violated(&self, point: &[Rational]) -> Vec<usize> {
        self.active_ids().filter(|&i| !self.entries[i].constraint.is_satisfied(point)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::WORKED;
    use crate::model::forward_eval;
    use crate::rational::q;
    use proptest::prelude::*;

    fn worked() -> Problem {
        Problem::from_json_str(WORKED).unwrap()
    }

    #[test]
    fn initial_store_worked_example() {
        let p = worked();
        let store = Store::build_initial(&p, &p.region, &PhaseAssignment::new(), &[]);
        let l = store.layout();
        let (x, s1, s2, z1, z2, y, aux) =
            (0, l.s(0, 0), l.s(0, 1), l.z(0, 0), l.z(0, 1), l.output(0), l.aux().unwrap());
        let rows: Vec<_> = store.active_ids().map(|i| store.constraint(i).clone()).collect();
        let has = |row: SparseRow, rel: Relation, rhs: Rational| {
            rows.iter().any(|c| c.row == row && c.relation == rel && c.rhs == rhs)
        };
        assert!(has(SparseRow::from_entries([(s1, q(1, 1)), (x, q(-2, 1))]), Relation::Eq, q(-1, 1)));
        assert!(has(SparseRow::from_entries([(s2, q(1, 1)), (x, q(1, 1))]), Relation::Eq, q(1, 2)));
        assert!(has(SparseRow::from_entries([(y, q(1, 1)), (z1, q(-1, 1)), (z2, q(1, 1))]), Relation::Eq, q(0, 1)));
        assert!(has(SparseRow::unit(x), Relation::LessEq, q(1, 1)));
        assert!(has(SparseRow::unit(x).negated(), Relation::LessEq, q(0, 1)));
        assert!(has(SparseRow::unit(aux).negated(), Relation::LessEq, q(-11, 10)));
        assert!(!rows.iter().any(|c| c.block == Block::Learn));
        let b = store.bounds();
        let u1 = b.get(UnitId::new(0, 0)).unwrap();
        let u2 = b.get(UnitId::new(0, 1)).unwrap();
        assert_eq!((u1.lower.clone(), u1.upper.clone()), (q(-1, 1), q(1, 1)));
        assert_eq!((u2.lower.clone(), u2.upper.clone()), (q(-1, 2), q(1, 2)));
        assert_eq!(store.unstable().len(), 2);
    }

    #[test]
    fn alpha_adds_guard_rows() {
        let p = worked();
        let unit = UnitId::new(0, 0);
        let alpha: PhaseAssignment = [GuardLiteral::new(unit, Phase::Inactive)].into_iter().collect();
        let store = Store::build_initial(&p, &p.region, &alpha, &[]);
        let l = store.layout();
        let guards: Vec<_> = store
            .active_ids()
            .map(|i| store.constraint(i))
            .filter(|c| c.block == Block::GuardConseq)
            .cloned()
            .collect();
        assert_eq!(guards.len(), 2);
        assert_eq!((guards[0].row.clone(), guards[0].relation), (SparseRow::unit(l.unit_z(unit)), Relation::Eq));
        assert_eq!((guards[1].row.clone(), guards[1].rhs.clone()), (SparseRow::unit(l.unit_s(unit)), q(0, 1)));
        assert_eq!(store.unstable(), vec![UnitId::new(0, 1)]);
    }

    #[test]
    fn active_guard_rows() {
        let p = worked();
        let l = p.layout();
        let unit = UnitId::new(0, 0);
        let rows = guard_rows(&l, GuardLiteral::new(unit, Phase::Active));
        let (s, z) = (l.unit_s(unit), l.unit_z(unit));
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0], (SparseRow::from_entries([(z, q(1, 1)), (s, q(-1, 1))]), q(0, 1)));
        assert_eq!(rows[1], (SparseRow::from_entries([(z, q(-1, 1)), (s, q(1, 1))]), q(0, 1)));
        assert_eq!(rows[2], (SparseRow::unit(s).negated(), q(0, 1)));
    }

    #[test]
    fn hull_rows_worked_unit() {
        let p = worked();
        let l = p.layout();
        let unit = UnitId::new(0, 0);
        let (s, z) = (l.unit_s(unit), l.unit_z(unit));
        let rows = hull_rows(&l, unit, &q(-1, 1), &q(1, 1));
        // z ≤ (1/2)(s + 1)
        assert_eq!(rows[2], (SparseRow::from_entries([(z, q(1, 1)), (s, q(-1, 2))]), q(1, 2)));
        assert_eq!(rows[3], (SparseRow::unit(z), q(1, 1)));
        // symmetric bounds: slope 1/2, intercept u/2
        let sym = hull_rows(&l, unit, &q(-3, 1), &q(3, 1));
        assert_eq!(sym[2], (SparseRow::from_entries([(z, q(1, 1)), (s, q(-1, 2))]), q(3, 2)));
    }

    #[test]
    fn normalize_splits_equalities() {
        let mut store = Store::empty(worked().layout());
        let row = SparseRow::from_entries([(5, q(1, 1)), (3, q(-1, 1)), (4, q(1, 1))]);
        store.add(LinearConstraint::eq(row.clone(), q(0, 1), Block::Aff, Origin::Base));
        let sys = store.normalize();
        assert_eq!(sys.len(), 2);
        assert_eq!(sys.rows()[0].coeffs, row);
        assert_eq!(sys.rows()[1].coeffs, row.negated());
        assert_eq!(sys.rows()[1].id, RowId { constraint: 0, negated: true });
        assert!(Store::empty(worked().layout()).normalize().is_empty());
    }

    #[test]
    fn duplicates_are_not_readded() {
        let mut store = Store::empty(worked().layout());
        let c = LinearConstraint::leq(SparseRow::unit(5), q(1, 1), Block::Rel, Origin::Base);
        assert_eq!(store.add(c.clone()), (0, true));
        assert_eq!(store.add(c.clone()), (0, false));
        assert_eq!(store.len(), 1);
        store.retire(0);
        assert_eq!(store.active_count(), 0);
        assert_eq!(store.add(c), (0, true));
    }

    #[test]
    fn lemma_injection_respects_scope() {
        let p = worked();
        let (lo, _) = p.region.bisect_at(0, &q(1, 2));
        let lemma = LemmaRow {
            id: 0,
            region: lo.clone(),
            alpha: PhaseAssignment::new(),
            row: SparseRow::unit(6),
            rhs: q(0, 1),
        };
        let root = Store::build_initial(&p, &p.region, &PhaseAssignment::new(), std::slice::from_ref(&lemma));
        assert!(root.active_ids().all(|i| root.constraint(i).block != Block::Learn));
        let child = Store::build_initial(&p, &lo, &PhaseAssignment::new(), std::slice::from_ref(&lemma));
        let learned: Vec<_> = child.active_ids().filter(|&i| child.constraint(i).block == Block::Learn).collect();
        assert_eq!(learned.len(), 1);
        assert_eq!(child.constraint(learned[0]).origin, Origin::Lemma { id: 0 });
    }

    #[test]
    fn bounds_only_tighten() {
        let p = worked();
        let mut b = BoundsMap::from_intervals(&p, &p.region);
        let unit = UnitId::new(0, 0);
        assert!(!b.tighten_upper(unit, q(2, 1), BoundSource::Interval));
        assert!(b.tighten_upper(unit, q(1, 2), BoundSource::Row(RowId::pos(3))));
        assert!(!b.tighten_lower(unit, q(-2, 1), BoundSource::Interval));
        assert_eq!(b.get(unit).unwrap().upper, q(1, 2));
        assert_eq!(b.get(unit).unwrap().upper_src, BoundSource::Row(RowId::pos(3)));
    }

    fn trace_point(p: &Problem, x: &Rational) -> Vec<Rational> {
        forward_eval(&p.network, std::slice::from_ref(x)).unwrap().to_vector(&p.layout(), Some(&p.property))
    }

    proptest! {
        #[test]
        fn normalization_preserves_feasibility(
            xs in proptest::collection::vec((-20i64..20, 1i64..8), 1..8),
            coords in proptest::collection::vec((-4i64..4, 1i64..4), 7),
        ) {
            let p = worked();
            let alpha: PhaseAssignment = [GuardLiteral::new(UnitId::new(0, 1), Phase::Active)].into_iter().collect();
            let store = Store::build_initial(&p, &p.region, &alpha, &[]);
            let sys = store.normalize();
            let mut points: Vec<Vec<Rational>> = xs.iter().map(|(n, d)| trace_point(&p, &q(*n, *d * 4))).collect();
            points.push(coords.iter().map(|(n, d)| q(*n, *d)).collect());
            for v in points {
                let in_store = store.active_ids().all(|i| store.constraint(i).is_satisfied(&v));
                prop_assert_eq!(in_store, sys.is_satisfied(&v));
            }
        }

        #[test]
        fn exact_traces_satisfy_store(n in 0i64..=64) {
            // Traces that meet the negated property and alpha lie in the store.
            let mut p = worked();
            p.property.threshold = q(-1, 1);
            p.property.epsilon = q(0, 1);
            let x = q(n, 64);
            let v = trace_point(&p, &x);
            let unit = UnitId::new(0, 0);
            let phase = if v[p.layout().unit_s(unit)].is_negative() { Phase::Inactive } else { Phase::Active };
            let alpha: PhaseAssignment = [GuardLiteral::new(unit, phase)].into_iter().collect();
            let store = Store::build_initial(&p, &p.region, &alpha, &[]);
            prop_assert!(store.violated(&v).is_empty());
        }
    }
}
