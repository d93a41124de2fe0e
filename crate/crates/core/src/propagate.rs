//! Node propagation: triangle relaxation, bound tightening by tight dual
//! certificates, stabilization, lemma injection and the feasibility check,
//! iterated to a fixed point.

use std::collections::BTreeMap;

use relucert_kernel::certs::{DualBoundCertificate, FarkasCertificate, StabilityCertificate, StabilityEvidence};
use relucert_kernel::model::{Region, UnitId};
use relucert_kernel::store::{
    guard_consequences, hull_bound, hull_rows, Block, BoundSource, GuardLiteral, LinearConstraint, NormalizedSystem,
    Origin, Phase, PhaseAssignment, RowId, Store, UnitBounds,
};
use relucert_kernel::{Rational, SparseRow};

use crate::engine::{Counters, Engine, EngineError};
use crate::learn::Knowledge;
use crate::lp::{SysFeasibility, SysOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Neuron LPs include the negated property; nodes close by infeasibility.
    #[default]
    Icl,
    /// No LP sees the negated property; nodes close by a margin bound.
    Hsrv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemplateSet {
    /// Pre-activation of every unstable unit, plus the margin.
    #[default]
    Default,
    MarginOnly,
}

#[derive(Debug, Clone, Copy)]
pub struct PropagateConfig {
    pub mode: Mode,
    pub templates: TemplateSet,
    pub max_iterations: usize,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        PropagateConfig { mode: Mode::Icl, templates: TemplateSet::Default, max_iterations: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Neuron(UnitId),
    Margin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub g: SparseRow,
    pub kind: TemplateKind,
}

pub fn templates(store: &Store, set: TemplateSet) -> Vec<Template> {
    let layout = store.layout();
    let mut out = Vec::new();
    if set == TemplateSet::Default {
        for unit in store.unstable() {
            out.push(Template { g: SparseRow::unit(layout.unit_s(unit)), kind: TemplateKind::Neuron(unit) });
        }
    }
    if let Some(aux) = layout.aux() {
        out.push(Template { g: SparseRow::unit(aux), kind: TemplateKind::Margin });
    }
    out
}

/// Active hull rows of `unit`.
pub fn hull_ids(store: &Store, unit: UnitId) -> Vec<usize> {
    store
        .active_ids()
        .filter(|&i| matches!(store.constraint(i).origin, Origin::Hull { unit: u, .. } if u == unit))
        .collect()
}

/// Replaces the hull rows of an unstable unit by those for its current bounds.
pub fn hull_insert(store: &mut Store, unit: UnitId) -> Vec<usize> {
    let Some(b) = store.bounds().get(unit).cloned() else { return Vec::new() };
    if !b.is_unstable() {
        return Vec::new();
    }
    for id in hull_ids(store, unit) {
        store.retire(id);
    }
    let UnitBounds { lower, upper, lower_src, upper_src } = b;
    let rows = hull_rows(store.layout(), unit, &lower, &upper);
    rows.into_iter()
        .map(|(row, rhs)| {
            let origin = Origin::Hull {
                unit,
                lower: lower.clone(),
                upper: upper.clone(),
                lower_src: lower_src.clone(),
                upper_src: upper_src.clone(),
            };
            store.add(LinearConstraint::leq(row, rhs, Block::Rel, origin)).0
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct TgctReport {
    pub templates: usize,
    pub added: usize,
    pub infeasible: Option<FarkasCertificate>,
    /// Certificate of the most recent margin maximization.
    pub margin: Option<DualBoundCertificate>,
    pub bound_prune: Option<DualBoundCertificate>,
}

/// Tightest active `g ≤ rhs` in the store.
fn stored_upper(store: &Store, g: &SparseRow) -> Option<Rational> {
    store
        .active_ids()
        .map(|i| store.constraint(i))
        .filter(|c| c.row == *g && c.relation == relucert_kernel::store::Relation::LessEq)
        .map(|c| c.rhs.clone())
        .min()
}

fn push_new(store: &Store, id: usize, with: &mut NormalizedSystem, without: &mut NormalizedSystem) {
    let c = store.constraint(id);
    for (negated, row, rhs) in c.normalized() {
        let rid = RowId { constraint: id, negated };
        with.push(rid, row.clone(), rhs.clone());
        if c.block != Block::NegP {
            without.push(rid, row, rhs);
        }
    }
}

/// One tightening pass: maximize and minimize every template and add each
/// strictly tighter bound as a row justified by its dual multipliers.
pub fn tgct(
    engine: &Engine<'_>,
    store: &mut Store,
    templates: &[Template],
    mode: Mode,
) -> Result<TgctReport, EngineError> {
    let mut with = store.normalize();
    let mut without = store.normalize_where(|c| c.block != Block::NegP);
    let mut report = TgctReport { templates: templates.len(), ..TgctReport::default() };
    let level = engine.problem.property.violation_level();
    for t in templates {
        let neg_p = matches!((t.kind, mode), (TemplateKind::Neuron(_), Mode::Icl));
        for maximize in [true, false] {
            let sys = if neg_p { &with } else { &without };
            let out = if maximize { engine.lp_max(sys, &t.g)? } else { engine.lp_min(sys, &t.g)? };
            let (value, cert) = match out {
                SysOutcome::Optimal { value, cert, .. } => (value, cert),
                SysOutcome::Infeasible(f) => {
                    report.infeasible = Some(f);
                    return Ok(report);
                }
                SysOutcome::Unbounded { .. } => continue,
            };
            if maximize && t.kind == TemplateKind::Margin {
                report.margin = Some(cert.clone());
                if mode == Mode::Hsrv && value < level {
                    report.bound_prune = Some(cert);
                    return Ok(report);
                }
            }
            let tighter = match (t.kind, maximize) {
                (TemplateKind::Neuron(u), true) => store.bounds().get(u).is_some_and(|b| value < b.upper),
                (TemplateKind::Neuron(u), false) => store.bounds().get(u).is_some_and(|b| value > b.lower),
                (TemplateKind::Margin, _) => stored_upper(store, &cert.g).is_none_or(|cur| cert.beta < cur),
            };
            if !tighter {
                continue;
            }
            let c = LinearConstraint::leq(
                cert.g.clone(),
                cert.beta.clone(),
                Block::Rel,
                Origin::Tgct { lambda: cert.lambda },
            );
            let (id, grew) = store.add(c);
            if let TemplateKind::Neuron(u) = t.kind {
                let src = BoundSource::Row(RowId::pos(id));
                if maximize {
                    store.bounds_mut().tighten_upper(u, value, src);
                } else {
                    store.bounds_mut().tighten_lower(u, value, src);
                }
            }
            if grew {
                report.added += 1;
                push_new(store, id, &mut with, &mut without);
            }
        }
    }
    Counters::bump(&engine.counters.tgct_rows, report.added as u64);
    Ok(report)
}

fn stability_evidence(store: &Store, bound: &Rational, src: &BoundSource) -> StabilityEvidence {
    match src {
        BoundSource::Interval => StabilityEvidence::Interval { bound: bound.clone() },
        BoundSource::Row(id) => {
            let c = store.constraint(id.constraint);
            let lambda = match &c.origin {
                Origin::Tgct { lambda } => lambda.clone(),
                _ => vec![(*id, Rational::one())],
            };
            StabilityEvidence::Dual(DualBoundCertificate { g: c.row.clone(), beta: c.rhs.clone(), lambda })
        }
    }
}

/// Fixes the phase of every free unit whose bounds exclude one side of zero.
pub fn stabilize(store: &mut Store) -> Vec<StabilityCertificate> {
    let mut out = Vec::new();
    let candidates: Vec<(UnitId, UnitBounds)> =
        store.bounds().iter().filter(|(u, _)| store.fixed_phase(**u).is_none()).map(|(u, b)| (*u, b.clone())).collect();
    for (unit, b) in candidates {
        let (phase, bound, src) = if !b.lower.is_negative() {
            (Phase::Active, b.lower, b.lower_src)
        } else if !b.upper.is_positive() {
            (Phase::Inactive, b.upper, b.upper_src)
        } else {
            continue;
        };
        for id in hull_ids(store, unit) {
            store.retire(id);
        }
        let lit = GuardLiteral::new(unit, phase);
        for mut c in guard_consequences(store.layout(), lit) {
            c.origin = Origin::Stability { unit, phase, bound: bound.clone(), evidence: src.clone() };
            store.add(c);
        }
        store.mark_stabilized(unit, phase);
        let evidence = stability_evidence(store, &bound, &src);
        out.push(StabilityCertificate { unit, phase, evidence });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeStatus {
    Infeasible(FarkasCertificate),
    BoundPruned(DualBoundCertificate),
    /// Not closed; `point` is a relaxation point of the store with the negated property.
    Open {
        point: Option<Vec<Rational>>,
    },
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub store: Store,
    pub status: NodeStatus,
    pub margin: Option<DualBoundCertificate>,
    pub stability: Vec<StabilityCertificate>,
    pub iterations: usize,
    /// Rows added by the tightening pass of each iteration.
    pub tgct_rows: Vec<usize>,
    pub templates: Vec<usize>,
}

/// Propagates the node `(region, alpha)` to a fixed point or the iteration cap.
pub fn propagate(
    engine: &Engine<'_>,
    region: &Region,
    alpha: &PhaseAssignment,
    knowledge: &Knowledge,
    cfg: &PropagateConfig,
) -> Result<Propagation, EngineError> {
    let mut store = Store::build_initial(engine.problem, region, alpha, &knowledge.lemma_rows());
    let mut injected = knowledge.lemma_count();
    let mut stability = stabilize(&mut store);
    let mut hulls: BTreeMap<UnitId, (Rational, Rational)> = BTreeMap::new();
    let mut p = Propagation {
        store: Store::empty(engine.layout.clone()),
        status: NodeStatus::Open { point: None },
        margin: None,
        stability: Vec::new(),
        iterations: 0,
        tgct_rows: Vec::new(),
        templates: Vec::new(),
    };
    let status = loop {
        if p.iterations >= cfg.max_iterations {
            break None;
        }
        p.iterations += 1;
        let before = (store.bounds().clone(), store.stabilized().len(), injected);
        for unit in store.unstable() {
            let b = store.bounds().get(unit).expect("relu unit has bounds");
            let key = (hull_bound(&b.lower, false), hull_bound(&b.upper, true));
            if hulls.get(&unit) != Some(&key) {
                hull_insert(&mut store, unit);
                hulls.insert(unit, key);
            }
        }
        let ts = templates(&store, cfg.templates);
        let rep = tgct(engine, &mut store, &ts, cfg.mode)?;
        p.tgct_rows.push(rep.added);
        p.templates.push(rep.templates);
        if rep.margin.is_some() {
            p.margin = rep.margin;
        }
        if let Some(f) = rep.infeasible {
            break Some(NodeStatus::Infeasible(f));
        }
        if let Some(c) = rep.bound_prune {
            break Some(NodeStatus::BoundPruned(c));
        }
        let fixed = stabilize(&mut store);
        Counters::bump(&engine.counters.stabilized_units, fixed.len() as u64);
        stability.extend(fixed);
        let n = knowledge.lemma_count();
        if n > injected {
            for row in &knowledge.lemma_rows()[injected..] {
                store.inject_lemma(row, region);
            }
            injected = n;
        }
        if cfg.mode == Mode::Icl {
            match engine.lp_feasible(&store.normalize())? {
                SysFeasibility::Infeasible(f) => break Some(NodeStatus::Infeasible(f)),
                SysFeasibility::Feasible(pt) => p.status = NodeStatus::Open { point: Some(pt) },
            }
        }
        if (store.bounds().clone(), store.stabilized().len(), injected) == before {
            break None;
        }
    };
    if let Some(s) = status {
        p.status = s;
    }
    p.store = store;
    p.stability = stability;
    Ok(p)
}
