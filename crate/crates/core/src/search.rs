//! Branch-and-bound search: worklist, splits, merge lemmas, conflict clauses,
//! and assembly of the proof log.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};

use relucert_kernel::certs::GuardedCertificate;
use relucert_kernel::model::{validate_witness, Problem, UnitId};
use relucert_kernel::prooflog::{
    Closure, DerivedRow, Descriptor, GateTree, LemmaChild, LemmaEntry, NodeContent, ProofLog, ProofNode, SplitKind,
    PROOF_VERSION,
};
use relucert_kernel::store::{LemmaRow, PhaseAssignment, Store};
use relucert_kernel::{Rational, SparseRow};

use crate::emit::{self, GateNode};
use crate::engine::{Counters, Engine, EngineError};
use crate::gate::{exactness_gate, GateOutcome};
use crate::learn::{ClauseRecord, Knowledge, LemmaRecord};
use crate::lp::LpError;
use crate::propagate::{propagate, Mode, NodeStatus, PropagateConfig, TemplateSet};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub mode: Mode,
    pub templates: TemplateSet,
    pub max_depth: usize,
    /// Total LP calls across the run.
    pub lp_budget: Option<u64>,
    /// LP calls per gate invocation; exhaustion splits the node instead.
    pub gate_budget: Option<u64>,
    pub workers: usize,
    /// Bisect the root's longest edge before any propagation.
    pub force_root_split: bool,
    /// Use a domain split at every depth divisible by `k`.
    pub domain_every: Option<usize>,
    pub max_iterations: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: Mode::Icl,
            templates: TemplateSet::Default,
            max_depth: 40,
            lp_budget: None,
            gate_budget: Some(256),
            workers: 1,
            force_root_split: false,
            domain_every: None,
            max_iterations: PropagateConfig::default().max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnknownReason {
    LpBudget,
    DepthLimit,
    NothingToSplit,
    Solver(String),
}

impl std::fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnknownReason::LpBudget => write!(f, "lp-budget"),
            UnknownReason::DepthLimit => write!(f, "depth-limit"),
            UnknownReason::NothingToSplit => write!(f, "nothing-to-split"),
            UnknownReason::Solver(s) => write!(f, "solver: {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyResult {
    Sat(Vec<Rational>),
    Unsat(Box<ProofLog>),
    Unknown(UnknownReason),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub splits: u64,
    pub lp_calls: u64,
    pub gate_invocations: u64,
    pub gate_refinements: u64,
    pub gate_bound_violations: u64,
    pub stabilized_units: u64,
    pub lemmas_learned: u64,
    pub clauses_learned: u64,
    pub tgct_rows: u64,
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub result: VerifyResult,
    pub stats: SearchStats,
    /// Learned lemmas in id order, for callers that re-inject them.
    pub lemmas: Vec<LemmaRow>,
}

struct TreeNode {
    descriptor: Descriptor,
    depth: usize,
    parent: Option<usize>,
    content: Option<NodeContent>,
    margin: Option<LemmaChild>,
    merged: bool,
}

enum Outcome {
    Leaf(Vec<DerivedRow>, Closure),
    Split(SplitKind),
    Sat(Vec<Rational>),
    Unknown(UnknownReason),
}

struct Ctx<'a, 'p> {
    engine: &'a Engine<'p>,
    knowledge: &'a Knowledge,
    cfg: &'a SearchConfig,
}

fn engine_unknown(e: EngineError) -> UnknownReason {
    match e {
        EngineError::Budget => UnknownReason::LpBudget,
        EngineError::Lp(LpError::ResourceLimit(n)) => UnknownReason::Solver(format!("pivot limit {n}")),
        EngineError::Lp(e) => UnknownReason::Solver(e.to_string()),
    }
}

/// Phase split on the unstable unit with the largest `min(−l, u)`, or a
/// longest-edge bisection when no unit is unstable or the depth calls for one.
pub fn choose_split(store: &Store, desc: &Descriptor, depth: usize, domain_every: Option<usize>) -> Option<SplitKind> {
    let unstable = store.unstable();
    let want_domain = unstable.is_empty() || domain_every.is_some_and(|k| k > 0 && depth.is_multiple_of(k));
    let phase = || {
        let mut best: Option<(UnitId, Rational)> = None;
        for u in &unstable {
            let b = store.bounds().get(*u).expect("unit has bounds");
            let gap = (-&b.lower).min(b.upper.clone());
            if best.as_ref().is_none_or(|(_, g)| gap > *g) {
                best = Some((*u, gap));
            }
        }
        best.map(|(unit, _)| SplitKind::Phase { unit })
    };
    if !want_domain {
        return phase();
    }
    domain_split(desc).or_else(phase)
}

/// Bisection of the longest edge (lowest index on ties) at its midpoint.
pub fn domain_split(desc: &Descriptor) -> Option<SplitKind> {
    let r = &desc.region;
    let mut best: Option<(usize, Rational)> = None;
    for k in 0..r.dim() {
        let w = r.width(k);
        if w.is_positive() && best.as_ref().is_none_or(|(_, bw)| w > *bw) {
            best = Some((k, w));
        }
    }
    best.map(|(dim, _)| SplitKind::Domain { dim, at: r.lower[dim].midpoint(&r.upper[dim]) })
}

impl Ctx<'_, '_> {
    fn learn_clause(&self, store: &Store, desc: &Descriptor, cert: &GuardedCertificate) {
        let entry = emit::clause_entry(store, &desc.region, cert, self.knowledge);
        let mut scope = desc.alpha.clone();
        for l in &cert.guards {
            scope.assign(*l);
        }
        if entry.guards.len() < scope.len() {
            let before = self.knowledge.clause_count();
            let rec = ClauseRecord { region: desc.region.clone(), guards: entry.guards.clone(), entry };
            if self.knowledge.add_clause(rec) == before {
                Counters::bump(&self.engine.counters.clauses, 1);
            }
        }
    }

    fn gate_clauses(&self, store: &Store, desc: &Descriptor, node: &GateNode) {
        match node {
            GateNode::Infeasible(cert) => self.learn_clause(store, desc, cert),
            GateNode::Clause { .. } => {}
            GateNode::Branch { active, inactive, .. } => {
                self.gate_clauses(store, desc, active);
                self.gate_clauses(store, desc, inactive);
            }
        }
    }

    fn process(&self, desc: &Descriptor, depth: usize, is_root: bool) -> (Outcome, Option<LemmaChild>) {
        match self.process_inner(desc, depth, is_root) {
            Ok(r) => r,
            Err(e) => (Outcome::Unknown(engine_unknown(e)), None),
        }
    }

    fn process_inner(
        &self,
        desc: &Descriptor,
        depth: usize,
        is_root: bool,
    ) -> Result<(Outcome, Option<LemmaChild>), EngineError> {
        let counters = &self.engine.counters;
        Counters::bump(&counters.nodes, 1);
        if is_root && self.cfg.force_root_split {
            if let Some(split) = domain_split(desc) {
                return Ok((Outcome::Split(split), None));
            }
        }
        if let Some(index) = self.knowledge.find_clause(&desc.region, &desc.alpha) {
            return Ok((Outcome::Leaf(Vec::new(), Closure::Clause { index }), None));
        }
        let pcfg = PropagateConfig {
            mode: self.cfg.mode,
            templates: self.cfg.templates,
            max_iterations: self.cfg.max_iterations,
        };
        let prop = propagate(self.engine, &desc.region, &desc.alpha, self.knowledge, &pcfg)?;
        let store = &prop.store;
        let margin = prop.margin.as_ref().map(|c| emit::lemma_child(store, desc, c));
        match &prop.status {
            NodeStatus::Infeasible(f) => {
                if !desc.alpha.is_empty() {
                    let cert = GuardedCertificate {
                        guards: Vec::new(),
                        lambda: f
                            .lambda
                            .iter()
                            .map(|(r, l)| (relucert_kernel::certs::RowRef::Store(*r), l.clone()))
                            .collect(),
                    };
                    self.learn_clause(store, desc, &cert);
                }
                let (d, c) = emit::prune_infeasible(store, f);
                return Ok((Outcome::Leaf(d, c), margin));
            }
            NodeStatus::BoundPruned(cert) => {
                let (d, c) = emit::prune_bound(store, cert);
                return Ok((Outcome::Leaf(d, c), margin));
            }
            NodeStatus::Open { point } => {
                if let Some(pt) = point {
                    let x = pt[..self.engine.problem.network.input_dim()].to_vec();
                    if validate_witness(self.engine.problem, &x).is_accepted() {
                        return Ok((Outcome::Sat(x), margin));
                    }
                }
            }
        }
        let full = self.cfg.mode == Mode::Hsrv;
        let rep = exactness_gate(self.engine, store, &desc.region, self.knowledge, self.cfg.gate_budget, full)?;
        if rep.refinements > rep.unstable || rep.eliminations != rep.refinements {
            Counters::bump(&counters.gate_bound_violations, 1);
        }
        match rep.outcome {
            GateOutcome::Sat(x) => return Ok((Outcome::Sat(x), margin)),
            GateOutcome::Prune(node) => {
                self.gate_clauses(store, desc, &node);
                let (d, c) = emit::gate_leaf(store, node);
                return Ok((Outcome::Leaf(d, c), margin));
            }
            GateOutcome::Defer(_) => {}
        }
        if depth >= self.cfg.max_depth {
            return Ok((Outcome::Unknown(UnknownReason::DepthLimit), margin));
        }
        match choose_split(store, desc, depth, self.cfg.domain_every) {
            Some(split) => Ok((Outcome::Split(split), margin)),
            None => Ok((Outcome::Unknown(UnknownReason::NothingToSplit), margin)),
        }
    }
}

enum Terminal {
    Sat(Vec<Rational>),
    Unknown(UnknownReason),
}

struct Shared {
    arena: Vec<TreeNode>,
    work: Vec<usize>,
    in_flight: usize,
    stop: Option<Terminal>,
}

impl Shared {
    /// Records a processed node; returns true if the run is over.
    fn record(&mut self, ctx: &Ctx<'_, '_>, id: usize, outcome: Outcome, margin: Option<LemmaChild>) {
        self.arena[id].margin = margin;
        match outcome {
            Outcome::Leaf(derivation, closure) => {
                self.arena[id].content = Some(NodeContent::Leaf { derivation, closure });
            }
            Outcome::Split(split) => {
                let d = &self.arena[id];
                let kids = d.descriptor.split(ctx.engine.problem, &split).expect("chosen split applies");
                let depth = d.depth + 1;
                let first = self.arena.len();
                for descriptor in kids {
                    self.arena.push(TreeNode {
                        descriptor,
                        depth,
                        parent: Some(id),
                        content: None,
                        margin: None,
                        merged: false,
                    });
                }
                self.arena[id].content = Some(NodeContent::Split { split, children: vec![first, first + 1] });
                self.work.push(first + 1);
                self.work.push(first);
                Counters::bump(&ctx.engine.counters.splits, 1);
            }
            Outcome::Sat(x) => {
                self.stop.get_or_insert(Terminal::Sat(x));
            }
            Outcome::Unknown(r) => {
                self.stop.get_or_insert(Terminal::Unknown(r));
            }
        }
        self.try_merge(ctx, id);
    }

    /// Merges the margin bounds of two sibling children into a parent lemma.
    fn try_merge(&mut self, ctx: &Ctx<'_, '_>, id: usize) {
        let Some(p) = self.arena[id].parent else { return };
        if self.arena[p].merged {
            return;
        }
        let Some(NodeContent::Split { split, children }) = &self.arena[p].content else { return };
        let (Some(a), Some(b)) = (&self.arena[children[0]].margin, &self.arena[children[1]].margin) else { return };
        let bound = a.beta.clone().max(b.beta.clone());
        if self.arena[p].margin.as_ref().is_some_and(|m| bound >= m.beta) {
            return;
        }
        let Some(aux) = ctx.engine.layout.aux() else { return };
        let scope = self.arena[p].descriptor.clone();
        let entry = LemmaEntry {
            scope: scope.clone(),
            split: split.clone(),
            template: SparseRow::unit(aux),
            bound: bound.clone(),
            children: vec![a.clone(), b.clone()],
        };
        ctx.knowledge.add_lemma(|lid| LemmaRecord {
            row: LemmaRow { id: lid, region: scope.region, alpha: scope.alpha, row: SparseRow::unit(aux), rhs: bound },
            entry,
        });
        Counters::bump(&ctx.engine.counters.lemmas, 1);
        self.arena[p].merged = true;
    }
}

fn worker(ctx: &Ctx<'_, '_>, shared: &Mutex<Shared>, cv: &Condvar) {
    loop {
        let (id, desc, depth, is_root) = {
            let mut g = shared.lock().expect("search lock");
            loop {
                if g.stop.is_some() {
                    return;
                }
                if let Some(id) = g.work.pop() {
                    g.in_flight += 1;
                    let n = &g.arena[id];
                    break (id, n.descriptor.clone(), n.depth, n.parent.is_none());
                }
                if g.in_flight == 0 {
                    return;
                }
                g = cv.wait(g).expect("search lock");
            }
        };
        let (outcome, margin) = ctx.process(&desc, depth, is_root);
        let mut g = shared.lock().expect("search lock");
        g.record(ctx, id, outcome, margin);
        g.in_flight -= 1;
        cv.notify_all();
    }
}

fn remap_tree(tree: &mut GateTree, map: &mut dyn FnMut(usize) -> usize) {
    match tree {
        GateTree::Clause { index } => *index = map(*index),
        GateTree::Branch { active, inactive, .. } => {
            remap_tree(active, map);
            remap_tree(inactive, map);
        }
        GateTree::Infeasible { .. } => {}
    }
}

fn assemble(problem: &Problem, arena: Vec<TreeNode>, knowledge: &Knowledge) -> ProofLog {
    let mut order = Vec::with_capacity(arena.len());
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        order.push(id);
        if let Some(NodeContent::Split { children, .. }) = &arena[id].content {
            stack.push(children[1]);
            stack.push(children[0]);
        }
    }
    let pos: HashMap<usize, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut used: Vec<usize> = Vec::new();
    let mut remap = |k: usize| match used.iter().position(|u| *u == k) {
        Some(i) => i,
        None => {
            used.push(k);
            used.len() - 1
        }
    };
    let mut slots: Vec<Option<TreeNode>> = arena.into_iter().map(Some).collect();
    let mut nodes = Vec::with_capacity(order.len());
    for id in &order {
        let n = slots[*id].take().expect("each node once");
        let content = match n.content.expect("closed tree") {
            NodeContent::Split { split, children } => {
                NodeContent::Split { split, children: children.iter().map(|c| pos[c]).collect() }
            }
            NodeContent::Leaf { derivation, mut closure } => {
                match &mut closure {
                    Closure::Clause { index } => *index = remap(*index),
                    Closure::Gate { tree } => remap_tree(tree, &mut remap),
                    _ => {}
                }
                NodeContent::Leaf { derivation, closure }
            }
        };
        nodes.push(ProofNode { descriptor: n.descriptor, content });
    }
    let clauses = used.iter().map(|k| knowledge.clause(*k).expect("clause exists").entry).collect();
    ProofLog { version: PROOF_VERSION, digest: problem.digest(), lemmas: knowledge.lemma_entries(), clauses, nodes }
}

pub fn verify(problem: &Problem, cfg: &SearchConfig) -> Verification {
    verify_with(problem, cfg, &Knowledge::new())
}

/// Runs the search with a caller-owned knowledge base.
pub fn verify_with(problem: &Problem, cfg: &SearchConfig, knowledge: &Knowledge) -> Verification {
    let engine = Engine::new(problem).with_budget(cfg.lp_budget);
    let ctx = Ctx { engine: &engine, knowledge, cfg };
    let root = TreeNode {
        descriptor: Descriptor { region: problem.region.clone(), alpha: PhaseAssignment::new() },
        depth: 0,
        parent: None,
        content: None,
        margin: None,
        merged: false,
    };
    let shared = Mutex::new(Shared { arena: vec![root], work: vec![0], in_flight: 0, stop: None });
    let cv = Condvar::new();
    let workers = cfg.workers.max(1);
    if workers == 1 {
        worker(&ctx, &shared, &cv);
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| worker(&ctx, &shared, &cv));
            }
        });
    }
    let shared = shared.into_inner().expect("search lock");
    let result = match shared.stop {
        Some(Terminal::Sat(x)) => VerifyResult::Sat(x),
        Some(Terminal::Unknown(r)) => VerifyResult::Unknown(r),
        None => VerifyResult::Unsat(Box::new(assemble(problem, shared.arena, knowledge))),
    };
    let c = &engine.counters;
    let stats = SearchStats {
        nodes: Counters::get(&c.nodes),
        splits: Counters::get(&c.splits),
        lp_calls: Counters::get(&c.lp_calls),
        gate_invocations: Counters::get(&c.gate_invocations),
        gate_refinements: Counters::get(&c.gate_refinements),
        gate_bound_violations: Counters::get(&c.gate_bound_violations),
        stabilized_units: Counters::get(&c.stabilized_units),
        lemmas_learned: Counters::get(&c.lemmas),
        clauses_learned: Counters::get(&c.clauses),
        tgct_rows: Counters::get(&c.tgct_rows),
    };
    Verification { result, stats, lemmas: knowledge.lemma_rows() }
}

pub fn icl_verify(problem: &Problem, cfg: &SearchConfig) -> Verification {
    verify(problem, &SearchConfig { mode: Mode::Icl, ..cfg.clone() })
}

pub fn hsrv_verify(problem: &Problem, cfg: &SearchConfig) -> Verification {
    verify(problem, &SearchConfig { mode: Mode::Hsrv, ..cfg.clone() })
}
