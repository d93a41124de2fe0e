//! Exact rational LP over `A v ≤ b` with free `v`.
//!
//! `max gᵀv s.t. A v ≤ b` is solved through its dual `min bᵀλ s.t. Aᵀλ = g, λ ≥ 0`
//! by a two-phase tableau simplex over integer rows. The dual optimum is the
//! bound certificate, an unbounded dual ray is a Farkas certificate, and the
//! primal point is read from the reduced costs of the artificial columns.
//! Every outcome is verified exactly before it is returned.

use std::collections::BTreeMap;

use dashu_int::IBig;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use relucert_kernel::certs::{DualBoundCertificate, FarkasCertificate};
use relucert_kernel::store::NormalizedSystem;
use relucert_kernel::{Rational, SparseRow};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STALL: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("pivot limit of {0} reached")]
    ResourceLimit(usize),
    #[error("internal self-check failed: {0}")]
    SelfCheck(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpLimits {
    pub max_pivots: usize,
}

impl Default for LpLimits {
    fn default() -> Self {
        LpLimits { max_pivots: 100_000 }
    }
}

/// Borrowed `coeffs · v ≤ rhs`.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub coeffs: &'a SparseRow,
    pub rhs: &'a Rational,
}

/// Multipliers are sparse over row positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rational, primal: Vec<Rational>, dual: Vec<(usize, Rational)> },
    Infeasible { farkas: Vec<(usize, Rational)> },
    Unbounded { ray: Vec<Rational> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(Vec<Rational>),
    Infeasible(Vec<(usize, Rational)>),
}

/// One tableau row over a common positive denominator: the value at column
/// `c` is `a[c] / den`. Rows are kept primitive, so the only gcd per pivot is
/// one content gcd per updated row instead of one per entry.
#[derive(Clone)]
struct Row {
    a: Vec<IBig>,
    rhs: IBig,
    den: IBig,
}

impl Row {
    /// Divides out the content and makes `den` positive.
    fn reduce(&mut self) {
        if self.den.is_negative() {
            for v in self.a.iter_mut().chain([&mut self.rhs, &mut self.den]) {
                *v = -std::mem::take(v);
            }
        }
        let mut g = self.den.clone();
        for v in self.a.iter().chain([&self.rhs]) {
            if g.is_one() {
                return;
            }
            if !v.is_zero() {
                g = g.gcd(v);
            }
        }
        if g.is_one() {
            return;
        }
        for v in self.a.iter_mut().chain([&mut self.rhs, &mut self.den]) {
            if !v.is_zero() {
                *v = &*v / &g;
            }
        }
    }

    /// `self − self[k] · pivot` where `pivot[k] = 1`.
    fn eliminate(&mut self, pivot: &Row, k: usize) {
        let f = self.a[k].clone();
        if f.is_zero() {
            return;
        }
        // pivot.a[k] == pivot.den, so pivot reads as pivot.a / p.
        let p = &pivot.den;
        for (v, y) in self.a.iter_mut().zip(&pivot.a) {
            match (v.is_zero(), y.is_zero()) {
                (true, true) => {}
                (false, true) => *v = &*v * p,
                (true, false) => *v = -(&f * y),
                (false, false) => *v = &*v * p - &f * y,
            }
        }
        self.rhs = &self.rhs * p - &f * &pivot.rhs;
        self.den = &self.den * p;
        self.reduce();
    }
}

/// Dual tableau. `cost` holds the reduced costs, with minus the objective
/// value in `cost.rhs`, so it updates like any other row.
struct Tableau {
    rows: Vec<Row>,
    basis: Vec<usize>,
    cost: Row,
    pivots: usize,
    limit: usize,
}

enum Step {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn pivot(&mut self, r: usize, k: usize) {
        self.pivots += 1;
        let pivot = &mut self.rows[r];
        pivot.den = pivot.a[k].clone();
        pivot.reduce();
        let pivot = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                row.eliminate(&pivot, k);
            }
        }
        self.cost.eliminate(&pivot, k);
        self.basis[r] = k;
    }

    /// Dantzig pricing until a run of degenerate pivots, then Bland's rule
    /// for the rest of the phase so the method cannot cycle.
    fn run(&mut self, allowed: usize) -> Result<Step, LpError> {
        let mut stalled = 0usize;
        loop {
            let d = &self.cost.a;
            let entering = if stalled < DEGENERATE_STALL {
                (0..allowed).filter(|&c| d[c].is_negative()).fold(None, |best: Option<usize>, c| match best {
                    Some(b) if d[b] <= d[c] => Some(b),
                    _ => Some(c),
                })
            } else {
                (0..allowed).find(|&c| d[c].is_negative())
            };
            let Some(k) = entering else {
                return Ok(Step::Optimal);
            };
            // Minimum ratio rhs / a[k], ties to the smallest basic column.
            let mut best: Option<usize> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row.a[k].is_positive() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(br) => {
                        let lhs = &row.rhs * &self.rows[br].a[k];
                        let rhs = &self.rows[br].rhs * &row.a[k];
                        lhs < rhs || (lhs == rhs && self.basis[r] < self.basis[br])
                    }
                };
                if better {
                    best = Some(r);
                }
            }
            let Some(r) = best else {
                return Ok(Step::Unbounded(k));
            };
            if self.rows[r].rhs.is_zero() {
                stalled += 1;
            } else if stalled < DEGENERATE_STALL {
                stalled = 0;
            }
            if self.pivots >= self.limit {
                return Err(LpError::ResourceLimit(self.limit));
            }
            self.pivot(r, k);
        }
    }

    fn set_costs(&mut self, costs: &[IBig]) {
        let mut l = IBig::one();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if !costs[b].is_zero() {
                l = l.lcm(&row.den);
            }
        }
        let mut cost = Row { a: costs.iter().map(|c| c * &l).collect(), rhs: IBig::zero(), den: l.clone() };
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if costs[b].is_zero() {
                continue;
            }
            let f = &costs[b] * (&l / &row.den);
            for (v, y) in cost.a.iter_mut().zip(&row.a) {
                if !y.is_zero() {
                    *v -= &f * y;
                }
            }
            cost.rhs -= &f * &row.rhs;
        }
        cost.reduce();
        self.cost = cost;
    }

    fn reduced_cost(&self, c: usize) -> Rational {
        ratio(&self.cost.a[c], &self.cost.den)
    }

    fn objective_is_positive(&self) -> bool {
        self.cost.rhs.is_negative()
    }
}

/// Smallest positive integer clearing every denominator in `vals`.
fn clearing_scale<'a>(vals: impl IntoIterator<Item = &'a Rational>) -> IBig {
    vals.into_iter().fold(IBig::one(), |acc, v| if v.is_integer() { acc } else { acc.lcm(&from_num(&v.denom())) })
}

/// `v · s` for an integer result.
fn scaled(v: &Rational, s: &IBig) -> IBig {
    from_num(&v.numer()) * (s / from_num(&v.denom()))
}

fn from_num(v: &BigInt) -> IBig {
    IBig::from_le_bytes(&v.to_signed_bytes_le())
}

/// `num / den` for a nonzero `den`.
fn ratio(num: &IBig, den: &IBig) -> Rational {
    match (i64::try_from(num), i64::try_from(den)) {
        (Ok(n), Ok(d)) => Rational::new(n, d),
        _ => {
            let to_num = |v: &IBig| BigInt::from_signed_bytes_le(&v.to_le_bytes());
            Rational::from_bigints(to_num(num), to_num(den)).expect("nonzero denominator")
        }
    }
}

/// Maximizes `gᵀv` over `rows`; `width` is the length of `v`.
pub fn maximize(rows: &[RowView<'_>], width: usize, g: &SparseRow, limits: LpLimits) -> Result<LpOutcome, LpError> {
    let out = solve(rows, width, g, limits)?;
    verify(rows, width, g, &out)?;
    Ok(out)
}

/// Minimizes `gᵀv`; the dual of an optimum certifies `−gᵀv ≤ −value`.
pub fn minimize(rows: &[RowView<'_>], width: usize, g: &SparseRow, limits: LpLimits) -> Result<LpOutcome, LpError> {
    Ok(match maximize(rows, width, &g.negated(), limits)? {
        LpOutcome::Optimal { value, primal, dual } => LpOutcome::Optimal { value: -value, primal, dual },
        other => other,
    })
}

pub fn feasibility(rows: &[RowView<'_>], width: usize, limits: LpLimits) -> Result<Feasibility, LpError> {
    match maximize(rows, width, &SparseRow::new(), limits)? {
        LpOutcome::Optimal { primal, .. } => Ok(Feasibility::Feasible(primal)),
        LpOutcome::Infeasible { farkas } => Ok(Feasibility::Infeasible(farkas)),
        LpOutcome::Unbounded { .. } => Err(LpError::SelfCheck("zero objective reported unbounded")),
    }
}

fn solve(rows: &[RowView<'_>], width: usize, g: &SparseRow, limits: LpLimits) -> Result<LpOutcome, LpError> {
    // Only variables that occur somewhere get a tableau row.
    let mut vars: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, _) in rows.iter().flat_map(|r| r.coeffs.iter()).chain(g.iter()) {
        vars.insert(*i, 0);
    }
    for (k, v) in vars.values_mut().enumerate() {
        *v = k;
    }
    let n = vars.len();
    let m = rows.len();
    let flip: Vec<bool> = vars.keys().map(|&j| g.get(j).is_negative()).collect();
    // Column i is row i of A scaled by s_i, so the dual variable is λ_i / s_i.
    let scale: Vec<IBig> =
        rows.iter().map(|r| clearing_scale(r.coeffs.iter().map(|(_, a)| a).chain(std::iter::once(r.rhs)))).collect();
    let mut a = vec![vec![IBig::zero(); m + n]; n];
    for (i, r) in rows.iter().enumerate() {
        for (j, coef) in r.coeffs.iter() {
            let row = vars[j];
            let v = scaled(coef, &scale[i]);
            a[row][i] = if flip[row] { -v } else { v };
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        row[m + j] = IBig::one();
    }
    // The right-hand side |g| is scaled by g_scale; the objective scales with it.
    let gs: Vec<Rational> = vars.keys().map(|&j| g.get(j).abs()).collect();
    let g_scale = clearing_scale(&gs);
    let mut tab = Tableau {
        rows: a.into_iter().zip(&gs).map(|(a, v)| Row { a, rhs: scaled(v, &g_scale), den: IBig::one() }).collect(),
        basis: (m..m + n).collect(),
        cost: Row { a: Vec::new(), rhs: IBig::zero(), den: IBig::one() },
        pivots: 0,
        limit: limits.max_pivots,
    };
    let sign = |row: usize, v: Rational| if flip[row] { -v } else { v };

    let mut phase1 = vec![IBig::zero(); m + n];
    for c in phase1.iter_mut().skip(m) {
        *c = IBig::one();
    }
    tab.set_costs(&phase1);
    if let Step::Unbounded(_) = tab.run(m)? {
        return Err(LpError::SelfCheck("phase one is bounded below"));
    }
    if tab.objective_is_positive() {
        // g is not in the cone of the rows: the ray w satisfies A w ≤ 0, gᵀw > 0.
        let mut ray = vec![Rational::zero(); width];
        for (&j, &row) in &vars {
            ray[j] = sign(row, Rational::one() - tab.reduced_cost(m + row));
        }
        let unconstrained = feasibility_inner(rows, width, limits)?;
        return Ok(match unconstrained {
            Feasibility::Feasible(_) => LpOutcome::Unbounded { ray },
            Feasibility::Infeasible(farkas) => LpOutcome::Infeasible { farkas },
        });
    }

    // Drive zero-level artificials out of the basis where possible.
    for r in 0..n {
        if tab.basis[r] >= m {
            if let Some(k) = (0..m).find(|&c| !tab.rows[r].a[c].is_zero()) {
                tab.pivot(r, k);
            }
        }
    }
    let mut phase2 = vec![IBig::zero(); m + n];
    for (i, r) in rows.iter().enumerate() {
        phase2[i] = scaled(r.rhs, &scale[i]);
    }
    tab.set_costs(&phase2);
    match tab.run(m)? {
        Step::Unbounded(k) => {
            // λ_k = 1 and λ_b = −s_b · T[r][k] / s_k for basic b.
            let mut farkas = vec![(k, Rational::one())];
            for (row, &b) in tab.rows.iter().zip(&tab.basis) {
                if b < m && !row.a[k].is_zero() {
                    farkas.push((b, ratio(&-(&scale[b] * &row.a[k]), &(&row.den * &scale[k]))));
                }
            }
            farkas.sort_by_key(|(i, _)| *i);
            Ok(LpOutcome::Infeasible { farkas })
        }
        Step::Optimal => {
            let mut dual: Vec<(usize, Rational)> = tab
                .rows
                .iter()
                .zip(&tab.basis)
                .filter(|(row, &b)| b < m && !row.rhs.is_zero())
                .map(|(row, &b)| (b, ratio(&(&scale[b] * &row.rhs), &(&row.den * &g_scale))))
                .collect();
            dual.sort_by_key(|(i, _)| *i);
            let mut primal = vec![Rational::zero(); width];
            for (&j, &row) in &vars {
                primal[j] = -sign(row, tab.reduced_cost(m + row));
            }
            let value = ratio(&-&tab.cost.rhs, &(&tab.cost.den * &g_scale));
            Ok(LpOutcome::Optimal { value, primal, dual })
        }
    }
}

fn feasibility_inner(rows: &[RowView<'_>], width: usize, limits: LpLimits) -> Result<Feasibility, LpError> {
    match solve(rows, width, &SparseRow::new(), limits)? {
        LpOutcome::Optimal { primal, .. } => Ok(Feasibility::Feasible(primal)),
        LpOutcome::Infeasible { farkas } => Ok(Feasibility::Infeasible(farkas)),
        LpOutcome::Unbounded { .. } => Err(LpError::SelfCheck("zero objective reported unbounded")),
    }
}

fn combination(rows: &[RowView<'_>], width: usize, lambda: &[(usize, Rational)]) -> Option<(SparseRow, Rational)> {
    let mut acc = relucert_kernel::Accumulator::new(width);
    let mut rhs = Rational::zero();
    for (i, l) in lambda {
        if l.is_negative() {
            return None;
        }
        let r = rows.get(*i)?;
        if !acc.add_scaled(r.coeffs, l) {
            return None;
        }
        rhs += &(l * r.rhs);
    }
    Some((acc.into_row(), rhs))
}

fn verify(rows: &[RowView<'_>], width: usize, g: &SparseRow, out: &LpOutcome) -> Result<(), LpError> {
    let feasible = |v: &[Rational]| rows.iter().all(|r| r.coeffs.dot(v) <= *r.rhs);
    match out {
        LpOutcome::Optimal { value, primal, dual } => {
            let (combo, bound) = combination(rows, width, dual).ok_or(LpError::SelfCheck("dual sign"))?;
            if combo != *g || bound != *value {
                return Err(LpError::SelfCheck("dual certificate"));
            }
            if !feasible(primal) || g.dot(primal) != *value {
                return Err(LpError::SelfCheck("primal point"));
            }
        }
        LpOutcome::Infeasible { farkas } => {
            let (combo, bound) = combination(rows, width, farkas).ok_or(LpError::SelfCheck("farkas sign"))?;
            if !combo.is_empty() || !bound.is_negative() {
                return Err(LpError::SelfCheck("farkas certificate"));
            }
        }
        LpOutcome::Unbounded { ray } => {
            let recedes = rows.iter().all(|r| !r.coeffs.dot(ray).is_positive());
            if !recedes || !g.dot(ray).is_positive() {
                return Err(LpError::SelfCheck("unbounded ray"));
            }
        }
    }
    Ok(())
}

/// Outcome over a [`NormalizedSystem`], with certificates addressed by row id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SysOutcome {
    Optimal { value: Rational, primal: Vec<Rational>, cert: DualBoundCertificate },
    Infeasible(FarkasCertificate),
    Unbounded { ray: Vec<Rational> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SysFeasibility {
    Feasible(Vec<Rational>),
    Infeasible(FarkasCertificate),
}

fn views(sys: &NormalizedSystem) -> Vec<RowView<'_>> {
    sys.rows().iter().map(|r| RowView { coeffs: &r.coeffs, rhs: &r.rhs }).collect()
}

fn by_id(sys: &NormalizedSystem, lambda: Vec<(usize, Rational)>) -> Vec<(relucert_kernel::store::RowId, Rational)> {
    lambda.into_iter().map(|(i, l)| (sys.rows()[i].id, l)).collect()
}

/// `β^max = max{gᵀv : A v ≤ b}` with a dual certificate for `gᵀv ≤ β^max`.
pub fn lp_max(sys: &NormalizedSystem, g: &SparseRow, limits: LpLimits) -> Result<SysOutcome, LpError> {
    Ok(match maximize(&views(sys), sys.width(), g, limits)? {
        LpOutcome::Optimal { value, primal, dual } => SysOutcome::Optimal {
            cert: DualBoundCertificate { g: g.clone(), beta: value.clone(), lambda: by_id(sys, dual) },
            value,
            primal,
        },
        LpOutcome::Infeasible { farkas } => SysOutcome::Infeasible(FarkasCertificate { lambda: by_id(sys, farkas) }),
        LpOutcome::Unbounded { ray } => SysOutcome::Unbounded { ray },
    })
}

/// `β^min = min{gᵀv}`; the certificate proves `−gᵀv ≤ −β^min`.
pub fn lp_min(sys: &NormalizedSystem, g: &SparseRow, limits: LpLimits) -> Result<SysOutcome, LpError> {
    Ok(match lp_max(sys, &g.negated(), limits)? {
        SysOutcome::Optimal { value, primal, cert } => SysOutcome::Optimal { value: -value, primal, cert },
        other => other,
    })
}

pub fn lp_feasible(sys: &NormalizedSystem, limits: LpLimits) -> Result<SysFeasibility, LpError> {
    Ok(match feasibility(&views(sys), sys.width(), limits)? {
        Feasibility::Feasible(p) => SysFeasibility::Feasible(p),
        Feasibility::Infeasible(l) => SysFeasibility::Infeasible(FarkasCertificate { lambda: by_id(sys, l) }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use relucert_kernel::certs::{check_dual, check_farkas};
    use relucert_kernel::q;

    /// `(column, num, den)` entries and a `(num, den)` right-hand side.
    type TestRow = (Vec<(usize, i64, i64)>, (i64, i64));

    fn sys(width: usize, rows: Vec<TestRow>) -> NormalizedSystem {
        NormalizedSystem::from_rows(
            width,
            rows.into_iter()
                .map(|(e, (n, d))| (SparseRow::from_entries(e.into_iter().map(|(i, a, b)| (i, q(a, b)))), q(n, d))),
        )
    }

    // Variables (z1, z2, y) = (0, 1, 2).
    fn worked(with_negp: bool) -> NormalizedSystem {
        let mut rows = vec![
            (vec![(0, 1, 1)], (1, 1)),
            (vec![(1, -1, 1)], (0, 1)),
            (vec![(0, -1, 1), (1, 1, 1), (2, 1, 1)], (0, 1)),
        ];
        if with_negp {
            rows.push((vec![(2, -1, 1)], (-11, 10)));
        }
        sys(3, rows)
    }

    #[test]
    fn maximize_y_on_worked_rows() {
        let s = worked(false);
        match lp_max(&s, &SparseRow::unit(2), LpLimits::default()).unwrap() {
            SysOutcome::Optimal { value, cert, .. } => {
                assert_eq!(value, q(1, 1));
                let lam: Vec<_> = cert.lambda.iter().map(|(_, l)| l.clone()).collect();
                assert_eq!(lam, vec![q(1, 1); 3]);
                check_dual(&s, &cert).unwrap();
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn worked_rows_are_infeasible() {
        let s = worked(true);
        for g in [SparseRow::new(), SparseRow::unit(0), SparseRow::unit(2).negated()] {
            match lp_max(&s, &g, LpLimits::default()).unwrap() {
                SysOutcome::Infeasible(cert) => {
                    let lam: Vec<_> = cert.lambda.iter().map(|(_, l)| l.clone()).collect();
                    assert_eq!(lam, vec![q(1, 1); 4]);
                    check_farkas(&s, &cert).unwrap();
                }
                other => panic!("{other:?}"),
            }
        }
        assert!(matches!(lp_feasible(&s, LpLimits::default()).unwrap(), SysFeasibility::Infeasible(_)));
    }

    #[test]
    fn empty_system() {
        let s = NormalizedSystem::new(2);
        assert!(matches!(lp_max(&s, &SparseRow::unit(1), LpLimits::default()).unwrap(), SysOutcome::Unbounded { .. }));
        assert_eq!(lp_feasible(&s, LpLimits::default()).unwrap(), SysFeasibility::Feasible(vec![q(0, 1); 2]));
    }

    #[test]
    fn minimize_cases() {
        let s = sys(1, vec![(vec![(0, -1, 1)], (0, 1))]);
        match lp_min(&s, &SparseRow::unit(0), LpLimits::default()).unwrap() {
            SysOutcome::Optimal { value, cert, .. } => {
                assert_eq!(value, q(0, 1));
                assert_eq!(cert.lambda.len(), 1);
                assert_eq!(cert.g, SparseRow::unit(0).negated());
                check_dual(&s, &cert).unwrap();
            }
            other => panic!("{other:?}"),
        }
        let bad = sys(1, vec![(vec![(0, 1, 1)], (0, 1)), (vec![(0, -1, 1)], (-1, 1))]);
        match lp_min(&bad, &SparseRow::unit(0), LpLimits::default()).unwrap() {
            SysOutcome::Infeasible(cert) => {
                assert_eq!(cert.lambda.iter().map(|(_, l)| l.clone()).collect::<Vec<_>>(), vec![q(1, 1), q(1, 1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pivot_limit_is_reported() {
        let s = worked(false);
        assert_eq!(lp_max(&s, &SparseRow::unit(2), LpLimits { max_pivots: 0 }), Err(LpError::ResourceLimit(0)));
    }

    #[test]
    fn beale_cycling_example() {
        // Dantzig pricing alone cycles on this one; the optimum is x = (1, 0, 1, 0).
        let s = sys(
            4,
            vec![
                (vec![(0, 1, 4), (1, -8, 1), (2, -1, 1), (3, 9, 1)], (0, 1)),
                (vec![(0, 1, 2), (1, -12, 1), (2, -1, 2), (3, 3, 1)], (0, 1)),
                (vec![(2, 1, 1)], (1, 1)),
                (vec![(0, -1, 1)], (0, 1)),
                (vec![(1, -1, 1)], (0, 1)),
                (vec![(2, -1, 1)], (0, 1)),
                (vec![(3, -1, 1)], (0, 1)),
            ],
        );
        let g = SparseRow::from_entries([(0, q(3, 4)), (1, q(-20, 1)), (2, q(1, 2)), (3, q(-6, 1))]);
        match lp_max(&s, &g, LpLimits::default()).unwrap() {
            SysOutcome::Optimal { value, cert, .. } => {
                assert_eq!(value, q(5, 4));
                assert!(check_dual(&s, &cert).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_redundant_rows() {
        // x ≤ 1 stated three times plus x + y ≤ 2, −y ≤ 0, −x ≤ 0.
        let s = sys(
            2,
            vec![
                (vec![(0, 1, 1)], (1, 1)),
                (vec![(0, 1, 1)], (1, 1)),
                (vec![(0, 2, 1)], (2, 1)),
                (vec![(0, 1, 1), (1, 1, 1)], (2, 1)),
                (vec![(1, -1, 1)], (0, 1)),
                (vec![(0, -1, 1)], (0, 1)),
            ],
        );
        let g = SparseRow::from_entries([(0, q(1, 1)), (1, q(1, 1))]);
        match lp_max(&s, &g, LpLimits::default()).unwrap() {
            SysOutcome::Optimal { value, .. } => assert_eq!(value, q(2, 1)),
            other => panic!("{other:?}"),
        }
    }
}
