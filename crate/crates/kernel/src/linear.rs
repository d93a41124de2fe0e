//! Sparse rational rows over the global variable vector.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

/// Sparse coefficient row: strictly increasing indices, no zero coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseRow(Vec<(usize, Rational)>);

impl SparseRow {
    pub fn new() -> Self {
        SparseRow(Vec::new())
    }

    /// Builds a row from arbitrary entries, summing duplicates and dropping zeros.
    pub fn from_entries<I: IntoIterator<Item = (usize, Rational)>>(entries: I) -> Self {
        let mut v: Vec<(usize, Rational)> = entries.into_iter().collect();
        v.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, Rational)> = Vec::with_capacity(v.len());
        for (i, c) in v {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        SparseRow(out)
    }

    pub fn unit(index: usize) -> Self {
        SparseRow(vec![(index, Rational::one())])
    }

    /// True when indices are strictly increasing and no coefficient is zero.
    pub fn is_canonical(&self) -> bool {
        self.0.windows(2).all(|w| w[0].0 < w[1].0) && self.0.iter().all(|(_, c)| !c.is_zero())
    }

    pub fn entries(&self) -> &[(usize, Rational)] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, Rational)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Rational {
        match self.0.binary_search_by_key(&index, |(i, _)| *i) {
            Ok(p) => self.0[p].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().map(|(i, _)| *i)
    }

    pub fn negated(&self) -> Self {
        SparseRow(self.0.iter().map(|(i, c)| (*i, -c)).collect())
    }

    pub fn scaled(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return SparseRow::new();
        }
        SparseRow(self.0.iter().map(|(i, c)| (*i, c * k)).collect())
    }

    pub fn dot(&self, point: &[Rational]) -> Rational {
        self.0.iter().map(|(i, c)| c * &point[*i]).fold(Rational::zero(), |a, b| a + b)
    }
}

impl fmt::Debug for SparseRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, (i, c)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}·v{i}")?;
        }
        write!(f, "]")
    }
}

/// Dense accumulator for `Σ λ_i a_i`, counting the multiplications it performs.
#[derive(Debug, Clone)]
pub struct Accumulator {
    values: Vec<Rational>,
    touched: Vec<usize>,
    pub multiplications: u64,
}

impl Accumulator {
    pub fn new(width: usize) -> Self {
        Accumulator { values: vec![Rational::zero(); width], touched: Vec::new(), multiplications: 0 }
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }

    /// Adds `k · row`. Returns false if the row reaches past the accumulator width.
    pub fn add_scaled(&mut self, row: &SparseRow, k: &Rational) -> bool {
        if row.max_index().is_some_and(|m| m >= self.values.len()) {
            return false;
        }
        for (i, c) in row.iter() {
            self.multiplications += 1;
            if self.values[*i].is_zero() {
                self.touched.push(*i);
            }
            self.values[*i] += &(c * k);
        }
        true
    }

    pub fn into_row(self) -> SparseRow {
        let mut touched = self.touched;
        touched.sort_unstable();
        touched.dedup();
        let values = self.values;
        SparseRow(touched.into_iter().filter(|i| !values[*i].is_zero()).map(|i| (i, values[i].clone())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn from_entries_merges_and_drops_zeros() {
        let r = SparseRow::from_entries([(3, q(1, 2)), (1, q(2, 1)), (3, q(-1, 2)), (0, q(0, 1))]);
        assert_eq!(r.entries(), &[(1, q(2, 1))]);
        assert!(r.is_canonical());
    }

    #[test]
    fn accumulator_sums_rows() {
        let mut acc = Accumulator::new(4);
        assert!(acc.add_scaled(&SparseRow::from_entries([(0, q(1, 1)), (2, q(-1, 1))]), &q(2, 1)));
        assert!(acc.add_scaled(&SparseRow::from_entries([(2, q(2, 1))]), &q(1, 1)));
        assert!(!acc.add_scaled(&SparseRow::unit(7), &q(1, 1)));
        assert_eq!(acc.multiplications, 3);
        assert_eq!(acc.into_row(), SparseRow::from_entries([(0, q(2, 1))]));
    }
}
