//! Learned facts shared across the search: merged lemmas and conflict clauses,
//! each stored together with its proof-log entry.

use std::sync::RwLock;

use relucert_kernel::model::Region;
use relucert_kernel::prooflog::{ClauseEntry, LemmaEntry};
use relucert_kernel::store::{LemmaRow, PhaseAssignment};

#[derive(Debug, Clone)]
pub struct LemmaRecord {
    pub row: LemmaRow,
    pub entry: LemmaEntry,
}

#[derive(Debug, Clone)]
pub struct ClauseRecord {
    pub region: Region,
    pub guards: PhaseAssignment,
    pub entry: ClauseEntry,
}

impl ClauseRecord {
    pub fn applies(&self, region: &Region, alpha: &PhaseAssignment) -> bool {
        region.is_within(&self.region) && self.guards.is_subset_of(alpha)
    }
}

#[derive(Debug, Default)]
pub struct Knowledge {
    lemmas: RwLock<Vec<LemmaRecord>>,
    clauses: RwLock<Vec<ClauseRecord>>,
}

impl Knowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lemma_count(&self) -> usize {
        self.lemmas.read().expect("lemma lock").len()
    }

    pub fn lemma_rows(&self) -> Vec<LemmaRow> {
        self.lemmas.read().expect("lemma lock").iter().map(|r| r.row.clone()).collect()
    }

    pub fn lemma(&self, id: usize) -> Option<LemmaRecord> {
        self.lemmas.read().expect("lemma lock").get(id).cloned()
    }

    /// Appends a lemma; `make` receives the id the lemma will have.
    pub fn add_lemma(&self, make: impl FnOnce(usize) -> LemmaRecord) -> usize {
        let mut g = self.lemmas.write().expect("lemma lock");
        let id = g.len();
        let rec = make(id);
        debug_assert_eq!(rec.row.id, id);
        g.push(rec);
        id
    }

    pub fn lemma_entries(&self) -> Vec<LemmaEntry> {
        self.lemmas.read().expect("lemma lock").iter().map(|r| r.entry.clone()).collect()
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.read().expect("clause lock").len()
    }

    pub fn clause(&self, id: usize) -> Option<ClauseRecord> {
        self.clauses.read().expect("clause lock").get(id).cloned()
    }

    /// Adds a clause unless one with the same region and guards exists; returns its id.
    pub fn add_clause(&self, rec: ClauseRecord) -> usize {
        let mut g = self.clauses.write().expect("clause lock");
        if let Some(i) = g.iter().position(|c| c.region == rec.region && c.guards == rec.guards) {
            return i;
        }
        g.push(rec);
        g.len() - 1
    }

    /// First clause applicable to `(region, alpha)`.
    pub fn find_clause(&self, region: &Region, alpha: &PhaseAssignment) -> Option<usize> {
        self.clauses.read().expect("clause lock").iter().position(|c| c.applies(region, alpha))
    }
}
