//! Domain types shared by every stage of the pipeline.
//!
//! Identifiers are kept as opaque strings. The [`InteractionMatrix`] keeps its
//! row and column order frozen at construction so that every downstream output
//! can be keyed by id while still being byte-stable across runs.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid party label {0:?}: must be non-empty and contain no commas or newlines")]
    InvalidPartyLabel(String),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("index {index} out of range for {len} {axis}")]
    IndexOutOfRange {
        axis: &'static str,
        index: usize,
        len: usize,
    },
    #[error("zero count at ({row}, {col}); stored counts must be positive")]
    ZeroCount { row: usize, col: usize },
    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
}

/// Party affiliation token, e.g. `PTI` or a synthetic `P1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PartyLabel(String);

impl PartyLabel {
    pub fn new(label: impl Into<String>) -> Result<Self, ModelError> {
        let label = label.into();
        if label.is_empty() || label.contains([',', '\n', '\r']) {
            return Err(ModelError::InvalidPartyLabel(label));
        }
        Ok(Self(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PartyLabel {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<PartyLabel> for String {
    fn from(label: PartyLabel) -> Self {
        label.0
    }
}

impl fmt::Display for PartyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One timestamped retweet: `retweeter` reshared content posted by `influencer`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetweetRecord {
    pub timestamp: DateTime<Utc>,
    pub retweeter: String,
    pub influencer: String,
}

impl RetweetRecord {
    /// UTC calendar year of the timestamp.
    pub fn year(&self) -> i32 {
        self.timestamp.year()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluencerEntry {
    pub id: String,
    pub handle: String,
    pub party: PartyLabel,
}

/// Influencer identities with exactly one party each.
#[derive(Debug, Clone, Default)]
pub struct InfluencerCatalog {
    entries: Vec<InfluencerEntry>,
    index: HashMap<String, usize>,
}

impl InfluencerCatalog {
    pub fn new(entries: Vec<InfluencerEntry>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if index.insert(entry.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateId {
                    kind: "influencer",
                    id: entry.id.clone(),
                });
            }
        }
        Ok(Self { entries, index })
    }

    pub fn get(&self, id: &str) -> Option<&InfluencerEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn party_of(&self, id: &str) -> Option<&PartyLabel> {
        self.get(id).map(|e| &e.party)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn entries(&self) -> &[InfluencerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct party labels in sorted order.
    pub fn parties(&self) -> BTreeSet<PartyLabel> {
        self.entries.iter().map(|e| e.party.clone()).collect()
    }
}

/// A stored nonzero cell of an [`InteractionMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub count: u64,
}

/// Sparse nonnegative user-by-influencer retweet counts for one year.
///
/// Entries are stored row-major, sorted by `(row, col)`, and every stored
/// count is at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    year: i32,
    rows: Vec<String>,
    cols: Vec<String>,
    entries: Vec<Entry>,
    row_offsets: Vec<usize>,
}

impl InteractionMatrix {
    /// Builds a matrix from `(row, col, count)` triples. Repeated cells are summed.
    pub fn from_triples(
        year: i32,
        rows: Vec<String>,
        cols: Vec<String>,
        triples: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self, ModelError> {
        check_unique("user", &rows)?;
        check_unique("influencer", &cols)?;
        let mut entries = Vec::new();
        for (row, col, count) in triples {
            if row >= rows.len() {
                return Err(ModelError::IndexOutOfRange {
                    axis: "rows",
                    index: row,
                    len: rows.len(),
                });
            }
            if col >= cols.len() {
                return Err(ModelError::IndexOutOfRange {
                    axis: "columns",
                    index: col,
                    len: cols.len(),
                });
            }
            if count == 0 {
                return Err(ModelError::ZeroCount { row, col });
            }
            entries.push(Entry { row, col, count });
        }
        entries.sort_unstable();
        entries.dedup_by(|next, kept| {
            if next.row == kept.row && next.col == kept.col {
                kept.count += next.count;
                true
            } else {
                false
            }
        });
        let mut row_offsets = vec![0usize; rows.len() + 1];
        for e in &entries {
            row_offsets[e.row + 1] += 1;
        }
        for i in 0..rows.len() {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            year,
            rows,
            cols,
            entries,
            row_offsets,
        })
    }

    /// Builds a matrix from dense rows; zero cells are dropped.
    pub fn from_dense(
        year: i32,
        rows: Vec<String>,
        cols: Vec<String>,
        dense: &[Vec<u64>],
    ) -> Result<Self, ModelError> {
        let mut triples = Vec::new();
        for (i, row) in dense.iter().enumerate() {
            if row.len() != cols.len() {
                return Err(ModelError::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: cols.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 0 {
                    triples.push((i, j, v));
                }
            }
        }
        if dense.len() != rows.len() {
            return Err(ModelError::IndexOutOfRange {
                axis: "rows",
                index: dense.len(),
                len: rows.len(),
            });
        }
        Self::from_triples(year, rows, cols, triples)
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// True when the matrix holds no counts at all.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn row_entries(&self, row: usize) -> &[Entry] {
        &self.entries[self.row_offsets[row]..self.row_offsets[row + 1]]
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == id)
    }

    pub fn col_index(&self, id: &str) -> Option<usize> {
        self.cols.iter().position(|c| c == id)
    }

    /// The `col`-th column with absent cells materialized as zero.
    pub fn column_vector(&self, col: usize) -> Result<Vec<u64>, ModelError> {
        if col >= self.cols.len() {
            return Err(ModelError::IndexOutOfRange {
                axis: "columns",
                index: col,
                len: self.cols.len(),
            });
        }
        let mut out = vec![0u64; self.rows.len()];
        for e in self.entries.iter().filter(|e| e.col == col) {
            out[e.row] = e.count;
        }
        Ok(out)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.rows.len())
            .map(|i| self.row_entries(i).iter().map(|e| e.count).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.cols.len()];
        for e in &self.entries {
            sums[e.col] += e.count;
        }
        sums
    }

    /// Columns without any stored count (kept for catalog alignment).
    pub fn empty_columns(&self) -> Vec<usize> {
        self.col_sums()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Writes `user_id,influencer_id,count` triples in storage order.
    pub fn write_triples_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "user_id,influencer_id,count")?;
        for e in &self.entries {
            writeln!(out, "{},{},{}", self.rows[e.row], self.cols[e.col], e.count)?;
        }
        Ok(())
    }
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<(), ModelError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(ModelError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}
