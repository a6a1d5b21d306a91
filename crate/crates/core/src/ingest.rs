//! Reading retweet logs and influencer catalogs, and assembling yearly
//! interaction matrices.
//!
//! Records are JSON Lines with exactly the fields `ts`, `src` and `dst`.
//! Catalogs are CSV files with the header `influencer_id,handle,party`.

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap};
use std::io::{self, BufRead, Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    InfluencerCatalog, InfluencerEntry, InteractionMatrix, ModelError, PartyLabel, RetweetRecord,
};

pub const CATALOG_HEADER: [&str; 3] = ["influencer_id", "handle", "party"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("catalog line {line}: {reason}")]
    Catalog { line: usize, reason: String },
    #[error("catalog header must be exactly `influencer_id,handle,party`, found `{0}`")]
    CatalogHeader(String),
    #[error("duplicate influencer id {0:?} in catalog")]
    DuplicateInfluencer(String),
    #[error("records for {year} reference influencers missing from the catalog: {}", ids.join(", "))]
    UnknownInfluencers { year: i32, ids: Vec<String> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Activity filters applied when assembling matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Collection-side filter: only tweets with more retweets than this were
    /// gathered. External corpora are assumed to satisfy it already.
    pub min_retweets_per_tweet: u32,
    /// Users retweeting fewer distinct influencers than this are dropped.
    pub min_distinct_influencers: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_retweets_per_tweet: 3,
            min_distinct_influencers: 3,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord<'a> {
    #[serde(borrow)]
    ts: Cow<'a, str>,
    #[serde(borrow)]
    src: Cow<'a, str>,
    #[serde(borrow)]
    dst: Cow<'a, str>,
}

#[derive(Serialize)]
struct WireRecordOut<'a> {
    ts: String,
    src: &'a str,
    dst: &'a str,
}

/// Parses line-delimited records, preserving file order.
pub fn parse_records<R: BufRead>(mut reader: R) -> Result<Vec<RetweetRecord>, IngestError> {
    let mut records = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = buf.strip_suffix('\n').unwrap_or(&buf);
        let line = line.strip_suffix('\r').unwrap_or(line);
        records.push(parse_record_line(line).map_err(|reason| IngestError::Parse {
            line: line_no,
            reason,
        })?);
    }
    Ok(records)
}

fn parse_record_line(line: &str) -> Result<RetweetRecord, String> {
    if line.trim().is_empty() {
        return Err("empty line".into());
    }
    let wire: WireRecord<'_> = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let timestamp = parse_timestamp(&wire.ts)?;
    Ok(RetweetRecord {
        timestamp,
        retweeter: wire.src.into_owned(),
        influencer: wire.dst.into_owned(),
    })
}

pub fn parse_timestamp(ts: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(ts)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("invalid timestamp {ts:?}: {e}"))
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Writes records in the JSON Lines wire format.
pub fn write_records<'a, W, I>(records: I, mut out: W) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a RetweetRecord>,
{
    for r in records {
        let wire = WireRecordOut {
            ts: format_timestamp(&r.timestamp),
            src: &r.retweeter,
            dst: &r.influencer,
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses an influencer catalog CSV.
pub fn parse_catalog<R: Read>(reader: R) -> Result<InfluencerCatalog, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::CatalogHeader(e.to_string()))?
        .clone();
    if header.iter().ne(CATALOG_HEADER) {
        return Err(IngestError::CatalogHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut entries = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::Catalog {
            line,
            reason: e.to_string(),
        })?;
        if row.len() != 3 {
            return Err(IngestError::Catalog {
                line,
                reason: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(IngestError::Catalog {
                line,
                reason: "empty influencer id".into(),
            });
        }
        let party = PartyLabel::new(&row[2]).map_err(|e| IngestError::Catalog {
            line,
            reason: e.to_string(),
        })?;
        entries.push(InfluencerEntry {
            id,
            handle: row[1].to_string(),
            party,
        });
    }
    InfluencerCatalog::new(entries).map_err(|e| match e {
        ModelError::DuplicateId { id, .. } => IngestError::DuplicateInfluencer(id),
        other => other.into(),
    })
}

/// Writes a catalog with the canonical header.
pub fn write_catalog<W: Write>(catalog: &InfluencerCatalog, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", CATALOG_HEADER.join(","))?;
    for e in catalog.entries() {
        writeln!(out, "{},{},{}", e.id, e.handle, e.party)?;
    }
    Ok(())
}

/// Records whose UTC calendar year equals `year`, in original order.
pub fn slice_by_year(records: &[RetweetRecord], year: i32) -> Vec<&RetweetRecord> {
    records.iter().filter(|r| r.year() == year).collect()
}

/// Distinct UTC years present in the records.
pub fn years_present(records: &[RetweetRecord]) -> BTreeSet<i32> {
    records.iter().map(RetweetRecord::year).collect()
}

/// Aggregates one year of records into a user-by-influencer count matrix.
///
/// Rows and columns follow first-seen order. Users touching fewer than
/// `cfg.min_distinct_influencers` distinct influencers are dropped afterwards;
/// columns left without counts stay in place and show up in
/// [`InteractionMatrix::empty_columns`].
pub fn build_interaction_matrix(
    records: &[RetweetRecord],
    catalog: &InfluencerCatalog,
    year: i32,
    cfg: &FilterConfig,
) -> Result<InteractionMatrix, IngestError> {
    let in_year = slice_by_year(records, year);

    let unknown: BTreeSet<&str> = in_year
        .iter()
        .filter(|r| !catalog.contains(&r.influencer))
        .map(|r| r.influencer.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(IngestError::UnknownInfluencers {
            year,
            ids: unknown.into_iter().map(str::to_string).collect(),
        });
    }

    let mut row_ids: Vec<&str> = Vec::new();
    let mut col_ids: Vec<&str> = Vec::new();
    let mut row_of: HashMap<&str, usize> = HashMap::new();
    let mut col_of: HashMap<&str, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    for r in &in_year {
        let i = *row_of.entry(&r.retweeter).or_insert_with(|| {
            row_ids.push(&r.retweeter);
            row_ids.len() - 1
        });
        let j = *col_of.entry(&r.influencer).or_insert_with(|| {
            col_ids.push(&r.influencer);
            col_ids.len() - 1
        });
        *cells.entry((i, j)).or_insert(0) += 1;
    }

    let mut distinct = vec![0usize; row_ids.len()];
    for &(i, _) in cells.keys() {
        distinct[i] += 1;
    }
    let mut new_index = vec![usize::MAX; row_ids.len()];
    let mut kept_rows = Vec::new();
    for (i, id) in row_ids.iter().enumerate() {
        if distinct[i] >= cfg.min_distinct_influencers {
            new_index[i] = kept_rows.len();
            kept_rows.push(id.to_string());
        }
    }
    let triples: Vec<(usize, usize, u64)> = cells
        .into_iter()
        .filter(|&((i, _), _)| new_index[i] != usize::MAX)
        .map(|((i, j), c)| (new_index[i], j, c))
        .collect();

    let matrix = InteractionMatrix::from_triples(
        year,
        kept_rows,
        col_ids.iter().map(|s| s.to_string()).collect(),
        triples,
    )?;
    if matrix.is_empty() {
        warn!("year {year}: no users survive the activity filter");
    } else {
        let empty = matrix.empty_columns();
        if !empty.is_empty() {
            warn!(
                "year {year}: {} influencer column(s) have no retweets after filtering",
                empty.len()
            );
        }
    }
    Ok(matrix)
}
