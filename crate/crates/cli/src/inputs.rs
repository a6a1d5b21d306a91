//! Loading records and catalogs, with content digests for the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::warn;
use polarlens_core::ingest::{parse_catalog, parse_records, years_present};
use polarlens_core::{InfluencerCatalog, PartyLabel, RetweetRecord};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{CatalogArg, CorpusArgs};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

pub fn read_with_digest(path: &Path) -> Result<(Vec<u8>, InputDigest)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = InputDigest {
        path: path.to_path_buf(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((bytes, digest))
}

#[derive(Debug, Default)]
pub struct CatalogSet {
    default: Option<InfluencerCatalog>,
    per_year: BTreeMap<i32, InfluencerCatalog>,
}

impl CatalogSet {
    pub fn for_year(&self, year: i32) -> Result<&InfluencerCatalog> {
        self.per_year
            .get(&year)
            .or(self.default.as_ref())
            .ok_or_else(|| CliError::Usage(format!("no --catalog given for year {year}")))
    }

    pub fn parties(&self) -> BTreeSet<PartyLabel> {
        self.default
            .iter()
            .chain(self.per_year.values())
            .flat_map(|c| c.parties())
            .collect()
    }
}

pub struct Corpus {
    pub records: Vec<RetweetRecord>,
    pub catalogs: CatalogSet,
    pub years: Vec<i32>,
    pub digests: Vec<InputDigest>,
}

impl Corpus {
    /// Party the orientation is anchored to: `--anchor`, or the smallest
    /// label across all catalogs.
    pub fn resolve_anchor(&self, anchor: Option<&str>) -> Result<PartyLabel> {
        let parties = self.catalogs.parties();
        match anchor {
            Some(a) => {
                let label = PartyLabel::new(a).map_err(|e| CliError::Usage(e.to_string()))?;
                if !parties.contains(&label) {
                    return Err(CliError::Usage(format!("--anchor {a} is not a catalog party")));
                }
                Ok(label)
            }
            None => parties
                .into_iter()
                .next()
                .ok_or_else(|| CliError::Data("catalogs list no parties".into())),
        }
    }
}

fn load_catalog(arg: &CatalogArg, digests: &mut Vec<InputDigest>) -> Result<InfluencerCatalog> {
    let (bytes, digest) = read_with_digest(&arg.path)?;
    digests.push(digest);
    parse_catalog(&bytes[..]).map_err(|e| CliError::Data(format!("{}: {e}", arg.path.display())))
}

pub fn load_corpus(args: &CorpusArgs) -> Result<Corpus> {
    let mut digests = Vec::new();
    let mut records = Vec::new();
    for path in &args.records {
        let (bytes, digest) = read_with_digest(path)?;
        digests.push(digest);
        let mut parsed = parse_records(&bytes[..])
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        records.append(&mut parsed);
    }

    let mut catalogs = CatalogSet::default();
    for arg in &args.catalogs {
        let cat = load_catalog(arg, &mut digests)?;
        match arg.year {
            Some(y) => {
                if catalogs.per_year.insert(y, cat).is_some() {
                    return Err(CliError::Usage(format!("two catalogs given for year {y}")));
                }
            }
            None => {
                if catalogs.default.replace(cat).is_some() {
                    return Err(CliError::Usage("more than one catalog without a year".into()));
                }
            }
        }
    }

    let present = years_present(&records);
    let years: Vec<i32> = match args.years {
        Some(range) => {
            for y in range.first..=range.last {
                if !present.contains(&y) {
                    warn!("year {y} has no records");
                }
            }
            present.into_iter().filter(|&y| range.contains(y)).collect()
        }
        None => present.into_iter().collect(),
    };
    if years.is_empty() {
        return Err(CliError::Data("no records in the selected years".into()));
    }
    for &y in &years {
        catalogs.for_year(y)?;
    }
    Ok(Corpus {
        records,
        catalogs,
        years,
        digests,
    })
}
