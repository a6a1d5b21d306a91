//! Dominant-party affiliations, year-over-year flows between them, growth
//! percentages and inter-party link shares.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::model::{InfluencerCatalog, InteractionMatrix, PartyLabel};
use crate::numfmt::fixed;
use crate::simnet::SimilarityGraph;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("user {0:?} is not a row of the interaction matrix")]
    UnknownUser(String),
    #[error("user {0:?} has no retweets")]
    EmptyRow(String),
    #[error("influencer {0:?} is not in the catalog")]
    UnknownInfluencer(String),
    #[error("flow years must increase ({from} -> {to})")]
    YearOrder { from: i32, to: i32 },
    #[error("link shares need a graph with at least one edge")]
    EmptyGraph,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affiliation {
    pub party: PartyLabel,
    /// Several parties shared the top count; the smallest label won.
    pub tie: bool,
}

/// Per-party retweet totals of row `i`.
fn party_totals<'c>(
    m: &InteractionMatrix,
    i: usize,
    catalog: &'c InfluencerCatalog,
) -> Result<BTreeMap<&'c PartyLabel, u64>, FlowError> {
    let mut totals = BTreeMap::new();
    for e in m.row_entries(i) {
        let id = &m.cols()[e.col];
        let party = catalog
            .party_of(id)
            .ok_or_else(|| FlowError::UnknownInfluencer(id.clone()))?;
        *totals.entry(party).or_insert(0) += e.count;
    }
    Ok(totals)
}

fn pick_dominant(totals: &BTreeMap<&PartyLabel, u64>) -> Option<Affiliation> {
    let best = *totals.values().max()?;
    let mut winners = totals.iter().filter(|(_, &c)| c == best).map(|(p, _)| *p);
    let party = winners.next()?.clone();
    Some(Affiliation {
        party,
        tie: winners.next().is_some(),
    })
}

/// Party whose influencers `user` retweeted most in `m`.
pub fn dominant_party(
    m: &InteractionMatrix,
    user: &str,
    catalog: &InfluencerCatalog,
) -> Result<Affiliation, FlowError> {
    let i = m
        .row_index(user)
        .ok_or_else(|| FlowError::UnknownUser(user.to_string()))?;
    let totals = party_totals(m, i, catalog)?;
    pick_dominant(&totals).ok_or_else(|| FlowError::EmptyRow(user.to_string()))
}

/// Dominant-party assignment of every user active in one year.
#[derive(Debug, Clone, PartialEq)]
pub struct AffiliationTable {
    pub year: i32,
    pub users: BTreeMap<String, Affiliation>,
}

impl AffiliationTable {
    /// Assigns every row of `m` with at least one retweet.
    pub fn from_matrix(m: &InteractionMatrix, catalog: &InfluencerCatalog) -> Result<Self, FlowError> {
        let mut users = BTreeMap::new();
        for (i, user) in m.rows().iter().enumerate() {
            if let Some(a) = pick_dominant(&party_totals(m, i, catalog)?) {
                users.insert(user.clone(), a);
            }
        }
        Ok(Self { year: m.year(), users })
    }

    pub fn get(&self, user: &str) -> Option<&Affiliation> {
        self.users.get(user)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn ties(&self) -> usize {
        self.users.values().filter(|a| a.tie).count()
    }

    /// Users per assigned party.
    pub fn party_counts(&self) -> BTreeMap<PartyLabel, usize> {
        let mut counts = BTreeMap::new();
        for a in self.users.values() {
            *counts.entry(a.party.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// `user_id,party,tie` rows in id order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "user_id,party,tie")?;
        for (user, a) in &self.users {
            writeln!(out, "{user},{},{}", a.party, a.tie)?;
        }
        Ok(())
    }
}

/// Origin or destination of a flow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowEnd {
    Party(PartyLabel),
    /// Not active in the earlier year.
    Enter,
    /// Not active in the later year.
    Exit,
}

impl fmt::Display for FlowEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowEnd::Party(p) => write!(f, "{p}"),
            FlowEnd::Enter => f.write_str("ENTER"),
            FlowEnd::Exit => f.write_str("EXIT"),
        }
    }
}

/// User counts between the affiliations of two years.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    pub year_from: i32,
    pub year_to: i32,
    /// Nonzero cells only.
    pub counts: BTreeMap<(FlowEnd, FlowEnd), usize>,
}

impl FlowTable {
    pub fn count(&self, from: &FlowEnd, to: &FlowEnd) -> usize {
        self.counts
            .get(&(from.clone(), to.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn row_sum(&self, from: &FlowEnd) -> usize {
        self.counts
            .iter()
            .filter(|((f, _), _)| f == from)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn col_sum(&self, to: &FlowEnd) -> usize {
        self.counts
            .iter()
            .filter(|((_, t), _)| t == to)
            .map(|(_, c)| c)
            .sum()
    }

    /// Users whose party differs between the two years.
    pub fn switched(&self) -> usize {
        self.counts
            .iter()
            .filter(|((f, t), _)| {
                matches!((f, t), (FlowEnd::Party(a), FlowEnd::Party(b)) if a != b)
            })
            .map(|(_, c)| c)
            .sum()
    }

    /// `year_from,year_to,party_from,party_to,count` rows.
    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for ((f, t), c) in &self.counts {
            writeln!(out, "{},{},{f},{t},{c}", self.year_from, self.year_to)?;
        }
        Ok(())
    }
}

pub const FLOW_HEADER: &str = "year_from,year_to,party_from,party_to,count";

/// Writes several flow tables under one header.
pub fn write_flows_csv<W: Write>(tables: &[FlowTable], mut out: W) -> io::Result<()> {
    writeln!(out, "{FLOW_HEADER}")?;
    for t in tables {
        t.write_csv_rows(&mut out)?;
    }
    Ok(())
}

/// Cross-tabulates two affiliation tables, with `ENTER`/`EXIT` margins for
/// users present in only one of them.
pub fn flow_matrix(a: &AffiliationTable, b: &AffiliationTable) -> Result<FlowTable, FlowError> {
    if a.year >= b.year {
        return Err(FlowError::YearOrder {
            from: a.year,
            to: b.year,
        });
    }
    let mut counts = BTreeMap::new();
    for (user, from) in &a.users {
        let to = b
            .get(user)
            .map_or(FlowEnd::Exit, |t| FlowEnd::Party(t.party.clone()));
        *counts.entry((FlowEnd::Party(from.party.clone()), to)).or_insert(0) += 1;
    }
    for (user, to) in &b.users {
        if !a.users.contains_key(user) {
            *counts
                .entry((FlowEnd::Enter, FlowEnd::Party(to.party.clone())))
                .or_insert(0) += 1;
        }
    }
    Ok(FlowTable {
        year_from: a.year,
        year_to: b.year,
        counts,
    })
}

/// Percentage change of one party's count against the previous year.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRate {
    pub party: PartyLabel,
    pub year: i32,
    pub previous: usize,
    pub current: usize,
    /// `None` when the previous count is zero.
    pub percent: Option<f64>,
}

impl GrowthRate {
    /// Two-decimal rendering, `NA` when undefined.
    pub fn display_percent(&self) -> String {
        self.percent.map_or_else(|| "NA".to_string(), |p| fixed(p, 2))
    }
}

pub fn percent_change(previous: usize, current: usize) -> Option<f64> {
    (previous > 0).then(|| 100.0 * (current as f64 - previous as f64) / previous as f64)
}

/// Growth of every party in every year whose predecessor year is present.
/// Parties missing from a year count as zero there.
pub fn growth_rates(per_year: &BTreeMap<i32, BTreeMap<PartyLabel, usize>>) -> Vec<GrowthRate> {
    let parties: BTreeSet<&PartyLabel> = per_year.values().flat_map(|m| m.keys()).collect();
    let mut out = Vec::new();
    for (&year, current) in per_year {
        let Some(prior) = per_year.get(&(year - 1)) else {
            continue;
        };
        for &party in &parties {
            let previous = prior.get(party).copied().unwrap_or(0);
            let now = current.get(party).copied().unwrap_or(0);
            out.push(GrowthRate {
                party: party.clone(),
                year,
                previous,
                current: now,
                percent: percent_change(previous, now),
            });
        }
    }
    out
}

/// Distinct retweeters per party: a user counts once for every party whose
/// influencers they retweeted.
pub fn retweeter_counts(
    m: &InteractionMatrix,
    catalog: &InfluencerCatalog,
) -> Result<BTreeMap<PartyLabel, usize>, FlowError> {
    let mut counts = BTreeMap::new();
    for i in 0..m.n_rows() {
        for party in party_totals(m, i, catalog)?.into_keys() {
            *counts.entry(party.clone()).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// `basis,party,year,previous,current,percent` rows; `percent` is `NA` when
/// the previous count is zero.
pub fn write_growth_csv<W: Write>(bases: &[(&str, &[GrowthRate])], mut out: W) -> io::Result<()> {
    writeln!(out, "basis,party,year,previous,current,percent")?;
    for (basis, rates) in bases {
        for g in *rates {
            writeln!(
                out,
                "{basis},{},{},{},{},{}",
                g.party,
                g.year,
                g.previous,
                g.current,
                g.display_percent()
            )?;
        }
    }
    Ok(())
}

/// Percentage of each party's incident edges landing in each party.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkShareTable {
    pub year: i32,
    pub directed: bool,
    /// `rows[x][y]`: share of `x`'s edges (or out-weight) ending in `y`.
    /// Parties without incident edges (or out-edges) have no row.
    pub rows: BTreeMap<PartyLabel, BTreeMap<PartyLabel, f64>>,
    /// Edge count (or out-weight) behind each row.
    pub totals: BTreeMap<PartyLabel, f64>,
}

impl LinkShareTable {
    pub fn share(&self, from: &PartyLabel, to: &PartyLabel) -> f64 {
        self.rows
            .get(from)
            .and_then(|r| r.get(to))
            .copied()
            .unwrap_or(0.0)
    }

    /// `year,party_from,party_to,percent` rows over every party pair.
    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (from, row) in &self.rows {
            for (to, pct) in row {
                writeln!(out, "{},{from},{to},{}", self.year, fixed(*pct, 6))?;
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{SHARES_HEADER}")?;
        self.write_csv_rows(&mut out)
    }
}

pub const SHARES_HEADER: &str = "year,party_from,party_to,percent";

/// Inter-party link shares of `g`.
///
/// Undirected graphs count edges: an intra-party edge once in its party's
/// row, a cross edge once in each endpoint's row. Directed graphs weight
/// out-edges by their retweet counts, grouped by source party.
pub fn link_share_table(g: &SimilarityGraph, year: i32) -> Result<LinkShareTable, FlowError> {
    if g.is_empty() {
        return Err(FlowError::EmptyGraph);
    }
    let parties: BTreeSet<&PartyLabel> = g.nodes().iter().map(|n| &n.party).collect();
    let mut mass: BTreeMap<&PartyLabel, BTreeMap<&PartyLabel, f64>> = parties
        .iter()
        .map(|&p| (p, parties.iter().map(|&q| (q, 0.0)).collect()))
        .collect();
    for e in g.edges() {
        let (pa, pb) = (&g.nodes()[e.a].party, &g.nodes()[e.b].party);
        if g.is_directed() {
            *mass.get_mut(pa).unwrap().get_mut(pb).unwrap() += e.weight;
        } else {
            *mass.get_mut(pa).unwrap().get_mut(pb).unwrap() += 1.0;
            if pa != pb {
                *mass.get_mut(pb).unwrap().get_mut(pa).unwrap() += 1.0;
            }
        }
    }
    let mut rows = BTreeMap::new();
    let mut totals = BTreeMap::new();
    for (p, row) in mass {
        let total: f64 = row.values().sum();
        totals.insert(p.clone(), total);
        if total > 0.0 {
            rows.insert(
                p.clone(),
                row.into_iter()
                    .map(|(q, v)| (q.clone(), 100.0 * v / total))
                    .collect(),
            );
        }
    }
    Ok(LinkShareTable {
        year,
        directed: g.is_directed(),
        rows,
        totals,
    })
}
