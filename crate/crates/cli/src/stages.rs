//! Per-year analysis stages shared by the corpus subcommands.

use std::collections::BTreeMap;
use std::io::Write;

use log::{info, warn};
use polarlens_core::dipstat::{dip_test, DipResult};
use polarlens_core::flows::{
    flow_matrix, growth_rates, link_share_table, retweeter_counts, write_flows_csv,
    write_growth_csv, AffiliationTable, LinkShareTable, SHARES_HEADER,
};
use polarlens_core::ideology::{latent_ideology, user_party_scores, DecompositionReport, IdeologyResult};
use polarlens_core::ingest::{build_interaction_matrix, slice_by_year, FilterConfig};
use polarlens_core::numfmt::exact;
use polarlens_core::simnet::{build_direct_retweet_graph, build_similarity_graph, prune_graph};
use polarlens_core::{InfluencerCatalog, InteractionMatrix, PartyLabel, RetweetRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{CorpusArgs, ScoreKind};
use crate::error::{CliError, Result};
use crate::inputs::Corpus;
use crate::output::OutputTree;

pub const SCORES_HEADER: &str = "id,kind,party,score,year";

#[derive(Debug, Clone, Copy, Default)]
pub struct Stages {
    pub matrix: bool,
    pub similarity: bool,
    pub direct: bool,
    pub ideology: bool,
    pub dip: bool,
    pub flows: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixSummary {
    pub year: i32,
    pub records: usize,
    pub users_before_filter: usize,
    pub users: usize,
    pub influencers: usize,
    pub nonzero_cells: usize,
    pub empty_influencer_columns: usize,
}

#[derive(Debug, Clone, Serialize)]
struct GraphSummary {
    year: i32,
    nodes: usize,
    edges: usize,
    median_weight: Option<f64>,
    pruned_nodes: usize,
    pruned_edges: usize,
    removed_edges: usize,
    removed_nodes: usize,
}

pub struct YearOutput {
    pub year: i32,
    pub files: Vec<(String, Vec<u8>)>,
    pub matrix_summary: Option<MatrixSummary>,
    pub affiliations: Option<AffiliationTable>,
    pub retweeters: Option<BTreeMap<PartyLabel, usize>>,
    pub shares: Option<LinkShareTable>,
    pub direct_shares: Option<LinkShareTable>,
    pub dips: Vec<(ScoreKind, DipResult)>,
}

/// Seed of the dip test for one year and score kind.
pub fn dip_seed(seed: u64, year: i32, kind: ScoreKind) -> u64 {
    let tag = (year as u32 as u64) << 1 | u64::from(kind == ScoreKind::User);
    splitmix(seed ^ splitmix(tag))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn csv_bytes<F>(f: F) -> Vec<u8>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
    bytes.push(b'\n');
    bytes
}

fn user_parties(
    m: &InteractionMatrix,
    catalog: &InfluencerCatalog,
) -> Result<BTreeMap<String, PartyLabel>> {
    Ok(AffiliationTable::from_matrix(m, catalog)
        .map_err(|e| CliError::flows(m.year(), e))?
        .users
        .into_iter()
        .map(|(u, a)| (u, a.party))
        .collect())
}

fn scores_csv(
    result: &IdeologyResult,
    m: &InteractionMatrix,
    catalog: &InfluencerCatalog,
) -> Result<Vec<u8>> {
    let parties = user_parties(m, catalog)?;
    Ok(csv_bytes(|out| {
        writeln!(out, "{SCORES_HEADER}")?;
        for (id, s) in &result.user_scores {
            let party = parties.get(id).map(PartyLabel::as_str).unwrap_or("");
            writeln!(out, "{id},user,{party},{},{}", exact(*s), result.year)?;
        }
        for (id, s) in &result.influencer_scores {
            let party = catalog.party_of(id).map(PartyLabel::as_str).unwrap_or("");
            writeln!(out, "{id},influencer,{party},{},{}", exact(*s), result.year)?;
        }
        Ok(())
    }))
}

fn user_party_csv(result: &IdeologyResult, m: &InteractionMatrix, catalog: &InfluencerCatalog) -> Vec<u8> {
    csv_bytes(|out| {
        writeln!(out, "{SCORES_HEADER}")?;
        for (id, party, s) in user_party_scores(result, m, catalog) {
            writeln!(out, "{id},user,{party},{},{}", exact(s), result.year)?;
        }
        Ok(())
    })
}

pub struct YearJob<'a> {
    pub year: i32,
    pub records: &'a [RetweetRecord],
    pub catalog: &'a InfluencerCatalog,
    pub filter: FilterConfig,
    pub anchor: Option<&'a PartyLabel>,
    pub seed: u64,
    pub n_boot: usize,
}

pub fn analyze_year(job: &YearJob<'_>, stages: Stages) -> Result<YearOutput> {
    let year = job.year;
    let catalog = job.catalog;
    let data_err = |e: polarlens_core::ingest::IngestError| CliError::Data(e.to_string());
    let matrix = build_interaction_matrix(job.records, catalog, year, &job.filter).map_err(data_err)?;
    let mut out = YearOutput {
        year,
        files: Vec::new(),
        matrix_summary: None,
        affiliations: None,
        retweeters: None,
        shares: None,
        direct_shares: None,
        dips: Vec::new(),
    };

    let unfiltered = if stages.matrix || stages.flows {
        let all = FilterConfig {
            min_distinct_influencers: 0,
            ..job.filter
        };
        Some(build_interaction_matrix(job.records, catalog, year, &all).map_err(data_err)?)
    } else {
        None
    };

    if stages.matrix {
        out.files.push(("matrix.csv".into(), csv_bytes(|w| matrix.write_triples_csv(w))));
        out.matrix_summary = Some(MatrixSummary {
            year,
            records: slice_by_year(job.records, year).len(),
            users_before_filter: unfiltered.as_ref().map_or(0, |m| m.n_rows()),
            users: matrix.n_rows(),
            influencers: matrix.n_cols(),
            nonzero_cells: matrix.nnz(),
            empty_influencer_columns: matrix.empty_columns().len(),
        });
    }

    if stages.similarity {
        let full = build_similarity_graph(&matrix, catalog).map_err(|e| CliError::simnet(year, e))?;
        let pruned = prune_graph(&full).map_err(|e| CliError::simnet(year, e))?;
        out.files.push((
            "similarity_edges_full.csv".into(),
            csv_bytes(|w| full.write_edges_csv(w)),
        ));
        out.files.push((
            "similarity_edges.csv".into(),
            csv_bytes(|w| pruned.graph.write_edges_csv(w)),
        ));
        out.files.push((
            "similarity_nodes.csv".into(),
            csv_bytes(|w| pruned.graph.write_nodes_csv(w)),
        ));
        out.files.push((
            "similarity_graph.json".into(),
            json_bytes(&GraphSummary {
                year,
                nodes: full.nodes().len(),
                edges: full.edges().len(),
                median_weight: pruned.median,
                pruned_nodes: pruned.graph.nodes().len(),
                pruned_edges: pruned.graph.edges().len(),
                removed_edges: pruned.removed_edges,
                removed_nodes: pruned.removed_nodes,
            }),
        ));
        if pruned.graph.is_empty() {
            warn!("year {year}: pruned similarity graph has no edges; no link shares");
        } else {
            let shares = link_share_table(&pruned.graph, year).map_err(|e| CliError::flows(year, e))?;
            out.files.push(("similarity_link_shares.csv".into(), csv_bytes(|w| shares.write_csv(w))));
            out.shares = Some(shares);
        }
    }

    if stages.direct {
        let g = build_direct_retweet_graph(job.records, catalog, year);
        out.files.push(("direct_edges.csv".into(), csv_bytes(|w| g.write_edges_csv(w))));
        out.files.push(("direct_nodes.csv".into(), csv_bytes(|w| g.write_nodes_csv(w))));
        if g.is_empty() {
            warn!("year {year}: no influencer-to-influencer retweets; no direct link shares");
        } else {
            let shares = link_share_table(&g, year).map_err(|e| CliError::flows(year, e))?;
            out.files.push(("direct_link_shares.csv".into(), csv_bytes(|w| shares.write_csv(w))));
            out.direct_shares = Some(shares);
        }
    }

    if stages.ideology {
        let anchor = job.anchor.expect("anchor resolved for ideology");
        let (result, decomposition) =
            latent_ideology(&matrix, anchor, catalog).map_err(|e| CliError::ideology(year, e))?;
        out.files.push(("scores.csv".into(), scores_csv(&result, &matrix, catalog)?));
        out.files.push(("user_party_scores.csv".into(), user_party_csv(&result, &matrix, catalog)));
        out.files.push((
            "decomposition.json".into(),
            json_bytes(&DecompositionReport::new(&result, &decomposition)),
        ));
        if stages.dip {
            for kind in [ScoreKind::Influencer, ScoreKind::User] {
                let values: Vec<f64> = match kind {
                    ScoreKind::Influencer => result.influencer_scores.iter().map(|p| p.1).collect(),
                    ScoreKind::User => result.user_scores.iter().map(|p| p.1).collect(),
                };
                let seed = dip_seed(job.seed, year, kind);
                let dip = dip_test(&values, job.n_boot, seed)
                    .map_err(|e| CliError::dip(&format!("year {year} {} scores", kind.as_str()), e))?;
                info!("year {year}: {} dip {:.4} (p = {:.4})", kind.as_str(), dip.dip, dip.p_value);
                out.files.push((format!("dip_{}.json", kind.as_str()), json_bytes(&dip)));
                out.dips.push((kind, dip));
            }
        }
    }

    if stages.flows {
        let m = unfiltered.as_ref().expect("built above");
        let table = AffiliationTable::from_matrix(m, catalog).map_err(|e| CliError::flows(year, e))?;
        if table.ties() > 0 {
            info!("year {year}: {} tied affiliation(s)", table.ties());
        }
        out.files.push(("affiliations.csv".into(), csv_bytes(|w| table.write_csv(w))));
        out.retweeters = Some(retweeter_counts(m, catalog).map_err(|e| CliError::flows(year, e))?);
        out.affiliations = Some(table);
    }
    Ok(out)
}

/// Runs `stages` over every selected year in parallel and assembles the tree.
pub fn run_stages(
    args: &CorpusArgs,
    corpus: &Corpus,
    stages: Stages,
    anchor: Option<&PartyLabel>,
) -> Result<OutputTree> {
    let filter = FilterConfig {
        min_distinct_influencers: args.min_distinct,
        ..FilterConfig::default()
    };
    let jobs: Vec<YearJob<'_>> = corpus
        .years
        .iter()
        .map(|&year| {
            Ok(YearJob {
                year,
                records: &corpus.records,
                catalog: corpus.catalogs.for_year(year)?,
                filter,
                anchor,
                seed: args.seed,
                n_boot: args.n_boot,
            })
        })
        .collect::<Result<_>>()?;
    let results: Vec<YearOutput> = jobs
        .par_iter()
        .map(|job| analyze_year(job, stages))
        .collect::<Result<_>>()?;

    let mut tree = OutputTree::default();
    for r in &results {
        for (name, bytes) in &r.files {
            tree.add(format!("{}/{name}", r.year), bytes.clone());
        }
    }

    if stages.matrix {
        let summaries: Vec<&MatrixSummary> = results.iter().filter_map(|r| r.matrix_summary.as_ref()).collect();
        tree.add_json("ingest_summary.json", &summaries);
    }
    let combine_shares = |tree: &mut OutputTree, name: &str, tables: Vec<&LinkShareTable>| {
        tree.add_with(name, |out| {
            writeln!(out, "{SHARES_HEADER}")?;
            for t in tables {
                t.write_csv_rows(out)?;
            }
            Ok(())
        });
    };
    if stages.similarity {
        combine_shares(&mut tree, "link_shares.csv", results.iter().filter_map(|r| r.shares.as_ref()).collect());
    }
    if stages.direct {
        combine_shares(
            &mut tree,
            "direct_link_shares.csv",
            results.iter().filter_map(|r| r.direct_shares.as_ref()).collect(),
        );
    }
    if stages.dip {
        tree.add_with("dip_summary.csv", |out| {
            writeln!(out, "year,kind,D,p_value,n,n_boot,seed")?;
            for r in &results {
                for (kind, d) in &r.dips {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        r.year,
                        kind.as_str(),
                        exact(d.dip),
                        exact(d.p_value),
                        d.n,
                        d.n_boot,
                        d.seed
                    )?;
                }
            }
            Ok(())
        });
    }
    if stages.flows {
        let tables: Vec<&AffiliationTable> = results.iter().filter_map(|r| r.affiliations.as_ref()).collect();
        let flows = tables
            .windows(2)
            .map(|w| flow_matrix(w[0], w[1]).map_err(|e| CliError::flows(w[1].year, e)))
            .collect::<Result<Vec<_>>>()?;
        tree.add_with("flows.csv", |out| write_flows_csv(&flows, out));
        let dominant: BTreeMap<i32, BTreeMap<PartyLabel, usize>> =
            tables.iter().map(|t| (t.year, t.party_counts())).collect();
        let retweeters: BTreeMap<i32, BTreeMap<PartyLabel, usize>> = results
            .iter()
            .filter_map(|r| r.retweeters.clone().map(|c| (r.year, c)))
            .collect();
        let (g_dom, g_rt) = (growth_rates(&dominant), growth_rates(&retweeters));
        tree.add_with("growth.csv", |out| {
            write_growth_csv(&[("dominant", &g_dom), ("retweeters", &g_rt)], out)
        });
    }
    Ok(tree)
}
