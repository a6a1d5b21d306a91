//! Influencer graphs: audience similarity (cosine of retweeter-count columns)
//! and direct influencer-to-influencer retweets, plus median pruning.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::model::{InfluencerCatalog, InteractionMatrix, PartyLabel, RetweetRecord};
use crate::numfmt::sig9;

#[derive(Debug, Error, PartialEq)]
pub enum SimnetError {
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 influencer columns with retweets, found {0}")]
    TooFewColumns(usize),
    #[error("influencer {0:?} is not in the catalog")]
    UnknownInfluencer(String),
    #[error("median pruning applies to similarity graphs only")]
    NotSimilarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphMode {
    /// Undirected, cosine weights in `[0, 1]`.
    Similarity,
    /// Directed, weights are retweet counts.
    Direct,
}

impl GraphMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphMode::Similarity => "similarity",
            GraphMode::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub id: String,
    pub party: PartyLabel,
}

/// An edge between node indices. For similarity graphs `a` holds the node
/// with the smaller id; for direct graphs `a` is the retweeting influencer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    mode: GraphMode,
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
}

impl SimilarityGraph {
    /// Assembles a graph, normalizing edge orientation and ordering.
    pub fn new(mode: GraphMode, nodes: Vec<GraphNode>, mut edges: Vec<GraphEdge>) -> Self {
        if mode == GraphMode::Similarity {
            for e in &mut edges {
                if nodes[e.b].id < nodes[e.a].id {
                    std::mem::swap(&mut e.a, &mut e.b);
                }
            }
        }
        edges.sort_by(|x, y| {
            (&nodes[x.a].id, &nodes[x.b].id).cmp(&(&nodes[y.a].id, &nodes[y.b].id))
        });
        Self { mode, nodes, edges }
    }

    pub fn empty(mode: GraphMode) -> Self {
        Self {
            mode,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn is_directed(&self) -> bool {
        self.mode == GraphMode::Direct
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Weight of the edge between two ids (directed graphs: `a -> b` only).
    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        let (ia, ib) = (self.node_index(a)?, self.node_index(b)?);
        self.edges
            .iter()
            .find(|e| {
                (e.a == ia && e.b == ib) || (!self.is_directed() && e.a == ib && e.b == ia)
            })
            .map(|e| e.weight)
    }

    /// Number of incident edges per node (in + out for direct graphs).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    /// `src,dst,weight,mode` rows in edge order.
    pub fn write_edges_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "src,dst,weight,mode")?;
        for e in &self.edges {
            writeln!(
                out,
                "{},{},{},{}",
                self.nodes[e.a].id,
                self.nodes[e.b].id,
                sig9(e.weight),
                self.mode.as_str()
            )?;
        }
        Ok(())
    }

    /// `id,party` rows in node order.
    pub fn write_nodes_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "id,party")?;
        for n in &self.nodes {
            writeln!(out, "{},{}", n.id, n.party)?;
        }
        Ok(())
    }
}

/// Cosine of two nonnegative count vectors, clamped to `[0, 1]`.
pub fn cosine_similarity(a: &[u64], b: &[u64]) -> Result<f64, SimnetError> {
    if a.len() != b.len() {
        return Err(SimnetError::LengthMismatch(a.len(), b.len()));
    }
    let mut dot = 0u128;
    let mut na = 0u128;
    let mut nb = 0u128;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as u128, y as u128);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0 || nb == 0 {
        return Err(SimnetError::ZeroVector);
    }
    Ok(cosine_from_parts(dot, na, nb))
}

fn cosine_from_parts(dot: u128, norm_sq_a: u128, norm_sq_b: u128) -> f64 {
    let w = dot as f64 / ((norm_sq_a as f64).sqrt() * (norm_sq_b as f64).sqrt());
    w.clamp(0.0, 1.0)
}

/// Audience-similarity graph over the influencer columns of `m`.
///
/// Columns without retweets are skipped. Pair dot products are accumulated
/// row by row from the sparse entries, so the cost scales with the sum of
/// squared row degrees rather than with the number of users.
pub fn build_similarity_graph(
    m: &InteractionMatrix,
    catalog: &InfluencerCatalog,
) -> Result<SimilarityGraph, SimnetError> {
    let col_sums = m.col_sums();
    let live: Vec<usize> = (0..m.n_cols()).filter(|&j| col_sums[j] > 0).collect();
    if live.len() < 2 {
        return Err(SimnetError::TooFewColumns(live.len()));
    }
    let mut slot = vec![usize::MAX; m.n_cols()];
    let mut nodes = Vec::with_capacity(live.len());
    for (k, &j) in live.iter().enumerate() {
        slot[j] = k;
        let id = &m.cols()[j];
        let party = catalog
            .party_of(id)
            .ok_or_else(|| SimnetError::UnknownInfluencer(id.clone()))?;
        nodes.push(GraphNode {
            id: id.clone(),
            party: party.clone(),
        });
    }

    let n = live.len();
    let mut norm_sq = vec![0u128; n];
    let mut dots = vec![0u128; n * n];
    for i in 0..m.n_rows() {
        let row = m.row_entries(i);
        for (x, ex) in row.iter().enumerate() {
            let sx = slot[ex.col];
            let cx = ex.count as u128;
            norm_sq[sx] += cx * cx;
            for ey in &row[x + 1..] {
                let sy = slot[ey.col];
                let (lo, hi) = if sx < sy { (sx, sy) } else { (sy, sx) };
                dots[lo * n + hi] += cx * ey.count as u128;
            }
        }
    }

    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let dot = dots[a * n + b];
            if dot > 0 {
                let weight = cosine_from_parts(dot, norm_sq[a], norm_sq[b]);
                if weight > 0.0 {
                    edges.push(GraphEdge { a, b, weight });
                }
            }
        }
    }
    Ok(SimilarityGraph::new(GraphMode::Similarity, nodes, edges))
}

/// Result of median pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub graph: SimilarityGraph,
    /// Median of the input edge weights; `None` when the input had no edges.
    pub median: Option<f64>,
    pub removed_edges: usize,
    pub removed_nodes: usize,
}

/// Median of a nonempty list (mean of the two middle values for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Drops edges strictly below the median edge weight, then isolated nodes.
pub fn prune_graph(g: &SimilarityGraph) -> Result<Pruned, SimnetError> {
    if g.mode() != GraphMode::Similarity {
        return Err(SimnetError::NotSimilarity);
    }
    let weights: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    let Some(threshold) = median(&weights) else {
        return Ok(Pruned {
            graph: SimilarityGraph::empty(GraphMode::Similarity),
            median: None,
            removed_edges: 0,
            removed_nodes: g.nodes().len(),
        });
    };
    let kept: Vec<GraphEdge> = g
        .edges()
        .iter()
        .copied()
        .filter(|e| e.weight >= threshold)
        .collect();
    let mut degree = vec![0usize; g.nodes().len()];
    for e in &kept {
        degree[e.a] += 1;
        degree[e.b] += 1;
    }
    let mut remap = vec![usize::MAX; g.nodes().len()];
    let mut nodes = Vec::new();
    for (i, node) in g.nodes().iter().enumerate() {
        if degree[i] > 0 {
            remap[i] = nodes.len();
            nodes.push(node.clone());
        }
    }
    let edges: Vec<GraphEdge> = kept
        .iter()
        .map(|e| GraphEdge {
            a: remap[e.a],
            b: remap[e.b],
            weight: e.weight,
        })
        .collect();
    Ok(Pruned {
        removed_edges: g.edges().len() - edges.len(),
        removed_nodes: g.nodes().len() - nodes.len(),
        graph: SimilarityGraph::new(GraphMode::Similarity, nodes, edges),
        median: Some(threshold),
    })
}

fn intern_node<'a>(
    nodes: &mut Vec<GraphNode>,
    index: &mut HashMap<&'a str, usize>,
    id: &'a str,
    party: &PartyLabel,
) -> usize {
    *index.entry(id).or_insert_with(|| {
        nodes.push(GraphNode {
            id: id.to_string(),
            party: party.clone(),
        });
        nodes.len() - 1
    })
}

/// Directed graph of influencers retweeting other influencers in `year`.
///
/// Self-retweets and records touching non-catalog accounts are ignored.
pub fn build_direct_retweet_graph(
    records: &[RetweetRecord],
    catalog: &InfluencerCatalog,
    year: i32,
) -> SimilarityGraph {
    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
    for r in records.iter().filter(|r| r.year() == year) {
        if r.retweeter == r.influencer {
            continue;
        }
        let (Some(src_party), Some(dst_party)) =
            (catalog.party_of(&r.retweeter), catalog.party_of(&r.influencer))
        else {
            continue;
        };
        let a = intern_node(&mut nodes, &mut index, &r.retweeter, src_party);
        let b = intern_node(&mut nodes, &mut index, &r.influencer, dst_party);
        *counts.entry((a, b)).or_insert(0) += 1;
    }
    let edges = counts
        .into_iter()
        .map(|((a, b), c)| GraphEdge {
            a,
            b,
            weight: c as f64,
        })
        .collect();
    SimilarityGraph::new(GraphMode::Direct, nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InfluencerEntry;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn party(p: &str) -> PartyLabel {
        PartyLabel::new(p).unwrap()
    }

    fn catalog(n: usize) -> InfluencerCatalog {
        InfluencerCatalog::new(
            (0..n)
                .map(|i| InfluencerEntry {
                    id: format!("p{i}"),
                    handle: String::new(),
                    party: party(if i % 2 == 0 { "A" } else { "B" }),
                })
                .collect(),
        )
        .unwrap()
    }

    fn matrix_from_columns(cols: &[Vec<u64>]) -> InteractionMatrix {
        let n_rows = cols[0].len();
        let dense: Vec<Vec<u64>> = (0..n_rows)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        InteractionMatrix::from_dense(
            2020,
            (0..n_rows).map(|i| format!("u{i}")).collect(),
            (0..cols.len()).map(|j| format!("p{j}")).collect(),
            &dense,
        )
        .unwrap()
    }

    /// Straight float evaluation of the cosine formula.
    fn cosine_oracle(a: &[u64], b: &[u64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
        let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1, 2], &[2, 4]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1, 0], &[0, 3]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1, 0, 1], &[1, 1, 0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0, 0], &[1, 1]), Err(SimnetError::ZeroVector));
        assert_eq!(
            cosine_similarity(&[1], &[1, 1]),
            Err(SimnetError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn identical_columns_single_edge() {
        let m = matrix_from_columns(&[vec![1, 2, 0], vec![1, 2, 0]]);
        let g = build_similarity_graph(&m, &catalog(2)).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert!((g.edges()[0].weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_columns_no_edge() {
        let m = matrix_from_columns(&[vec![1, 0], vec![0, 4]]);
        let g = build_similarity_graph(&m, &catalog(2)).unwrap();
        assert_eq!(g.nodes().len(), 2);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn three_column_example() {
        let cols = [vec![1, 0, 1], vec![1, 1, 0], vec![0, 0, 5]];
        let m = matrix_from_columns(&cols);
        let g = build_similarity_graph(&m, &catalog(3)).unwrap();
        let w01 = g.weight("p0", "p1").unwrap();
        let w02 = g.weight("p0", "p2").unwrap();
        assert!((w01 - 0.5).abs() < 1e-15);
        assert!((w02 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(g.weight("p1", "p2").is_none());
        assert_eq!(g.edges().len(), 2);
        // Brute force over all pairs.
        for a in 0..3 {
            for b in a + 1..3 {
                let o = cosine_oracle(&cols[a], &cols[b]);
                match g.weight(&format!("p{a}"), &format!("p{b}")) {
                    Some(w) => assert!((w - o).abs() < 1e-15),
                    None => assert_eq!(o, 0.0),
                }
            }
        }
    }

    #[test]
    fn too_few_columns() {
        let m = matrix_from_columns(&[vec![1, 1], vec![0, 0]]);
        assert_eq!(
            build_similarity_graph(&m, &catalog(2)),
            Err(SimnetError::TooFewColumns(1))
        );
    }

    fn graph_with_weights(weights: &[(usize, usize, f64)], n: usize) -> SimilarityGraph {
        let nodes = (0..n)
            .map(|i| GraphNode {
                id: format!("n{i}"),
                party: party("A"),
            })
            .collect();
        let edges = weights
            .iter()
            .map(|&(a, b, weight)| GraphEdge { a, b, weight })
            .collect();
        SimilarityGraph::new(GraphMode::Similarity, nodes, edges)
    }

    #[test]
    fn prune_odd_median() {
        let g = graph_with_weights(&[(0, 1, 0.2), (1, 2, 0.4), (2, 3, 0.6)], 4);
        let p = prune_graph(&g).unwrap();
        assert_eq!(p.median, Some(0.4));
        let kept: Vec<f64> = p.graph.edges().iter().map(|e| e.weight).collect();
        assert_eq!(kept, vec![0.4, 0.6]);
        // n0 only touched the 0.2 edge.
        assert!(p.graph.node_index("n0").is_none());
        assert_eq!(p.graph.nodes().len(), 3);
    }

    #[test]
    fn prune_equal_weights_keeps_all() {
        let g = graph_with_weights(&[(0, 1, 0.3), (1, 2, 0.3), (0, 2, 0.3)], 3);
        let p = prune_graph(&g).unwrap();
        assert_eq!(p.graph.edges().len(), 3);
        assert_eq!(p.removed_edges, 0);
    }

    #[test]
    fn prune_even_median_drops_isolated() {
        let g = graph_with_weights(&[(0, 1, 0.1), (2, 3, 0.9)], 4);
        let p = prune_graph(&g).unwrap();
        assert_eq!(p.median, Some(0.5));
        assert_eq!(p.graph.edges().len(), 1);
        assert_eq!(
            p.graph.nodes().iter().map(|n| n.id.as_str()).collect::<Vec<_>>(),
            ["n2", "n3"]
        );
        assert_eq!(p.removed_nodes, 2);
    }

    #[test]
    fn prune_empty_is_flagged() {
        let g = graph_with_weights(&[], 3);
        let p = prune_graph(&g).unwrap();
        assert_eq!(p.median, None);
        assert!(p.graph.nodes().is_empty());
    }

    fn rt(src: &str, dst: &str) -> RetweetRecord {
        RetweetRecord {
            timestamp: Utc.with_ymd_and_hms(2021, 5, 1, 0, 0, 0).unwrap(),
            retweeter: src.into(),
            influencer: dst.into(),
        }
    }

    #[test]
    fn direct_graph_counts() {
        let cat = catalog(3);
        let recs = vec![rt("p1", "p2"), rt("p1", "p2"), rt("p1", "p2")];
        let g = build_direct_retweet_graph(&recs, &cat, 2021);
        assert!(g.is_directed());
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.weight("p1", "p2"), Some(3.0));

        let none = build_direct_retweet_graph(&[rt("u1", "p2"), rt("p1", "p1")], &cat, 2021);
        assert!(none.is_empty());
        assert!(none.nodes().is_empty());

        let both = build_direct_retweet_graph(
            &[rt("p1", "p2"), rt("p2", "p1"), rt("p1", "p2")],
            &cat,
            2021,
        );
        assert_eq!(both.edges().len(), 2);
        assert_eq!(both.weight("p1", "p2"), Some(2.0));
        assert_eq!(both.weight("p2", "p1"), Some(1.0));
        assert!(build_direct_retweet_graph(&recs, &cat, 2020).is_empty());
    }

    #[test]
    fn edge_csv_format() {
        let m = matrix_from_columns(&[vec![1, 0, 1], vec![1, 1, 0], vec![0, 0, 5]]);
        let g = build_similarity_graph(&m, &catalog(3)).unwrap();
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "src,dst,weight,mode\np0,p1,0.5,similarity\np0,p2,0.707106781,similarity\n"
        );
    }

    fn arb_columns() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (2usize..6, 1usize..12).prop_flat_map(|(k, n)| {
            proptest::collection::vec(proptest::collection::vec(0u64..4, n), k)
        })
    }

    proptest! {
        #[test]
        fn graph_matches_bruteforce(cols in arb_columns(), perm_seed in any::<u64>(), scale in 1u64..7) {
            let live = cols.iter().filter(|c| c.iter().any(|&v| v > 0)).count();
            prop_assume!(live >= 2);
            let cat = catalog(cols.len());
            let m = matrix_from_columns(&cols);
            let g = build_similarity_graph(&m, &cat).unwrap();
            for e in g.edges() {
                prop_assert!(e.weight > 0.0 && e.weight <= 1.0);
            }
            for a in 0..cols.len() {
                for b in 0..cols.len() {
                    if a == b || !cols[a].iter().any(|&v| v > 0) || !cols[b].iter().any(|&v| v > 0) {
                        continue;
                    }
                    let o = cosine_oracle(&cols[a], &cols[b]);
                    let w = g.weight(&format!("p{a}"), &format!("p{b}")).unwrap_or(0.0);
                    prop_assert!((w - o).abs() < 1e-12, "pair {a},{b}: {w} vs {o}");
                }
            }

            // Permuting users leaves the graph unchanged.
            let n = cols[0].len();
            let mut order: Vec<usize> = (0..n).collect();
            let mut s = perm_seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<Vec<u64>> = cols.iter().map(|c| order.iter().map(|&i| c[i]).collect()).collect();
            let gp = build_similarity_graph(&matrix_from_columns(&permuted), &cat).unwrap();
            prop_assert_eq!(g.edges().len(), gp.edges().len());
            for (x, y) in g.edges().iter().zip(gp.edges()) {
                prop_assert!((x.weight - y.weight).abs() < 1e-15);
            }

            // Scaling one column leaves its weights unchanged.
            let mut scaled = cols.clone();
            for v in &mut scaled[0] { *v *= scale; }
            let gs = build_similarity_graph(&matrix_from_columns(&scaled), &cat).unwrap();
            for (x, y) in g.edges().iter().zip(gs.edges()) {
                prop_assert!((x.weight - y.weight).abs() < 1e-12);
            }

            // Pruning keeps only edges at or above the input median.
            let p = prune_graph(&g).unwrap();
            if let Some(med) = p.median {
                for e in p.graph.edges() {
                    prop_assert!(e.weight >= med);
                }
            }
            for node in p.graph.nodes() {
                prop_assert!(g.node_index(&node.id).is_some());
            }
        }
    }
}
