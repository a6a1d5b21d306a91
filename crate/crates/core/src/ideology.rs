//! Latent ideology by correspondence analysis of the retweet matrix.
//!
//! The count matrix is normalized to a joint distribution `P`, centered by
//! the outer product of its margins and scaled to the standardized residual
//! matrix `S = D_r^{-1/2} (P - r c^T) D_c^{-1/2}`. A user's position is their
//! entry in the left singular vector of the largest singular value of `S`;
//! an influencer's position is the median position of its retweeters.
//!
//! The centering already removes the trivial correspondence-analysis axis
//! (`S sqrt(c) = 0`), so the leading singular pair is the first substantive
//! dimension.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{jacobi_svd, DenseMatrix, JacobiParams};
use crate::model::{InfluencerCatalog, InteractionMatrix, PartyLabel};
use crate::simnet::median;

/// Singular values at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum IdeologyError {
    #[error("interaction matrix has no counts")]
    EmptyMatrix,
    #[error("zero mass in {axis} {id:?}")]
    ZeroMargin { axis: &'static str, id: String },
    #[error("need at least 2 users and 2 influencers with retweets, found {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("no ideological dimension: standardized residual matrix has rank 0")]
    NoIdeologicalDimension,
    #[error("anchor party {0} has no scored influencers")]
    AnchorAbsent(PartyLabel),
}

/// Counts divided by their grand total.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `(row, col, value)` in row-major order.
    pub entries: Vec<(usize, usize, f64)>,
}

impl NormalizedMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows(), self.n_cols());
        for &(i, j, v) in &self.entries {
            d.set(i, j, v);
        }
        d
    }
}

/// `P = A / sum(A)`.
pub fn normalize(m: &InteractionMatrix) -> Result<NormalizedMatrix, IdeologyError> {
    let total = m.total();
    if total == 0 {
        return Err(IdeologyError::EmptyMatrix);
    }
    let total = total as f64;
    Ok(NormalizedMatrix {
        rows: m.rows().to_vec(),
        cols: m.cols().to_vec(),
        entries: m
            .entries()
            .iter()
            .map(|e| (e.row, e.col, e.count as f64 / total))
            .collect(),
    })
}

/// Row masses `r = P 1` and column masses `c = 1^T P`.
pub fn margins(p: &NormalizedMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut r = vec![0.0; p.n_rows()];
    let mut c = vec![0.0; p.n_cols()];
    for &(i, j, v) in &p.entries {
        r[i] += v;
        c[j] += v;
    }
    (r, c)
}

/// `S_ij = (P_ij - r_i c_j) / sqrt(r_i c_j)`.
pub fn standardize(
    p: &NormalizedMatrix,
    r: &[f64],
    c: &[f64],
) -> Result<DenseMatrix, IdeologyError> {
    if let Some(i) = r.iter().position(|&v| v <= 0.0) {
        return Err(IdeologyError::ZeroMargin {
            axis: "row",
            id: p.rows[i].clone(),
        });
    }
    if let Some(j) = c.iter().position(|&v| v <= 0.0) {
        return Err(IdeologyError::ZeroMargin {
            axis: "column",
            id: p.cols[j].clone(),
        });
    }
    let sqrt_r: Vec<f64> = r.iter().map(|v| v.sqrt()).collect();
    let sqrt_c: Vec<f64> = c.iter().map(|v| v.sqrt()).collect();
    let mut s = DenseMatrix::zeros(r.len(), c.len());
    for (j, &sc) in sqrt_c.iter().enumerate() {
        for (i, &sr) in sqrt_r.iter().enumerate() {
            s.set(i, j, -sr * sc);
        }
    }
    for &(i, j, v) in &p.entries {
        s.set(i, j, (v - r[i] * c[j]) / (sqrt_r[i] * sqrt_c[j]));
    }
    Ok(s)
}

/// Solver settings recorded in decomposition reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverInfo {
    pub method: &'static str,
    pub tol: f64,
    pub max_sweeps: usize,
    pub sweeps: usize,
    pub converged: bool,
}

/// Every intermediate of one correspondence analysis.
#[derive(Debug, Clone)]
pub struct CADecomposition {
    pub p: NormalizedMatrix,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub s: DenseMatrix,
    /// Singular values of `S`, nonincreasing.
    pub sigma: Vec<f64>,
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    /// Users and influencers removed for having zero mass.
    pub dropped_rows: Vec<String>,
    pub dropped_cols: Vec<String>,
    pub solver: SolverInfo,
}

impl CADecomposition {
    /// Left singular vector of the largest singular value.
    pub fn u_col1(&self) -> &[f64] {
        self.u.column(0)
    }

    /// Right singular vector of the largest singular value.
    pub fn v_col1(&self) -> &[f64] {
        self.v.column(0)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.s.n_rows(), self.s.n_cols())
    }

    /// `max |S - U diag(sigma) V^T|`.
    pub fn reconstruction_error(&self) -> f64 {
        crate::linalg::Svd {
            u: self.u.clone(),
            sigma: self.sigma.clone(),
            v: self.v.clone(),
            sweeps: 0,
            converged: true,
        }
        .reconstruction_error(&self.s)
    }

    fn flip_first_axis(&mut self) {
        for x in self.u.column_mut(0) {
            *x = -*x;
        }
        for x in self.v.column_mut(0) {
            *x = -*x;
        }
    }
}

/// Runs the full decomposition, first dropping zero-mass rows and columns.
pub fn decompose(m: &InteractionMatrix) -> Result<CADecomposition, IdeologyError> {
    decompose_with(m, JacobiParams::default())
}

pub fn decompose_with(
    m: &InteractionMatrix,
    params: JacobiParams,
) -> Result<CADecomposition, IdeologyError> {
    if m.is_empty() {
        return Err(IdeologyError::EmptyMatrix);
    }
    let (reduced, dropped_rows, dropped_cols) = drop_zero_margins(m);
    if !dropped_rows.is_empty() || !dropped_cols.is_empty() {
        warn!(
            "year {}: dropping {} empty user row(s) and {} empty influencer column(s)",
            m.year(),
            dropped_rows.len(),
            dropped_cols.len()
        );
    }
    if reduced.n_rows() < 2 || reduced.n_cols() < 2 {
        return Err(IdeologyError::TooSmall {
            rows: reduced.n_rows(),
            cols: reduced.n_cols(),
        });
    }
    let p = normalize(&reduced)?;
    let (r, c) = margins(&p);
    let s = standardize(&p, &r, &c)?;
    let svd = jacobi_svd(&s, params);
    if !svd.converged {
        warn!("Jacobi SVD stopped after {} sweeps without converging", svd.sweeps);
    }
    if svd.sigma.first().is_none_or(|&s1| s1 <= RANK_TOL) {
        return Err(IdeologyError::NoIdeologicalDimension);
    }
    if svd.sigma.len() > 1 && svd.sigma[0] - svd.sigma[1] <= 1e-9 * svd.sigma[0] {
        warn!(
            "year {}: leading singular value is (nearly) repeated; the first axis is not unique",
            m.year()
        );
    }
    Ok(CADecomposition {
        p,
        r,
        c,
        s,
        sigma: svd.sigma,
        u: svd.u,
        v: svd.v,
        dropped_rows,
        dropped_cols,
        solver: SolverInfo {
            method: "one-sided-jacobi",
            tol: params.tol,
            max_sweeps: params.max_sweeps,
            sweeps: svd.sweeps,
            converged: svd.converged,
        },
    })
}

fn drop_zero_margins(m: &InteractionMatrix) -> (InteractionMatrix, Vec<String>, Vec<String>) {
    let row_sums = m.row_sums();
    let col_sums = m.col_sums();
    if row_sums.iter().all(|&v| v > 0) && col_sums.iter().all(|&v| v > 0) {
        return (m.clone(), Vec::new(), Vec::new());
    }
    let remap = |sums: &[u64], ids: &[String]| {
        let mut index = vec![usize::MAX; sums.len()];
        let (mut kept, mut dropped) = (Vec::new(), Vec::new());
        for (k, (&s, id)) in sums.iter().zip(ids).enumerate() {
            if s > 0 {
                index[k] = kept.len();
                kept.push(id.clone());
            } else {
                dropped.push(id.clone());
            }
        }
        (index, kept, dropped)
    };
    let (row_index, rows, dropped_rows) = remap(&row_sums, m.rows());
    let (col_index, cols, dropped_cols) = remap(&col_sums, m.cols());
    let reduced = InteractionMatrix::from_triples(
        m.year(),
        rows,
        cols,
        m.entries()
            .iter()
            .map(|e| (row_index[e.row], col_index[e.col], e.count)),
    )
    .expect("reduced matrix keeps valid indices");
    (reduced, dropped_rows, dropped_cols)
}

/// Scores for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct IdeologyResult {
    pub year: i32,
    /// Users in matrix row order.
    pub user_scores: Vec<(String, f64)>,
    /// Influencers in matrix column order.
    pub influencer_scores: Vec<(String, f64)>,
    /// Influencer columns without any scored retweeter.
    pub unscored_influencers: Vec<String>,
    pub orientation_anchor: PartyLabel,
    /// Whether the raw singular vectors were negated to satisfy the anchor.
    pub flipped: bool,
}

impl IdeologyResult {
    pub fn user_score(&self, id: &str) -> Option<f64> {
        self.user_scores.iter().find(|(u, _)| u == id).map(|p| p.1)
    }

    pub fn influencer_score(&self, id: &str) -> Option<f64> {
        self.influencer_scores.iter().find(|(u, _)| u == id).map(|p| p.1)
    }
}

/// Median retweeter score per influencer column, in column order. Columns
/// with no scored retweeters are returned separately.
pub fn influencer_ideology(
    user_scores: &[(String, f64)],
    m: &InteractionMatrix,
) -> (Vec<(String, f64)>, Vec<String>) {
    let by_id: HashMap<&str, f64> = user_scores.iter().map(|(u, s)| (u.as_str(), *s)).collect();
    let row_score: Vec<Option<f64>> = m.rows().iter().map(|u| by_id.get(u.as_str()).copied()).collect();
    let mut per_col: Vec<Vec<f64>> = vec![Vec::new(); m.n_cols()];
    for e in m.entries() {
        if let Some(s) = row_score[e.row] {
            per_col[e.col].push(s);
        }
    }
    let mut scored = Vec::new();
    let mut unscored = Vec::new();
    for (j, values) in per_col.iter().enumerate() {
        match median(values) {
            Some(med) => scored.push((m.cols()[j].clone(), med)),
            None => unscored.push(m.cols()[j].clone()),
        }
    }
    (scored, unscored)
}

/// Scores users and influencers for one year.
///
/// The global sign is chosen so that the mean influencer score of `anchor`
/// is not positive; an exactly zero mean keeps the solver's orientation.
pub fn latent_ideology(
    m: &InteractionMatrix,
    anchor: &PartyLabel,
    catalog: &InfluencerCatalog,
) -> Result<(IdeologyResult, CADecomposition), IdeologyError> {
    let mut decomposition = decompose(m)?;
    let mut user_scores: Vec<(String, f64)> = decomposition
        .p
        .rows
        .iter()
        .cloned()
        .zip(decomposition.u_col1().iter().copied())
        .collect();
    let (mut influencer_scores, unscored) = influencer_ideology(&user_scores, m);
    if !unscored.is_empty() {
        warn!(
            "year {}: {} influencer(s) have no scored retweeters",
            m.year(),
            unscored.len()
        );
    }

    let anchor_scores: Vec<f64> = influencer_scores
        .iter()
        .filter(|(id, _)| catalog.party_of(id) == Some(anchor))
        .map(|p| p.1)
        .collect();
    if anchor_scores.is_empty() {
        return Err(IdeologyError::AnchorAbsent(anchor.clone()));
    }
    let anchor_mean = anchor_scores.iter().sum::<f64>() / anchor_scores.len() as f64;
    let flipped = anchor_mean > 0.0;
    if flipped {
        decomposition.flip_first_axis();
        for (_, s) in user_scores.iter_mut().chain(influencer_scores.iter_mut()) {
            *s = -*s;
        }
    }
    Ok((
        IdeologyResult {
            year: m.year(),
            user_scores,
            influencer_scores,
            unscored_influencers: unscored,
            orientation_anchor: anchor.clone(),
            flipped,
        },
        decomposition,
    ))
}

/// One `(user, party, score)` row per party each user retweeted, for
/// per-party audience densities. Users who retweeted several parties appear
/// once under each.
pub fn user_party_scores(
    result: &IdeologyResult,
    m: &InteractionMatrix,
    catalog: &InfluencerCatalog,
) -> Vec<(String, PartyLabel, f64)> {
    let by_id: HashMap<&str, f64> = result
        .user_scores
        .iter()
        .map(|(u, s)| (u.as_str(), *s))
        .collect();
    let mut out = Vec::new();
    for (i, user) in m.rows().iter().enumerate() {
        let Some(&score) = by_id.get(user.as_str()) else {
            continue;
        };
        let mut parties: Vec<&PartyLabel> = m
            .row_entries(i)
            .iter()
            .filter_map(|e| catalog.party_of(&m.cols()[e.col]))
            .collect();
        parties.sort();
        parties.dedup();
        out.extend(parties.into_iter().map(|p| (user.clone(), p.clone(), score)));
    }
    out
}

/// Decomposition summary written next to the scores.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub year: i32,
    pub shape: [usize; 2],
    pub singular_values: Vec<f64>,
    pub dropped_rows: Vec<String>,
    pub dropped_cols: Vec<String>,
    pub anchor: String,
    pub flipped: bool,
    pub solver: SolverInfo,
    pub unscored_influencers: Vec<String>,
}

impl DecompositionReport {
    pub fn new(result: &IdeologyResult, d: &CADecomposition) -> Self {
        let (rows, cols) = d.shape();
        Self {
            year: result.year,
            shape: [rows, cols],
            singular_values: d.sigma.iter().take(5).copied().collect(),
            dropped_rows: d.dropped_rows.clone(),
            dropped_cols: d.dropped_cols.clone(),
            anchor: result.orientation_anchor.to_string(),
            flipped: result.flipped,
            solver: d.solver,
            unscored_influencers: result.unscored_influencers.clone(),
        }
    }
}

/// Mean influencer score per party.
pub fn party_means(
    result: &IdeologyResult,
    catalog: &InfluencerCatalog,
) -> BTreeMap<PartyLabel, f64> {
    let mut acc: BTreeMap<PartyLabel, (f64, usize)> = BTreeMap::new();
    for (id, s) in &result.influencer_scores {
        if let Some(p) = catalog.party_of(id) {
            let e = acc.entry(p.clone()).or_insert((0.0, 0));
            e.0 += s;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(p, (s, n))| (p, s / n as f64)).collect()
}
