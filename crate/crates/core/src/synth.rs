//! Planted-bloc retweet corpora with known answers.
//!
//! Parties are grouped into blocs. Each user has a home party and draws a
//! number of retweets; every retweet goes to another bloc with probability
//! `epsilon`, otherwise to another party of the same bloc with probability
//! `within_bloc_cross_party`, otherwise home. The influencer is then chosen
//! uniformly inside the chosen party. Users are topped up with home retweets
//! until they reach `min_distinct` distinct influencers and (optionally) a
//! strict home-party majority, so dominant-party assignment recovers the
//! planted home party.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{write_catalog, write_records};
use crate::model::{InfluencerCatalog, InfluencerEntry, ModelError, PartyLabel, RetweetRecord};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("infeasible synth config: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartySpec {
    pub label: PartyLabel,
    pub influencers: usize,
    pub users: usize,
}

/// An influencer moving to another party from `year` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectionSpec {
    pub influencer: String,
    pub party: PartyLabel,
}

/// `count` users whose home party changes from `from` to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    pub from: PartyLabel,
    pub to: PartyLabel,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearSpec {
    pub year: i32,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub within_bloc_cross_party: Option<f64>,
    #[serde(default)]
    pub defections: Vec<DefectionSpec>,
    #[serde(default)]
    pub switches: Vec<SwitchSpec>,
    /// Probability that a user sits this year out.
    #[serde(default)]
    pub inactive_fraction: f64,
}

impl YearSpec {
    pub fn new(year: i32) -> Self {
        Self {
            year,
            epsilon: None,
            within_bloc_cross_party: None,
            defections: Vec::new(),
            switches: Vec::new(),
            inactive_fraction: 0.0,
        }
    }
}

fn default_min_distinct() -> usize {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub parties: Vec<PartySpec>,
    pub blocs: Vec<Vec<PartyLabel>>,
    pub epsilon: f64,
    #[serde(default)]
    pub within_bloc_cross_party: f64,
    /// Mean retweets per user and year before top-ups.
    pub retweets_per_user: f64,
    #[serde(default = "default_min_distinct")]
    pub min_distinct: usize,
    #[serde(default = "default_true")]
    pub guarantee_home_majority: bool,
    pub years: Vec<YearSpec>,
    pub seed: u64,
}

impl SynthConfig {
    /// Two blocs: `P1` alone, `P2` and `P3` together.
    pub fn two_bloc(users_per_bloc: usize, influencers_per_party: usize, epsilon: f64, seed: u64) -> Self {
        let label = |s: &str| PartyLabel::new(s).expect("static label");
        Self {
            parties: vec![
                PartySpec {
                    label: label("P1"),
                    influencers: influencers_per_party,
                    users: users_per_bloc,
                },
                PartySpec {
                    label: label("P2"),
                    influencers: influencers_per_party,
                    users: users_per_bloc / 2,
                },
                PartySpec {
                    label: label("P3"),
                    influencers: influencers_per_party,
                    users: users_per_bloc - users_per_bloc / 2,
                },
            ],
            blocs: vec![vec![label("P1")], vec![label("P2"), label("P3")]],
            epsilon,
            within_bloc_cross_party: 0.5,
            retweets_per_user: 12.0,
            min_distinct: 3,
            guarantee_home_majority: true,
            years: vec![YearSpec::new(2020)],
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.parties.is_empty() {
            return bad("no parties".into());
        }
        let mut labels = BTreeSet::new();
        for p in &self.parties {
            if !labels.insert(&p.label) {
                return bad(format!("party {} listed twice", p.label));
            }
            if p.influencers == 0 {
                return bad(format!("party {} has no influencers", p.label));
            }
        }
        let mut in_bloc = BTreeSet::new();
        for bloc in &self.blocs {
            if bloc.is_empty() {
                return bad("empty bloc".into());
            }
            for p in bloc {
                if !labels.contains(p) {
                    return bad(format!("bloc member {p} is not a party"));
                }
                if !in_bloc.insert(p) {
                    return bad(format!("party {p} is in more than one bloc"));
                }
            }
        }
        if in_bloc.len() != labels.len() {
            return bad("every party must belong to exactly one bloc".into());
        }
        let check_eps = |e: f64| (0.0..=0.5).contains(&e);
        let check_prob = |w: f64| (0.0..=1.0).contains(&w);
        if !check_eps(self.epsilon) {
            return bad(format!("epsilon {} outside [0, 0.5]", self.epsilon));
        }
        if !check_prob(self.within_bloc_cross_party) {
            return bad(format!(
                "within_bloc_cross_party {} outside [0, 1]",
                self.within_bloc_cross_party
            ));
        }
        if !(self.retweets_per_user >= 1.0 && self.retweets_per_user.is_finite()) {
            return bad(format!("retweets_per_user {} must be >= 1", self.retweets_per_user));
        }
        if self.years.is_empty() {
            return bad("no years".into());
        }
        let mut seen_years = BTreeSet::new();
        let mut prev = None;
        for y in &self.years {
            if !seen_years.insert(y.year) || prev.is_some_and(|p| p > y.year) {
                return bad("years must be strictly increasing".into());
            }
            prev = Some(y.year);
            if y.epsilon.is_some_and(|e| !check_eps(e)) {
                return bad(format!("year {}: epsilon outside [0, 0.5]", y.year));
            }
            if y.within_bloc_cross_party.is_some_and(|w| !check_prob(w)) {
                return bad(format!("year {}: within_bloc_cross_party outside [0, 1]", y.year));
            }
            if !(0.0..1.0).contains(&y.inactive_fraction) {
                return bad(format!("year {}: inactive_fraction outside [0, 1)", y.year));
            }
            for d in &y.defections {
                if !labels.contains(&d.party) {
                    return bad(format!("year {}: defection target {} is not a party", y.year, d.party));
                }
            }
            for s in &y.switches {
                if !labels.contains(&s.from) || !labels.contains(&s.to) {
                    return bad(format!("year {}: switch between unknown parties", y.year));
                }
                if s.from == s.to {
                    return bad(format!("year {}: switch from {} to itself", y.year, s.from));
                }
            }
        }
        Ok(())
    }

    fn bloc_of(&self) -> HashMap<&PartyLabel, usize> {
        self.blocs
            .iter()
            .enumerate()
            .flat_map(|(b, ps)| ps.iter().map(move |p| (p, b)))
            .collect()
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &["two-bloc", "single-bloc", "convergence", "defectors", "switching"];

fn party_spec(label: &str, influencers: usize, users: usize) -> PartySpec {
    PartySpec {
        label: PartyLabel::new(label).expect("static label"),
        influencers,
        users,
    }
}

fn labels(names: &[&str]) -> Vec<PartyLabel> {
    names
        .iter()
        .map(|n| PartyLabel::new(*n).expect("static label"))
        .collect()
}

/// Built-in scenarios.
///
/// * `two-bloc`: 2,000 users and 60 influencers; `P1` against a `P2`/`P3` bloc.
/// * `single-bloc`: the same sizes with all three parties in one bloc.
/// * `convergence`: five years in which the `P2`/`P3` within-bloc mixing rises
///   linearly while `P1` stays apart.
/// * `defectors`: `two-bloc` over two years; two `P1` influencers join `P2`
///   in the second.
/// * `switching`: three years with scripted home-party switches and churn.
pub fn preset(name: &str, seed: u64) -> Option<SynthConfig> {
    let cfg = match name {
        "two-bloc" => SynthConfig::two_bloc(1000, 20, 0.05, seed),
        "single-bloc" => SynthConfig {
            blocs: vec![labels(&["P1", "P2", "P3"])],
            epsilon: 0.0,
            within_bloc_cross_party: 2.0 / 3.0,
            ..SynthConfig::two_bloc(1000, 20, 0.05, seed)
        },
        "convergence" => SynthConfig {
            parties: vec![
                party_spec("P1", 20, 1000),
                party_spec("P2", 20, 1000),
                party_spec("P3", 20, 250),
            ],
            within_bloc_cross_party: 0.02,
            years: (0..5)
                .map(|k| YearSpec {
                    within_bloc_cross_party: Some(0.02 + 0.015 * k as f64),
                    ..YearSpec::new(2018 + k)
                })
                .collect(),
            ..SynthConfig::two_bloc(1000, 20, 0.05, seed)
        },
        "defectors" => {
            let mut cfg = SynthConfig::two_bloc(1000, 20, 0.05, seed);
            let mut last = YearSpec::new(2021);
            for k in 0..2 {
                last.defections.push(DefectionSpec {
                    influencer: influencer_id(&labels(&["P1"])[0], k),
                    party: labels(&["P2"])[0].clone(),
                });
            }
            cfg.years.push(last);
            cfg
        }
        "switching" => {
            let mut cfg = SynthConfig::two_bloc(600, 10, 0.05, seed);
            let [p1, p2, p3]: [PartyLabel; 3] = labels(&["P1", "P2", "P3"]).try_into().ok()?;
            cfg.years = vec![
                YearSpec::new(2019),
                YearSpec {
                    switches: vec![
                        SwitchSpec { from: p1.clone(), to: p2.clone(), count: 25 },
                        SwitchSpec { from: p3.clone(), to: p2.clone(), count: 10 },
                    ],
                    inactive_fraction: 0.1,
                    ..YearSpec::new(2020)
                },
                YearSpec {
                    switches: vec![SwitchSpec { from: p2, to: p1, count: 40 }],
                    inactive_fraction: 0.05,
                    ..YearSpec::new(2021)
                },
            ];
            cfg
        }
        _ => return None,
    };
    Some(cfg)
}

pub fn influencer_id(party: &PartyLabel, k: usize) -> String {
    format!("{party}-i{:03}", k + 1)
}

pub fn user_id(k: usize) -> String {
    format!("u{:06}", k + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDefection {
    pub year: i32,
    pub influencer: String,
    pub from: PartyLabel,
    pub to: PartyLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSwitch {
    pub year: i32,
    pub from: PartyLabel,
    pub to: PartyLabel,
    pub users: Vec<String>,
}

/// Planted answers, written beside the corpus and never read by the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub blocs: Vec<Vec<PartyLabel>>,
    /// Home party of every active user, per year.
    pub home_party: BTreeMap<i32, BTreeMap<String, PartyLabel>>,
    pub defections: Vec<TruthDefection>,
    pub switches: Vec<TruthSwitch>,
    pub inactive: BTreeMap<i32, Vec<String>>,
    /// Retweet totals per year.
    pub records: BTreeMap<i32, usize>,
    /// Retweets whose influencer is in another bloc than the user's home party.
    pub cross_bloc_records: BTreeMap<i32, usize>,
}

impl GroundTruth {
    pub fn bloc_of_party(&self, party: &PartyLabel) -> Option<usize> {
        self.blocs.iter().position(|b| b.contains(party))
    }

    pub fn user_bloc(&self, year: i32, user: &str) -> Option<usize> {
        self.bloc_of_party(self.home_party.get(&year)?.get(user)?)
    }

    /// Scripted switch counts per `(year, from, to)`.
    pub fn switch_counts(&self) -> BTreeMap<(i32, PartyLabel, PartyLabel), usize> {
        let mut out = BTreeMap::new();
        for s in &self.switches {
            *out.entry((s.year, s.from.clone(), s.to.clone())).or_insert(0) += s.users.len();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// All years, sorted by timestamp.
    pub records: Vec<RetweetRecord>,
    pub catalogs: BTreeMap<i32, InfluencerCatalog>,
    pub truth: GroundTruth,
}

impl SynthCorpus {
    pub fn records_file_name() -> &'static str {
        "records.jsonl"
    }

    pub fn catalog_file_name(year: i32) -> String {
        format!("catalog_{year}.csv")
    }

    /// Writes `records.jsonl`, one `catalog_<year>.csv` per year and `truth.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(File::create(dir.join(Self::records_file_name()))?);
        write_records(&self.records, &mut out)?;
        out.flush()?;
        for (year, cat) in &self.catalogs {
            let mut out = BufWriter::new(File::create(dir.join(Self::catalog_file_name(*year)))?);
            write_catalog(cat, &mut out)?;
            out.flush()?;
        }
        let mut out = BufWriter::new(File::create(dir.join("truth.json"))?);
        serde_json::to_writer_pretty(&mut out, &self.truth)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}

const HOME_STREAM: u64 = 0;

fn year_stream(year: i32) -> u64 {
    (1u64 << 32) | (year as u32 as u64)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct YearPlan {
    year: i32,
    epsilon: f64,
    within: f64,
    /// Current members of each party, by party index.
    members: Vec<Vec<String>>,
    /// `(user id, home party index)` of active users.
    active: Vec<(String, usize)>,
}

/// Generates a corpus. Deterministic in `cfg.seed`, independent of the
/// number of worker threads.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let party_index: HashMap<&PartyLabel, usize> =
        cfg.parties.iter().enumerate().map(|(i, p)| (&p.label, i)).collect();
    let bloc_of = cfg.bloc_of();

    // Influencer membership, evolving with defections.
    let mut affiliation: BTreeMap<String, usize> = BTreeMap::new();
    let mut influencer_order: Vec<String> = Vec::new();
    for (pi, p) in cfg.parties.iter().enumerate() {
        for k in 0..p.influencers {
            let id = influencer_id(&p.label, k);
            affiliation.insert(id.clone(), pi);
            influencer_order.push(id);
        }
    }

    // Users and their home parties, evolving with switches.
    let mut home: Vec<usize> = Vec::new();
    for (pi, p) in cfg.parties.iter().enumerate() {
        home.extend(std::iter::repeat_n(pi, p.users));
    }
    let user_ids: Vec<String> = (0..home.len()).map(user_id).collect();

    let mut was_active = vec![true; home.len()];
    let mut home_rng = rng_for(cfg.seed, HOME_STREAM);
    let mut plans = Vec::with_capacity(cfg.years.len());
    let mut catalogs = BTreeMap::new();
    let mut truth_defections = Vec::new();
    let mut truth_switches = Vec::new();
    let mut truth_inactive = BTreeMap::new();
    let mut truth_home = BTreeMap::new();

    for y in &cfg.years {
        for d in &y.defections {
            let Some(&from) = affiliation.get(&d.influencer) else {
                return Err(SynthError::InvalidConfig(format!(
                    "year {}: defecting influencer {} does not exist",
                    y.year, d.influencer
                )));
            };
            let to = party_index[&d.party];
            affiliation.insert(d.influencer.clone(), to);
            truth_defections.push(TruthDefection {
                year: y.year,
                influencer: d.influencer.clone(),
                from: cfg.parties[from].label.clone(),
                to: d.party.clone(),
            });
        }
        let mut members = vec![Vec::new(); cfg.parties.len()];
        for id in &influencer_order {
            members[affiliation[id]].push(id.clone());
        }
        for (pi, m) in members.iter().enumerate() {
            if m.len() < cfg.min_distinct {
                return Err(SynthError::Infeasible(format!(
                    "year {}: party {} has {} influencer(s), fewer than min_distinct = {}",
                    y.year,
                    cfg.parties[pi].label,
                    m.len(),
                    cfg.min_distinct
                )));
            }
        }
        catalogs.insert(
            y.year,
            InfluencerCatalog::new(
                influencer_order
                    .iter()
                    .map(|id| InfluencerEntry {
                        id: id.clone(),
                        handle: format!("@{}", id.replace('-', "_")),
                        party: cfg.parties[affiliation[id]].label.clone(),
                    })
                    .collect(),
            )?,
        );

        let mut switched_now = vec![false; home.len()];
        for s in &y.switches {
            let (from, to) = (party_index[&s.from], party_index[&s.to]);
            let mut pool: Vec<usize> = (0..home.len())
                .filter(|&u| home[u] == from && was_active[u] && !switched_now[u])
                .collect();
            if pool.len() < s.count {
                return Err(SynthError::Infeasible(format!(
                    "year {}: {} switch(es) requested from {} but it has {} user(s)",
                    y.year,
                    s.count,
                    s.from,
                    pool.len()
                )));
            }
            pool.shuffle(&mut home_rng);
            let mut moved: Vec<usize> = pool[..s.count].to_vec();
            moved.sort_unstable();
            for &u in &moved {
                home[u] = to;
                switched_now[u] = true;
            }
            truth_switches.push((y.year, s.from.clone(), s.to.clone(), moved));
        }

        let mut active = Vec::new();
        let mut inactive = Vec::new();
        for (u, &h) in home.iter().enumerate() {
            if !switched_now[u] && y.inactive_fraction > 0.0 && home_rng.random_bool(y.inactive_fraction) {
                inactive.push(u);
                was_active[u] = false;
            } else {
                active.push((user_ids[u].clone(), h));
                was_active[u] = true;
            }
        }
        truth_home.insert(
            y.year,
            active
                .iter()
                .map(|(id, h)| (id.clone(), cfg.parties[*h].label.clone()))
                .collect::<BTreeMap<_, _>>(),
        );
        truth_inactive.insert(y.year, inactive.iter().map(|&u| user_ids[u].clone()).collect::<Vec<_>>());
        plans.push(YearPlan {
            year: y.year,
            epsilon: y.epsilon.unwrap_or(cfg.epsilon),
            within: y.within_bloc_cross_party.unwrap_or(cfg.within_bloc_cross_party),
            members,
            active,
        });
    }

    // Switching users are drawn from last year's active users and stay active.
    let switches = truth_switches
        .into_iter()
        .map(|(year, from, to, moved)| TruthSwitch {
            year,
            from,
            to,
            users: moved.into_iter().map(|u| user_ids[u].clone()).collect(),
        })
        .collect();

    let bloc_members: Vec<Vec<usize>> = cfg
        .blocs
        .iter()
        .map(|b| b.iter().map(|p| party_index[p]).collect())
        .collect();
    let party_bloc: Vec<usize> = cfg.parties.iter().map(|p| bloc_of[&p.label]).collect();

    let per_year: Vec<(Vec<RetweetRecord>, usize)> = plans
        .par_iter()
        .map(|plan| generate_year(cfg, plan, &bloc_members, &party_bloc))
        .collect::<Result<_, _>>()?;

    let mut records = Vec::with_capacity(per_year.iter().map(|(r, _)| r.len()).sum());
    let mut totals = BTreeMap::new();
    let mut cross = BTreeMap::new();
    for (plan, (recs, n_cross)) in plans.iter().zip(per_year) {
        totals.insert(plan.year, recs.len());
        cross.insert(plan.year, n_cross);
        records.extend(recs);
    }

    Ok(SynthCorpus {
        records,
        catalogs,
        truth: GroundTruth {
            seed: cfg.seed,
            blocs: cfg.blocs.clone(),
            home_party: truth_home,
            defections: truth_defections,
            switches,
            inactive: truth_inactive,
            records: totals,
            cross_bloc_records: cross,
        },
    })
}

fn year_bounds(year: i32) -> Result<(DateTime<Utc>, i64), SynthError> {
    let start = Utc
        .with_ymd_and_hms(year, 1, 1, 0, 0, 0)
        .single()
        .ok_or_else(|| SynthError::InvalidConfig(format!("year {year} out of range")))?;
    let end = Utc
        .with_ymd_and_hms(year + 1, 1, 1, 0, 0, 0)
        .single()
        .ok_or_else(|| SynthError::InvalidConfig(format!("year {year} out of range")))?;
    Ok((start, (end - start).num_seconds()))
}

fn generate_year(
    cfg: &SynthConfig,
    plan: &YearPlan,
    bloc_members: &[Vec<usize>],
    party_bloc: &[usize],
) -> Result<(Vec<RetweetRecord>, usize), SynthError> {
    let mut rng = rng_for(cfg.seed, year_stream(plan.year));
    let (start, span) = year_bounds(plan.year)?;
    let extra = Geometric::new(1.0 / cfg.retweets_per_user)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let n_parties = plan.members.len();

    let mut records = Vec::new();
    let mut n_cross = 0usize;
    let mut picks: Vec<(usize, usize)> = Vec::new();
    let mut per_party = vec![0u64; n_parties];
    for (user, home) in &plan.active {
        let home = *home;
        let bloc = party_bloc[home];
        let others_in_bloc: Vec<usize> =
            bloc_members[bloc].iter().copied().filter(|&p| p != home).collect();
        let other_blocs: Vec<usize> = (0..n_parties).filter(|&p| party_bloc[p] != bloc).collect();

        picks.clear();
        per_party.iter_mut().for_each(|c| *c = 0);
        let n = 1 + extra.sample(&mut rng) as usize;
        for _ in 0..n {
            let target = if !other_blocs.is_empty() && rng.random_bool(plan.epsilon) {
                *other_blocs.choose(&mut rng).expect("nonempty")
            } else if !others_in_bloc.is_empty() && rng.random_bool(plan.within) {
                *others_in_bloc.choose(&mut rng).expect("nonempty")
            } else {
                home
            };
            let k = rng.random_range(0..plan.members[target].len());
            picks.push((target, k));
            per_party[target] += 1;
        }

        let home_size = plan.members[home].len();
        let mut distinct: BTreeSet<(usize, usize)> = picks.iter().copied().collect();
        while distinct.len() < cfg.min_distinct {
            let unused: Vec<usize> = (0..home_size).filter(|k| !distinct.contains(&(home, *k))).collect();
            let k = *unused.choose(&mut rng).expect("party size checked against min_distinct");
            distinct.insert((home, k));
            picks.push((home, k));
            per_party[home] += 1;
        }
        if cfg.guarantee_home_majority {
            loop {
                let rival = (0..n_parties)
                    .filter(|&p| p != home)
                    .map(|p| per_party[p])
                    .max()
                    .unwrap_or(0);
                if per_party[home] > rival {
                    break;
                }
                picks.push((home, rng.random_range(0..home_size)));
                per_party[home] += 1;
            }
        }

        for &(party, k) in &picks {
            if party_bloc[party] != bloc {
                n_cross += 1;
            }
            let offset = rng.random_range(0..span);
            records.push(RetweetRecord {
                timestamp: start + chrono::Duration::seconds(offset),
                retweeter: user.clone(),
                influencer: plan.members[party][k].clone(),
            });
        }
    }
    records.sort_by(|a, b| {
        (a.timestamp, &a.retweeter, &a.influencer).cmp(&(b.timestamp, &b.retweeter, &b.influencer))
    });
    Ok((records, n_cross))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_interaction_matrix, parse_records, FilterConfig};

    fn label(s: &str) -> PartyLabel {
        PartyLabel::new(s).unwrap()
    }

    fn cross_fraction(c: &SynthCorpus) -> f64 {
        let cross: usize = c.truth.cross_bloc_records.values().sum();
        cross as f64 / c.records.len() as f64
    }

    #[test]
    fn no_mixing_means_no_cross_bloc_retweets() {
        let c = generate(&SynthConfig::two_bloc(300, 10, 0.0, 4)).unwrap();
        let cat = &c.catalogs[&2020];
        for r in &c.records {
            let from = c.truth.user_bloc(2020, &r.retweeter).unwrap();
            let to = c.truth.bloc_of_party(cat.party_of(&r.influencer).unwrap()).unwrap();
            assert_eq!(from, to);
        }
        assert_eq!(cross_fraction(&c), 0.0);
    }

    #[test]
    fn cross_bloc_fraction_matches_epsilon() {
        let c = generate(&SynthConfig::two_bloc(1000, 20, 0.05, 17)).unwrap();
        let cat = &c.catalogs[&2020];
        let counted = c
            .records
            .iter()
            .filter(|r| {
                c.truth.user_bloc(2020, &r.retweeter)
                    != c.truth.bloc_of_party(cat.party_of(&r.influencer).unwrap())
            })
            .count();
        let frac = counted as f64 / c.records.len() as f64;
        assert_eq!(frac, cross_fraction(&c));
        assert!((frac - 0.05).abs() <= 0.01, "cross fraction {frac}");
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig::two_bloc(200, 8, 0.1, 99);
        let dump = |c: &SynthCorpus| {
            let mut buf = Vec::new();
            write_records(&c.records, &mut buf).unwrap();
            buf
        };
        let a = generate(&cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| generate(&cfg).unwrap());
        assert_eq!(dump(&a), dump(&b));
        assert_eq!(a.truth, b.truth);
        let other = generate(&SynthConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(dump(&a), dump(&other));
    }

    #[test]
    fn every_user_passes_the_activity_filter() {
        let c = generate(&SynthConfig::two_bloc(400, 6, 0.2, 1)).unwrap();
        let mut buf = Vec::new();
        write_records(&c.records, &mut buf).unwrap();
        let parsed = parse_records(&buf[..]).unwrap();
        assert_eq!(parsed, c.records);
        let m = build_interaction_matrix(&parsed, &c.catalogs[&2020], 2020, &FilterConfig::default()).unwrap();
        assert_eq!(m.n_rows(), 800);
        assert!(m.empty_columns().is_empty());
        assert!(c.records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn defections_and_switches_are_recorded() {
        let mut cfg = SynthConfig::two_bloc(100, 5, 0.05, 3);
        let mut y2 = YearSpec::new(2021);
        y2.defections.push(DefectionSpec {
            influencer: influencer_id(&label("P1"), 0),
            party: label("P2"),
        });
        y2.switches.push(SwitchSpec {
            from: label("P1"),
            to: label("P3"),
            count: 7,
        });
        cfg.years.push(y2);
        let c = generate(&cfg).unwrap();
        assert_eq!(c.catalogs[&2020].party_of("P1-i001"), Some(&label("P1")));
        assert_eq!(c.catalogs[&2021].party_of("P1-i001"), Some(&label("P2")));
        assert_eq!(c.truth.defections.len(), 1);
        assert_eq!(c.truth.switches[0].users.len(), 7);
        for u in &c.truth.switches[0].users {
            assert_eq!(c.truth.home_party[&2020][u], label("P1"));
            assert_eq!(c.truth.home_party[&2021][u], label("P3"));
        }
    }

    #[test]
    fn infeasible_and_invalid_configs() {
        let cfg = SynthConfig::two_bloc(10, 2, 0.05, 0);
        assert!(matches!(generate(&cfg), Err(SynthError::Infeasible(_))));
        let cfg = SynthConfig::two_bloc(10, 5, 0.7, 0);
        assert!(matches!(generate(&cfg), Err(SynthError::InvalidConfig(_))));
        let mut cfg = SynthConfig::two_bloc(10, 5, 0.1, 0);
        cfg.years[0].switches.push(SwitchSpec {
            from: label("P2"),
            to: label("P1"),
            count: 6,
        });
        assert!(matches!(generate(&cfg), Err(SynthError::Infeasible(_))));
        let mut cfg = SynthConfig::two_bloc(10, 5, 0.1, 0);
        cfg.blocs.pop();
        assert!(matches!(generate(&cfg), Err(SynthError::InvalidConfig(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SynthConfig::two_bloc(10, 5, 0.1, 0);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SynthConfig::from_json(&text).unwrap(), cfg);
        let minimal = r#"{"parties":[{"label":"A","influencers":3,"users":5}],
            "blocs":[["A"]],"epsilon":0,"retweets_per_user":4,"years":[{"year":2019}],"seed":1}"#;
        let cfg = SynthConfig::from_json(minimal).unwrap();
        assert_eq!(cfg.min_distinct, 3);
        assert!(cfg.guarantee_home_majority);
    }
}
