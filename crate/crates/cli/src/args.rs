use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "polarlens", version, about = "Polarization analysis over retweet logs")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate records and catalogs and export yearly interaction matrices.
    Ingest(CorpusArgs),
    /// Build influencer graphs, prune them and tabulate link shares.
    Simnet(SimnetArgs),
    /// Score users and influencers by correspondence analysis.
    Ideology(CorpusArgs),
    /// Dip test on a scores file.
    Dip(DipArgs),
    /// Dominant-party affiliations, year-over-year flows and growth rates.
    Flows(CorpusArgs),
    /// Generate a planted-bloc corpus.
    Synth(SynthArgs),
    /// Every stage over a multi-year corpus.
    Pipeline(CorpusArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Simnet(_) => "simnet",
            Command::Ideology(_) => "ideology",
            Command::Dip(_) => "dip",
            Command::Flows(_) => "flows",
            Command::Synth(_) => "synth",
            Command::Pipeline(_) => "pipeline",
        }
    }
}

/// `FILE` for every year, or `YEAR=FILE`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogArg {
    pub year: Option<i32>,
    pub path: PathBuf,
}

impl FromStr for CatalogArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((year, path)) = s.split_once('=') {
            if let Ok(year) = year.parse::<i32>() {
                if path.is_empty() {
                    return Err(format!("missing file in {s:?}"));
                }
                return Ok(Self {
                    year: Some(year),
                    path: path.into(),
                });
            }
        }
        Ok(Self {
            year: None,
            path: s.into(),
        })
    }
}

/// Inclusive year range `A..B`, or a single year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl YearRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

impl FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| format!("invalid year {t:?} in {s:?}"))
        };
        let (first, last) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let y = parse(s)?;
                (y, y)
            }
        };
        if first > last {
            return Err(format!("empty year range {s:?}"));
        }
        Ok(Self { first, last })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// Retweet records (JSON Lines).
    #[arg(long, num_args = 1.., required = true)]
    pub records: Vec<PathBuf>,
    /// Influencer catalog, `FILE` or `YEAR=FILE`; repeatable.
    #[arg(long = "catalog", required = true)]
    pub catalogs: Vec<CatalogArg>,
    /// Years to analyze, `A..B` inclusive.
    #[arg(long)]
    pub years: Option<YearRange>,
    /// Users retweeting fewer distinct influencers are dropped.
    #[arg(long, default_value_t = 3)]
    pub min_distinct: usize,
    /// Party whose mean influencer score is oriented to be non-positive.
    #[arg(long)]
    pub anchor: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo replicates for dip p-values.
    #[arg(long, default_value_t = 10_000)]
    pub n_boot: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Does not affect outputs.
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphModeArg {
    Similarity,
    Direct,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimnetArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_enum, default_value_t = GraphModeArg::Similarity)]
    pub mode: GraphModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    User,
    Influencer,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::User => "user",
            ScoreKind::Influencer => "influencer",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DipArgs {
    /// Scores CSV (`id,kind,party,score,year`).
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value_t = ScoreKind::Influencer)]
    pub kind: ScoreKind,
    /// Restrict to one party.
    #[arg(long)]
    pub party: Option<String>,
    /// Restrict to one year (required when the file holds several).
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n_boot: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// JSON generator config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_arg_forms() {
        assert_eq!(
            "c.csv".parse::<CatalogArg>().unwrap(),
            CatalogArg {
                year: None,
                path: "c.csv".into()
            }
        );
        assert_eq!(
            "2021=dir/c.csv".parse::<CatalogArg>().unwrap(),
            CatalogArg {
                year: Some(2021),
                path: "dir/c.csv".into()
            }
        );
        assert_eq!("a=b.csv".parse::<CatalogArg>().unwrap().year, None);
        assert!("2021=".parse::<CatalogArg>().is_err());
    }

    #[test]
    fn year_range_forms() {
        assert_eq!(
            "2018..2022".parse::<YearRange>().unwrap(),
            YearRange {
                first: 2018,
                last: 2022
            }
        );
        assert_eq!("2020".parse::<YearRange>().unwrap().last, 2020);
        assert!("2022..2018".parse::<YearRange>().is_err());
        assert!("x..2018".parse::<YearRange>().is_err());
    }
}
