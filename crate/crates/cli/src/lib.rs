//! Command-line driver: argument handling, per-year orchestration and output
//! trees with run manifests.

pub mod args;
pub mod error;
pub mod inputs;
pub mod output;
pub mod stages;

use std::ffi::OsString;
use std::time::Instant;

use clap::Parser;
use log::{info, LevelFilter};
use polarlens_core::dipstat::dip_test;
use polarlens_core::synth::{generate, preset, SynthConfig, SynthCorpus, PRESETS};

use crate::args::{Cli, Command, CorpusArgs, DipArgs, GraphModeArg, SynthArgs};
use crate::error::{CliError, Result, EXIT_OK, EXIT_USAGE};
use crate::inputs::{load_corpus, read_with_digest};
use crate::output::{OutputTree, RunManifest};
use crate::stages::{dip_seed, run_stages, Stages, SCORES_HEADER};

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();

    let started = Instant::now();
    let name = cli.command.name();
    match execute(cli.command) {
        Ok(()) => {
            info!("{name} finished in {:.2} s", started.elapsed().as_secs_f64());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("polarlens {name}: error: {e}");
            e.exit_code()
        }
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs:?} worker threads: {e}")))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => corpus_command("ingest", &a, Stages {
            matrix: true,
            ..Stages::default()
        }),
        Command::Simnet(a) => {
            let stages = match a.mode {
                GraphModeArg::Similarity => Stages {
                    similarity: true,
                    ..Stages::default()
                },
                GraphModeArg::Direct => Stages {
                    direct: true,
                    ..Stages::default()
                },
            };
            corpus_command_with("simnet", &a.corpus, stages, &a)
        }
        Command::Ideology(a) => corpus_command("ideology", &a, Stages {
            ideology: true,
            ..Stages::default()
        }),
        Command::Flows(a) => corpus_command("flows", &a, Stages {
            flows: true,
            ..Stages::default()
        }),
        Command::Pipeline(a) => corpus_command("pipeline", &a, Stages {
            matrix: true,
            similarity: true,
            direct: true,
            ideology: true,
            dip: true,
            flows: true,
        }),
        Command::Dip(a) => dip_command(&a),
        Command::Synth(a) => synth_command(&a),
    }
}

fn corpus_command(name: &'static str, args: &CorpusArgs, stages: Stages) -> Result<()> {
    corpus_command_with(name, args, stages, args)
}

fn corpus_command_with<C: serde::Serialize>(
    name: &'static str,
    args: &CorpusArgs,
    stages: Stages,
    config: &C,
) -> Result<()> {
    if stages.dip && args.n_boot < polarlens_core::dipstat::MIN_BOOTSTRAP {
        return Err(CliError::Usage(format!(
            "--n-boot must be at least {}",
            polarlens_core::dipstat::MIN_BOOTSTRAP
        )));
    }
    let pool = pool(args.jobs)?;
    let corpus = load_corpus(args)?;
    let anchor = if stages.ideology {
        Some(corpus.resolve_anchor(args.anchor.as_deref())?)
    } else {
        None
    };
    let tree = pool.install(|| run_stages(args, &corpus, stages, anchor.as_ref()))?;

    let mut config = serde_json::to_value(config).expect("serializable args");
    if let (Some(a), Some(obj)) = (&anchor, config.as_object_mut()) {
        obj.insert("anchor".into(), serde_json::Value::String(a.to_string()));
    }
    let mut inputs = corpus.digests.clone();
    inputs.sort();
    let mut manifest = RunManifest::new(name, &config, inputs);
    manifest.seeds.insert("seed".into(), args.seed);
    if stages.dip {
        for &year in &corpus.years {
            for kind in [args::ScoreKind::Influencer, args::ScoreKind::User] {
                manifest
                    .seeds
                    .insert(format!("dip/{year}/{}", kind.as_str()), dip_seed(args.seed, year, kind));
            }
        }
    }
    tree.write(&args.out, manifest)
}

fn dip_command(args: &DipArgs) -> Result<()> {
    let pool = pool(args.jobs)?;
    let (bytes, digest) = read_with_digest(&args.scores)?;
    let path = args.scores.display().to_string();
    let text = String::from_utf8(bytes).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SCORES_HEADER => {}
        other => {
            return Err(CliError::Data(format!(
                "{path}: header must be `{SCORES_HEADER}`, found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut years = std::collections::BTreeSet::new();
    let mut values: Vec<(i32, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::Data(format!(
                "{path}: line {line_no}: expected 5 fields, found {}",
                fields.len()
            )));
        }
        let score: f64 = fields[3]
            .parse()
            .map_err(|_| CliError::Data(format!("{path}: line {line_no}: invalid score {:?}", fields[3])))?;
        let year: i32 = fields[4]
            .parse()
            .map_err(|_| CliError::Data(format!("{path}: line {line_no}: invalid year {:?}", fields[4])))?;
        if fields[1] != args.kind.as_str() {
            continue;
        }
        if args.party.as_deref().is_some_and(|p| p != fields[2]) {
            continue;
        }
        years.insert(year);
        values.push((year, score));
    }
    let year = match (args.year, years.len()) {
        (Some(y), _) => Some(y),
        (None, n) if n > 1 => {
            return Err(CliError::Usage(format!(
                "{path} holds {n} years of scores; pick one with --year"
            )))
        }
        (None, _) => years.first().copied(),
    };
    let sample: Vec<f64> = values
        .iter()
        .filter(|(y, _)| Some(*y) == year)
        .map(|p| p.1)
        .collect();
    let result = pool
        .install(|| dip_test(&sample, args.n_boot, args.seed))
        .map_err(|e| CliError::dip(&path, e))?;
    println!("{}", serde_json::to_string(&result).expect("serializable"));

    let mut tree = OutputTree::default();
    tree.add_json("dip.json", &result);
    let mut manifest = RunManifest::new("dip", args, vec![digest]);
    manifest.seeds.insert("seed".into(), args.seed);
    tree.write(&args.out, manifest)
}

fn synth_command(args: &SynthArgs) -> Result<()> {
    let pool = pool(args.jobs)?;
    let mut inputs = Vec::new();
    let mut cfg: SynthConfig = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let (bytes, digest) = read_with_digest(path)?;
            inputs.push(digest);
            let text = String::from_utf8(bytes)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            SynthConfig::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => preset(name, args.seed.unwrap_or(0)).ok_or_else(|| {
            CliError::Usage(format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")))
        })?,
        (None, None) => return Err(CliError::Usage("give --config or --preset".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let corpus = pool
        .install(|| generate(&cfg))
        .map_err(|e| CliError::Data(e.to_string()))?;

    let mut tree = OutputTree::default();
    tree.add_with(SynthCorpus::records_file_name(), |out| {
        polarlens_core::ingest::write_records(&corpus.records, out)
    });
    for (year, cat) in &corpus.catalogs {
        tree.add_with(SynthCorpus::catalog_file_name(*year), |out| {
            polarlens_core::ingest::write_catalog(cat, out)
        });
    }
    tree.add_json("truth.json", &corpus.truth);
    #[derive(serde::Serialize)]
    struct Resolved<'a> {
        args: &'a SynthArgs,
        generator: &'a SynthConfig,
    }
    let mut manifest = RunManifest::new(
        "synth",
        &Resolved {
            args,
            generator: &cfg,
        },
        inputs,
    );
    manifest.seeds.insert("seed".into(), cfg.seed);
    tree.write(&args.out, manifest)
}
