mod commands;
mod config;
mod exit;
mod layout;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use commands::{Globals, IngestSource};
use config::RunConfig;
use exit::{Classify, CliResult, Failure};
use layout::Selector;

/// Soccer action spotting from timestamped commentary.
///
/// Exit codes: 0 success, 1 internal error, 2 bad input, 3 config error.
#[derive(Parser)]
#[command(name = "echo-spotter", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Baseline seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replay judges from a fixture instead of calling an endpoint.
    #[arg(long, global = true, value_name = "FIXTURE")]
    scripted: Option<PathBuf>,
    /// Treat inverted commentary spans as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Add a per-match breakdown to evaluation reports.
    #[arg(long, global = true)]
    per_match: bool,
    /// Concurrency limit; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Selection {
    /// Comma-separated match ids.
    #[arg(long, value_delimiter = ',')]
    matches: Vec<String>,
    /// File with one match id per line.
    #[arg(long, value_name = "FILE")]
    matches_file: Option<PathBuf>,
    /// Glob over match ids, e.g. "england_epl/2016-2017/*".
    #[arg(long, value_name = "GLOB")]
    select: Option<String>,
}

impl Selection {
    fn selector(&self) -> CliResult<Selector> {
        let mut ids = self.matches.clone();
        if let Some(path) = &self.matches_file {
            let text = String::from_utf8(layout::read(path)?)
                .with_context(|| format!("{}", path.display()))
                .bad_input()?;
            ids.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from),
            );
        }
        Selector::new(ids, self.select.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert Echoes transcripts to canonical commentary files.
    Ingest {
        /// Match id for --half1/--half2.
        #[arg(long, conflicts_with = "root")]
        match_id: Option<String>,
        #[arg(long, conflicts_with = "root")]
        half1: Option<PathBuf>,
        #[arg(long, conflicts_with = "root")]
        half2: Option<PathBuf>,
        /// Walk a transcript tree instead; match ids come from directories.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Transcript file name under --root; `{half}` becomes 1 or 2.
        #[arg(long, default_value = "{half}_asr.json")]
        pattern: String,
        /// Commentary root to write; defaults to paths.commentary_root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run windows, judges, vote and merge; write predictions and audit logs.
    Spot {
        #[arg(long)]
        commentary: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        selection: Selection,
    },
    /// Commentary-anchored random baseline.
    Baseline {
        #[arg(long)]
        priors: PathBuf,
        #[arg(long)]
        commentary: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        selection: Selection,
    },
    /// Estimate per-class priors from a training split.
    Priors {
        #[arg(long)]
        commentary: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        split_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        selection: Selection,
    },
    /// Score predictions against Labels-v2 annotations.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-(tolerance, class) CSV of the pooled report.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Restricts both labels and predictions.
        #[command(flatten)]
        selection: Selection,
    },
    /// Five hand-written windows through the configured endpoint.
    Smoke,
}

fn run(cli: Cli) -> CliResult {
    let config = RunConfig::load(cli.config.as_deref())?;
    let jobs = cli.jobs.unwrap_or(config.jobs);
    if jobs == 0 {
        return Err(Failure::config("--jobs must be at least 1"));
    }
    let g = Globals {
        seed: cli.seed.unwrap_or(config.seed),
        scripted: cli.scripted,
        strict: cli.strict,
        per_match: cli.per_match,
        jobs,
        config,
    };
    match cli.command {
        Command::Ingest {
            match_id,
            half1,
            half2,
            root,
            pattern,
            out,
        } => {
            let source = match (root, match_id) {
                (Some(root), _) => IngestSource::Root { root, pattern },
                (None, Some(match_id)) => {
                    let halves: BTreeMap<u8, PathBuf> = [(1, half1), (2, half2)]
                        .into_iter()
                        .filter_map(|(h, p)| p.map(|p| (h, p)))
                        .collect();
                    if halves.is_empty() {
                        return Err(Failure::input("--match-id needs --half1 and/or --half2"));
                    }
                    IngestSource::Files { match_id, halves }
                }
                (None, None) => {
                    return Err(Failure::input(
                        "give --root or --match-id with --half1/--half2",
                    ))
                }
            };
            commands::ingest(&g, source, out)
        }
        Command::Spot {
            commentary,
            out,
            selection,
        } => commands::spot(&g, commentary, out, &selection.selector()?),
        Command::Baseline {
            priors,
            commentary,
            out,
            selection,
        } => commands::baseline(&g, &priors, commentary, out, &selection.selector()?),
        Command::Priors {
            commentary,
            labels,
            split_id,
            out,
            selection,
        } => commands::priors(
            &g,
            commentary,
            labels,
            split_id,
            &out,
            &selection.selector()?,
        ),
        Command::Eval {
            predictions,
            labels,
            out,
            csv,
            selection,
        } => commands::eval(&g, &predictions, labels, out, csv, &selection.selector()?),
        Command::Smoke => commands::smoke(&g),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code())
        }
    }
}
