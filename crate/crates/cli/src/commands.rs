use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use echo_spotter::baseline::{estimate_priors, random_baseline, ClassPriors};
use echo_spotter::commentary::{parse_echoes_json_with, validate_half, MatchCommentary};
use echo_spotter::evaluation::{evaluate, EvalReport};
use echo_spotter::judging::{
    run_smoke, CompletionClient, HttpClient, JudgePanel, ParseStatus, ScriptFixture,
    ScriptedClient, VerdictLogRecord,
};
use echo_spotter::{spot_half, Detection, GroundTruthEvent, LabelTable, PredictionsFile};
use rayon::prelude::*;
use serde::Serialize;
use tracing::{info, warn};

use crate::config::RunConfig;
use crate::exit::{Classify, CliResult, Failure};
use crate::layout::{self, Selector};

/// Options shared by every subcommand.
pub struct Globals {
    pub config: RunConfig,
    pub seed: u64,
    pub scripted: Option<PathBuf>,
    pub strict: bool,
    pub per_match: bool,
    pub jobs: usize,
}

fn required(
    flag: Option<PathBuf>,
    from_config: &Option<PathBuf>,
    what: &str,
) -> CliResult<PathBuf> {
    flag.or_else(|| from_config.clone()).ok_or_else(|| {
        Failure::config(format!(
            "no {what} given on the command line or in the config"
        ))
    })
}

pub enum IngestSource {
    Files {
        match_id: String,
        halves: BTreeMap<u8, PathBuf>,
    },
    Root {
        root: PathBuf,
        pattern: String,
    },
}

pub fn ingest(g: &Globals, source: IngestSource, out: Option<PathBuf>) -> CliResult {
    let out = required(out, &g.config.paths.commentary_root, "output directory")?;
    let matches = match source {
        IngestSource::Files { match_id, halves } => BTreeMap::from([(match_id, halves)]),
        IngestSource::Root { root, pattern } => layout::discover_echoes(&root, &pattern)?,
    };
    if matches.is_empty() {
        return Err(Failure::input("no commentary files found"));
    }
    let mut total_warnings = 0;
    for (match_id, halves) in &matches {
        for (&half, path) in halves {
            let (h, mut warnings) =
                parse_echoes_json_with(&layout::read(path)?, match_id, half, g.strict)
                    .with_context(|| format!("{}", path.display()))
                    .bad_input()?;
            warnings.extend(validate_half(&h));
            for w in &warnings {
                warn!(match_id, half, file = %path.display(), "{w}");
            }
            total_warnings += warnings.len();
            let target = out.join(match_id).join(layout::commentary_file(half));
            layout::write_atomic(&target, h.to_canonical_json().as_bytes())?;
            info!(
                match_id,
                half,
                sentences = h.sentences.len(),
                warnings = warnings.len(),
                "ingested"
            );
        }
    }
    eprintln!(
        "ingested {} match(es) into {}, {total_warnings} warning(s)",
        matches.len(),
        out.display()
    );
    Ok(())
}

fn selected_matches(
    g: &Globals,
    commentary: Option<PathBuf>,
    selector: &Selector,
) -> CliResult<BTreeMap<String, MatchCommentary>> {
    let root = required(
        commentary,
        &g.config.paths.commentary_root,
        "commentary root",
    )?;
    let found = selector.apply(layout::discover_commentary(&root)?)?;
    found
        .iter()
        .map(|(id, halves)| Ok((id.clone(), layout::load_match(id, halves)?)))
        .collect()
}

fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker pool")
        .map_err(Failure::from)
}

#[derive(Default)]
struct SpotTally {
    windows: usize,
    detections: usize,
    abstained: usize,
    transport_failed: usize,
}

fn spot_match(
    m: &MatchCommentary,
    g: &Globals,
    panel: &JudgePanel,
    client: &dyn CompletionClient,
    jobs: usize,
    out: &Path,
) -> CliResult<SpotTally> {
    let cfg = g.config.spot_config(jobs);
    let mut detections: Vec<Detection> = Vec::new();
    let mut verdict_log = String::new();
    let mut vote_log = String::new();
    let mut tally = SpotTally::default();
    for h in m.halves.values() {
        let result = spot_half(h, &cfg, panel, client)
            .with_context(|| format!("match {} half {}", m.match_id, h.half))?;
        for (w, vote) in result.windows.iter().zip(&result.votes) {
            for v in &vote.verdicts {
                tally.abstained += usize::from(v.parse_status == ParseStatus::Abstained);
                tally.transport_failed += usize::from(v.transport_failed);
            }
            verdict_log.push_str(&layout::jsonl(
                vote.verdicts.iter().map(|v| VerdictLogRecord::new(w, v)),
            ));
        }
        vote_log.push_str(&layout::jsonl(&result.votes));
        tally.windows += result.windows.len();
        detections.extend(result.detections);
    }
    tally.detections = detections.len();
    let dir = out.join(&m.match_id);
    let file = PredictionsFile::from_detections(&m.match_id, &detections, panel.labels(), None);
    layout::write_atomic(
        &dir.join(layout::PREDICTIONS_FILE),
        file.to_json().as_bytes(),
    )?;
    layout::write_atomic(&dir.join(layout::VERDICTS_FILE), verdict_log.as_bytes())?;
    layout::write_atomic(&dir.join(layout::VOTES_FILE), vote_log.as_bytes())?;
    if tally.abstained > 0 {
        warn!(
            match_id = %m.match_id,
            abstained = tally.abstained,
            transport_failed = tally.transport_failed,
            "judge calls abstained"
        );
    }
    info!(match_id = %m.match_id, windows = tally.windows, detections = tally.detections, "spotted");
    Ok(tally)
}

fn client(g: &Globals) -> CliResult<Box<dyn CompletionClient>> {
    match &g.scripted {
        Some(path) => {
            let fixture = ScriptFixture::from_json(&layout::read(path)?)
                .with_context(|| format!("scripted fixture {}", path.display()))
                .bad_input()?;
            Ok(Box::new(ScriptedClient::new(fixture)))
        }
        None => Ok(Box::new(HttpClient::new(g.config.http_config()))),
    }
}

pub fn spot(
    g: &Globals,
    commentary: Option<PathBuf>,
    out: Option<PathBuf>,
    selector: &Selector,
) -> CliResult {
    let out = required(out, &g.config.paths.output_dir, "output directory")?;
    let matches = selected_matches(g, commentary, selector)?;
    if matches.is_empty() {
        return Err(Failure::input("no matches selected"));
    }
    let panel = g.config.panel()?;
    let client = client(g)?;
    // One match at a time gets all workers for its windows; several
    // matches share the workers one match each.
    let per_match_jobs = if matches.len() == 1 { g.jobs } else { 1 };
    let pool = thread_pool(g.jobs)?;
    let results: Vec<CliResult<SpotTally>> = pool.install(|| {
        matches
            .par_iter()
            .map(|(_, m)| spot_match(m, g, &panel, client.as_ref(), per_match_jobs, &out))
            .collect()
    });
    let mut total = SpotTally::default();
    for r in results {
        let t = r?;
        total.windows += t.windows;
        total.detections += t.detections;
        total.abstained += t.abstained;
        total.transport_failed += t.transport_failed;
    }
    eprintln!(
        "spotted {} match(es): {} windows, {} detections, {} abstained judge calls ({} transport failures)",
        matches.len(),
        total.windows,
        total.detections,
        total.abstained,
        total.transport_failed
    );
    Ok(())
}

pub fn baseline(
    g: &Globals,
    priors: &Path,
    commentary: Option<PathBuf>,
    out: Option<PathBuf>,
    selector: &Selector,
) -> CliResult {
    let out = required(out, &g.config.paths.output_dir, "output directory")?;
    let priors = ClassPriors::from_json(&layout::read(priors)?)
        .with_context(|| format!("priors {}", priors.display()))
        .bad_input()?;
    let matches = selected_matches(g, commentary, selector)?;
    if matches.is_empty() {
        return Err(Failure::input("no matches selected"));
    }
    let labels = g.config.label_table()?;
    let policy = g.config.merge.policy();
    let mut total = 0;
    for (id, m) in &matches {
        let mut dets = Vec::new();
        for h in m.halves.values() {
            dets.extend(random_baseline(h, &priors, g.seed, &policy).context("baseline")?);
        }
        total += dets.len();
        let file = PredictionsFile::from_detections(id, &dets, &labels, Some(g.seed));
        layout::write_atomic(
            &out.join(id).join(layout::PREDICTIONS_FILE),
            file.to_json().as_bytes(),
        )?;
    }
    eprintln!(
        "baseline (seed {}): {} match(es), {total} detections",
        g.seed,
        matches.len()
    );
    Ok(())
}

pub fn priors(
    g: &Globals,
    commentary: Option<PathBuf>,
    labels_root: Option<PathBuf>,
    split_id: Option<String>,
    out: &Path,
    selector: &Selector,
) -> CliResult {
    let labels_root = required(labels_root, &g.config.paths.labels_root, "labels root")?;
    let table = g.config.label_table()?;
    let matches = selected_matches(g, commentary, selector)?;
    let label_files = layout::find_named(&labels_root, layout::LABELS_FILE)?;
    let missing: Vec<&String> = matches
        .keys()
        .filter(|id| !label_files.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        return Err(Failure::input(format!(
            "no {} for matches {missing:?}",
            layout::LABELS_FILE
        )));
    }
    let mut train = Vec::with_capacity(matches.len());
    for (id, m) in matches {
        let events = layout::load_labels(&id, &label_files[&id], &table)?;
        train.push((m, events));
    }
    let mut priors = estimate_priors(&train).bad_input()?;
    priors.split_id = split_id;
    layout::write_atomic(out, priors.to_json().as_bytes())?;
    eprintln!(
        "priors from {} match(es), {} sentences -> {}",
        train.len(),
        priors.sentence_count,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PerMatchReport<'a> {
    pooled: &'a EvalReport,
    per_match: BTreeMap<&'a str, EvalReport>,
}

fn load_predictions(
    root: &Path,
    table: &LabelTable,
) -> CliResult<BTreeMap<String, Vec<Detection>>> {
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for (_, path) in layout::find_named(root, layout::PREDICTIONS_FILE)? {
        let file = PredictionsFile::from_json(&layout::read(&path)?)
            .and_then(|f| Ok((f.to_detections(table)?, f.match_id)))
            .with_context(|| format!("{}", path.display()))
            .bad_input()?;
        let (dets, match_id) = file;
        if out.insert(match_id.clone(), dets).is_some() {
            return Err(Failure::input(format!(
                "match {match_id:?} has more than one predictions file"
            )));
        }
    }
    Ok(out)
}

pub fn eval(
    g: &Globals,
    predictions: &Path,
    labels_root: Option<PathBuf>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    selector: &Selector,
) -> CliResult {
    let labels_root = required(labels_root, &g.config.paths.labels_root, "labels root")?;
    let table = g.config.label_table()?;
    let mut preds = load_predictions(predictions, &table)?;
    preds.retain(|id, _| selector.accepts(id));
    let label_files = selector.apply(layout::find_named(&labels_root, layout::LABELS_FILE)?)?;
    let missing: Vec<&String> = preds
        .keys()
        .filter(|id| !label_files.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        return Err(Failure::input(format!(
            "no labels for predicted matches {missing:?}"
        )));
    }
    let mut gts: BTreeMap<&str, Vec<GroundTruthEvent>> = BTreeMap::new();
    for (id, path) in &label_files {
        gts.insert(id, layout::load_labels(id, path, &table)?);
    }
    let all_dets: Vec<Detection> = preds.values().flatten().cloned().collect();
    let all_gts: Vec<GroundTruthEvent> = gts.values().flatten().cloned().collect();
    let grid = &g.config.tolerances;
    let pooled = evaluate(&all_dets, &all_gts, grid).bad_input()?;

    let json = if g.per_match {
        let mut per_match = BTreeMap::new();
        for (id, events) in &gts {
            if events.is_empty() {
                warn!(
                    match_id = id,
                    "no ground truth, left out of the per-match breakdown"
                );
                continue;
            }
            let dets = preds.get(*id).map_or(&[][..], Vec::as_slice);
            per_match.insert(*id, evaluate(dets, events, grid).bad_input()?);
        }
        let mut s = serde_json::to_string_pretty(&PerMatchReport {
            pooled: &pooled,
            per_match,
        })
        .context("serializing report")?;
        s.push('\n');
        s
    } else {
        pooled.to_json()
    };
    match out {
        Some(path) => layout::write_atomic(&path, json.as_bytes())?,
        None => print!("{json}"),
    }
    if let Some(path) = csv {
        layout::write_atomic(&path, pooled.to_csv().as_bytes())?;
    }
    eprintln!(
        "{} match(es) with labels, {} with predictions: average-mAP {} %, tight average-mAP {} %",
        gts.len(),
        preds.len(),
        pooled.average_map_loose_pct,
        pooled.average_map_tight_pct
    );
    Ok(())
}

pub fn smoke(g: &Globals) -> CliResult {
    let panel = g.config.panel()?;
    let client = client(g)?;
    let tally = run_smoke(client.as_ref(), &panel, &g.config.judge.retry);
    for (kind, parsed) in tally {
        println!("{kind}: {parsed}/5 parsed verdicts");
    }
    if tally.iter().any(|&(_, n)| n == 0) {
        return Err(Failure::from(anyhow::anyhow!(
            "at least one judge produced no parsed verdict"
        )));
    }
    Ok(())
}
