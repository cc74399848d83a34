//! On-disk layout.
//!
//! ```text
//! <commentary_root>/<match_id>/commentary_h1.json
//! <commentary_root>/<match_id>/commentary_h2.json
//! <labels_root>/<match_id>/Labels-v2.json
//! <output_dir>/<match_id>/results_spotting.json   (+ verdicts.jsonl, votes.jsonl)
//! ```
//!
//! A match id is the path of its directory relative to the root, joined
//! with `/`, so SoccerNet's `league/season/game` nesting carries over.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use echo_spotter::evaluation::load_labels_json;
use echo_spotter::{GroundTruthEvent, HalfCommentary, LabelTable, MatchCommentary};
use tracing::warn;
use walkdir::WalkDir;

use crate::exit::{Classify, CliResult, Failure};

pub const LABELS_FILE: &str = "Labels-v2.json";
pub const PREDICTIONS_FILE: &str = "results_spotting.json";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const VOTES_FILE: &str = "votes.jsonl";

pub fn commentary_file(half: u8) -> String {
    format!("commentary_h{half}.json")
}

fn match_id_of(root: &Path, dir: &Path) -> String {
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    let parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if parts.is_empty() {
        root.file_name()
            .map_or_else(|| ".".to_string(), |n| n.to_string_lossy().into_owned())
    } else {
        parts.join("/")
    }
}

/// Files named `name` under `root`, keyed by match id.
pub fn find_named(root: &Path, name: &str) -> CliResult<BTreeMap<String, PathBuf>> {
    if !root.is_dir() {
        return Err(Failure::input(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut out = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry
            .with_context(|| format!("walking {}", root.display()))
            .bad_input()?;
        if entry.file_type().is_file() && entry.file_name() == name {
            let dir = entry.path().parent().unwrap_or(root);
            out.insert(match_id_of(root, dir), entry.path().to_path_buf());
        }
    }
    Ok(out)
}

/// Match id to half-number to file, for every `commentary_h{1,2}.json`.
pub fn discover_commentary(root: &Path) -> CliResult<BTreeMap<String, BTreeMap<u8, PathBuf>>> {
    let mut out: BTreeMap<String, BTreeMap<u8, PathBuf>> = BTreeMap::new();
    for half in [1u8, 2] {
        for (id, path) in find_named(root, &commentary_file(half))? {
            out.entry(id).or_default().insert(half, path);
        }
    }
    Ok(out)
}

/// Echoes transcripts under `root` whose file name matches `pattern` with
/// `{half}` replaced by 1 or 2.
pub fn discover_echoes(
    root: &Path,
    pattern: &str,
) -> CliResult<BTreeMap<String, BTreeMap<u8, PathBuf>>> {
    let mut out: BTreeMap<String, BTreeMap<u8, PathBuf>> = BTreeMap::new();
    for half in [1u8, 2] {
        let name = pattern.replace("{half}", &half.to_string());
        for (id, path) in find_named(root, &name)? {
            out.entry(id).or_default().insert(half, path);
        }
    }
    Ok(out)
}

/// Match selection by explicit ids and/or a glob over match ids.
#[derive(Debug, Clone, Default)]
pub struct Selector {
    pub ids: Vec<String>,
    pub pattern: Option<glob::Pattern>,
}

impl Selector {
    pub fn new(ids: Vec<String>, pattern: Option<&str>) -> CliResult<Self> {
        let pattern = pattern
            .map(glob::Pattern::new)
            .transpose()
            .context("bad --select pattern")
            .bad_input()?;
        Ok(Self { ids, pattern })
    }

    pub fn accepts(&self, id: &str) -> bool {
        (self.ids.is_empty() || self.ids.iter().any(|x| x == id))
            && self.pattern.as_ref().is_none_or(|p| p.matches(id))
    }

    /// Filter `available`; explicitly requested ids must exist.
    pub fn apply<V>(&self, mut available: BTreeMap<String, V>) -> CliResult<BTreeMap<String, V>> {
        if !self.ids.is_empty() {
            let missing: Vec<&String> = self
                .ids
                .iter()
                .filter(|id| !available.contains_key(*id))
                .collect();
            if !missing.is_empty() {
                return Err(Failure::input(format!("unknown match ids: {missing:?}")));
            }
        }
        available.retain(|id, _| self.accepts(id));
        Ok(available)
    }
}

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .bad_input()
}

pub fn load_match(match_id: &str, halves: &BTreeMap<u8, PathBuf>) -> CliResult<MatchCommentary> {
    let mut m = MatchCommentary::new(match_id);
    for path in halves.values() {
        let mut h = HalfCommentary::from_canonical_json(&read(path)?)
            .with_context(|| format!("{}", path.display()))
            .bad_input()?;
        h.match_id = match_id.to_string();
        m.insert(h)
            .with_context(|| format!("{}", path.display()))
            .bad_input()?;
    }
    Ok(m)
}

pub fn load_labels(
    match_id: &str,
    path: &Path,
    table: &LabelTable,
) -> CliResult<Vec<GroundTruthEvent>> {
    let (events, warnings) = load_labels_json(&read(path)?, match_id, table)
        .with_context(|| format!("{}", path.display()))
        .bad_input()?;
    for w in warnings {
        warn!(match_id, file = %path.display(), "{w}");
    }
    Ok(events)
}

/// Write to a temporary sibling, then rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn jsonl<T: serde::Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("record serializes"));
        out.push('\n');
    }
    out
}
