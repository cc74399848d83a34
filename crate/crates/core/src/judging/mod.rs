//! Three specialized judges over commentary windows.
//!
//! Each judge gets its own system prompt and few-shot exemplars, is called
//! once per window through a [`CompletionClient`], and answers with a
//! two-line `YES`/`NO` + class reply that [`parse_verdict`] turns into a
//! [`JudgeVerdict`]. Malformed replies and exhausted transport retries
//! become abstentions, which vote as NO.

mod client;
mod scripted;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::taxonomy::{LabelTable, VerdictClass};
use crate::windowing::CommentaryWindow;

pub use client::{
    ChatMessage, CompletionClient, CompletionReply, CompletionRequest, FinishStatus, FnClient,
    HttpClient, HttpClientConfig, RequestContext, RetryPolicy, TransportError, TransportErrorKind,
    ENV_LLM_KEY, ENV_LLM_URL,
};
pub use scripted::{ScriptEntry, ScriptFixture, ScriptedClient};

/// Reply budget for the two-line grammar.
pub const DEFAULT_MAX_TOKENS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeKind {
    Outcome,
    Excitement,
    Tactical,
}

impl JudgeKind {
    pub const ALL: [JudgeKind; 3] = [
        JudgeKind::Outcome,
        JudgeKind::Excitement,
        JudgeKind::Tactical,
    ];

    /// Class tie-break rank, lower wins: Outcome > Tactical > Excitement.
    pub fn priority(self) -> u8 {
        match self {
            JudgeKind::Outcome => 0,
            JudgeKind::Tactical => 1,
            JudgeKind::Excitement => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JudgeKind::Outcome => "outcome",
            JudgeKind::Excitement => "excitement",
            JudgeKind::Tactical => "tactical",
        }
    }

    fn slot(self) -> usize {
        match self {
            JudgeKind::Outcome => 0,
            JudgeKind::Excitement => 1,
            JudgeKind::Tactical => 2,
        }
    }
}

impl fmt::Display for JudgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("no prompt spec for the {0} judge")]
    MissingSpec(JudgeKind),
    #[error("duplicate prompt spec for the {0} judge")]
    DuplicateSpec(JudgeKind),
    #[error("{kind} judge needs 2 or 3 exemplars, found {found}")]
    ExemplarCount { kind: JudgeKind, found: usize },
    #[error("cannot read prompt file {path}: {reason}")]
    PromptFile { path: String, reason: String },
    #[error("invalid concurrency setup: {0}")]
    Concurrency(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exemplar {
    pub commentary: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgePromptSpec {
    pub kind: JudgeKind,
    #[serde(default)]
    pub version: u32,
    pub system_prompt: String,
    pub exemplars: Vec<Exemplar>,
    pub reply_format_instructions: String,
}

const DEFAULT_OUTCOME: &str = include_str!("../../prompts/outcome.json");
const DEFAULT_EXCITEMENT: &str = include_str!("../../prompts/excitement.json");
const DEFAULT_TACTICAL: &str = include_str!("../../prompts/tactical.json");

impl JudgePromptSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self, JudgeError> {
        let spec: Self = serde_json::from_slice(bytes).map_err(|e| JudgeError::PromptFile {
            path: "<inline>".into(),
            reason: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, JudgeError> {
        let bytes = std::fs::read(path).map_err(|e| JudgeError::PromptFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&bytes).map_err(|e| match e {
            JudgeError::PromptFile { reason, .. } => JudgeError::PromptFile {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    /// The shipped prompt for `kind`.
    pub fn default_for(kind: JudgeKind) -> Self {
        let raw = match kind {
            JudgeKind::Outcome => DEFAULT_OUTCOME,
            JudgeKind::Excitement => DEFAULT_EXCITEMENT,
            JudgeKind::Tactical => DEFAULT_TACTICAL,
        };
        Self::from_json(raw.as_bytes()).expect("shipped prompt files are valid")
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        let found = self.exemplars.len();
        if !(2..=3).contains(&found) {
            return Err(JudgeError::ExemplarCount {
                kind: self.kind,
                found,
            });
        }
        Ok(())
    }
}

fn user_turn(instructions: &str, commentary: &str) -> String {
    format!("{instructions}\n\nCommentary:\n{commentary}")
}

/// Deterministic prompt: system prompt, exemplars as alternating
/// user/assistant turns, then the window text behind the reply instructions.
pub fn build_prompt(spec: &JudgePromptSpec, w: &CommentaryWindow) -> CompletionRequest {
    let mut messages = Vec::with_capacity(2 + 2 * spec.exemplars.len());
    messages.push(ChatMessage::system(&spec.system_prompt));
    for ex in &spec.exemplars {
        messages.push(ChatMessage::user(user_turn(
            &spec.reply_format_instructions,
            &ex.commentary,
        )));
        messages.push(ChatMessage::assistant(&ex.reply));
    }
    messages.push(ChatMessage::user(user_turn(
        &spec.reply_format_instructions,
        &w.rendered_text,
    )));
    CompletionRequest {
        messages,
        temperature: 0.0,
        max_tokens: DEFAULT_MAX_TOKENS,
        context: RequestContext {
            judge: spec.kind,
            match_id: w.match_id.clone(),
            half: w.half,
            window_start_s: w.start_s,
            window_text: w.rendered_text.clone(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Clean,
    Repaired,
    Abstained,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeVerdict {
    pub kind: JudgeKind,
    pub present: bool,
    pub class: Option<VerdictClass>,
    pub raw_reply: String,
    pub parse_status: ParseStatus,
    pub transport_failed: bool,
}

impl JudgeVerdict {
    pub fn yes(kind: JudgeKind, class: impl Into<VerdictClass>) -> Self {
        let class = class.into();
        Self {
            kind,
            present: true,
            class: Some(class),
            raw_reply: format!("YES\n{class}"),
            parse_status: ParseStatus::Clean,
            transport_failed: false,
        }
    }

    pub fn no(kind: JudgeKind) -> Self {
        Self {
            kind,
            present: false,
            class: None,
            raw_reply: "NO".into(),
            parse_status: ParseStatus::Clean,
            transport_failed: false,
        }
    }

    pub fn abstain(kind: JudgeKind, raw_reply: impl Into<String>) -> Self {
        Self {
            kind,
            present: false,
            class: None,
            raw_reply: raw_reply.into(),
            parse_status: ParseStatus::Abstained,
            transport_failed: false,
        }
    }

    fn transport_failure(kind: JudgeKind) -> Self {
        Self {
            transport_failed: true,
            ..Self::abstain(kind, "")
        }
    }
}

/// Strip markdown emphasis, list markers and answer prefixes from a line.
fn clean_line(line: &str) -> String {
    let mut s: String = line
        .chars()
        .filter(|c| !matches!(c, '*' | '_' | '`' | '#' | '>' | '"'))
        .collect();
    loop {
        let t = s.trim_start();
        let lower = t.to_ascii_lowercase();
        let stripped = if let Some(rest) = t.strip_prefix(['-', '•']) {
            rest
        } else if let Some(pos) = [
            "answer:",
            "verdict:",
            "response:",
            "class:",
            "label:",
            "category:",
        ]
        .iter()
        .find(|p| lower.starts_with(*p))
        {
            &t[pos.len()..]
        } else {
            let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
            match t[digits..].chars().next() {
                Some('.') | Some(')') if digits > 0 => &t[digits + 1..],
                _ => break,
            }
        };
        s = stripped.to_string();
    }
    s.trim().to_string()
}

fn leading_word(s: &str) -> (String, &str) {
    let t = s.trim_start();
    let end = t
        .char_indices()
        .find(|(_, c)| !c.is_alphanumeric())
        .map_or(t.len(), |(i, _)| i);
    (t[..end].to_ascii_lowercase(), &t[end..])
}

/// Parse a reply with the built-in label table.
pub fn parse_verdict(kind: JudgeKind, reply: &CompletionReply) -> JudgeVerdict {
    parse_verdict_with(default_labels(), kind, reply)
}

fn default_labels() -> &'static LabelTable {
    crate::taxonomy::default_table()
}

/// Line-oriented parse. Exact two-line grammar is `Clean`; answers recovered
/// from surrounding prose or markup are `Repaired`; anything else abstains.
pub fn parse_verdict_with(
    labels: &LabelTable,
    kind: JudgeKind,
    reply: &CompletionReply,
) -> JudgeVerdict {
    let raw = reply.text.clone();
    let lines: Vec<&str> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();

    // Exact grammar.
    match lines.as_slice() {
        [only] if only.eq_ignore_ascii_case("no") => {
            return JudgeVerdict {
                raw_reply: raw,
                ..JudgeVerdict::no(kind)
            }
        }
        [first, second] if first.eq_ignore_ascii_case("yes") => {
            if let Ok(class) = labels.parse(second) {
                return JudgeVerdict {
                    raw_reply: raw,
                    ..JudgeVerdict::yes(kind, class)
                };
            }
        }
        _ => {}
    }

    // Lenient: the first line that opens with a yes/no token.
    let cleaned: Vec<String> = lines.iter().map(|l| clean_line(l)).collect();
    let Some((pos, answer, rest)) = cleaned.iter().enumerate().find_map(|(i, l)| {
        let (word, rest) = leading_word(l);
        match word.as_str() {
            "yes" | "no" => Some((i, word, rest)),
            _ => None,
        }
    }) else {
        return JudgeVerdict::abstain(kind, raw);
    };

    if answer == "no" {
        return JudgeVerdict {
            raw_reply: raw,
            parse_status: ParseStatus::Repaired,
            ..JudgeVerdict::no(kind)
        };
    }

    let from_next_line = cleaned[pos + 1..]
        .iter()
        .find(|l| !l.is_empty())
        .and_then(|l| labels.parse(l).ok());
    let class = from_next_line.or_else(|| {
        let rest = rest.trim_start_matches(|c: char| !c.is_alphanumeric());
        labels.parse(rest).ok()
    });
    match class {
        Some(class) => JudgeVerdict {
            raw_reply: raw,
            parse_status: ParseStatus::Repaired,
            ..JudgeVerdict::yes(kind, class)
        },
        None => JudgeVerdict::abstain(kind, raw),
    }
}

/// The three prompt specs plus the label codec used to read replies.
#[derive(Debug, Clone)]
pub struct JudgePanel {
    specs: [JudgePromptSpec; 3],
    labels: LabelTable,
}

impl JudgePanel {
    /// Requires exactly one spec per judge kind.
    pub fn new(specs: Vec<JudgePromptSpec>, labels: LabelTable) -> Result<Self, JudgeError> {
        let mut slots: [Option<JudgePromptSpec>; 3] = [None, None, None];
        for spec in specs {
            spec.validate()?;
            let slot = &mut slots[spec.kind.slot()];
            if slot.is_some() {
                return Err(JudgeError::DuplicateSpec(spec.kind));
            }
            *slot = Some(spec);
        }
        let [o, e, t] = slots;
        Ok(Self {
            specs: [
                o.ok_or(JudgeError::MissingSpec(JudgeKind::Outcome))?,
                e.ok_or(JudgeError::MissingSpec(JudgeKind::Excitement))?,
                t.ok_or(JudgeError::MissingSpec(JudgeKind::Tactical))?,
            ],
            labels,
        })
    }

    pub fn shipped() -> Self {
        Self::new(
            JudgeKind::ALL
                .iter()
                .map(|&k| JudgePromptSpec::default_for(k))
                .collect(),
            LabelTable::default(),
        )
        .expect("shipped prompts cover every judge")
    }

    pub fn spec(&self, kind: JudgeKind) -> &JudgePromptSpec {
        &self.specs[kind.slot()]
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }
}

/// One verdict per judge, indexed in [`JudgeKind::ALL`] order.
pub type VerdictTriple = [JudgeVerdict; 3];

/// Ask every judge about one window. Each judge gets an independent call;
/// transport failures past the retry budget abstain.
pub fn judge_window(
    client: &dyn CompletionClient,
    panel: &JudgePanel,
    w: &CommentaryWindow,
    retry: &RetryPolicy,
) -> VerdictTriple {
    JudgeKind::ALL.map(|kind| {
        let request = build_prompt(panel.spec(kind), w);
        match retry.run(|| client.complete(&request)) {
            Ok(reply) => {
                let verdict = parse_verdict_with(&panel.labels, kind, &reply);
                if verdict.parse_status == ParseStatus::Abstained {
                    warn!(
                        match_id = %w.match_id,
                        half = w.half,
                        window_start = w.start_s,
                        judge = %kind,
                        raw_reply = %verdict.raw_reply,
                        "unparseable judge reply"
                    );
                }
                verdict
            }
            Err(error) => {
                warn!(
                    match_id = %w.match_id,
                    half = w.half,
                    window_start = w.start_s,
                    judge = %kind,
                    %error,
                    "TransportFailed: judge abstains"
                );
                JudgeVerdict::transport_failure(kind)
            }
        }
    })
}

/// Judge many windows with at most `jobs` in flight. Results come back in
/// window order.
pub fn judge_windows(
    client: &dyn CompletionClient,
    panel: &JudgePanel,
    windows: &[CommentaryWindow],
    retry: &RetryPolicy,
    jobs: usize,
) -> Result<Vec<VerdictTriple>, JudgeError> {
    if jobs <= 1 {
        return Ok(windows
            .iter()
            .map(|w| judge_window(client, panel, w, retry))
            .collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| JudgeError::Concurrency(e.to_string()))?;
    Ok(pool.install(|| {
        windows
            .par_iter()
            .map(|w| judge_window(client, panel, w, retry))
            .collect()
    }))
}

/// Audit record for one (window, judge) call.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictLogRecord<'a> {
    pub match_id: &'a str,
    pub half: u8,
    pub window_start_s: f64,
    pub window_end_s: f64,
    pub judge: JudgeKind,
    pub present: bool,
    pub class: Option<VerdictClass>,
    pub parse_status: ParseStatus,
    pub transport_failed: bool,
    pub raw_reply: &'a str,
}

impl<'a> VerdictLogRecord<'a> {
    pub fn new(w: &'a CommentaryWindow, v: &'a JudgeVerdict) -> Self {
        Self {
            match_id: &w.match_id,
            half: w.half,
            window_start_s: w.start_s,
            window_end_s: w.end_s,
            judge: v.kind,
            present: v.present,
            class: v.class,
            parse_status: v.parse_status,
            transport_failed: v.transport_failed,
            raw_reply: &v.raw_reply,
        }
    }
}

/// Five hand-written windows for checking a live endpoint end to end.
pub fn smoke_windows() -> Vec<CommentaryWindow> {
    [
        "He shoots from the edge of the box and it's in the back of the net! What a goal!",
        "The referee shows him a yellow card for that cynical trip in midfield.",
        "Change for the home side: the winger makes way and the substitute comes on.",
        "Oh, that's so close! It rattles the crossbar and the crowd are on their feet!",
        "The ball goes out for a throw-in deep in their own half.",
    ]
    .iter()
    .enumerate()
    .map(|(i, text)| {
        let start_s = i as f64 * 10.0;
        CommentaryWindow {
            match_id: "smoke".into(),
            half: 1,
            start_s,
            end_s: start_s + 10.0,
            sentences: vec![crate::commentary::CommentarySentence {
                start_s: start_s + 1.0,
                end_s: start_s + 6.0,
                text: (*text).to_string(),
                index: i,
            }],
            rendered_text: (*text).to_string(),
        }
    })
    .collect()
}

/// Per-judge tally of non-abstained verdicts over [`smoke_windows`].
pub fn run_smoke(
    client: &dyn CompletionClient,
    panel: &JudgePanel,
    retry: &RetryPolicy,
) -> [(JudgeKind, usize); 3] {
    let mut parsed = [0usize; 3];
    for w in smoke_windows() {
        for v in judge_window(client, panel, &w, retry) {
            if v.parse_status != ParseStatus::Abstained {
                parsed[v.kind.slot()] += 1;
            }
        }
    }
    JudgeKind::ALL.map(|k| (k, parsed[k.slot()]))
}
