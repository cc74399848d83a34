//! Majority voting, timestamping and same-class temporal merging.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commentary::HalfCommentary;
use crate::judging::{
    judge_windows, CompletionClient, JudgeError, JudgeKind, JudgePanel, JudgeVerdict, RetryPolicy,
    VerdictTriple,
};
use crate::taxonomy::{ActionClass, VerdictClass};
use crate::windowing::{generate_windows, CommentaryWindow, WindowConfig};

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("vote needs one verdict per judge; missing {0}")]
    MissingJudge(JudgeKind),
    #[error("vote needs exactly three verdicts, got {0}")]
    WrongBallotCount(usize),
    #[error("window [{0}, {1}) has no sentences to anchor a timestamp")]
    EmptyWindow(f64, f64),
    #[error("detections from different matches: {0:?} and {1:?}")]
    MixedMatch(String, String),
    #[error("merge delta must be positive, got {0}")]
    BadDelta(f64),
}

/// One timestamped, class-labelled spotting result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub match_id: String,
    pub half: u8,
    pub time_s: f64,
    pub class: ActionClass,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VoteOutcome {
    Rejected,
    Accepted { class: ActionClass, confidence: f64 },
    OutOfWorldAccepted { confidence: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoteOptions {
    /// Stricter reading of agreement: at least two YES judges must name the
    /// same class.
    pub require_class_agreement: bool,
}

pub fn majority_vote(verdicts: &[JudgeVerdict]) -> Result<VoteOutcome, AggregationError> {
    majority_vote_with(verdicts, VoteOptions::default())
}

/// Presence needs at least two YES ballots. The class is the plurality among
/// YES ballots; ties go to the highest-priority judge (Outcome > Tactical >
/// Excitement). Confidence is the YES fraction.
pub fn majority_vote_with(
    verdicts: &[JudgeVerdict],
    opts: VoteOptions,
) -> Result<VoteOutcome, AggregationError> {
    if verdicts.len() != 3 {
        return Err(AggregationError::WrongBallotCount(verdicts.len()));
    }
    for kind in JudgeKind::ALL {
        if !verdicts.iter().any(|v| v.kind == kind) {
            return Err(AggregationError::MissingJudge(kind));
        }
    }

    let yes: Vec<(JudgeKind, VerdictClass)> = verdicts
        .iter()
        .filter(|v| v.present)
        .filter_map(|v| v.class.map(|c| (v.kind, c)))
        .collect();
    if yes.len() < 2 {
        return Ok(VoteOutcome::Rejected);
    }

    // class -> (votes, best priority among its voters)
    let mut tally: BTreeMap<VerdictClass, (usize, u8)> = BTreeMap::new();
    for &(kind, class) in &yes {
        let entry = tally.entry(class).or_insert((0, u8::MAX));
        entry.0 += 1;
        entry.1 = entry.1.min(kind.priority());
    }
    let (&class, &(votes, _)) = tally
        .iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)))
        .expect("at least two ballots");
    if opts.require_class_agreement && votes < 2 {
        return Ok(VoteOutcome::Rejected);
    }

    let confidence = yes.len() as f64 / 3.0;
    Ok(match class {
        VerdictClass::InTaxonomy(class) => VoteOutcome::Accepted { class, confidence },
        VerdictClass::OutOfWorld => VoteOutcome::OutOfWorldAccepted { confidence },
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampPolicy {
    WindowCenter,
    /// Start of the sentence overlapping the window the most; falls back to
    /// the window center for empty windows when used by the pipeline.
    #[default]
    AnchorSentenceStart,
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

pub fn assign_timestamp(
    w: &CommentaryWindow,
    policy: TimestampPolicy,
) -> Result<f64, AggregationError> {
    match policy {
        TimestampPolicy::WindowCenter => Ok(w.start_s + w.len_s() / 2.0),
        TimestampPolicy::AnchorSentenceStart => {
            let mut best: Option<(f64, f64)> = None;
            for s in &w.sentences {
                let ov = overlap(s.start_s, s.end_s, w.start_s, w.end_s);
                if best.is_none_or(|(b, _)| ov > b) {
                    best = Some((ov, s.start_s));
                }
            }
            best.map(|(_, t)| t)
                .ok_or(AggregationError::EmptyWindow(w.start_s, w.end_s))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeKeep {
    #[default]
    Earliest,
    MaxConfidence,
}

/// Same-class detections closer than `2 * delta_s` collapse to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergePolicy {
    pub delta_s: f64,
    pub keep: MergeKeep,
}

impl Default for MergePolicy {
    fn default() -> Self {
        Self {
            delta_s: 10.0,
            keep: MergeKeep::Earliest,
        }
    }
}

impl MergePolicy {
    pub fn window_s(&self) -> f64 {
        2.0 * self.delta_s
    }
}

/// Output order: half, time, class, then confidence descending.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    a.half
        .cmp(&b.half)
        .then(a.time_s.total_cmp(&b.time_s))
        .then(a.class.cmp(&b.class))
        .then(b.confidence.total_cmp(&a.confidence))
}

pub fn merge_detections(
    dets: &[Detection],
    policy: &MergePolicy,
) -> Result<Vec<Detection>, AggregationError> {
    if policy.delta_s.is_nan() || policy.delta_s <= 0.0 {
        return Err(AggregationError::BadDelta(policy.delta_s));
    }
    if let Some(first) = dets.first() {
        if let Some(other) = dets.iter().find(|d| d.match_id != first.match_id) {
            return Err(AggregationError::MixedMatch(
                first.match_id.clone(),
                other.match_id.clone(),
            ));
        }
    }
    let span = policy.window_s();
    let mut groups: BTreeMap<(u8, ActionClass), Vec<&Detection>> = BTreeMap::new();
    for d in dets {
        groups.entry((d.half, d.class)).or_default().push(d);
    }

    let mut out = Vec::with_capacity(dets.len());
    for (_, mut group) in groups {
        match policy.keep {
            MergeKeep::Earliest => {
                group.sort_by(|a, b| detection_order(a, b));
                let mut last_kept: Option<f64> = None;
                for d in group {
                    if last_kept.is_none_or(|t| d.time_s >= t + span) {
                        last_kept = Some(d.time_s);
                        out.push(d.clone());
                    }
                }
            }
            MergeKeep::MaxConfidence => {
                group.sort_by(|a, b| {
                    b.confidence
                        .total_cmp(&a.confidence)
                        .then(a.time_s.total_cmp(&b.time_s))
                });
                let mut kept: Vec<f64> = Vec::new();
                for d in group {
                    if kept.iter().all(|&t| (d.time_s - t).abs() >= span) {
                        kept.push(d.time_s);
                        out.push(d.clone());
                    }
                }
            }
        }
    }
    out.sort_by(detection_order);
    Ok(out)
}

/// Audit trail for one window.
#[derive(Debug, Clone, Serialize)]
pub struct VoteRecord {
    pub match_id: String,
    pub half: u8,
    pub window_start_s: f64,
    pub window_end_s: f64,
    pub verdicts: VerdictTriple,
    pub outcome: VoteOutcome,
    /// Timestamp the window's detection would carry, before merging.
    pub time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpotConfig {
    pub window: WindowConfig,
    /// `None` disables merging of pipeline detections.
    pub merge: Option<MergePolicy>,
    pub timestamp: TimestampPolicy,
    pub vote: VoteOptions,
    pub retry: RetryPolicy,
    pub jobs: usize,
}

impl Default for SpotConfig {
    fn default() -> Self {
        Self {
            window: WindowConfig::default(),
            merge: Some(MergePolicy::default()),
            timestamp: TimestampPolicy::default(),
            vote: VoteOptions::default(),
            retry: RetryPolicy::default(),
            jobs: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum SpotError {
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

#[derive(Debug, Clone)]
pub struct HalfSpotting {
    pub windows: Vec<CommentaryWindow>,
    pub detections: Vec<Detection>,
    pub votes: Vec<VoteRecord>,
}

/// Windows, judges, votes, timestamps, merge.
pub fn spot_half(
    h: &HalfCommentary,
    cfg: &SpotConfig,
    panel: &JudgePanel,
    client: &dyn CompletionClient,
) -> Result<HalfSpotting, SpotError> {
    let windows = generate_windows(h, &cfg.window);
    let triples = judge_windows(client, panel, &windows, &cfg.retry, cfg.jobs)?;

    let mut detections = Vec::new();
    let mut votes = Vec::with_capacity(windows.len());
    for (w, verdicts) in windows.iter().zip(triples) {
        let outcome = majority_vote_with(&verdicts, cfg.vote)?;
        let time_s = match outcome {
            VoteOutcome::Rejected => None,
            _ => Some(match cfg.timestamp {
                TimestampPolicy::AnchorSentenceStart if w.is_empty() => {
                    assign_timestamp(w, TimestampPolicy::WindowCenter)?
                }
                policy => assign_timestamp(w, policy)?,
            }),
        };
        if let (VoteOutcome::Accepted { class, confidence }, Some(time_s)) = (outcome, time_s) {
            detections.push(Detection {
                match_id: h.match_id.clone(),
                half: h.half,
                time_s,
                class,
                confidence,
            });
        }
        votes.push(VoteRecord {
            match_id: w.match_id.clone(),
            half: w.half,
            window_start_s: w.start_s,
            window_end_s: w.end_s,
            verdicts,
            outcome,
            time_s,
        });
    }

    let detections = match &cfg.merge {
        Some(policy) => merge_detections(&detections, policy)?,
        None => {
            detections.sort_by(detection_order);
            detections
        }
    };
    Ok(HalfSpotting {
        windows,
        detections,
        votes,
    })
}
