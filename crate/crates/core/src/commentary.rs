//! Timestamped commentary: Echoes-style ingestion, canonical JSON, validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Gap between consecutive sentence starts above which validation warns.
pub const LARGE_GAP_S: f64 = 120.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed commentary document: {0}")]
    MalformedDocument(String),
    #[error("malformed segment {key:?}: {reason}")]
    MalformedSegment { key: String, reason: String },
    #[error("segment {key:?} ends before it starts ({start} > {end})")]
    InvertedSpan { key: String, start: f64, end: f64 },
    #[error("half must be 1 or 2, got {0}")]
    InvalidHalf(u8),
}

/// One timestamped utterance within a half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentarySentence {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
    /// Position within the half after sorting.
    #[serde(skip)]
    pub index: usize,
}

impl CommentarySentence {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfCommentary {
    pub match_id: String,
    pub half: u8,
    pub sentences: Vec<CommentarySentence>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchCommentary {
    pub match_id: String,
    pub halves: BTreeMap<u8, HalfCommentary>,
}

impl MatchCommentary {
    pub fn new(match_id: impl Into<String>) -> Self {
        Self {
            match_id: match_id.into(),
            halves: BTreeMap::new(),
        }
    }

    /// Insert a half, rejecting one that belongs to another match.
    pub fn insert(&mut self, half: HalfCommentary) -> Result<(), IngestError> {
        if half.match_id != self.match_id {
            return Err(IngestError::MalformedDocument(format!(
                "half belongs to match {:?}, expected {:?}",
                half.match_id, self.match_id
            )));
        }
        self.halves.insert(half.half, half);
        Ok(())
    }

    pub fn sentence_count(&self) -> usize {
        self.halves.values().map(|h| h.sentences.len()).sum()
    }
}

fn check_half(half: u8) -> Result<(), IngestError> {
    match half {
        1 | 2 => Ok(()),
        other => Err(IngestError::InvalidHalf(other)),
    }
}

impl HalfCommentary {
    /// Build a half from unsorted sentences: blank texts are dropped, texts
    /// trimmed, order fixed by `(start_s, original position)`.
    pub fn from_unsorted(
        match_id: impl Into<String>,
        half: u8,
        sentences: Vec<(f64, f64, String)>,
    ) -> Result<Self, IngestError> {
        check_half(half)?;
        let mut keyed = Vec::with_capacity(sentences.len());
        for (ordinal, (start, end, text)) in sentences.into_iter().enumerate() {
            let key = ordinal.to_string();
            keyed.push((ordinal as u64, key, start, end, text));
        }
        Self::assemble(match_id.into(), half, keyed, true).map(|(h, _)| h)
    }

    /// With `strict = false` inverted spans are dropped and reported instead
    /// of failing the whole half.
    fn assemble(
        match_id: String,
        half: u8,
        mut raw: Vec<(u64, String, f64, f64, String)>,
        strict: bool,
    ) -> Result<(Self, Vec<Warning>), IngestError> {
        let mut dropped = Vec::new();
        for (_, key, start, end, _) in &raw {
            if !start.is_finite() || !end.is_finite() || *start < 0.0 {
                return Err(IngestError::MalformedSegment {
                    key: key.clone(),
                    reason: format!("times must be finite and non-negative, got [{start}, {end}]"),
                });
            }
            if start > end {
                if strict {
                    return Err(IngestError::InvertedSpan {
                        key: key.clone(),
                        start: *start,
                        end: *end,
                    });
                }
                dropped.push(Warning::InvertedSpanDropped {
                    key: key.clone(),
                    start_s: *start,
                    end_s: *end,
                });
            }
        }
        raw.retain(|r| r.2 <= r.3);
        raw.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
        let sentences = raw
            .into_iter()
            .filter_map(|(_, _, start_s, end_s, text)| {
                let text = text.trim();
                (!text.is_empty()).then(|| (start_s, end_s, text.to_string()))
            })
            .enumerate()
            .map(|(index, (start_s, end_s, text))| CommentarySentence {
                start_s,
                end_s,
                text,
                index,
            })
            .collect();
        let h = Self {
            match_id,
            half,
            sentences,
        };
        Ok((h, dropped))
    }

    /// Canonical internal JSON.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("commentary serializes");
        s.push('\n');
        s
    }

    pub fn from_canonical_json(bytes: &[u8]) -> Result<Self, IngestError> {
        let raw: CanonicalHalf = serde_json::from_slice(bytes)
            .map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
        let sentences = raw
            .sentences
            .into_iter()
            .map(|s| (s.start_s, s.end_s, s.text))
            .collect();
        Self::from_unsorted(raw.match_id, raw.half, sentences)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalHalf {
    match_id: String,
    half: u8,
    sentences: Vec<CanonicalSentence>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalSentence {
    start_s: f64,
    end_s: f64,
    text: String,
}

/// Parse an Echoes-style `{"segments": {"<ordinal>": [start, end, text]}}`
/// document.
pub fn parse_echoes_json(
    bytes: &[u8],
    match_id: &str,
    half: u8,
) -> Result<HalfCommentary, IngestError> {
    parse_echoes_json_with(bytes, match_id, half, true).map(|(h, _)| h)
}

/// Like [`parse_echoes_json`]; when `strict` is false, inverted spans are
/// dropped and returned as warnings.
pub fn parse_echoes_json_with(
    bytes: &[u8],
    match_id: &str,
    half: u8,
    strict: bool,
) -> Result<(HalfCommentary, Vec<Warning>), IngestError> {
    check_half(half)?;
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    let segments = doc
        .get("segments")
        .ok_or_else(|| IngestError::MalformedDocument("missing \"segments\"".into()))?
        .as_object()
        .ok_or_else(|| IngestError::MalformedDocument("\"segments\" is not an object".into()))?;

    let mut raw = Vec::with_capacity(segments.len());
    for (key, value) in segments {
        let bad = |reason: &str| IngestError::MalformedSegment {
            key: key.clone(),
            reason: reason.to_string(),
        };
        let ordinal: u64 = key
            .trim()
            .parse()
            .map_err(|_| bad("key is not an integer ordinal"))?;
        let triple = value
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| bad("expected [start, end, text]"))?;
        let start = triple[0]
            .as_f64()
            .ok_or_else(|| bad("start is not a number"))?;
        let end = triple[1]
            .as_f64()
            .ok_or_else(|| bad("end is not a number"))?;
        let text = triple[2]
            .as_str()
            .ok_or_else(|| bad("text is not a string"))?;
        raw.push((ordinal, key.clone(), start, end, text.to_string()));
    }
    HalfCommentary::assemble(match_id.to_string(), half, raw, strict)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    Overlap {
        first: usize,
        second: usize,
    },
    LargeGap {
        after: usize,
        gap_s: f64,
    },
    Duplicate {
        first: usize,
        second: usize,
    },
    InvertedSpanDropped {
        key: String,
        start_s: f64,
        end_s: f64,
    },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::Overlap { first, second } => {
                write!(f, "sentences {first} and {second} overlap")
            }
            Warning::LargeGap { after, gap_s } => {
                write!(f, "{gap_s:.1} s gap after sentence {after}")
            }
            Warning::Duplicate { first, second } => {
                write!(f, "sentences {first} and {second} are duplicates")
            }
            Warning::InvertedSpanDropped {
                key,
                start_s,
                end_s,
            } => {
                write!(
                    f,
                    "segment {key:?} dropped: ends before it starts ({start_s} > {end_s})"
                )
            }
        }
    }
}

/// Non-fatal checks: overlapping spans of consecutive sentences, start gaps
/// over [`LARGE_GAP_S`], and repeated `(start, text)` pairs.
pub fn validate_half(h: &HalfCommentary) -> Vec<Warning> {
    let mut warnings = Vec::new();
    for (i, pair) in h.sentences.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if b.start_s < a.end_s {
            warnings.push(Warning::Overlap {
                first: i,
                second: i + 1,
            });
        }
        let gap = b.start_s - a.start_s;
        if gap > LARGE_GAP_S {
            warnings.push(Warning::LargeGap {
                after: i,
                gap_s: gap,
            });
        }
    }
    let mut seen: BTreeMap<(u64, &str), usize> = BTreeMap::new();
    for (i, s) in h.sentences.iter().enumerate() {
        if let Some(&first) = seen.get(&(s.start_s.to_bits(), s.text.as_str())) {
            warnings.push(Warning::Duplicate { first, second: i });
        } else {
            seen.insert((s.start_s.to_bits(), s.text.as_str()), i);
        }
    }
    warnings
}
