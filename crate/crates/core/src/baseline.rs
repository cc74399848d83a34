//! Commentary-anchored random baseline.
//!
//! For every sentence and every class a Bernoulli coin with the class's
//! commentary prior decides whether to emit a detection at the sentence
//! start with confidence 0.5. The text is never read. Detections then go
//! through the same earliest-kept merge as the pipeline.

use std::collections::BTreeMap;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aggregation::{merge_detections, AggregationError, Detection, MergePolicy};
use crate::commentary::{HalfCommentary, MatchCommentary};
use crate::evaluation::GroundTruthEvent;
use crate::taxonomy::ActionClass;

pub const BASELINE_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training split contains no commentary sentences")]
    EmptyTrainSplit,
    #[error("prior for {class} must lie in [0, 1], got {p}")]
    BadPrior { class: ActionClass, p: f64 },
    #[error("malformed priors file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Merge(#[from] AggregationError),
}

/// Per-class event-per-sentence rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPriors {
    p: [f64; 17],
    pub split_id: Option<String>,
    pub sentence_count: u64,
    pub event_counts: [u64; 17],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split_id: Option<String>,
    sentence_count: u64,
    events: BTreeMap<String, u64>,
    p: BTreeMap<String, f64>,
}

impl ClassPriors {
    /// Explicit priors; classes not listed get 0.
    pub fn from_probabilities(
        probs: impl IntoIterator<Item = (ActionClass, f64)>,
    ) -> Result<Self, BaselineError> {
        let mut p = [0.0; 17];
        for (class, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(BaselineError::BadPrior { class, p: value });
            }
            p[class.index()] = value;
        }
        Ok(Self {
            p,
            split_id: None,
            sentence_count: 0,
            event_counts: [0; 17],
        })
    }

    pub fn zero() -> Self {
        Self::from_probabilities([]).expect("zero priors are valid")
    }

    pub fn get(&self, class: ActionClass) -> f64 {
        self.p[class.index()]
    }

    pub fn to_json(&self) -> String {
        let file = PriorsFile {
            split_id: self.split_id.clone(),
            sentence_count: self.sentence_count,
            events: ActionClass::ALL
                .iter()
                .map(|c| (c.as_str().to_string(), self.event_counts[c.index()]))
                .collect(),
            p: ActionClass::ALL
                .iter()
                .map(|c| (c.as_str().to_string(), self.get(*c)))
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("priors serialize");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, BaselineError> {
        let file: PriorsFile =
            serde_json::from_slice(bytes).map_err(|e| BaselineError::Malformed(e.to_string()))?;
        let parse_class = |label: &str| -> Result<ActionClass, BaselineError> {
            serde_json::from_value(serde_json::Value::String(label.to_string()))
                .map_err(|e| BaselineError::Malformed(e.to_string()))
        };
        let mut priors = Self::from_probabilities(
            file.p
                .iter()
                .map(|(k, &v)| parse_class(k).map(|c| (c, v)))
                .collect::<Result<Vec<_>, _>>()?,
        )?;
        for (k, &n) in &file.events {
            priors.event_counts[parse_class(k)?.index()] = n;
        }
        priors.sentence_count = file.sentence_count;
        priors.split_id = file.split_id;
        Ok(priors)
    }
}

/// `p_c = events of class c / commentary sentences`, clamped to 1.
pub fn estimate_priors(
    train: &[(MatchCommentary, Vec<GroundTruthEvent>)],
) -> Result<ClassPriors, BaselineError> {
    let sentence_count: u64 = train.iter().map(|(m, _)| m.sentence_count() as u64).sum();
    if sentence_count == 0 {
        return Err(BaselineError::EmptyTrainSplit);
    }
    let mut event_counts = [0u64; 17];
    for (_, events) in train {
        for e in events {
            event_counts[e.class.index()] += 1;
        }
    }
    let mut p = [0.0; 17];
    for (p, &n) in p.iter_mut().zip(&event_counts) {
        *p = (n as f64 / sentence_count as f64).min(1.0);
    }
    Ok(ClassPriors {
        p,
        split_id: None,
        sentence_count,
        event_counts,
    })
}

/// Counter-based draws: one ChaCha key per (seed, match, half), stream =
/// sentence index, word position = class index. Reordering or adding
/// matches never shifts another half's draws.
struct DrawSource {
    rng: ChaCha8Rng,
}

impl DrawSource {
    fn new(seed: u64, match_id: &str, half: u8) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update((match_id.len() as u64).to_le_bytes());
        hasher.update(match_id.as_bytes());
        hasher.update([half]);
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    fn start_sentence(&mut self, sentence: usize) {
        self.rng.set_stream(sentence as u64);
        self.rng.set_word_pos(0);
    }

    fn coin(&mut self, class: ActionClass, coin: &Bernoulli) -> bool {
        let pos = 2 * class.index() as u128;
        if self.rng.get_word_pos() != pos {
            self.rng.set_word_pos(pos);
        }
        coin.sample(&mut self.rng)
    }
}

/// The Bernoulli detections before merging, in sentence then class order.
pub fn premerge_detections(h: &HalfCommentary, priors: &ClassPriors, seed: u64) -> Vec<Detection> {
    let coins: Vec<(ActionClass, Bernoulli)> = ActionClass::ALL
        .iter()
        .filter(|c| priors.get(**c) > 0.0)
        .map(|&c| {
            (
                c,
                Bernoulli::new(priors.get(c)).expect("priors are validated"),
            )
        })
        .collect();
    if coins.is_empty() {
        return Vec::new();
    }
    let mut draws = DrawSource::new(seed, &h.match_id, h.half);
    let mut out = Vec::new();
    for (i, s) in h.sentences.iter().enumerate() {
        draws.start_sentence(i);
        for (class, coin) in &coins {
            if draws.coin(*class, coin) {
                out.push(Detection {
                    match_id: h.match_id.clone(),
                    half: h.half,
                    time_s: s.start_s,
                    class: *class,
                    confidence: BASELINE_CONFIDENCE,
                });
            }
        }
    }
    out
}

pub fn random_baseline(
    h: &HalfCommentary,
    priors: &ClassPriors,
    seed: u64,
    policy: &MergePolicy,
) -> Result<Vec<Detection>, BaselineError> {
    Ok(merge_detections(
        &premerge_detections(h, priors, seed),
        policy,
    )?)
}

/// Analytic mean of the pre-merge per-class counts: `N * p_c`.
pub fn expected_premerge_count(
    priors: &ClassPriors,
    h: &HalfCommentary,
) -> BTreeMap<ActionClass, f64> {
    let n = h.sentences.len() as f64;
    ActionClass::ALL
        .iter()
        .map(|&c| (c, n * priors.get(c)))
        .collect()
}
