//! SoccerNet-style results file for one match.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::Detection;
use crate::evaluation::parse_game_time;
use crate::taxonomy::{LabelTable, VerdictClass};

#[derive(Debug, Error)]
pub enum PredictionsError {
    #[error("malformed predictions file: {0}")]
    Malformed(String),
    #[error("prediction #{index}: {reason}")]
    BadEntry { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionEntry {
    #[serde(rename = "gameTime")]
    pub game_time: String,
    pub label: String,
    /// Milliseconds from the start of the half.
    pub position: i64,
    pub half: u8,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionsFile {
    pub match_id: String,
    /// Seed of a baseline run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub predictions: Vec<PredictionEntry>,
}

pub fn game_time(half: u8, position_ms: i64) -> String {
    let total_s = position_ms.max(0) / 1000;
    format!("{half} - {:02}:{:02}", total_s / 60, total_s % 60)
}

pub fn position_ms(time_s: f64) -> i64 {
    (time_s * 1000.0).round() as i64
}

impl PredictionsFile {
    /// Detections must all belong to `match_id`; entries are sorted by
    /// (half, position, class).
    pub fn from_detections(
        match_id: &str,
        dets: &[Detection],
        labels: &LabelTable,
        seed: Option<u64>,
    ) -> Self {
        let mut sorted: Vec<&Detection> = dets.iter().collect();
        sorted.sort_by(|a, b| {
            a.half
                .cmp(&b.half)
                .then(position_ms(a.time_s).cmp(&position_ms(b.time_s)))
                .then(a.class.cmp(&b.class))
                .then(b.confidence.total_cmp(&a.confidence))
        });
        let predictions = sorted
            .into_iter()
            .map(|d| {
                let position = position_ms(d.time_s);
                PredictionEntry {
                    game_time: game_time(d.half, position),
                    label: labels
                        .canonical(VerdictClass::InTaxonomy(d.class))
                        .to_string(),
                    position,
                    half: d.half,
                    confidence: d.confidence,
                }
            })
            .collect();
        Self {
            match_id: match_id.to_string(),
            seed,
            predictions,
        }
    }

    pub fn to_detections(&self, labels: &LabelTable) -> Result<Vec<Detection>, PredictionsError> {
        self.predictions
            .iter()
            .enumerate()
            .map(|(index, p)| {
                let bad = |reason: String| PredictionsError::BadEntry { index, reason };
                let class = match labels.parse(&p.label) {
                    Ok(VerdictClass::InTaxonomy(c)) => c,
                    _ => return Err(bad(format!("label {:?} is not an action class", p.label))),
                };
                if p.half != 1 && p.half != 2 {
                    return Err(bad(format!("half {} out of range", p.half)));
                }
                if p.position < 0 {
                    return Err(bad(format!("negative position {}", p.position)));
                }
                if parse_game_time(&p.game_time).is_none_or(|(h, _)| h != p.half) {
                    return Err(bad(format!(
                        "gameTime {:?} disagrees with half",
                        p.game_time
                    )));
                }
                if !(0.0..=1.0).contains(&p.confidence) {
                    return Err(bad(format!("confidence {} outside [0, 1]", p.confidence)));
                }
                Ok(Detection {
                    match_id: self.match_id.clone(),
                    half: p.half,
                    time_s: p.position as f64 / 1000.0,
                    class,
                    confidence: p.confidence,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("predictions serialize");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PredictionsError> {
        serde_json::from_slice(bytes).map_err(|e| PredictionsError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{default_table, ActionClass};

    fn det(half: u8, t: f64, class: ActionClass, conf: f64) -> Detection {
        Detection {
            match_id: "m".into(),
            half,
            time_s: t,
            class,
            confidence: conf,
        }
    }

    #[test]
    fn export_format() {
        let f = PredictionsFile::from_detections(
            "m",
            &[
                det(2, 65.0, ActionClass::Corner, 1.0),
                det(1, 754.0004, ActionClass::Goal, 2.0 / 3.0),
            ],
            default_table(),
            None,
        );
        assert_eq!(f.predictions[0].game_time, "1 - 12:34");
        assert_eq!(f.predictions[0].position, 754000);
        assert_eq!(f.predictions[0].label, "Goal");
        assert_eq!(f.predictions[1].game_time, "2 - 01:05");
        let json = f.to_json();
        assert!(json.contains("\"gameTime\""));
        assert!(!json.contains("seed"));
    }

    #[test]
    fn load_export_is_identity() {
        let f = PredictionsFile::from_detections(
            "m",
            &[
                det(1, 10.0, ActionClass::YellowToRedCard, 0.5),
                det(1, 10.0, ActionClass::Goal, 1.0),
                det(2, 3599.999, ActionClass::Foul, 2.0 / 3.0),
            ],
            default_table(),
            Some(17),
        );
        let json = f.to_json();
        let loaded = PredictionsFile::from_json(json.as_bytes()).unwrap();
        let dets = loaded.to_detections(default_table()).unwrap();
        let again = PredictionsFile::from_detections("m", &dets, default_table(), loaded.seed);
        assert_eq!(again.to_json(), json);
    }

    #[test]
    fn rejects_bad_entries() {
        let mut f = PredictionsFile::from_detections(
            "m",
            &[det(1, 10.0, ActionClass::Goal, 1.0)],
            default_table(),
            None,
        );
        f.predictions[0].label = "out-of-world".into();
        assert!(f.to_detections(default_table()).is_err());
    }
}
