//! Fixed-length sliding windows over a half's commentary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commentary::{CommentarySentence, HalfCommentary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowConfigError {
    #[error("window length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error(
        "stride must satisfy 0 < stride <= window length, got stride {stride} for length {len}"
    )]
    BadStride { stride: f64, len: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub window_len_s: f64,
    pub stride_s: f64,
    pub skip_empty: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len_s: 10.0,
            stride_s: 5.0,
            skip_empty: true,
        }
    }
}

impl WindowConfig {
    pub fn new(window_len_s: f64, stride_s: f64) -> Result<Self, WindowConfigError> {
        let cfg = Self {
            window_len_s,
            stride_s,
            skip_empty: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), WindowConfigError> {
        if !self.window_len_s.is_finite() || self.window_len_s <= 0.0 {
            return Err(WindowConfigError::NonPositiveLength(self.window_len_s));
        }
        if !(self.stride_s > 0.0 && self.stride_s <= self.window_len_s) {
            return Err(WindowConfigError::BadStride {
                stride: self.stride_s,
                len: self.window_len_s,
            });
        }
        Ok(())
    }
}

/// A `[start_s, end_s)` slice of one half and the sentences touching it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommentaryWindow {
    pub match_id: String,
    pub half: u8,
    pub start_s: f64,
    pub end_s: f64,
    pub sentences: Vec<CommentarySentence>,
    pub rendered_text: String,
}

impl CommentaryWindow {
    pub fn len_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Half-open span intersection; an instantaneous sentence belongs to the
/// window whose span contains its start.
pub fn sentence_in_span(s: &CommentarySentence, start: f64, end: f64) -> bool {
    if s.start_s == s.end_s {
        start <= s.start_s && s.start_s < end
    } else {
        s.start_s < end && s.end_s > start
    }
}

pub fn render_window_text(sentences: &[CommentarySentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let text = s.text.trim();
        if text.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(text);
    }
    out
}

/// Windows anchored at `t = 0`, spaced by the stride, up to the last start
/// that can still touch a sentence.
pub fn generate_windows(h: &HalfCommentary, cfg: &WindowConfig) -> Vec<CommentaryWindow> {
    let sentences = &h.sentences;
    if sentences.is_empty() {
        return Vec::new();
    }
    let max_end = sentences.iter().map(|s| s.end_s).fold(f64::MIN, f64::max);
    let max_point = sentences
        .iter()
        .filter(|s| s.start_s == s.end_s)
        .map(|s| s.start_s)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_duration = sentences.iter().map(|s| s.duration()).fold(0.0, f64::max);

    let mut windows = Vec::new();
    for k in 0u64.. {
        let start = k as f64 * cfg.stride_s;
        if !(start < max_end || start <= max_point) {
            break;
        }
        let end = start + cfg.window_len_s;
        // Sentences are sorted by start; anything starting before
        // `start - max_duration` has already ended.
        let lo = sentences.partition_point(|s| s.start_s < start - max_duration);
        let hi = sentences.partition_point(|s| s.start_s < end);
        let contained: Vec<CommentarySentence> = sentences[lo..hi]
            .iter()
            .filter(|s| sentence_in_span(s, start, end))
            .cloned()
            .collect();
        if cfg.skip_empty && contained.is_empty() {
            continue;
        }
        windows.push(CommentaryWindow {
            match_id: h.match_id.clone(),
            half: h.half,
            start_s: start,
            end_s: end,
            rendered_text: render_window_text(&contained),
            sentences: contained,
        });
    }
    windows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(spans: &[(f64, f64, &str)]) -> HalfCommentary {
        HalfCommentary::from_unsorted(
            "m",
            1,
            spans
                .iter()
                .map(|&(a, b, t)| (a, b, t.to_string()))
                .collect(),
        )
        .unwrap()
    }

    /// Reference: every grid start, every sentence, explicit overlap test.
    fn brute_force(h: &HalfCommentary, cfg: &WindowConfig, horizon: f64) -> Vec<(f64, Vec<usize>)> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let start = k as f64 * cfg.stride_s;
            if start > horizon {
                break;
            }
            let end = start + cfg.window_len_s;
            let ids: Vec<usize> = h
                .sentences
                .iter()
                .filter(|s| {
                    let overlap = s.start_s.max(start) < s.end_s.min(end);
                    let point = s.start_s == s.end_s && start <= s.start_s && s.start_s < end;
                    overlap || point
                })
                .map(|s| s.index)
                .collect();
            if !ids.is_empty() {
                out.push((start, ids));
            }
            k += 1;
        }
        out
    }

    fn summary(ws: &[CommentaryWindow]) -> Vec<(f64, Vec<usize>)> {
        ws.iter()
            .map(|w| (w.start_s, w.sentences.iter().map(|s| s.index).collect()))
            .collect()
    }

    #[test]
    fn single_sentence_windows() {
        let h = half(&[(12.3, 15.9, "Goal!")]);
        let ws = generate_windows(&h, &WindowConfig::default());
        // [15, 25) also intersects (12.3, 15.9).
        assert_eq!(
            summary(&ws),
            vec![(5.0, vec![0]), (10.0, vec![0]), (15.0, vec![0])]
        );
        assert_eq!(
            summary(&ws),
            brute_force(&h, &WindowConfig::default(), 100.0)
        );
    }

    #[test]
    fn without_skip_empty_grid_starts_at_zero() {
        let h = half(&[(12.3, 15.9, "Goal!")]);
        let cfg = WindowConfig {
            skip_empty: false,
            ..WindowConfig::default()
        };
        let starts: Vec<f64> = generate_windows(&h, &cfg)
            .iter()
            .map(|w| w.start_s)
            .collect();
        assert_eq!(starts, vec![0.0, 5.0, 10.0, 15.0]);
    }

    #[test]
    fn empty_half() {
        assert!(generate_windows(&half(&[]), &WindowConfig::default()).is_empty());
    }

    #[test]
    fn zero_length_sentence_at_boundary() {
        let h = half(&[(0.0, 0.0, "Kick-off")]);
        let ws = generate_windows(&h, &WindowConfig::default());
        assert_eq!(summary(&ws), vec![(0.0, vec![0])]);

        let h = half(&[(10.0, 10.0, "x")]);
        let ws = generate_windows(&h, &WindowConfig::default());
        assert_eq!(summary(&ws), vec![(5.0, vec![0]), (10.0, vec![0])]);
        assert_eq!(
            summary(&ws),
            brute_force(&h, &WindowConfig::default(), 100.0)
        );
    }

    #[test]
    fn matches_brute_force_on_mixed_half() {
        let h = half(&[
            (0.5, 3.0, "a"),
            (2.0, 31.0, "long"),
            (7.0, 7.0, "point"),
            (19.99, 20.0, "edge"),
            (45.0, 46.5, "late"),
        ]);
        for cfg in [
            WindowConfig::default(),
            WindowConfig::new(10.0, 1.0).unwrap(),
            WindowConfig::new(7.5, 2.5).unwrap(),
            WindowConfig::new(4.0, 4.0).unwrap(),
        ] {
            assert_eq!(
                summary(&generate_windows(&h, &cfg)),
                brute_force(&h, &cfg, 200.0)
            );
        }
    }

    #[test]
    fn rendering() {
        let s = |t: &str| CommentarySentence {
            start_s: 0.0,
            end_s: 1.0,
            text: t.into(),
            index: 0,
        };
        assert_eq!(
            render_window_text(&[s("Goal!"), s("Unbelievable!")]),
            "Goal! Unbelievable!"
        );
        assert_eq!(render_window_text(&[]), "");
        assert_eq!(
            render_window_text(&[s("a  b"), s("c"), s("d   e")]),
            "a  b c d   e"
        );
    }

    #[test]
    fn config_validation() {
        assert!(WindowConfig::new(0.0, 1.0).is_err());
        assert!(WindowConfig::new(10.0, 0.0).is_err());
        assert!(WindowConfig::new(10.0, 11.0).is_err());
        assert!(WindowConfig::new(10.0, 10.0).is_ok());
    }
}
