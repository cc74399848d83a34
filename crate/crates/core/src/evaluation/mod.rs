//! Tolerance-based spotting evaluation: per-class AP, mAP(δ), and the loose
//! and tight average-mAP.

mod oracle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::aggregation::Detection;
use crate::taxonomy::{ActionClass, LabelTable, VerdictClass};

pub use oracle::{brute_force_evaluate, BRUTE_FORCE_MAX_PER_CLASS};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("malformed label document: {0}")]
    MalformedDocument(String),
    #[error("malformed annotation #{index}: {reason}")]
    MalformedAnnotation { index: usize, reason: String },
    #[error("average precision is undefined without ground truth")]
    ZeroGroundTruth,
    #[error("no ground-truth events to evaluate against")]
    NoGroundTruth,
    #[error("tolerance grid must be non-empty, positive and strictly increasing: {0:?}")]
    BadGrid(Vec<f64>),
    #[error("instance too large for brute force: {count} detections of {class}")]
    InstanceTooLarge { class: ActionClass, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub match_id: String,
    pub half: u8,
    pub time_s: f64,
    pub class: ActionClass,
}

/// Decode `"H - MM:SS"` into (half, seconds).
pub fn parse_game_time(s: &str) -> Option<(u8, f64)> {
    let (half, clock) = s.split_once('-')?;
    let half: u8 = half.trim().parse().ok()?;
    let (mm, ss) = clock.trim().split_once(':')?;
    let mm: u32 = mm.trim().parse().ok()?;
    let ss: u32 = ss.trim().parse().ok()?;
    Some((half, f64::from(mm * 60 + ss)))
}

/// Load a Labels-v2 document. Unknown labels are skipped and reported in the
/// returned warnings.
pub fn load_labels_json(
    bytes: &[u8],
    match_id: &str,
    labels: &LabelTable,
) -> Result<(Vec<GroundTruthEvent>, Vec<String>), EvalError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| EvalError::MalformedDocument(e.to_string()))?;
    let annotations = doc
        .get("annotations")
        .and_then(Value::as_array)
        .ok_or_else(|| EvalError::MalformedDocument("missing \"annotations\" array".into()))?;

    let mut events = Vec::with_capacity(annotations.len());
    let mut warnings = Vec::new();
    for (index, ann) in annotations.iter().enumerate() {
        let bad = |reason: String| EvalError::MalformedAnnotation { index, reason };
        let game_time = ann
            .get("gameTime")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing gameTime".into()))?;
        let (half, clock_s) =
            parse_game_time(game_time).ok_or_else(|| bad(format!("bad gameTime {game_time:?}")))?;
        if half != 1 && half != 2 {
            return Err(bad(format!("half {half} out of range")));
        }
        let label = ann
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing label".into()))?;
        let time_s = match ann.get("position") {
            None | Some(Value::Null) => clock_s,
            Some(Value::String(s)) => {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad position {s:?}")))?
                    / 1000.0
            }
            Some(Value::Number(n)) => {
                n.as_f64().ok_or_else(|| bad("bad position".into()))? / 1000.0
            }
            Some(other) => return Err(bad(format!("bad position {other}"))),
        };
        if time_s.is_nan() || time_s < 0.0 {
            return Err(bad(format!("negative time {time_s}")));
        }
        match labels.parse(label) {
            Ok(VerdictClass::InTaxonomy(class)) => events.push(GroundTruthEvent {
                match_id: match_id.to_string(),
                half,
                time_s,
                class,
            }),
            _ => warnings.push(format!(
                "annotation #{index}: skipping unknown label {label:?}"
            )),
        }
    }
    Ok((events, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceGrid {
    pub loose: Vec<f64>,
    pub tight: Vec<f64>,
}

impl Default for ToleranceGrid {
    fn default() -> Self {
        Self {
            loose: (1..=12).map(|k| 5.0 * k as f64).collect(),
            tight: (1..=5).map(f64::from).collect(),
        }
    }
}

impl ToleranceGrid {
    pub fn validate(&self) -> Result<(), EvalError> {
        for g in [&self.loose, &self.tight] {
            let ok = !g.is_empty()
                && g[0] > 0.0
                && g.windows(2).all(|w| w[0] < w[1])
                && g.iter().all(|d| d.is_finite());
            if !ok {
                return Err(EvalError::BadGrid(g.clone()));
            }
        }
        Ok(())
    }

    /// Every distinct tolerance, ascending.
    pub fn all(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.loose.iter().chain(&self.tight).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

/// Ranking order: confidence descending, then match id, half, time.
pub fn rank_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.match_id.cmp(&b.match_id))
        .then(a.half.cmp(&b.half))
        .then(a.time_s.total_cmp(&b.time_s))
}

/// Single-class matching result.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMatch {
    /// TP flag per detection, in rank order.
    pub ranked_tp: Vec<bool>,
    /// Matched ground-truth index per ranked detection.
    pub assignment: Vec<Option<usize>>,
    pub false_negatives: usize,
}

impl ClassMatch {
    pub fn true_positives(&self) -> usize {
        self.ranked_tp.iter().filter(|&&t| t).count()
    }

    pub fn false_positives(&self) -> usize {
        self.ranked_tp.len() - self.true_positives()
    }
}

/// Greedy matching for one class: detections in rank order each take the
/// nearest unmatched ground truth of the same (match, half) within
/// `delta_s`. Distance ties go to the earlier ground truth, then the lower
/// index.
pub fn match_detections(
    dets: &[&Detection],
    gts: &[&GroundTruthEvent],
    delta_s: f64,
) -> ClassMatch {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| rank_order(dets[i], dets[j]).then(i.cmp(&j)));

    let mut by_key: BTreeMap<(&str, u8), Vec<usize>> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_key
            .entry((g.match_id.as_str(), g.half))
            .or_default()
            .push(i);
    }
    let mut taken = vec![false; gts.len()];
    let mut ranked_tp = Vec::with_capacity(dets.len());
    let mut assignment = Vec::with_capacity(dets.len());
    for i in order {
        let d = dets[i];
        let best = by_key
            .get(&(d.match_id.as_str(), d.half))
            .into_iter()
            .flatten()
            .copied()
            .filter(|&g| !taken[g])
            .map(|g| ((d.time_s - gts[g].time_s).abs(), g))
            .filter(|&(dist, _)| dist <= delta_s)
            .min_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then(gts[a.1].time_s.total_cmp(&gts[b.1].time_s))
                    .then(a.1.cmp(&b.1))
            });
        match best {
            Some((_, g)) => {
                taken[g] = true;
                ranked_tp.push(true);
                assignment.push(Some(g));
            }
            None => {
                ranked_tp.push(false);
                assignment.push(None);
            }
        }
    }
    ClassMatch {
        ranked_tp,
        assignment,
        false_negatives: taken.iter().filter(|&&t| !t).count(),
    }
}

/// All-point interpolated AP: precision envelope (running max from the
/// right) integrated over the recall steps.
pub fn average_precision(ranked_tp: &[bool], num_gt: usize) -> Result<f64, EvalError> {
    if num_gt == 0 {
        return Err(EvalError::ZeroGroundTruth);
    }
    let mut tp = 0usize;
    let precision: Vec<f64> = ranked_tp
        .iter()
        .enumerate()
        .map(|(i, &hit)| {
            tp += usize::from(hit);
            tp as f64 / (i + 1) as f64
        })
        .collect();
    let mut envelope = precision;
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let ap = ranked_tp
        .iter()
        .zip(&envelope)
        .filter(|(&hit, _)| hit)
        .map(|(_, &p)| p)
        .sum::<f64>()
        / num_gt as f64;
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassResult {
    pub ap: f64,
    pub num_gt: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceResult {
    pub delta_s: f64,
    pub map: f64,
    pub map_pct: String,
    pub per_class: BTreeMap<ActionClass, ClassResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub average_map_loose: f64,
    pub average_map_tight: f64,
    pub average_map_loose_pct: String,
    pub average_map_tight_pct: String,
    pub loose_tolerances: Vec<f64>,
    pub tight_tolerances: Vec<f64>,
    pub per_tolerance: Vec<ToleranceResult>,
}

pub fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl EvalReport {
    /// Assemble a report from per-tolerance class results.
    pub fn assemble(
        grid: &ToleranceGrid,
        per_delta: Vec<(f64, BTreeMap<ActionClass, ClassResult>)>,
    ) -> Self {
        let per_tolerance: Vec<ToleranceResult> = per_delta
            .into_iter()
            .map(|(delta_s, per_class)| {
                let map = per_class.values().map(|c| c.ap).sum::<f64>() / per_class.len() as f64;
                ToleranceResult {
                    delta_s,
                    map,
                    map_pct: pct(map),
                    per_class,
                }
            })
            .collect();
        let mean_over = |deltas: &[f64]| {
            deltas
                .iter()
                .map(|d| {
                    per_tolerance
                        .iter()
                        .find(|t| t.delta_s == *d)
                        .map_or(0.0, |t| t.map)
                })
                .sum::<f64>()
                / deltas.len() as f64
        };
        let average_map_loose = mean_over(&grid.loose);
        let average_map_tight = mean_over(&grid.tight);
        Self {
            average_map_loose,
            average_map_tight,
            average_map_loose_pct: pct(average_map_loose),
            average_map_tight_pct: pct(average_map_tight),
            loose_tolerances: grid.loose.clone(),
            tight_tolerances: grid.tight.clone(),
            per_tolerance,
        }
    }

    pub fn tolerance(&self, delta_s: f64) -> Option<&ToleranceResult> {
        self.per_tolerance.iter().find(|t| t.delta_s == delta_s)
    }

    /// Largest absolute per-class AP difference; infinite when the two
    /// reports cover different tolerances or classes.
    pub fn max_ap_difference(&self, other: &Self) -> f64 {
        if self.per_tolerance.len() != other.per_tolerance.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.per_tolerance.iter().zip(&other.per_tolerance) {
            if a.delta_s != b.delta_s || a.per_class.len() != b.per_class.len() {
                return f64::INFINITY;
            }
            for (class, ra) in &a.per_class {
                match b.per_class.get(class) {
                    Some(rb) => worst = worst.max((ra.ap - rb.ap).abs()),
                    None => return f64::INFINITY,
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per (tolerance, class) for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_s,class,ap,num_gt,tp,fp,fn\n");
        for t in &self.per_tolerance {
            for (class, r) in &t.per_class {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    t.delta_s, class, r.ap, r.num_gt, r.tp, r.fp, r.fn_
                ));
            }
        }
        out
    }
}

/// Pooled evaluation over all matches in `dets` and `gts`.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruthEvent],
    grid: &ToleranceGrid,
) -> Result<EvalReport, EvalError> {
    grid.validate()?;
    if gts.is_empty() {
        return Err(EvalError::NoGroundTruth);
    }
    let mut classes: BTreeMap<ActionClass, (Vec<&Detection>, Vec<&GroundTruthEvent>)> =
        BTreeMap::new();
    for g in gts {
        classes.entry(g.class).or_default().1.push(g);
    }
    for d in dets {
        if let Some(entry) = classes.get_mut(&d.class) {
            entry.0.push(d);
        }
    }

    let per_delta = grid
        .all()
        .into_iter()
        .map(|delta| {
            let per_class = classes
                .iter()
                .map(|(&class, (cd, cg))| {
                    let m = match_detections(cd, cg, delta);
                    let ap = average_precision(&m.ranked_tp, cg.len())
                        .expect("classes are keyed by ground truth");
                    (
                        class,
                        ClassResult {
                            ap,
                            num_gt: cg.len(),
                            tp: m.true_positives(),
                            fp: m.false_positives(),
                            fn_: m.false_negatives,
                        },
                    )
                })
                .collect();
            (delta, per_class)
        })
        .collect();
    Ok(EvalReport::assemble(grid, per_delta))
}
