//! Exhaustive reference evaluator for small instances.
//!
//! Shares no matching or AP code with the main path. Ranks are computed by
//! pairwise counting, every partial one-to-one assignment of detections to
//! ground truth is enumerated, and only the assignment in which each
//! detection holds the nearest ground truth left free by higher-ranked
//! detections survives. AP integrates the precision envelope directly over
//! the recall levels `k / num_gt`.

use std::collections::BTreeMap;

use crate::aggregation::Detection;
use crate::taxonomy::ActionClass;

use super::{ClassResult, EvalError, EvalReport, GroundTruthEvent, ToleranceGrid};

pub const BRUTE_FORCE_MAX_PER_CLASS: usize = 10;

/// `a` ranks strictly before `b` (positions break full ties).
fn precedes(a: (&Detection, usize), b: (&Detection, usize)) -> bool {
    let (da, ia) = a;
    let (db, ib) = b;
    if da.confidence != db.confidence {
        return da.confidence > db.confidence;
    }
    if da.match_id != db.match_id {
        return da.match_id < db.match_id;
    }
    if da.half != db.half {
        return da.half < db.half;
    }
    if da.time_s != db.time_s {
        return da.time_s < db.time_s;
    }
    ia < ib
}

fn ranked(dets: &[&Detection]) -> Vec<usize> {
    let mut slots = vec![usize::MAX; dets.len()];
    for i in 0..dets.len() {
        let rank = (0..dets.len())
            .filter(|&j| j != i && precedes((dets[j], j), (dets[i], i)))
            .count();
        slots[rank] = i;
    }
    slots
}

fn eligible(d: &Detection, g: &GroundTruthEvent, delta: f64) -> bool {
    d.match_id == g.match_id && d.half == g.half && (d.time_s - g.time_s).abs() <= delta
}

/// `candidate` is the nearest free eligible ground truth for `d`.
fn is_nearest(
    d: &Detection,
    candidate: usize,
    gts: &[&GroundTruthEvent],
    used: &[bool],
    delta: f64,
) -> bool {
    let dist = |g: usize| (d.time_s - gts[g].time_s).abs();
    (0..gts.len())
        .filter(|&g| g != candidate && !used[g] && eligible(d, gts[g], delta))
        .all(|g| {
            let (dc, dg) = (dist(candidate), dist(g));
            dc < dg
                || (dc == dg && gts[candidate].time_s < gts[g].time_s)
                || (dc == dg && gts[candidate].time_s == gts[g].time_s && candidate < g)
        })
}

struct Search<'a> {
    order: &'a [usize],
    dets: &'a [&'a Detection],
    gts: &'a [&'a GroundTruthEvent],
    delta: f64,
    used: Vec<bool>,
    current: Vec<Option<usize>>,
    survivors: Vec<Vec<Option<usize>>>,
}

impl Search<'_> {
    fn run(&mut self, depth: usize) {
        if depth == self.order.len() {
            self.survivors.push(self.current.clone());
            return;
        }
        let d = self.dets[self.order[depth]];
        let any_free =
            (0..self.gts.len()).any(|g| !self.used[g] && eligible(d, self.gts[g], self.delta));
        // Option: leave unmatched. Consistent only if nothing is free.
        if !any_free {
            self.current.push(None);
            self.run(depth + 1);
            self.current.pop();
        }
        for g in 0..self.gts.len() {
            if self.used[g] || !eligible(d, self.gts[g], self.delta) {
                continue;
            }
            if !is_nearest(d, g, self.gts, &self.used, self.delta) {
                continue;
            }
            self.used[g] = true;
            self.current.push(Some(g));
            self.run(depth + 1);
            self.current.pop();
            self.used[g] = false;
        }
    }
}

fn interpolated_ap(flags: &[bool], num_gt: usize) -> f64 {
    let mut tp_at = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for &f in flags {
        if f {
            tp += 1;
        }
        tp_at.push(tp);
    }
    let mut total = 0.0;
    for k in 1..=num_gt {
        let best = (0..flags.len())
            .filter(|&i| tp_at[i] >= k)
            .map(|i| tp_at[i] as f64 / (i + 1) as f64)
            .fold(0.0, f64::max);
        total += best;
    }
    total / num_gt as f64
}

/// Reference report for instances with at most
/// [`BRUTE_FORCE_MAX_PER_CLASS`] detections per class.
pub fn brute_force_evaluate(
    dets: &[Detection],
    gts: &[GroundTruthEvent],
    grid: &ToleranceGrid,
) -> Result<EvalReport, EvalError> {
    grid.validate()?;
    if gts.is_empty() {
        return Err(EvalError::NoGroundTruth);
    }
    let mut classes: Vec<ActionClass> = Vec::new();
    for c in ActionClass::ALL {
        if gts.iter().any(|g| g.class == c) {
            classes.push(c);
        }
    }
    for &c in &classes {
        let count = dets.iter().filter(|d| d.class == c).count();
        if count > BRUTE_FORCE_MAX_PER_CLASS {
            return Err(EvalError::InstanceTooLarge { class: c, count });
        }
    }

    let mut per_delta = Vec::new();
    for delta in grid.all() {
        let mut per_class = BTreeMap::new();
        for &c in &classes {
            let cd: Vec<&Detection> = dets.iter().filter(|d| d.class == c).collect();
            let cg: Vec<&GroundTruthEvent> = gts.iter().filter(|g| g.class == c).collect();
            let order = ranked(&cd);
            let mut search = Search {
                order: &order,
                dets: &cd,
                gts: &cg,
                delta,
                used: vec![false; cg.len()],
                current: Vec::new(),
                survivors: Vec::new(),
            };
            search.run(0);
            assert_eq!(
                search.survivors.len(),
                1,
                "exactly one greedy-consistent assignment exists"
            );
            let assignment = &search.survivors[0];
            let flags: Vec<bool> = assignment.iter().map(Option::is_some).collect();
            let tp = flags.iter().filter(|&&f| f).count();
            per_class.insert(
                c,
                ClassResult {
                    ap: interpolated_ap(&flags, cg.len()),
                    num_gt: cg.len(),
                    tp,
                    fp: flags.len() - tp,
                    fn_: cg.len() - tp,
                },
            );
        }
        per_delta.push((delta, per_class));
    }
    Ok(EvalReport::assemble(grid, per_delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(t: f64, conf: f64) -> Detection {
        Detection {
            match_id: "m".into(),
            half: 1,
            time_s: t,
            class: ActionClass::Goal,
            confidence: conf,
        }
    }

    fn gt(t: f64) -> GroundTruthEvent {
        GroundTruthEvent {
            match_id: "m".into(),
            half: 1,
            time_s: t,
            class: ActionClass::Goal,
        }
    }

    #[test]
    fn interpolation_by_hand() {
        assert!((interpolated_ap(&[true, false, true], 2) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(interpolated_ap(&[false, false], 3), 0.0);
        assert_eq!(interpolated_ap(&[true], 1), 1.0);
    }

    #[test]
    fn single_hit() {
        let r = brute_force_evaluate(&[det(10.0, 1.0)], &[gt(11.5)], &ToleranceGrid::default())
            .unwrap();
        assert_eq!(r.average_map_loose, 1.0);
        // Missed only at the 1 s tolerance.
        assert_eq!(r.average_map_tight, 0.8);
    }

    #[test]
    fn zero_detections() {
        let r = brute_force_evaluate(&[], &[gt(11.0)], &ToleranceGrid::default()).unwrap();
        assert_eq!((r.average_map_loose, r.average_map_tight), (0.0, 0.0));
    }

    #[test]
    fn too_large() {
        let dets: Vec<_> = (0..11).map(|i| det(i as f64, 1.0)).collect();
        assert!(matches!(
            brute_force_evaluate(&dets, &[gt(0.0)], &ToleranceGrid::default()),
            Err(EvalError::InstanceTooLarge { count: 11, .. })
        ));
    }
}
