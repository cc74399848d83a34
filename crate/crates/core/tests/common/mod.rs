#![allow(dead_code)]

pub mod mock_llm;

use echo_spotter::{ActionClass, Detection, GroundTruthEvent};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn pick_classes(rng: &mut StdRng, max: usize) -> Vec<ActionClass> {
    let n = rng.random_range(1..=max);
    let mut all = ActionClass::ALL.to_vec();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.random_range(0..all.len());
        out.push(all.swap_remove(i));
    }
    out
}

/// Times on a coarse grid so distance ties actually happen.
fn time(rng: &mut StdRng, horizon: u32) -> f64 {
    rng.random_range(0..=2 * horizon) as f64 / 2.0
}

/// Small instance: at most `max_classes` classes, `max_gt` ground-truth
/// events and `max_dets` detections per class, two matches, two halves.
pub fn small_instance(
    seed: u64,
    max_classes: usize,
    max_gt: usize,
    max_dets: usize,
) -> (Vec<Detection>, Vec<GroundTruthEvent>) {
    let mut rng = rng(seed);
    let classes = pick_classes(&mut rng, max_classes);
    let matches = ["a", "b"];
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for &class in &classes {
        for _ in 0..rng.random_range(0..=max_gt) {
            gts.push(GroundTruthEvent {
                match_id: matches[rng.random_range(0..2)].into(),
                half: rng.random_range(1..=2),
                time_s: time(&mut rng, 90),
                class,
            });
        }
        for _ in 0..rng.random_range(0..=max_dets) {
            dets.push(Detection {
                match_id: matches[rng.random_range(0..2)].into(),
                half: rng.random_range(1..=2),
                time_s: time(&mut rng, 90),
                class,
                confidence: rng.random_range(1..=10) as f64 / 10.0,
            });
        }
    }
    if gts.is_empty() {
        gts.push(GroundTruthEvent {
            match_id: "a".into(),
            half: 1,
            time_s: time(&mut rng, 90),
            class: classes[0],
        });
    }
    (dets, gts)
}

pub fn random_ground_truth(seed: u64, n: usize) -> Vec<GroundTruthEvent> {
    let mut rng = rng(seed);
    (0..n)
        .map(|i| GroundTruthEvent {
            match_id: format!("match-{}", i % 3),
            half: rng.random_range(1..=2),
            time_s: rng.random_range(0..2_700_000) as f64 / 1000.0,
            class: ActionClass::ALL[rng.random_range(0..17)],
        })
        .collect()
}

pub fn random_detections(seed: u64, max: usize) -> Vec<Detection> {
    let mut rng = rng(seed);
    let n = rng.random_range(0..=max);
    let classes = pick_classes(&mut rng, 3);
    (0..n)
        .map(|_| Detection {
            match_id: "m".into(),
            half: rng.random_range(1..=2),
            time_s: time(&mut rng, 150),
            class: classes[rng.random_range(0..classes.len())],
            confidence: rng.random_range(1..=3) as f64 / 3.0,
        })
        .collect()
}
