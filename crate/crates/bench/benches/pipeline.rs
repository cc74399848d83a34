use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use echo_spotter::baseline::random_baseline;
use echo_spotter::judging::{CompletionRequest, FnClient, JudgePanel, RetryPolicy};
use echo_spotter::{
    evaluate, generate_windows, merge_detections, spot_half, ActionClass, ClassPriors, Detection,
    GroundTruthEvent, HalfCommentary, MergePolicy, SpotConfig, ToleranceGrid, WindowConfig,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const HALF_S: f64 = 2700.0;

/// Roughly one sentence every 4 s across a 45-minute half.
fn half(seed: u64) -> HalfCommentary {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut t = 0.0;
    let mut sentences = Vec::new();
    while t < HALF_S {
        let len = rng.random_range(1.0..6.0);
        let text = if rng.random_bool(0.02) {
            "What a goal!"
        } else {
            "Patient build-up."
        };
        sentences.push((t, t + len, text.to_string()));
        t += rng.random_range(1.0..7.0);
    }
    HalfCommentary::from_unsorted("bench", 1, sentences).unwrap()
}

fn detections(seed: u64, n: usize) -> Vec<Detection> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| Detection {
            match_id: format!("m{}", rng.random_range(0..10)),
            half: rng.random_range(1..=2),
            time_s: rng.random_range(0.0..HALF_S),
            class: ActionClass::ALL[rng.random_range(0..17)],
            confidence: rng.random_range(1..=3) as f64 / 3.0,
        })
        .collect()
}

fn ground_truth(seed: u64, n: usize) -> Vec<GroundTruthEvent> {
    detections(seed, n)
        .into_iter()
        .map(|d| GroundTruthEvent {
            match_id: d.match_id,
            half: d.half,
            time_s: d.time_s,
            class: d.class,
        })
        .collect()
}

fn bench_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(20);
    for n in [1_000, 10_000] {
        let dets = detections(1, n);
        let gts = ground_truth(2, n / 4);
        let grid = ToleranceGrid::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| evaluate(black_box(&dets), black_box(&gts), &grid).unwrap())
        });
    }
    group.finish();
}

fn bench_merge(c: &mut Criterion) {
    let dets: Vec<Detection> = detections(3, 20_000)
        .into_iter()
        .map(|d| Detection {
            match_id: "m".into(),
            ..d
        })
        .collect();
    let policy = MergePolicy::default();
    c.bench_function("merge/20000", |b| {
        b.iter(|| merge_detections(black_box(&dets), &policy).unwrap())
    });
}

fn bench_windows(c: &mut Criterion) {
    let h = half(4);
    let mut group = c.benchmark_group("windows");
    for stride in [1.0, 5.0] {
        let cfg = WindowConfig::new(10.0, stride).unwrap();
        group.bench_with_input(BenchmarkId::new("stride", stride), &cfg, |b, cfg| {
            b.iter(|| generate_windows(black_box(&h), cfg))
        });
    }
    group.finish();
}

fn bench_baseline(c: &mut Criterion) {
    let h = half(5);
    let priors =
        ClassPriors::from_probabilities(ActionClass::ALL.iter().map(|&c| (c, 0.01))).unwrap();
    let policy = MergePolicy::default();
    c.bench_function("baseline/half", |b| {
        b.iter(|| random_baseline(black_box(&h), &priors, 7, &policy).unwrap())
    });
}

fn bench_spot(c: &mut Criterion) {
    let h = half(6);
    let client = FnClient::new(|req: &CompletionRequest| {
        Ok(if req.context.window_text.contains("goal") {
            "YES\nGoal"
        } else {
            "NO"
        }
        .to_string())
    });
    let panel = JudgePanel::shipped();
    let cfg = SpotConfig {
        retry: RetryPolicy::none(),
        jobs: 1,
        ..SpotConfig::default()
    };
    c.bench_function("spot_half/in-process judges", |b| {
        b.iter(|| spot_half(black_box(&h), &cfg, &panel, &client).unwrap())
    });
}

criterion_group!(
    benches,
    bench_evaluate,
    bench_merge,
    bench_windows,
    bench_baseline,
    bench_spot
);
criterion_main!(benches);
