//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the criteria execute in order
//! on one thread and the timing checks are not disturbed by parallel tests.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::time::Instant;

use dfloc_core::clustering::{hierarchical_cluster, CandidateSet};
use dfloc_core::energy::{check_regular, total_energy, FrameEvidence, PairwiseTable};
use dfloc_core::fingerprint::build_fingerprint;
use dfloc_core::graphcut::{brute_force_map, build_cut_graph, min_cut};
use dfloc_core::harness::{
    calibrate, count_error, distance_error, format_estimates, median, save_estimates, track, ErrorMode,
};
use dfloc_core::preprocess::{alpha_trimmed_mean, anova_stream_test, smooth_frames, trim_count};
use dfloc_core::random::{random_instance, InstanceSpec};
use dfloc_core::simulator::{
    generate_calibration, generate_test, generate_training_truth, random_static_positions, random_trajectories,
    TestbedConfig, Trajectory,
};
use dfloc_core::tracker::TrackerState;
use dfloc_core::types::{ModelParams, Point};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let spec = InstanceSpec::random_shape(&mut rng, 12);
        let inst = random_instance(&mut rng, &spec).expect("instance");
        let (fp, p) = (&inst.fingerprint, &inst.params);
        let g = build_cut_graph(&inst.evidence, &inst.prev, &inst.prev_prev, fp, p).expect("graph");
        let cut = min_cut(&g);
        let brute = brute_force_map(&inst.evidence, &inst.prev, &inst.prev_prev, fp, p).expect("brute force");
        let e_cut = total_energy(&cut, &inst.evidence, &inst.prev, &inst.prev_prev, fp, p).expect("energy");
        let e_brute = total_energy(&brute, &inst.evidence, &inst.prev, &inst.prev_prev, fp, p).expect("energy");
        worst = worst.max((e_cut - e_brute).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 30.0,
        format!("1000 instances, max |E(cut) - E(brute)| = {worst:.3e}, {secs:.1} s"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut regular = 0;
    for _ in 0..10_000 {
        let spec = InstanceSpec::random_shape(&mut rng, 12);
        let inst = random_instance(&mut rng, &spec).expect("instance");
        if check_regular(&inst.fingerprint, &inst.evidence, &inst.params) {
            regular += 1;
        }
    }
    let violating = PairwiseTable {
        e00: 2.0,
        e01: 0.5,
        e10: 0.5,
        e11: 2.0,
    };
    let rejected = !violating.is_regular();
    outcome(
        regular == 10_000 && rejected,
        format!("{regular}/10000 instances regular, violating table rejected: {rejected}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut failures = Vec::new();
    for case in 0..2000 {
        let q = rng.random_range(1..=25);
        let alpha = rng.random_range(0.0..0.5);
        let mut w: Vec<f64> = (0..q).map(|_| rng.random_range(-95.0..-20.0)).collect();
        if q <= 2 * trim_count(q, alpha) {
            if alpha_trimmed_mean(&w, alpha).is_ok() {
                failures.push(format!("case {case}: over-trimmed window accepted"));
            }
            continue;
        }
        let v = alpha_trimmed_mean(&w, alpha).expect("valid window");
        let mut sorted = w.clone();
        sorted.sort_by(f64::total_cmp);
        let t = trim_count(q, alpha);
        let kept = &sorted[t..q - t];
        if !(kept[0] <= v && v <= kept[kept.len() - 1]) {
            failures.push(format!("case {case}: {v} outside retained range"));
        }
        let mean = w.iter().sum::<f64>() / q as f64;
        if (alpha_trimmed_mean(&w, 0.0).expect("alpha 0") - mean).abs() > 1e-9 {
            failures.push(format!("case {case}: alpha = 0 differs from mean"));
        }
        w.shuffle(&mut rng);
        if alpha_trimmed_mean(&w, alpha).expect("shuffled") != v {
            failures.push(format!("case {case}: not permutation invariant"));
        }
    }
    let worked = alpha_trimmed_mean(&[-60.0, -52.0, -50.0, -48.0, -40.0], 0.2).expect("worked example");
    if worked != -50.0 {
        failures.push(format!("worked example gave {worked}"));
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("2000 random windows, worked example = {worked}")
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let normal = Normal::new(-60.0, 2.0).expect("sd");
    let draw = |rng: &mut ChaCha8Rng, shift: f64| -> Vec<f64> { (0..60).map(|_| normal.sample(rng) + shift).collect() };
    let trials = 10_000;
    let mut same_rejected = 0;
    let mut shifted_rejected = 0;
    for _ in 0..trials {
        let (a, b) = (draw(&mut rng, 0.0), draw(&mut rng, 0.0));
        if !anova_stream_test(&a, &b, 0.05).expect("test").kept {
            same_rejected += 1;
        }
        let (a, b) = (draw(&mut rng, 0.0), draw(&mut rng, 20.0));
        if !anova_stream_test(&a, &b, 0.05).expect("test").kept {
            shifted_rejected += 1;
        }
    }
    let rate = same_rejected as f64 / trials as f64;
    let power = shifted_rejected as f64 / trials as f64;
    outcome(
        (rate - 0.05).abs() <= 0.02 && power >= 0.99,
        format!("same-distribution rejection {rate:.4}, +20 dBm rejection {power:.4}"),
    )
}

fn criterion_5() -> Outcome {
    let cfg = TestbedConfig {
        calibration_frames: 30,
        ..TestbedConfig::default()
    };
    let grid = cfg.grid().expect("grid");
    let params = ModelParams::default();
    let sessions = generate_calibration(&cfg).expect("sessions");
    let n = grid.len();
    let f = cfg.calibration_frames as u64;
    let fp = build_fingerprint(&sessions, &grid, &params).expect("fingerprint");
    let k = fp.streams().len();
    let mut problems = Vec::new();
    if sessions.len() != n {
        problems.push(format!("{} sessions for {n} locations", sessions.len()));
    }
    for loc in fp.locations() {
        if loc.active.len() != k || loc.inactive.len() != k {
            problems.push(format!(
                "location {} holds {}+{} histograms",
                loc.location.index,
                loc.active.len(),
                loc.inactive.len()
            ));
        }
        for s in 0..k {
            let (a, i) = (loc.active[s].samples(), loc.inactive[s].samples());
            if a != f || i != (n as u64 - 1) * f {
                problems.push(format!(
                    "location {} stream {s}: {a} active, {i} inactive samples",
                    loc.location.index
                ));
            }
        }
    }
    if build_fingerprint(&sessions[1..], &grid, &params).is_ok() {
        problems.push("n - 1 sessions accepted".into());
    }
    let mut extra = sessions.clone();
    extra.push(sessions[0].clone());
    if build_fingerprint(&extra, &grid, &params).is_ok() {
        problems.push("n + 1 sessions accepted".into());
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "{n} sessions, 2 x {k} histograms per location, {f} active / {} inactive samples each",
                (n as u64 - 1) * f
            )
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let params = ModelParams::default();
    let rs = [0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 5.0];
    let trials = 200;
    let (mut recovered, mut monotone) = (0, 0);
    let mut worst_offset = 0.0f64;
    for _ in 0..trials {
        let centers = loop {
            let c: Vec<Point> = (0..3)
                .map(|_| Point::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)))
                .collect();
            if (0..3).all(|i| (i + 1..3).all(|j| c[i].distance(&c[j]) >= 5.0)) {
                break c;
            }
        };
        let mut points = Vec::new();
        for c in &centers {
            for _ in 0..rng.random_range(8..=12) {
                let (rad, ang) = (
                    0.3 * rng.random::<f64>().sqrt(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                );
                points.push((Point::new(c.x + rad * ang.cos(), c.y + rad * ang.sin()), 1));
            }
        }
        let cands = CandidateSet::from_points(points);
        let clusters = hierarchical_cluster(&cands, 0.25, params.min_split_distance).expect("clusters");
        if clusters.len() == 3 {
            let offsets: Vec<f64> = centers
                .iter()
                .map(|c| {
                    clusters
                        .iter()
                        .map(|k| k.centroid.distance(c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let off = offsets.iter().copied().fold(0.0, f64::max);
            worst_offset = worst_offset.max(off);
            if off <= 0.2 {
                recovered += 1;
            }
        } else {
            worst_offset = f64::INFINITY;
        }
        let counts: Vec<usize> = rs
            .iter()
            .map(|&r| {
                hierarchical_cluster(&cands, r, params.min_split_distance)
                    .expect("clusters")
                    .len()
            })
            .collect();
        if counts.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    outcome(
        recovered == trials && monotone == trials,
        format!("{recovered}/{trials} recovered (worst centroid offset {worst_offset:.3} m), {monotone}/{trials} monotone in r"),
    )
}

fn static_trace(cfg: &TestbedConfig, points: &[Point], frames: usize) -> Vec<Trajectory> {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| Trajectory::stationary(format!("p{i}"), p, 0.0, (frames - 1) as f64))
        .inspect(|t| debug_assert!(t.waypoints.iter().all(|w| cfg.contains(w.1))))
        .collect()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let cfg = TestbedConfig::default();
    let grid = cfg.grid().expect("grid");
    let params = ModelParams::default();
    let training = generate_training_truth(&cfg).expect("training truth");
    let fp = calibrate(
        &generate_calibration(&cfg).expect("sessions"),
        &grid,
        Some(&training),
        &params,
    )
    .expect("fingerprint");
    let warmup = params.w + params.q;
    let mut lines = Vec::new();
    let mut pass = true;

    // (a) single static entity
    for offset in 100..105 {
        let p = random_static_positions(&cfg, 1, 0.0, offset).expect("position")[0];
        let (frames, truth) = generate_test(&cfg, &static_trace(&cfg, &[p], 300)).expect("trace");
        let out = track(&fp, &frames, &params).expect("track");
        let errors: Vec<f64> = out
            .estimates
            .iter()
            .zip(&truth)
            .flat_map(|(e, t)| distance_error(e, t, &grid, ErrorMode::Locations, grid.center()))
            .collect();
        let med = median(&errors).expect("errors");
        let ok = med <= grid.spacing();
        pass &= ok;
        lines.push(format!(
            "(a) entity at ({},{}): median {med:.2} m {}",
            p.x,
            p.y,
            if ok { "ok" } else { "FAIL" }
        ));
    }

    // (b) one to three static entities at least 4 m apart
    for m in 1..=3usize {
        let pts = random_static_positions(&cfg, m, 4.0, 200 + m as u64).expect("positions");
        let (frames, truth) = generate_test(&cfg, &static_trace(&cfg, &pts, 300)).expect("trace");
        let out = track(&fp, &frames, &params).expect("track");
        let errs = count_error(&out.estimates, &truth).expect("counts");
        let post = &errs[warmup..];
        let frac = post.iter().filter(|c| c.abs() <= 1).count() as f64 / post.len() as f64;
        let ok = frac >= 0.95;
        pass &= ok;
        let mut hist = [0usize; 6];
        for e in &out.estimates[warmup..] {
            hist[e.m_hat().min(5)] += 1;
        }
        lines.push(format!(
            "(b) m={m}: count within 1 in {frac:.3} of frames, m_hat histogram {hist:?} {}",
            if ok { "ok" } else { "FAIL" }
        ));
    }

    // (c) empty area
    let empty_cfg = TestbedConfig {
        test_frames: 500,
        ..cfg.clone()
    };
    let (frames, _) = generate_test(&empty_cfg, &[]).expect("trace");
    let out = track(&fp, &frames, &params).expect("track");
    let zero = out.estimates.iter().filter(|e| e.m_hat() == 0).count() as f64 / out.estimates.len() as f64;
    let ok = zero >= 0.95;
    pass &= ok;
    lines.push(format!(
        "(c) empty area: m_hat = 0 in {zero:.3} of frames {}",
        if ok { "ok" } else { "FAIL" }
    ));

    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    lines.push(format!("{secs:.1} s"));
    outcome(pass, lines.join("; "))
}

/// Median per-frame `min_cut` time on a simulated testbed of `side`² locations.
fn median_cut_time(side: usize) -> f64 {
    let scale = side as f64 / 5.0;
    let base = TestbedConfig::default();
    let scaled = |ps: &[Point]| ps.iter().map(|p| Point::new(p.x * scale, p.y * scale)).collect();
    let cfg = TestbedConfig {
        width: base.width * scale,
        height: base.height * scale,
        grid_nx: side,
        grid_ny: side,
        ap_positions: scaled(&base.ap_positions),
        mp_positions: scaled(&base.mp_positions),
        calibration_frames: 30,
        ..base.clone()
    };
    let grid = cfg.grid().expect("grid");
    let params = ModelParams::default();
    let fp = calibrate(&generate_calibration(&cfg).expect("sessions"), &grid, None, &params).expect("fingerprint");
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let trs = random_trajectories(&cfg, 3, 60, &mut rng);
    let (frames, _) = generate_test(&cfg, &trs).expect("trace");
    let frames = smooth_frames(&frames, params.q, params.alpha_trim).expect("smoothing");
    let mut state = TrackerState::new(grid.len(), params.w).expect("state");
    let reps = 20;
    let mut times = Vec::new();
    for f in &frames {
        let ev = FrameEvidence::compute(&fp, f, None, params.contrast).expect("evidence");
        let g = build_cut_graph(&ev, state.prev(), state.prev_prev(), &fp, &params).expect("graph");
        let start = Instant::now();
        let mut map = min_cut(&g);
        for _ in 1..reps {
            map = std::hint::black_box(min_cut(std::hint::black_box(&g)));
        }
        times.push(start.elapsed().as_secs_f64() / reps as f64);
        state.push(map);
    }
    median(&times).expect("frames")
}

fn criterion_8() -> Outcome {
    let t: Vec<(usize, f64)> = [5, 10, 20].iter().map(|&s| (s * s, median_cut_time(s))).collect();
    let ratio = t[2].1 / t[0].1;
    outcome(
        ratio <= 48.0,
        format!(
            "median min_cut {} ; time(400)/time(25) = {ratio:.1}",
            t.iter()
                .map(|(n, s)| format!("n={n}: {:.1} us", s * 1e6))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |name: &str| -> Vec<u8> {
        let cfg = TestbedConfig {
            seed: 9,
            calibration_frames: 40,
            ..TestbedConfig::default()
        };
        let grid = cfg.grid().expect("grid");
        let params = ModelParams::default();
        let training = generate_training_truth(&cfg).expect("training truth");
        let fp = calibrate(
            &generate_calibration(&cfg).expect("sessions"),
            &grid,
            Some(&training),
            &params,
        )
        .expect("fingerprint");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let trs = random_trajectories(&cfg, 2, 120, &mut rng);
        let (frames, _) = generate_test(&cfg, &trs).expect("trace");
        let out = track(&fp, &frames, &params).expect("track");
        let path = dir.path().join(name);
        save_estimates(&out.estimates, &path).expect("save");
        assert_eq!(
            std::fs::read_to_string(&path).expect("read"),
            format_estimates(&out.estimates)
        );
        std::fs::read(&path).expect("read")
    };
    let (a, b) = (run("a.txt"), run("b.txt"));
    outcome(
        a == b && !a.is_empty(),
        format!("two runs, {} bytes each, identical: {}", a.len(), a == b),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("graph-cut equals brute force", criterion_1),
        ("regularity", criterion_2),
        ("alpha-trimmed filter", criterion_3),
        ("ANOVA stream filter", criterion_4),
        ("cross-calibration counts", criterion_5),
        ("clustering", criterion_6),
        ("end-to-end simulator targets", criterion_7),
        ("near-linear min-cut scaling", criterion_8),
        ("determinism", criterion_9),
    ];
    let filter: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let o = run();
        let _ = writeln!(
            out,
            "criterion {n} ({name}): {} : {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        let _ = out.flush();
        if !o.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        let _ = writeln!(out, "failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
