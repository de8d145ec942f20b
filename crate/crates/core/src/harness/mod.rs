//! End-to-end pipeline, evaluation report and file formats.

mod io;
mod metrics;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Instant;

use serde::Serialize;

pub use io::{
    export_heatmap, format_estimates, format_heatmap, format_maps, heatmap_matrix, load_estimates, load_maps,
    parse_estimates, parse_heatmap, parse_maps, save_estimates, save_maps,
};
pub use metrics::{count_error, distance_error, empirical_cdf, mean, median, ErrorMode};

use crate::clustering::{estimate_entities, hierarchical_cluster, merge_window, FrameEstimate};
use crate::error::{Error, Result};
use crate::fingerprint::{
    build_fingerprint, learn_temporal_priors, maps_from_ground_truth, CalibrationSession, Fingerprint,
};
use crate::preprocess::{select_streams, smooth_frames, trailing_window_mean};
use crate::tracker::{infer_map, TrackerState};
use crate::types::{EnvironmentMap, Grid, GroundTruthFrame, ModelParams, Point, RssFrame, StreamId};

/// Smooths the raw sessions, builds the fingerprint and, when training
/// ground truth is given, learns the temporal prior from it.
pub fn calibrate(
    sessions: &[CalibrationSession],
    grid: &Grid,
    training_truth: Option<&[GroundTruthFrame]>,
    params: &ModelParams,
) -> Result<Fingerprint> {
    params.validate()?;
    let smoothed = sessions
        .iter()
        .map(|s| {
            Ok(CalibrationSession {
                location: s.location,
                frames: smooth_frames(&s.frames, params.q, params.alpha_trim)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("smoothing"))?;
    let mut fp = build_fingerprint(&smoothed, grid, params).map_err(|e| e.in_stage("fingerprint"))?;
    if let Some(truth) = training_truth {
        let maps = maps_from_ground_truth(truth, grid);
        let prior = learn_temporal_priors(&[maps]).map_err(|e| e.in_stage("temporal prior"))?;
        fp.set_temporal(prior);
    }
    Ok(fp)
}

/// Result of processing one raw frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub smoothed: RssFrame,
    pub kept: BTreeSet<StreamId>,
    /// Every stream failed the ANOVA test; the best one was kept anyway.
    pub fallback: bool,
    pub map: EnvironmentMap,
    pub estimate: FrameEstimate,
}

/// Causal per-frame pipeline: smoothing, stream selection, map inference,
/// window merge, clustering.
#[derive(Debug, Clone)]
pub struct OnlineTracker<'a> {
    fp: &'a Fingerprint,
    params: ModelParams,
    state: TrackerState,
    raw: BTreeMap<StreamId, VecDeque<f64>>,
    recent: VecDeque<RssFrame>,
}

impl<'a> OnlineTracker<'a> {
    pub fn new(fp: &'a Fingerprint, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(OnlineTracker {
            fp,
            params: params.clone(),
            state: TrackerState::new(fp.len(), params.w)?,
            raw: BTreeMap::new(),
            recent: VecDeque::with_capacity(params.anova_window),
        })
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn step(&mut self, raw: &RssFrame) -> Result<StepOutput> {
        let p = &self.params;
        let mut smoothed = RssFrame::new(raw.timestamp);
        for (s, &v) in &raw.readings {
            let w = self.raw.entry(s.clone()).or_default();
            if w.len() == p.q {
                w.pop_front();
            }
            w.push_back(v);
            smoothed
                .readings
                .insert(s.clone(), trailing_window_mean(w.make_contiguous(), p.alpha_trim));
        }
        if self.recent.len() == p.anova_window {
            self.recent.pop_front();
        }
        self.recent.push_back(smoothed.clone());

        let (kept, fallback) = if p.stream_filter {
            let sel = select_streams(self.fp, self.recent.make_contiguous(), p.anova_significance)
                .map_err(|e| e.in_stage("stream selection"))?;
            (sel.kept, sel.fallback)
        } else {
            (self.fp.streams().iter().cloned().collect(), false)
        };
        let frame = smoothed.restricted(|s| kept.contains(s));
        let map = infer_map(&mut self.state, &frame, self.fp, p).map_err(|e| e.in_stage("inference"))?;
        let candidates = merge_window(self.state.window(), self.fp.grid()).map_err(|e| e.in_stage("clustering"))?;
        let clusters =
            hierarchical_cluster(&candidates, p.r, p.min_split_distance).map_err(|e| e.in_stage("clustering"))?;
        Ok(StepOutput {
            estimate: estimate_entities(&clusters, raw.timestamp),
            smoothed,
            kept,
            fallback,
            map,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackOutput {
    pub estimates: Vec<FrameEstimate>,
    pub maps: Vec<EnvironmentMap>,
    /// Streams used per frame.
    pub kept_streams: Vec<usize>,
    /// Wall-clock time per frame, milliseconds.
    pub runtime_ms: Vec<f64>,
}

/// Runs the online tracker over a raw trace.
pub fn track(fp: &Fingerprint, frames: &[RssFrame], params: &ModelParams) -> Result<TrackOutput> {
    let mut tracker = OnlineTracker::new(fp, params)?;
    let mut out = TrackOutput::default();
    for f in frames {
        let start = Instant::now();
        let step = tracker.step(f)?;
        out.runtime_ms.push(start.elapsed().as_secs_f64() * 1e3);
        out.estimates.push(step.estimate);
        out.maps.push(step.map);
        out.kept_streams.push(step.kept.len());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub samples: usize,
    pub median: Option<f64>,
    pub mean: Option<f64>,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        MetricSummary {
            samples: values.len(),
            median: median(values),
            mean: mean(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub frames: usize,
    /// Per-frame, per-entity errors on raw coordinates (meters).
    pub locations_errors: Vec<Vec<f64>>,
    /// Per-frame, per-entity errors between grid-snapped positions (meters).
    pub zones_errors: Vec<Vec<f64>>,
    /// Per-frame `m̂ − m`.
    pub count_errors: Vec<i64>,
    pub locations: MetricSummary,
    pub zones: MetricSummary,
    pub count_within_one: Option<f64>,
    pub count_exact: Option<f64>,
    pub locations_cdf: Vec<(f64, f64)>,
    pub zones_cdf: Vec<(f64, f64)>,
    pub runtime_ms: Vec<f64>,
    pub runtime: MetricSummary,
}

impl EvalReport {
    pub fn build(
        estimates: &[FrameEstimate],
        truths: &[GroundTruthFrame],
        grid: &Grid,
        center: Point,
        runtime_ms: Vec<f64>,
    ) -> Result<Self> {
        let count_errors = count_error(estimates, truths)?;
        let per_frame = |mode| -> Vec<Vec<f64>> {
            estimates
                .iter()
                .zip(truths)
                .map(|(e, t)| distance_error(e, t, grid, mode, center))
                .collect()
        };
        let locations_errors = per_frame(ErrorMode::Locations);
        let zones_errors = per_frame(ErrorMode::Zones);
        let flat_loc: Vec<f64> = locations_errors.iter().flatten().copied().collect();
        let flat_zone: Vec<f64> = zones_errors.iter().flatten().copied().collect();
        let fraction = |pred: fn(i64) -> bool| {
            (!count_errors.is_empty())
                .then(|| count_errors.iter().filter(|&&c| pred(c)).count() as f64 / count_errors.len() as f64)
        };
        Ok(EvalReport {
            frames: estimates.len(),
            locations: MetricSummary::of(&flat_loc),
            zones: MetricSummary::of(&flat_zone),
            count_within_one: fraction(|c| c.abs() <= 1),
            count_exact: fraction(|c| c == 0),
            locations_cdf: empirical_cdf(&flat_loc),
            zones_cdf: empirical_cdf(&flat_zone),
            runtime: MetricSummary::of(&runtime_ms),
            runtime_ms,
            locations_errors,
            zones_errors,
            count_errors,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::trace::write_text(path, &self.to_json())
    }
}

/// Calibration, tracking and evaluation in one call.
pub fn run_pipeline(
    calibration: &[CalibrationSession],
    training_truth: Option<&[GroundTruthFrame]>,
    test: &[RssFrame],
    truth: &[GroundTruthFrame],
    grid: &Grid,
    params: &ModelParams,
) -> Result<(Vec<FrameEstimate>, EvalReport)> {
    let fp = calibrate(calibration, grid, training_truth, params)?;
    let out = track(&fp, test, params)?;
    let report = EvalReport::build(&out.estimates, truth, grid, grid.center(), out.runtime_ms)
        .map_err(|e| e.in_stage("evaluation"))?;
    Ok((out.estimates, report))
}

/// Fails unless `truth` lines up with `frames` one-to-one.
pub fn check_aligned(frames: &[RssFrame], truth: &[GroundTruthFrame]) -> Result<()> {
    if frames.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: frames.len(),
            found: truth.len(),
        });
    }
    match frames.iter().zip(truth).find(|(f, t)| f.timestamp != t.timestamp) {
        Some((f, t)) => Err(Error::TimestampMismatch {
            estimate: f.timestamp,
            truth: t.timestamp,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::smooth_frames;
    use crate::simulator::{generate_calibration, generate_test, TestbedConfig, Trajectory};

    #[test]
    fn empty_trace_gives_empty_report() {
        let cfg = TestbedConfig {
            calibration_frames: 10,
            ..TestbedConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let cal = generate_calibration(&cfg).unwrap();
        let (est, report) = run_pipeline(&cal, None, &[], &[], &grid, &ModelParams::default()).unwrap();
        assert!(est.is_empty());
        assert_eq!(report.frames, 0);
        assert_eq!(report.locations.median, None);
        assert!(report.locations_cdf.is_empty());
    }

    #[test]
    fn online_smoothing_matches_batch() {
        let cfg = TestbedConfig {
            calibration_frames: 10,
            ..TestbedConfig::default()
        };
        let cal = generate_calibration(&cfg).unwrap();
        let fp = calibrate(&cal, &cfg.grid().unwrap(), None, &ModelParams::default()).unwrap();
        let tr = Trajectory::stationary("a", Point::new(3.0, 5.0), 0.0, 20.0);
        let (frames, _) = generate_test(&cfg, &[tr]).unwrap();
        let params = ModelParams::default();
        let batch = smooth_frames(&frames, params.q, params.alpha_trim).unwrap();
        let mut t = OnlineTracker::new(&fp, &params).unwrap();
        for (raw, want) in frames.iter().zip(&batch) {
            assert_eq!(&t.step(raw).unwrap().smoothed, want);
        }
    }

    #[test]
    fn stage_is_reported() {
        let cfg = TestbedConfig {
            calibration_frames: 10,
            ..TestbedConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let mut cal = generate_calibration(&cfg).unwrap();
        cal.pop();
        let err = run_pipeline(&cal, None, &[], &[], &grid, &ModelParams::default()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stage {
                    stage: "fingerprint",
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn report_reproducible() {
        let cfg = TestbedConfig {
            calibration_frames: 20,
            ..TestbedConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let cal = generate_calibration(&cfg).unwrap();
        let tr = Trajectory::stationary("a", Point::new(5.0, 5.0), 0.0, 30.0);
        let (frames, truth) = generate_test(&cfg, &[tr]).unwrap();
        let p = ModelParams::default();
        let (e1, mut r1) = run_pipeline(&cal, None, &frames, &truth, &grid, &p).unwrap();
        let (e2, mut r2) = run_pipeline(&cal, None, &frames, &truth, &grid, &p).unwrap();
        assert_eq!(e1, e2);
        r1.runtime_ms.clear();
        r2.runtime_ms.clear();
        r1.runtime = MetricSummary::of(&[]);
        r2.runtime = MetricSummary::of(&[]);
        assert_eq!(r1, r2);
        let cdf = &r1.locations_cdf;
        assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert_eq!(cdf.last().map(|c| c.1), Some(1.0));
        assert!(r1.to_json().contains("\"count_within_one\""));
    }
}
