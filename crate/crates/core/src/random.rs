//! Random small energy-minimization instances built from real fingerprints.
//! Used by the solver oracle tests and the `verify` command.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::energy::FrameEvidence;
use crate::error::Result;
use crate::fingerprint::{build_fingerprint, CalibrationSession, Fingerprint, TemporalPrior};
use crate::types::{ContrastMode, EnvironmentMap, Grid, HmmOrder, ModelParams, RssFrame, StreamId};

#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub nx: usize,
    pub ny: usize,
    pub max_streams: usize,
    pub frames_per_session: usize,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            nx: 3,
            ny: 4,
            max_streams: 4,
            frames_per_session: 12,
        }
    }
}

impl InstanceSpec {
    /// Random grid shape with at most `max_n` locations.
    pub fn random_shape<R: Rng>(rng: &mut R, max_n: usize) -> Self {
        let nx = rng.random_range(1..=max_n);
        let ny = rng.random_range(1..=max_n / nx);
        InstanceSpec {
            nx,
            ny,
            ..InstanceSpec::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub fingerprint: Fingerprint,
    pub params: ModelParams,
    pub frame: RssFrame,
    pub evidence: FrameEvidence,
    pub prev: EnvironmentMap,
    pub prev_prev: EnvironmentMap,
}

pub fn random_map<R: Rng>(rng: &mut R, n: usize, timestamp: f64) -> EnvironmentMap {
    EnvironmentMap::from_active(timestamp, (0..n).map(|_| rng.random_bool(0.5)).collect())
}

/// Random params, fingerprint, temporal prior, frame and history.
pub fn random_instance<R: Rng>(rng: &mut R, spec: &InstanceSpec) -> Result<Instance> {
    let grid = Grid::regular(2.0 * spec.nx as f64, 2.0 * spec.ny as f64, spec.nx, spec.ny)?;
    let n = grid.len();
    let k = rng.random_range(1..=spec.max_streams.max(1));
    let streams: Vec<StreamId> = (0..k).map(|i| StreamId::new(format!("s{i}"))).collect::<Result<_>>()?;
    let baseline: Vec<f64> = (0..k).map(|_| rng.random_range(-75.0..-45.0)).collect();
    let spread = rng.random_range(0.5..4.0);
    let noise = Normal::new(0.0, spread).expect("positive sd");

    let sessions: Vec<CalibrationSession> = (0..n)
        .map(|loc| {
            let shift: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
            CalibrationSession {
                location: loc,
                frames: (0..spec.frames_per_session)
                    .map(|t| {
                        let mut f = RssFrame::new(t as f64);
                        for (s, (b, d)) in streams.iter().zip(baseline.iter().zip(&shift)) {
                            f.readings.insert(s.clone(), b - d + noise.sample(rng));
                        }
                        f
                    })
                    .collect(),
            }
        })
        .collect();

    let params = ModelParams {
        beta: rng.random_range(0.05..=1.0),
        gamma: rng.random_range(0.1..5.0),
        delta: rng.random_range(0.05..=1.0),
        hmm_order: if rng.random_bool(0.5) {
            HmmOrder::Second
        } else {
            HmmOrder::First
        },
        contrast: if rng.random_bool(0.8) {
            ContrastMode::Normalized
        } else {
            ContrastMode::Literal
        },
        ..ModelParams::default()
    };
    let counts = std::array::from_fn(|_| [rng.random_range(0..60), rng.random_range(0..60)]);
    let fingerprint = build_fingerprint(&sessions, &grid, &params)?.with_temporal(TemporalPrior::from_counts(counts));

    let mut frame = RssFrame::new(rng.random_range(0.0..1e4));
    for (i, s) in streams.iter().enumerate() {
        // keep at least one reading
        if i == 0 || rng.random_bool(0.8) {
            frame
                .readings
                .insert(s.clone(), baseline[i] + rng.random_range(-20.0..8.0));
        }
    }
    let evidence = FrameEvidence::compute(&fingerprint, &frame, None, params.contrast)?;
    let prev = random_map(rng, n, frame.timestamp - 1.0);
    let prev_prev = random_map(rng, n, frame.timestamp - 2.0);
    Ok(Instance {
        fingerprint,
        params,
        frame,
        evidence,
        prev,
        prev_prev,
    })
}
