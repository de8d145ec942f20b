//! Cross-calibrated fingerprint: per-location RSS histograms for the active
//! (entity present) and inactive states, plus the temporal prior.
//!
//! One calibration session per location suffices. A session recorded with a
//! single person standing at `x` feeds the active histograms of `x` and the
//! inactive histograms of every other location, so `n` sessions train all
//! `2n` per-stream models.

mod fit;
mod histogram;
mod persist;
mod temporal;

use std::collections::BTreeSet;

pub use fit::{default_search_grid, fit_params, LabeledSequence, ParamPoint};
pub use histogram::{smooth_histogram, RssHistogram, PROBABILITY_FLOOR};
pub use persist::{decode_fingerprint, encode_fingerprint, load_fingerprint, save_fingerprint, FORMAT_VERSION, MAGIC};
pub use temporal::{history_index, learn_temporal_priors, maps_from_ground_truth, TemporalPrior};

use crate::error::{Error, Result};
use crate::preprocess::SampleSummary;
use crate::types::{Grid, GridLocation, ModelParams, RssFrame, StreamId};

/// Smoothed calibration frames recorded with one person at `location`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSession {
    pub location: usize,
    pub frames: Vec<RssFrame>,
}

/// Histograms of one location, indexed like [`Fingerprint::streams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocationFingerprint {
    pub location: GridLocation,
    pub active: Vec<RssHistogram>,
    pub inactive: Vec<RssHistogram>,
}

impl LocationFingerprint {
    pub fn histogram(&self, stream: usize, state: bool) -> &RssHistogram {
        if state {
            &self.active[stream]
        } else {
            &self.inactive[stream]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    grid: Grid,
    streams: Vec<StreamId>,
    locations: Vec<LocationFingerprint>,
    temporal: TemporalPrior,
    params: ModelParams,
    offline_stats: Vec<SampleSummary>,
}

impl Fingerprint {
    pub(crate) fn from_parts(
        grid: Grid,
        streams: Vec<StreamId>,
        locations: Vec<LocationFingerprint>,
        temporal: TemporalPrior,
        params: ModelParams,
        offline_stats: Vec<SampleSummary>,
    ) -> Result<Self> {
        if locations.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: locations.len(),
            });
        }
        if offline_stats.len() != streams.len() {
            return Err(Error::LengthMismatch {
                expected: streams.len(),
                found: offline_stats.len(),
            });
        }
        for l in &locations {
            if l.active.len() != streams.len() || l.inactive.len() != streams.len() {
                return Err(Error::invalid("location histograms do not cover every stream"));
            }
        }
        Ok(Fingerprint {
            grid,
            streams,
            locations,
            temporal,
            params,
            offline_stats,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn streams(&self) -> &[StreamId] {
        &self.streams
    }

    pub fn stream_index(&self, id: &StreamId) -> Option<usize> {
        self.streams.binary_search(id).ok()
    }

    pub fn locations(&self) -> &[LocationFingerprint] {
        &self.locations
    }

    pub fn location(&self, index: usize) -> Result<&LocationFingerprint> {
        self.locations.get(index).ok_or(Error::LocationOutOfRange {
            index,
            n: self.locations.len(),
        })
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        self.grid.neighbors(index)
    }

    pub fn temporal(&self) -> &TemporalPrior {
        &self.temporal
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn offline_stats(&self) -> &[SampleSummary] {
        &self.offline_stats
    }

    pub fn set_temporal(&mut self, prior: TemporalPrior) {
        self.temporal = prior;
    }

    pub fn with_temporal(mut self, prior: TemporalPrior) -> Self {
        self.temporal = prior;
        self
    }

    pub fn set_params(&mut self, params: ModelParams) {
        self.params = params;
    }

    /// `(stream index, reading)` for every calibrated stream present in `frame`
    /// and accepted by `active`.
    pub(crate) fn usable_readings<'a>(
        &'a self,
        frame: &'a RssFrame,
        active: Option<&'a BTreeSet<StreamId>>,
    ) -> impl Iterator<Item = (usize, f64)> + 'a {
        frame.readings.iter().filter_map(move |(s, &v)| {
            if active.is_some_and(|a| !a.contains(s)) {
                return None;
            }
            self.stream_index(s).map(|i| (i, v))
        })
    }

    /// Sum over usable streams of `ln P(s_k | α_loc = state)`.
    pub fn log_likelihood(
        &self,
        loc: usize,
        state: bool,
        frame: &RssFrame,
        active: Option<&BTreeSet<StreamId>>,
    ) -> Result<f64> {
        let lf = self.location(loc)?;
        let mut any = false;
        let mut sum = 0.0;
        for (k, v) in self.usable_readings(frame, active) {
            any = true;
            sum += lf.histogram(k, state).probability(v).ln();
        }
        if !any {
            return Err(Error::NoUsableReadings(frame.timestamp));
        }
        Ok(sum)
    }
}

/// `P(s | α_loc = state)` as the product of per-stream histogram probabilities.
pub fn likelihood(
    fp: &Fingerprint,
    loc: usize,
    state: bool,
    frame: &RssFrame,
    active_streams: &BTreeSet<StreamId>,
) -> Result<f64> {
    let lf = fp.location(loc)?;
    let mut any = false;
    let mut product = 1.0;
    for (k, v) in fp.usable_readings(frame, Some(active_streams)) {
        any = true;
        product *= lf.histogram(k, state).probability(v);
    }
    if !any {
        return Err(Error::NoUsableReadings(frame.timestamp));
    }
    Ok(product)
}

/// Builds active/inactive histograms for every (location, stream).
///
/// The temporal prior starts uninformative; train it with
/// [`learn_temporal_priors`] and attach it with [`Fingerprint::with_temporal`].
pub fn build_fingerprint(sessions: &[CalibrationSession], grid: &Grid, params: &ModelParams) -> Result<Fingerprint> {
    params.validate()?;
    let n = grid.len();
    let mut by_location: Vec<Option<&CalibrationSession>> = vec![None; n];
    for s in sessions {
        let slot = by_location
            .get_mut(s.location)
            .ok_or(Error::LocationOutOfRange { index: s.location, n })?;
        if slot.is_some() {
            return Err(Error::invalid(format!("two sessions for location {}", s.location)));
        }
        if s.frames.is_empty() {
            return Err(Error::invalid(format!(
                "session at location {} has no frames",
                s.location
            )));
        }
        *slot = Some(s);
    }
    let sessions: Vec<&CalibrationSession> = by_location
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::invalid(format!("no session for location {i}"))))
        .collect::<Result<_>>()?;

    let streams: Vec<StreamId> = sessions
        .iter()
        .flat_map(|s| s.frames.iter().flat_map(|f| f.readings.keys().cloned()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let bw = params.hist_bin_width;
    let pad = (4.0 * params.hist_smooth_sigma / bw).ceil();

    let mut actives: Vec<Vec<RssHistogram>> = vec![Vec::with_capacity(streams.len()); n];
    let mut inactives: Vec<Vec<RssHistogram>> = vec![Vec::with_capacity(streams.len()); n];
    let mut offline_stats = Vec::with_capacity(streams.len());

    for stream in &streams {
        let mut stats = SampleSummary::default();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &sessions {
            for v in s.frames.iter().filter_map(|f| f.get(stream)) {
                stats.push(v);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let origin = ((lo / bw).floor() - pad) * bw;
        let bins = ((hi / bw).floor() + 1.0 + pad) as i64 - ((lo / bw).floor() - pad) as i64;
        let bins = bins as usize;

        let mut per_location = vec![vec![0u64; bins]; n];
        let mut total = vec![0u64; bins];
        for (loc, s) in sessions.iter().enumerate() {
            for v in s.frames.iter().filter_map(|f| f.get(stream)) {
                let b = (((v - origin) / bw).floor() as usize).min(bins - 1);
                per_location[loc][b] += 1;
                total[b] += 1;
            }
        }
        for loc in 0..n {
            let active = &per_location[loc];
            let inactive: Vec<u64> = total.iter().zip(active).map(|(t, a)| t - a).collect();
            actives[loc].push(smoothed_or_uniform(bw, origin, active, params.hist_smooth_sigma)?);
            inactives[loc].push(smoothed_or_uniform(bw, origin, &inactive, params.hist_smooth_sigma)?);
        }
        offline_stats.push(stats);
    }

    let locations = grid
        .locations()
        .iter()
        .zip(actives.into_iter().zip(inactives))
        .map(|(loc, (active, inactive))| LocationFingerprint {
            location: *loc,
            active,
            inactive,
        })
        .collect();

    Fingerprint::from_parts(
        grid.clone(),
        streams,
        locations,
        TemporalPrior::uninformative(),
        params.clone(),
        offline_stats,
    )
}

/// A state with no samples (the inactive state when `n = 1`, or a stream
/// missing from one session) gets a uniform, uninformative histogram.
fn smoothed_or_uniform(bw: f64, origin: f64, counts: &[u64], sigma: f64) -> Result<RssHistogram> {
    if counts.iter().all(|&c| c == 0) {
        let p = 1.0 / counts.len() as f64;
        return RssHistogram::from_parts(bw, origin, vec![p; counts.len()], 0);
    }
    smooth_histogram(&RssHistogram::from_counts(bw, origin, counts)?, sigma)
}
