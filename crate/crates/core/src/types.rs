//! Domain types shared by every stage of the pipeline.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of one (access point, monitoring point) stream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamId(String);

impl StreamId {
    /// Stream ids are written bare into trace files, so they may not contain
    /// whitespace, `=` or `#`.
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invalid("empty stream id"));
        }
        if id.chars().any(|c| c.is_whitespace() || c == '=' || c == '#') {
            return Err(Error::invalid(format!(
                "stream id {id:?} contains a reserved character"
            )));
        }
        Ok(StreamId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A 2-D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One discrete fingerprint location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLocation {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

impl GridLocation {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Regular `nx × ny` lattice of fingerprint locations with a 4-neighborhood.
///
/// Location `i` sits in column `i % nx` and row `i / nx`; rows run along `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    width: f64,
    height: f64,
    locations: Vec<GridLocation>,
    neighbors: Vec<Vec<usize>>,
}

impl Grid {
    /// Cell-centered lattice covering a `width × height` testbed.
    pub fn regular(width: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid needs at least one location"));
        }
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::invalid("testbed dimensions must be positive"));
        }
        let dx = width / nx as f64;
        let dy = height / ny as f64;
        let mut locations = Vec::with_capacity(nx * ny);
        let mut neighbors = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            for col in 0..nx {
                let index = row * nx + col;
                locations.push(GridLocation {
                    index,
                    x: (col as f64 + 0.5) * dx,
                    y: (row as f64 + 0.5) * dy,
                });
                let mut adj = Vec::with_capacity(4);
                if row > 0 {
                    adj.push(index - nx);
                }
                if col > 0 {
                    adj.push(index - 1);
                }
                if col + 1 < nx {
                    adj.push(index + 1);
                }
                if row + 1 < ny {
                    adj.push(index + nx);
                }
                neighbors.push(adj);
            }
        }
        Ok(Grid {
            nx,
            ny,
            width,
            height,
            locations,
            neighbors,
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    /// Smallest distance between adjacent locations.
    pub fn spacing(&self) -> f64 {
        (self.width / self.nx as f64).min(self.height / self.ny as f64)
    }

    pub fn locations(&self) -> &[GridLocation] {
        &self.locations
    }

    pub fn location(&self, index: usize) -> Result<&GridLocation> {
        self.locations.get(index).ok_or(Error::LocationOutOfRange {
            index,
            n: self.locations.len(),
        })
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.neighbors[index]
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        i < self.len() && self.neighbors[i].contains(&j)
    }

    /// Every unordered neighbor pair `(i, j)` with `i < j`, in index order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for (i, adj) in self.neighbors.iter().enumerate() {
            for &j in adj {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Index of the location closest to `p`; ties go to the lower index.
    pub fn nearest(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for loc in &self.locations {
            let d = loc.point().distance(&p);
            if d < best_d {
                best_d = d;
                best = loc.index;
            }
        }
        best
    }
}

/// One time-stamped vector of RSS readings in dBm. Streams without a reading are absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RssFrame {
    pub timestamp: f64,
    pub readings: BTreeMap<StreamId, f64>,
}

impl RssFrame {
    pub fn new(timestamp: f64) -> Self {
        RssFrame {
            timestamp,
            readings: BTreeMap::new(),
        }
    }

    pub fn with_reading(mut self, stream: StreamId, dbm: f64) -> Self {
        self.readings.insert(stream, dbm);
        self
    }

    pub fn get(&self, stream: &StreamId) -> Option<f64> {
        self.readings.get(stream).copied()
    }

    /// Copy of the frame keeping only the streams accepted by `keep`.
    pub fn restricted<F: Fn(&StreamId) -> bool>(&self, keep: F) -> RssFrame {
        RssFrame {
            timestamp: self.timestamp,
            readings: self
                .readings
                .iter()
                .filter(|(s, _)| keep(s))
                .map(|(s, v)| (s.clone(), *v))
                .collect(),
        }
    }
}

/// Binary activation vector over the grid at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    pub timestamp: f64,
    pub active: Vec<bool>,
}

impl EnvironmentMap {
    pub fn inactive(timestamp: f64, n: usize) -> Self {
        EnvironmentMap {
            timestamp,
            active: vec![false; n],
        }
    }

    pub fn from_active(timestamp: f64, active: Vec<bool>) -> Self {
        EnvironmentMap { timestamp, active }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().enumerate().filter_map(|(i, &a)| a.then_some(i))
    }
}

/// One ground-truth entity position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPosition {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

impl EntityPosition {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthFrame {
    pub timestamp: f64,
    pub entities: Vec<EntityPosition>,
}

/// Order of the per-location temporal Markov chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HmmOrder {
    First,
    Second,
}

/// How the neighbor contrast in the spatial term is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContrastMode {
    /// Difference of per-frame min-max normalized presence log-likelihoods.
    Normalized,
    /// Raw difference of the presence likelihood products.
    Literal,
}

/// Model and pipeline parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Temporal prior weight, in (0, 1].
    pub beta: f64,
    /// Spatial coherence strength, > 0.
    pub gamma: f64,
    /// Likelihood weight, in (0, 1].
    pub delta: f64,
    /// Smoothing window length.
    pub q: usize,
    /// Trim fraction of the smoothing filter, in [0, 0.5).
    pub alpha_trim: f64,
    pub anova_significance: f64,
    /// Number of recent online frames compared against calibration data.
    pub anova_window: usize,
    /// Whether streams failing the ANOVA test are dropped while tracking.
    /// Off by default: a person standing near a link shifts that stream's
    /// mean as much as an environment change does, so the test rejects the
    /// most informative streams.
    pub stream_filter: bool,
    pub hist_bin_width: f64,
    pub hist_smooth_sigma: f64,
    /// Number of environment maps merged before clustering.
    pub w: usize,
    /// Clustering inconsistency threshold.
    pub r: f64,
    /// Links shorter than this (meters) are never split.
    pub min_split_distance: f64,
    pub hmm_order: HmmOrder,
    pub contrast: ContrastMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta: 0.5,
            gamma: 0.65,
            delta: 1.0,
            q: 5,
            alpha_trim: 0.2,
            anova_significance: 0.05,
            anova_window: 60,
            stream_filter: false,
            hist_bin_width: 1.0,
            hist_smooth_sigma: 2.0,
            w: 13,
            r: 0.25,
            min_split_distance: 4.0,
            hmm_order: HmmOrder::Second,
            contrast: ContrastMode::Normalized,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("parameter out of range: {what}")))
            }
        };
        check(self.beta > 0.0 && self.beta <= 1.0, "beta must be in (0, 1]")?;
        check(self.gamma > 0.0 && self.gamma.is_finite(), "gamma must be > 0")?;
        check(self.delta > 0.0 && self.delta <= 1.0, "delta must be in (0, 1]")?;
        check(self.q >= 1, "q must be >= 1")?;
        check((0.0..0.5).contains(&self.alpha_trim), "alpha_trim must be in [0, 0.5)")?;
        check(
            self.anova_significance > 0.0 && self.anova_significance < 1.0,
            "anova_significance must be in (0, 1)",
        )?;
        check(self.anova_window >= 2, "anova_window must be >= 2")?;
        check(
            self.hist_bin_width > 0.0 && self.hist_bin_width.is_finite(),
            "hist_bin_width must be > 0",
        )?;
        check(
            self.hist_smooth_sigma > 0.0 && self.hist_smooth_sigma.is_finite(),
            "hist_smooth_sigma must be > 0",
        )?;
        check(self.w >= 1, "w must be >= 1")?;
        check(self.r > 0.0 && self.r.is_finite(), "r must be > 0")?;
        check(
            self.min_split_distance >= 0.0 && self.min_split_distance.is_finite(),
            "min_split_distance must be >= 0",
        )?;
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
        }
        match key {
            "beta" => self.beta = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "q" => self.q = num(key, value)?,
            "alpha_trim" | "alpha" => self.alpha_trim = num(key, value)?,
            "anova_significance" => self.anova_significance = num(key, value)?,
            "anova_window" => self.anova_window = num(key, value)?,
            "stream_filter" => self.stream_filter = num(key, value)?,
            "hist_bin_width" => self.hist_bin_width = num(key, value)?,
            "hist_smooth_sigma" => self.hist_smooth_sigma = num(key, value)?,
            "w" => self.w = num(key, value)?,
            "r" => self.r = num(key, value)?,
            "min_split_distance" => self.min_split_distance = num(key, value)?,
            "hmm_order" | "o" => {
                self.hmm_order = match value {
                    "1" => HmmOrder::First,
                    "2" => HmmOrder::Second,
                    _ => return Err(Error::invalid(format!("hmm_order must be 1 or 2, got {value}"))),
                }
            }
            "contrast" => {
                self.contrast = match value {
                    "normalized" => ContrastMode::Normalized,
                    "literal" => ContrastMode::Literal,
                    _ => return Err(Error::invalid(format!("unknown contrast mode {value}"))),
                }
            }
            _ => return Err(Error::invalid(format!("unknown parameter {key}"))),
        }
        Ok(())
    }

    /// Parses `key=value` and applies it.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got {kv:?}")))?;
        self.set(k.trim(), v.trim())
    }
}
