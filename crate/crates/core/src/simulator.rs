//! Synthetic testbed: RSS traces and ground truth for calibration, prior
//! training and tracking.
//!
//! Each stream is the straight segment between an access point and a
//! monitoring point. A person at distance `d` from the segment attenuates it
//! by `peak·exp(−d²/2ρ²)`; attenuations of several people add up.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fingerprint::CalibrationSession;
use crate::types::{EntityPosition, Grid, GroundTruthFrame, Point, RssFrame, StreamId};

/// RNG stream ids; every generator draws from its own stream of the seed.
const STREAM_CALIBRATION: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_TRAINING: u64 = 3;
const STREAM_TRAJECTORY: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TestbedConfig {
    pub width: f64,
    pub height: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub ap_positions: Vec<Point>,
    pub mp_positions: Vec<Point>,
    /// Per-stream level with nobody present; derived from link length if empty.
    pub baseline_rss: Vec<f64>,
    pub noise_sigma: f64,
    pub impulse_prob: f64,
    pub impulse_magnitude: f64,
    pub attenuation_peak: f64,
    pub attenuation_radius: f64,
    pub seed: u64,
    pub calibration_frames: usize,
    pub test_frames: usize,
    pub training_frames: usize,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        TestbedConfig {
            width: 10.0,
            height: 10.0,
            grid_nx: 5,
            grid_ny: 5,
            ap_positions: vec![Point::new(0.0, 9.0), Point::new(0.0, 3.0), Point::new(2.0, 0.0)],
            mp_positions: vec![Point::new(10.0, 9.5), Point::new(10.0, 2.0)],
            baseline_rss: Vec::new(),
            noise_sigma: 2.0,
            impulse_prob: 0.02,
            impulse_magnitude: 25.0,
            attenuation_peak: 8.0,
            attenuation_radius: 1.5,
            seed: 1,
            calibration_frames: 60,
            test_frames: 300,
            training_frames: 600,
        }
    }
}

fn parse_points(v: &str) -> Option<Vec<Point>> {
    v.split(';')
        .map(|p| {
            let (x, y) = p.split_once(',')?;
            Some(Point::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
        })
        .collect()
}

fn format_points(ps: &[Point]) -> String {
    ps.iter()
        .map(|p| format!("{},{}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(";")
}

impl TestbedConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::regular(self.width, self.height, self.grid_nx, self.grid_ny)
    }

    pub fn stream_count(&self) -> usize {
        self.ap_positions.len() * self.mp_positions.len()
    }

    /// `(id, ap, mp)` per stream, AP-major.
    pub fn streams(&self) -> Vec<(StreamId, Point, Point)> {
        let mut out = Vec::with_capacity(self.stream_count());
        for (i, ap) in self.ap_positions.iter().enumerate() {
            for (j, mp) in self.mp_positions.iter().enumerate() {
                let id = StreamId::new(format!("ap{i}-mp{j}")).expect("valid stream id");
                out.push((id, *ap, *mp));
            }
        }
        out
    }

    /// Baseline per stream, in [`streams`](Self::streams) order.
    pub fn baselines(&self) -> Vec<f64> {
        if !self.baseline_rss.is_empty() {
            return self.baseline_rss.clone();
        }
        self.streams()
            .iter()
            .map(|(_, a, m)| -40.0 - 20.0 * a.distance(m).max(1.0).log10())
            .collect()
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if !(self.width > 0.0 && self.height > 0.0) {
            return fail("testbed width and height must be > 0".into());
        }
        self.grid()?;
        if self.stream_count() == 0 {
            return fail("need at least one AP and one MP".into());
        }
        if let Some(p) = self
            .ap_positions
            .iter()
            .chain(&self.mp_positions)
            .find(|p| !self.contains(**p))
        {
            return fail(format!("node ({}, {}) outside the testbed", p.x, p.y));
        }
        if !self.baseline_rss.is_empty() && self.baseline_rss.len() != self.stream_count() {
            return fail(format!(
                "baseline_rss has {} values for {} streams",
                self.baseline_rss.len(),
                self.stream_count()
            ));
        }
        if self.baseline_rss.iter().any(|v| !v.is_finite()) {
            return fail("baseline_rss must be finite".into());
        }
        if !(self.noise_sigma >= 0.0 && self.impulse_magnitude >= 0.0 && self.attenuation_peak >= 0.0) {
            return fail("noise, impulse and attenuation levels must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.impulse_prob) {
            return fail("impulse_prob must be in [0, 1]".into());
        }
        if self.attenuation_radius.is_nan() || self.attenuation_radius <= 0.0 {
            return fail("attenuation_radius must be > 0".into());
        }
        if self.calibration_frames == 0 {
            return fail("calibration_frames must be >= 1".into());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::invalid(format!("bad value for {key}: {v:?}")))
        }
        match key {
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "grid_nx" => self.grid_nx = num(key, value)?,
            "grid_ny" => self.grid_ny = num(key, value)?,
            "ap_positions" | "mp_positions" => {
                let pts = parse_points(value).ok_or_else(|| Error::invalid(format!("bad point list for {key}")))?;
                if key == "ap_positions" {
                    self.ap_positions = pts;
                } else {
                    self.mp_positions = pts;
                }
            }
            "baseline_rss" => {
                self.baseline_rss = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|v| num(key, v.trim())).collect::<Result<_>>()?
                }
            }
            "noise_sigma" => self.noise_sigma = num(key, value)?,
            "impulse_prob" => self.impulse_prob = num(key, value)?,
            "impulse_magnitude" => self.impulse_magnitude = num(key, value)?,
            "attenuation_peak" => self.attenuation_peak = num(key, value)?,
            "attenuation_radius" => self.attenuation_radius = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "calibration_frames" => self.calibration_frames = num(key, value)?,
            "test_frames" => self.test_frames = num(key, value)?,
            "training_frames" => self.training_frames = num(key, value)?,
            _ => return Err(Error::invalid(format!("unknown testbed key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TestbedConfig::default();
        for (line, content) in crate::trace::content_lines(text) {
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| Error::format(line, "expected key=value"))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::format(line, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width={}", self.width);
        let _ = writeln!(s, "height={}", self.height);
        let _ = writeln!(s, "grid_nx={}", self.grid_nx);
        let _ = writeln!(s, "grid_ny={}", self.grid_ny);
        let _ = writeln!(s, "ap_positions={}", format_points(&self.ap_positions));
        let _ = writeln!(s, "mp_positions={}", format_points(&self.mp_positions));
        let b: Vec<String> = self.baseline_rss.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "baseline_rss={}", b.join(","));
        let _ = writeln!(s, "noise_sigma={}", self.noise_sigma);
        let _ = writeln!(s, "impulse_prob={}", self.impulse_prob);
        let _ = writeln!(s, "impulse_magnitude={}", self.impulse_magnitude);
        let _ = writeln!(s, "attenuation_peak={}", self.attenuation_peak);
        let _ = writeln!(s, "attenuation_radius={}", self.attenuation_radius);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "calibration_frames={}", self.calibration_frames);
        let _ = writeln!(s, "test_frames={}", self.test_frames);
        let _ = writeln!(s, "training_frames={}", self.training_frames);
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::trace::write_text(path, &self.format())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Distance from `p` to the segment `a`–`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// Noise-free attenuation of segment `a`–`b` by people at `entities`.
pub fn attenuation(entities: &[Point], a: Point, b: Point, cfg: &TestbedConfig) -> f64 {
    let two_r2 = 2.0 * cfg.attenuation_radius * cfg.attenuation_radius;
    entities
        .iter()
        .map(|&p| {
            let d = segment_distance(p, a, b);
            cfg.attenuation_peak * (-d * d / two_r2).exp()
        })
        .sum()
}

/// One RSS frame with people at `entities`.
pub fn rss_model<R: Rng>(entities: &[Point], cfg: &TestbedConfig, timestamp: f64, rng: &mut R) -> RssFrame {
    let noise = (cfg.noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.noise_sigma).expect("finite sigma"));
    let mut frame = RssFrame::new(timestamp);
    for ((id, a, b), base) in cfg.streams().into_iter().zip(cfg.baselines()) {
        let mut v = base - attenuation(entities, a, b, cfg);
        if let Some(n) = &noise {
            v += n.sample(rng);
        }
        if cfg.impulse_prob > 0.0 && rng.random_bool(cfg.impulse_prob) {
            v += if rng.random_bool(0.5) {
                cfg.impulse_magnitude
            } else {
                -cfg.impulse_magnitude
            };
        }
        frame.readings.insert(id, v);
    }
    frame
}

/// One raw session per grid location with a single person standing there.
pub fn generate_calibration(cfg: &TestbedConfig) -> Result<Vec<CalibrationSession>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut rng = cfg.rng(STREAM_CALIBRATION);
    Ok(grid
        .locations()
        .iter()
        .map(|loc| CalibrationSession {
            location: loc.index,
            frames: (0..cfg.calibration_frames)
                .map(|t| rss_model(&[loc.point()], cfg, t as f64, &mut rng))
                .collect(),
        })
        .collect())
}

/// Piecewise-linear path; the entity exists between its first and last waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub waypoints: Vec<(f64, Point)>,
}

impl Trajectory {
    pub fn stationary(id: impl Into<String>, p: Point, start: f64, end: f64) -> Self {
        Trajectory {
            id: id.into(),
            waypoints: vec![(start, p), (end, p)],
        }
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.waypoints.first()?.0, self.waypoints.last()?.0))
    }

    pub fn position_at(&self, t: f64) -> Option<Point> {
        let (start, end) = self.span()?;
        if t < start || t > end {
            return None;
        }
        let k = self.waypoints.partition_point(|w| w.0 <= t);
        if k >= self.waypoints.len() {
            return Some(self.waypoints[self.waypoints.len() - 1].1);
        }
        let (t0, p0) = self.waypoints[k - 1];
        let (t1, p1) = self.waypoints[k];
        let f = (t - t0) / (t1 - t0);
        Some(Point::new(p0.x + f * (p1.x - p0.x), p0.y + f * (p1.y - p0.y)))
    }

    fn validate(&self, cfg: &TestbedConfig) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::invalid(format!("trajectory {} has no waypoints", self.id)));
        }
        if self
            .waypoints
            .windows(2)
            .any(|w| w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::invalid(format!("trajectory {} times not increasing", self.id)));
        }
        if self.waypoints.iter().any(|w| !cfg.contains(w.1) || !w.0.is_finite()) {
            return Err(Error::invalid(format!("trajectory {} leaves the testbed", self.id)));
        }
        Ok(())
    }
}

fn truth_at(trajectories: &[Trajectory], t: f64) -> GroundTruthFrame {
    GroundTruthFrame {
        timestamp: t,
        entities: trajectories
            .iter()
            .filter_map(|tr| {
                tr.position_at(t).map(|p| EntityPosition {
                    id: tr.id.clone(),
                    x: p.x,
                    y: p.y,
                })
            })
            .collect(),
    }
}

/// 1 Hz frames over the union of the trajectories' time spans. With no
/// trajectories, `test_frames` frames of an empty area.
pub fn generate_test(
    cfg: &TestbedConfig,
    trajectories: &[Trajectory],
) -> Result<(Vec<RssFrame>, Vec<GroundTruthFrame>)> {
    cfg.validate()?;
    for tr in trajectories {
        tr.validate(cfg)?;
    }
    let (start, count) = match trajectories
        .iter()
        .filter_map(Trajectory::span)
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    {
        Some((s, e)) => (s, (e - s).floor() as usize + 1),
        None => (0.0, cfg.test_frames),
    };
    let mut rng = cfg.rng(STREAM_TEST);
    let mut frames = Vec::with_capacity(count);
    let mut truth = Vec::with_capacity(count);
    for k in 0..count {
        let t = start + k as f64;
        let gt = truth_at(trajectories, t);
        let pts: Vec<Point> = gt.entities.iter().map(EntityPosition::point).collect();
        frames.push(rss_model(&pts, cfg, t, &mut rng));
        truth.push(gt);
    }
    Ok((frames, truth))
}

/// Random walks for `entities` people over `frames` seconds: straight legs
/// between uniformly drawn waypoints at walking speed.
pub fn random_trajectories<R: Rng>(
    cfg: &TestbedConfig,
    entities: usize,
    frames: usize,
    rng: &mut R,
) -> Vec<Trajectory> {
    let end = frames.saturating_sub(1) as f64;
    let random_point = |rng: &mut R| Point::new(rng.random_range(0.0..=cfg.width), rng.random_range(0.0..=cfg.height));
    (0..entities)
        .map(|e| {
            let mut t = 0.0;
            let mut p = random_point(rng);
            let mut waypoints = vec![(t, p)];
            while t < end {
                let q = random_point(rng);
                let speed = rng.random_range(0.5..1.2);
                let pause = rng.random_range(0.0..10.0);
                if pause > 0.0 {
                    t += pause;
                    waypoints.push((t, p));
                }
                t += (p.distance(&q) / speed).max(1.0);
                waypoints.push((t, q));
                p = q;
            }
            Trajectory {
                id: format!("e{e}"),
                waypoints,
            }
        })
        .collect()
}

/// Test trace of `entities` people walking for `test_frames` seconds, drawn
/// from the trajectory stream of the seed.
pub fn walking_scenario(cfg: &TestbedConfig, entities: usize) -> Result<(Vec<RssFrame>, Vec<GroundTruthFrame>)> {
    cfg.validate()?;
    if entities == 0 {
        return generate_test(cfg, &[]);
    }
    let mut rng = cfg.rng(STREAM_TRAJECTORY);
    let trs = random_trajectories(cfg, entities, cfg.test_frames, &mut rng);
    let (mut frames, mut truth) = generate_test(cfg, &trs)?;
    frames.truncate(cfg.test_frames);
    truth.truncate(cfg.test_frames);
    Ok((frames, truth))
}

/// Ground-truth walks used to label maps for temporal prior training:
/// one to three people moving over `training_frames` seconds.
pub fn generate_training_truth(cfg: &TestbedConfig) -> Result<Vec<GroundTruthFrame>> {
    cfg.validate()?;
    let mut rng = cfg.rng(STREAM_TRAINING);
    let mut out = Vec::with_capacity(cfg.training_frames);
    let segment = 100;
    let mut t0 = 0usize;
    while t0 < cfg.training_frames {
        let len = segment.min(cfg.training_frames - t0);
        let people = rng.random_range(1..=3);
        let trs = random_trajectories(cfg, people, len, &mut rng);
        for k in 0..len {
            let mut gt = truth_at(&trs, k as f64);
            gt.timestamp = (t0 + k) as f64;
            out.push(gt);
        }
        t0 += len;
    }
    Ok(out)
}

/// `count` stationary people at distinct grid locations far apart from each other.
pub fn random_static_positions(
    cfg: &TestbedConfig,
    count: usize,
    min_separation: f64,
    seed_offset: u64,
) -> Result<Vec<Point>> {
    let mut rng = cfg.rng(STREAM_TRAJECTORY + seed_offset);
    let grid = cfg.grid()?;
    for _ in 0..10_000 {
        let pts: Vec<Point> = (0..count)
            .map(|_| grid.locations()[rng.random_range(0..grid.len())].point())
            .collect();
        let ok = pts
            .iter()
            .enumerate()
            .all(|(i, p)| pts[i + 1..].iter().all(|q| p.distance(q) >= min_separation));
        if ok {
            return Ok(pts);
        }
    }
    Err(Error::invalid(format!(
        "cannot place {count} people {min_separation} m apart"
    )))
}
