//! Window merging, hierarchical clustering and entity estimation.
//!
//! Candidate locations (active in any of the last `w` maps) are clustered
//! agglomeratively with centroid linkage. The dendrogram is then cut top-down:
//! a merge is undone when its inconsistency coefficient exceeds `r` and its
//! height exceeds a minimum separation, recursively in each half.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EnvironmentMap, Grid, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub location: usize,
    pub point: Point,
    /// Maps in the window in which the location was active.
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    pub points: Vec<Candidate>,
}

impl CandidateSet {
    pub fn from_points(points: impl IntoIterator<Item = (Point, u32)>) -> Self {
        CandidateSet {
            points: points
                .into_iter()
                .enumerate()
                .map(|(i, (point, weight))| Candidate {
                    location: i,
                    point,
                    weight,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Counts, per location, how many of `maps` mark it active.
pub fn merge_window<'a>(maps: impl IntoIterator<Item = &'a EnvironmentMap>, grid: &Grid) -> Result<CandidateSet> {
    let counts = window_counts(maps, grid.len())?;
    Ok(CandidateSet {
        points: grid
            .locations()
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .map(|(loc, weight)| Candidate {
                location: loc.index,
                point: loc.point(),
                weight,
            })
            .collect(),
    })
}

/// Per-location activation counts over `maps`.
pub fn window_counts<'a>(maps: impl IntoIterator<Item = &'a EnvironmentMap>, n: usize) -> Result<Vec<u32>> {
    let mut counts = vec![0u32; n];
    for m in maps {
        if m.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: m.len(),
            });
        }
        for i in m.active_indices() {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// One agglomeration step. Leaves are `0..m`; link `k` creates node `m + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: usize,
    pub links: Vec<Link>,
}

impl Dendrogram {
    fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.leaves)
            .map(|k| (self.links[k].left, self.links[k].right))
    }

    /// Height of `node`; leaves sit at zero.
    fn height(&self, node: usize) -> f64 {
        node.checked_sub(self.leaves).map_or(0.0, |k| self.links[k].height)
    }

    fn leaves_under(&self, node: usize, out: &mut Vec<usize>) {
        match self.children(node) {
            None => out.push(node),
            Some((l, r)) => {
                self.leaves_under(l, out);
                self.leaves_under(r, out);
            }
        }
    }
}

/// Centroid linkage on unweighted points; the closest pair of clusters is
/// merged first, ties going to the smallest `(i, j)` node pair.
pub fn linkage(points: &[Point]) -> Dendrogram {
    let m = points.len();
    // (node id, centroid, size)
    let mut live: Vec<(usize, Point, usize)> = points.iter().enumerate().map(|(i, p)| (i, *p, 1)).collect();
    let mut links = Vec::with_capacity(m.saturating_sub(1));
    while live.len() > 1 {
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..live.len() {
            for b in a + 1..live.len() {
                let d = live[a].1.distance(&live[b].1);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (height, a, b) = best;
        let (ia, ca, na) = live[a];
        let (ib, cb, nb) = live[b];
        let size = na + nb;
        let centroid = Point::new(
            (ca.x * na as f64 + cb.x * nb as f64) / size as f64,
            (ca.y * na as f64 + cb.y * nb as f64) / size as f64,
        );
        links.push(Link {
            left: ia,
            right: ib,
            height,
            size,
        });
        live.remove(b);
        live[a] = (m + links.len() - 1, centroid, size);
        // node ids grow monotonically, so keep `live` sorted by id
        let merged = live.remove(a);
        live.push(merged);
    }
    Dendrogram { leaves: m, links }
}

/// Inconsistency coefficient of every link.
///
/// Each link is compared with itself and its two children, a leaf child
/// counting as a zero-height link: `(h − mean) / std` with the sample
/// standard deviation, and 0 when that deviation is 0.
pub fn inconsistency(d: &Dendrogram) -> Vec<f64> {
    d.links
        .iter()
        .map(|l| {
            let hs = [l.height, d.height(l.left), d.height(l.right)];
            let mean = hs.iter().sum::<f64>() / 3.0;
            let var = hs.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / 2.0;
            let sd = var.sqrt();
            if sd > 0.0 {
                (l.height - mean) / sd
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the candidate set, ascending.
    pub members: Vec<usize>,
    /// Weight-averaged position of the members.
    pub centroid: Point,
}

/// Splits the candidates into clusters.
///
/// A merge is split when its inconsistency exceeds `r` and its height exceeds
/// `min_split_distance`; clusters come out in dendrogram order, left first.
pub fn hierarchical_cluster(candidates: &CandidateSet, r: f64, min_split_distance: f64) -> Result<Vec<Cluster>> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::invalid(format!("r must be > 0, got {r}")));
    }
    if min_split_distance.is_nan() || min_split_distance < 0.0 {
        return Err(Error::invalid("min_split_distance must be >= 0"));
    }
    let m = candidates.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let points: Vec<Point> = candidates.points.iter().map(|c| c.point).collect();
    let dendro = linkage(&points);
    let coef = inconsistency(&dendro);

    let mut clusters = Vec::new();
    let mut stack = vec![m + dendro.links.len() - 1];
    while let Some(node) = stack.pop() {
        if let Some((l, rt)) = dendro.children(node) {
            let k = node - m;
            if coef[k] > r && dendro.links[k].height > min_split_distance {
                stack.push(rt);
                stack.push(l);
                continue;
            }
        }
        let mut members = Vec::new();
        dendro.leaves_under(node, &mut members);
        members.sort_unstable();
        clusters.push(Cluster {
            centroid: weighted_centroid(candidates, &members),
            members,
        });
    }
    Ok(clusters)
}

fn weighted_centroid(c: &CandidateSet, members: &[usize]) -> Point {
    let (mut x, mut y, mut w) = (0.0, 0.0, 0.0);
    for &i in members {
        let p = &c.points[i];
        let wi = f64::from(p.weight);
        x += wi * p.point.x;
        y += wi * p.point.y;
        w += wi;
    }
    Point::new(x / w, y / w)
}

/// Estimated entities for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEstimate {
    pub timestamp: f64,
    pub entities: Vec<Point>,
}

impl FrameEstimate {
    pub fn m_hat(&self) -> usize {
        self.entities.len()
    }
}

pub fn estimate_entities(clusters: &[Cluster], timestamp: f64) -> FrameEstimate {
    FrameEstimate {
        timestamp,
        entities: clusters.iter().map(|c| c.centroid).collect(),
    }
}
