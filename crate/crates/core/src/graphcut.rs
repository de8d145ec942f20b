//! Two-terminal cut graph for the energy and its exact minimization.
//!
//! Node `x` is linked `source → x` with its inactive cost and `x → sink` with
//! its active cost. A cut that leaves `x` with the source pays `x → sink`, so
//! source-side nodes are ACTIVE and sink-side nodes INACTIVE; under this
//! labeling the cut cost equals the energy of the map.

use std::fmt::Write as _;

use crate::energy::{check_regular, pairwise_energy, total_energy, unary_energy, FrameEvidence};
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::maxflow::{MaxFlowGraph, Segment};
use crate::types::{EnvironmentMap, ModelParams};

/// Largest problem [`brute_force_map`] will enumerate.
pub const BRUTE_FORCE_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CutGraph {
    pub timestamp: f64,
    /// `source → x`: cost of `α_x = 0`.
    pub source_tedge: Vec<f64>,
    /// `x → sink`: cost of `α_x = 1`.
    pub sink_tedge: Vec<f64>,
    /// Neighbor pairs `(i, j, w)`, `i < j`, charged in both directions.
    pub n_edges: Vec<(usize, usize, f64)>,
}

impl CutGraph {
    pub fn len(&self) -> usize {
        self.source_tedge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_tedge.is_empty()
    }

    /// Cost of the cut induced by `map` (active nodes on the source side).
    pub fn cut_cost(&self, map: &EnvironmentMap) -> f64 {
        let mut c = 0.0;
        for (i, &a) in map.active.iter().enumerate() {
            c += if a { self.sink_tedge[i] } else { self.source_tedge[i] };
        }
        for &(i, j, w) in &self.n_edges {
            if map.active[i] != map.active[j] {
                c += w;
            }
        }
        c
    }

    /// Text dump: `tedge <i> <src_w> <sink_w>` then `nedge <i> <j> <w>` lines.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for i in 0..self.len() {
            let _ = writeln!(s, "tedge {i} {} {}", self.source_tedge[i], self.sink_tedge[i]);
        }
        for &(i, j, w) in &self.n_edges {
            let _ = writeln!(s, "nedge {i} {j} {w}");
        }
        s
    }

    /// Parses [`dump`](Self::dump) output; `t-edges` must be listed densely.
    pub fn parse_dump(text: &str) -> Result<CutGraph> {
        let mut g = CutGraph {
            timestamp: 0.0,
            source_tedge: Vec::new(),
            sink_tedge: Vec::new(),
            n_edges: Vec::new(),
        };
        for (line, content) in crate::trace::content_lines(text) {
            let tok: Vec<&str> = content.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                tok.get(k)
                    .and_then(|t| t.parse::<f64>().ok())
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| Error::format(line, format!("bad field {k}")))
            };
            let idx = |k: usize| -> Result<usize> {
                tok.get(k)
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Error::format(line, format!("bad index {k}")))
            };
            match tok.first().copied() {
                Some("tedge") if tok.len() == 4 => {
                    if idx(1)? != g.source_tedge.len() {
                        return Err(Error::format(line, "t-edges out of order"));
                    }
                    g.source_tedge.push(num(2)?);
                    g.sink_tedge.push(num(3)?);
                }
                Some("nedge") if tok.len() == 4 => {
                    let (i, j) = (idx(1)?, idx(2)?);
                    if i >= j || j >= g.source_tedge.len() {
                        return Err(Error::format(line, "n-edge endpoints invalid"));
                    }
                    g.n_edges.push((i, j, num(3)?));
                }
                _ => return Err(Error::format(line, "expected tedge or nedge record")),
            }
        }
        Ok(g)
    }
}

fn check_history(
    fp: &Fingerprint,
    ev: &FrameEvidence,
    prev: &EnvironmentMap,
    prev_prev: &EnvironmentMap,
) -> Result<()> {
    let n = fp.len();
    for len in [ev.len(), prev.len(), prev_prev.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

/// Graph whose minimum cut is the minimum-energy map.
pub fn build_cut_graph(
    ev: &FrameEvidence,
    prev: &EnvironmentMap,
    prev_prev: &EnvironmentMap,
    fp: &Fingerprint,
    params: &ModelParams,
) -> Result<CutGraph> {
    check_history(fp, ev, prev, prev_prev)?;
    debug_assert!(check_regular(fp, ev, params));
    let n = fp.len();
    let mut source_tedge = Vec::with_capacity(n);
    let mut sink_tedge = Vec::with_capacity(n);
    for i in 0..n {
        let h = (prev.active[i], prev_prev.active[i]);
        source_tedge.push(unary_energy(fp, ev, i, false, h, params));
        sink_tedge.push(unary_energy(fp, ev, i, true, h, params));
    }
    let n_edges = fp
        .grid()
        .edges()
        .into_iter()
        .map(|(i, j)| Ok((i, j, pairwise_energy(fp, ev, i, j, params)?)))
        .collect::<Result<_>>()?;
    Ok(CutGraph {
        timestamp: ev.timestamp,
        source_tedge,
        sink_tedge,
        n_edges,
    })
}

/// Minimum-energy map and the max-flow value (equal to its energy).
pub fn min_cut_with_flow(g: &CutGraph) -> (EnvironmentMap, f64) {
    let mut mf = MaxFlowGraph::new(g.len());
    for i in 0..g.len() {
        mf.add_tweights(i, g.source_tedge[i], g.sink_tedge[i]);
    }
    for &(i, j, w) in &g.n_edges {
        mf.add_edge(i, j, w, w);
    }
    let flow = mf.maxflow();
    let active = (0..g.len()).map(|i| mf.segment(i) == Segment::Source).collect();
    (EnvironmentMap::from_active(g.timestamp, active), flow)
}

pub fn min_cut(g: &CutGraph) -> EnvironmentMap {
    min_cut_with_flow(g).0
}

/// Exhaustive minimizer of [`total_energy`]; bit `i` of the enumeration
/// index is `α_i` and the lowest index wins ties.
pub fn brute_force_map(
    ev: &FrameEvidence,
    prev: &EnvironmentMap,
    prev_prev: &EnvironmentMap,
    fp: &Fingerprint,
    params: &ModelParams,
) -> Result<EnvironmentMap> {
    let n = fp.len();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooManyLocations {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    check_history(fp, ev, prev, prev_prev)?;
    let mut best: Option<(f64, EnvironmentMap)> = None;
    for mask in 0u32..1 << n {
        let map = EnvironmentMap::from_active(ev.timestamp, (0..n).map(|i| mask >> i & 1 == 1).collect());
        let e = total_energy(&map, ev, prev, prev_prev, fp, params)?;
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, map));
        }
    }
    Ok(best.expect("at least one map").1)
}
