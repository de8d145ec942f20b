//! Online map inference: one min-cut per frame with a two-map history.

use std::collections::VecDeque;

use crate::energy::FrameEvidence;
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::graphcut::{build_cut_graph, min_cut};
use crate::types::{EnvironmentMap, ModelParams, RssFrame};

/// History for the temporal term plus the last `w` maps for clustering.
///
/// Before any frame is seen both history maps are all-inactive.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    prev: EnvironmentMap,
    prev_prev: EnvironmentMap,
    window: VecDeque<EnvironmentMap>,
    w: usize,
}

impl TrackerState {
    pub fn new(n: usize, w: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::invalid("map window must be >= 1"));
        }
        Ok(TrackerState {
            prev: EnvironmentMap::inactive(0.0, n),
            prev_prev: EnvironmentMap::inactive(0.0, n),
            window: VecDeque::with_capacity(w),
            w,
        })
    }

    pub fn prev(&self) -> &EnvironmentMap {
        &self.prev
    }

    pub fn prev_prev(&self) -> &EnvironmentMap {
        &self.prev_prev
    }

    /// Most recent maps, oldest first; at most `w`.
    pub fn window(&self) -> &VecDeque<EnvironmentMap> {
        &self.window
    }

    pub fn push(&mut self, map: EnvironmentMap) {
        if self.window.len() == self.w {
            self.window.pop_front();
        }
        self.window.push_back(map.clone());
        self.prev_prev = std::mem::replace(&mut self.prev, map);
    }
}

/// Minimum-energy map for `frame`; every calibrated stream present in the
/// frame is used, so filter streams out of the frame beforehand.
pub fn infer_map(
    state: &mut TrackerState,
    frame: &RssFrame,
    fp: &Fingerprint,
    params: &ModelParams,
) -> Result<EnvironmentMap> {
    let ev = FrameEvidence::compute(fp, frame, None, params.contrast)?;
    let graph = build_cut_graph(&ev, &state.prev, &state.prev_prev, fp, params)?;
    let map = min_cut(&graph);
    state.push(map.clone());
    Ok(map)
}
