//! Grid search over the energy weights `(β, γ, δ)`.

use super::Fingerprint;
use crate::error::{Error, Result};
use crate::harness::{distance_error, track, ErrorMode};
use crate::types::{GroundTruthFrame, ModelParams, RssFrame};

/// Raw held-out trace with aligned ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub frames: Vec<RssFrame>,
    pub truth: Vec<GroundTruthFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl ParamPoint {
    fn key(&self) -> [f64; 3] {
        [self.beta, self.gamma, self.delta]
    }
}

/// β, δ ∈ {0.25, 0.5, 0.75, 1}, γ ∈ {0.5, 1, 2, 4}.
pub fn default_search_grid() -> Vec<ParamPoint> {
    let unit = [0.25, 0.5, 0.75, 1.0];
    let gammas = [0.5, 1.0, 2.0, 4.0];
    let mut out = Vec::with_capacity(64);
    for &beta in &unit {
        for &gamma in &gammas {
            for &delta in &unit {
                out.push(ParamPoint { beta, gamma, delta });
            }
        }
    }
    out
}

/// Mean locations-based error of `params` over every held-out frame.
pub fn held_out_error(fp: &Fingerprint, held_out: &[LabeledSequence], params: &ModelParams) -> Result<f64> {
    let center = fp.grid().center();
    let mut sum = 0.0;
    let mut count = 0usize;
    for seq in held_out {
        crate::harness::check_aligned(&seq.frames, &seq.truth)?;
        let out = track(fp, &seq.frames, params)?;
        for (e, t) in out.estimates.iter().zip(&seq.truth) {
            for d in distance_error(e, t, fp.grid(), ErrorMode::Locations, center) {
                sum += d;
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// The grid point with the lowest held-out error; equal errors go to the
/// lexicographically smallest `(β, γ, δ)`.
pub fn fit_params(fp: &Fingerprint, held_out: &[LabeledSequence], search_grid: &[ParamPoint]) -> Result<ModelParams> {
    if search_grid.is_empty() {
        return Err(Error::invalid("empty parameter search grid"));
    }
    if held_out.is_empty() {
        return Err(Error::invalid("no held-out sequences"));
    }
    let mut points = search_grid.to_vec();
    points.sort_by(|a, b| {
        a.key()
            .iter()
            .zip(b.key().iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut best: Option<(f64, ModelParams)> = None;
    for pt in points {
        let params = ModelParams {
            beta: pt.beta,
            gamma: pt.gamma,
            delta: pt.delta,
            ..fp.params().clone()
        };
        let err = held_out_error(fp, held_out, &params)?;
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, params));
        }
    }
    Ok(best.expect("nonempty grid").1)
}
