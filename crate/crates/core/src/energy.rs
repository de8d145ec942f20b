//! Energy of an environment map: temporal prior, spatial coherence and
//! observation likelihood terms.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::types::{ContrastMode, EnvironmentMap, ModelParams, RssFrame, StreamId};

/// Per-frame observation quantities shared by every energy evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEvidence {
    pub timestamp: f64,
    /// `log_lik[i][state]` = `ln P(s | α_i = state)`.
    log_lik: Vec<[f64; 2]>,
    /// Score compared between neighbors in the spatial term.
    contrast: Vec<f64>,
}

impl FrameEvidence {
    /// Evidence for `frame`, using only `active_streams` when given.
    pub fn compute(
        fp: &Fingerprint,
        frame: &RssFrame,
        active_streams: Option<&BTreeSet<StreamId>>,
        mode: ContrastMode,
    ) -> Result<Self> {
        let log_lik = (0..fp.len())
            .map(|i| {
                Ok([
                    fp.log_likelihood(i, false, frame, active_streams)?,
                    fp.log_likelihood(i, true, frame, active_streams)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_log_likelihoods(frame.timestamp, log_lik, mode))
    }

    pub fn from_log_likelihoods(timestamp: f64, log_lik: Vec<[f64; 2]>, mode: ContrastMode) -> Self {
        let contrast = match mode {
            ContrastMode::Normalized => {
                let cost: Vec<f64> = log_lik.iter().map(|l| -l[1]).collect();
                let lo = cost.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = cost.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                cost.iter()
                    .map(|c| if span > 0.0 { (c - lo) / span } else { 0.0 })
                    .collect()
            }
            ContrastMode::Literal => log_lik.iter().map(|l| l[1].exp()).collect(),
        };
        FrameEvidence {
            timestamp,
            log_lik,
            contrast,
        }
    }

    pub fn len(&self) -> usize {
        self.log_lik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_lik.is_empty()
    }

    pub fn log_likelihood(&self, i: usize, state: bool) -> f64 {
        self.log_lik[i][state as usize]
    }

    /// Likelihood contrast Δ between locations `i` and `j`.
    pub fn delta(&self, i: usize, j: usize) -> f64 {
        (self.contrast[i] - self.contrast[j]).abs()
    }
}

/// `β·(−ln p_transition) − δ·log_likelihood`.
pub fn unary_cost(p_transition: f64, log_likelihood: f64, params: &ModelParams) -> f64 {
    params.beta * -p_transition.ln() - params.delta * log_likelihood
}

/// Cost of labeling `loc` with `state` given its last two labels.
pub fn unary_energy(
    fp: &Fingerprint,
    ev: &FrameEvidence,
    loc: usize,
    state: bool,
    history: (bool, bool),
    params: &ModelParams,
) -> f64 {
    let p = fp.temporal().probability(state, history.0, history.1, params.hmm_order);
    unary_cost(p, ev.log_likelihood(loc, state), params)
}

/// `γ·(1 + e^{−Δ²})/2`, the penalty for labeling neighbors differently.
pub fn disagreement_cost(delta: f64, gamma: f64) -> f64 {
    gamma * (1.0 + (-delta * delta).exp()) / 2.0
}

/// Penalty charged when neighbors `i` and `j` take different labels.
pub fn pairwise_energy(fp: &Fingerprint, ev: &FrameEvidence, i: usize, j: usize, params: &ModelParams) -> Result<f64> {
    if !fp.grid().are_neighbors(i, j) {
        return Err(Error::NotAdjacent(i, j));
    }
    Ok(disagreement_cost(ev.delta(i, j), params.gamma))
}

/// The three components of the energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    /// `V^Tm`: β-weighted temporal prior costs.
    pub temporal: f64,
    /// `V^Sp`: spatial disagreement costs over differing neighbor pairs.
    pub spatial: f64,
    /// `U^SS`: δ-weighted observation costs.
    pub observation: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.temporal + self.spatial + self.observation
    }
}

fn check_lengths(n: usize, maps: [&EnvironmentMap; 3], ev: &FrameEvidence) -> Result<()> {
    for len in maps.iter().map(|m| m.len()).chain([ev.len()]) {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

pub fn energy_terms(
    map: &EnvironmentMap,
    ev: &FrameEvidence,
    prev: &EnvironmentMap,
    prev_prev: &EnvironmentMap,
    fp: &Fingerprint,
    params: &ModelParams,
) -> Result<EnergyTerms> {
    check_lengths(fp.len(), [map, prev, prev_prev], ev)?;
    let mut terms = EnergyTerms {
        temporal: 0.0,
        spatial: 0.0,
        observation: 0.0,
    };
    for i in 0..fp.len() {
        let a = map.active[i];
        let p = fp
            .temporal()
            .probability(a, prev.active[i], prev_prev.active[i], params.hmm_order);
        terms.temporal += params.beta * -p.ln();
        terms.observation += params.delta * -ev.log_likelihood(i, a);
    }
    for (i, j) in fp.grid().edges() {
        if map.active[i] != map.active[j] {
            terms.spatial += pairwise_energy(fp, ev, i, j, params)?;
        }
    }
    Ok(terms)
}

pub fn total_energy(
    map: &EnvironmentMap,
    ev: &FrameEvidence,
    prev: &EnvironmentMap,
    prev_prev: &EnvironmentMap,
    fp: &Fingerprint,
    params: &ModelParams,
) -> Result<f64> {
    energy_terms(map, ev, prev, prev_prev, fp, params).map(|t| t.total())
}

/// Pairwise energy `E(α_i, α_j)` for the four joint labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseTable {
    pub e00: f64,
    pub e01: f64,
    pub e10: f64,
    pub e11: f64,
}

impl PairwiseTable {
    /// Potts-style table charging `w` only on disagreement.
    pub fn disagreement(w: f64) -> Self {
        PairwiseTable {
            e00: 0.0,
            e01: w,
            e10: w,
            e11: 0.0,
        }
    }

    /// `E(0,0) + E(1,1) ≤ E(0,1) + E(1,0)`: representable as a graph cut.
    pub fn is_regular(&self) -> bool {
        self.e00 + self.e11 <= self.e01 + self.e10
    }
}

/// True when every neighbor pair's table is regular.
pub fn check_regular(fp: &Fingerprint, ev: &FrameEvidence, params: &ModelParams) -> bool {
    fp.grid()
        .edges()
        .into_iter()
        .all(|(i, j)| pairwise_energy(fp, ev, i, j, params).is_ok_and(|w| PairwiseTable::disagreement(w).is_regular()))
}
