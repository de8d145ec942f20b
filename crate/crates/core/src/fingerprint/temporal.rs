use crate::error::{Error, Result};
use crate::types::{EnvironmentMap, Grid, GroundTruthFrame, HmmOrder};

/// Second-order transition prior shared by all locations.
///
/// Histories are indexed by `(α^{t-1}, α^{t-2})` as `2·α^{t-1} + α^{t-2}`,
/// i.e. `00, 01, 10, 11`. Probabilities are Laplace-smoothed transition counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemporalPrior {
    /// `counts[h][a]`: times state `a` followed history `h`.
    counts: [[u64; 2]; 4],
}

pub fn history_index(prev: bool, prev_prev: bool) -> usize {
    ((prev as usize) << 1) | prev_prev as usize
}

impl TemporalPrior {
    /// No observations: every transition probability is 1/2.
    pub fn uninformative() -> Self {
        TemporalPrior::default()
    }

    pub fn from_counts(counts: [[u64; 2]; 4]) -> Self {
        TemporalPrior { counts }
    }

    pub fn counts(&self) -> &[[u64; 2]; 4] {
        &self.counts
    }

    /// `P(α^t = 1 | α^{t-1}, α^{t-2})` for each of the four histories.
    pub fn p_active_given(&self) -> [f64; 4] {
        std::array::from_fn(|h| laplace(self.counts[h][1], self.counts[h][0]))
    }

    /// `P(α^t = state | history)` under the requested chain order.
    ///
    /// The first-order chain marginalizes `α^{t-2}` out of the counts.
    pub fn probability(&self, state: bool, prev: bool, prev_prev: bool, order: HmmOrder) -> f64 {
        let (ones, zeros) = match order {
            HmmOrder::Second => {
                let c = self.counts[history_index(prev, prev_prev)];
                (c[1], c[0])
            }
            HmmOrder::First => {
                let a = self.counts[history_index(prev, false)];
                let b = self.counts[history_index(prev, true)];
                (a[1] + b[1], a[0] + b[0])
            }
        };
        let p1 = laplace(ones, zeros);
        if state {
            p1
        } else {
            1.0 - p1
        }
    }
}

fn laplace(ones: u64, zeros: u64) -> f64 {
    (ones as f64 + 1.0) / ((ones + zeros) as f64 + 2.0)
}

/// Counts transitions at every location of every sequence.
pub fn learn_temporal_priors(sequences: &[Vec<EnvironmentMap>]) -> Result<TemporalPrior> {
    if sequences.is_empty() {
        return Err(Error::invalid("no training map sequences"));
    }
    let mut counts = [[0u64; 2]; 4];
    for seq in sequences {
        if seq.len() < 3 {
            return Err(Error::invalid(format!(
                "training sequence has {} maps, need at least 3",
                seq.len()
            )));
        }
        let n = seq[0].len();
        if let Some(bad) = seq.iter().find(|m| m.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        for w in seq.windows(3) {
            for i in 0..n {
                let h = history_index(w[1].active[i], w[0].active[i]);
                counts[h][w[2].active[i] as usize] += 1;
            }
        }
    }
    Ok(TemporalPrior { counts })
}

/// Label maps for prior training: each entity marks its nearest grid
/// location and that location's 4-neighbors active.
pub fn maps_from_ground_truth(truth: &[GroundTruthFrame], grid: &Grid) -> Vec<EnvironmentMap> {
    truth
        .iter()
        .map(|f| {
            let mut map = EnvironmentMap::inactive(f.timestamp, grid.len());
            for e in &f.entities {
                let c = grid.nearest(e.point());
                map.active[c] = true;
                for &j in grid.neighbors(c) {
                    map.active[j] = true;
                }
            }
            map
        })
        .collect()
}
