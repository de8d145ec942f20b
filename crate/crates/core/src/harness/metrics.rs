use serde::Serialize;

use crate::clustering::FrameEstimate;
use crate::error::{Error, Result};
use crate::types::{Grid, GroundTruthFrame, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    /// Both sides snapped to their nearest grid location first.
    Zones,
    /// Raw coordinates.
    Locations,
}

impl std::str::FromStr for ErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zones" => Ok(ErrorMode::Zones),
            "locations" => Ok(ErrorMode::Locations),
            _ => Err(Error::invalid(format!("unknown error mode {s:?}"))),
        }
    }
}

/// Per-entity distance errors for one frame.
///
/// Estimate/truth pairs are matched greedily, closest pair first (ties to the
/// lowest indices). A truth left without an estimate contributes its distance
/// from the testbed center; an estimate left without a truth contributes its
/// distance to the nearest truth, or to the center if there is no truth.
pub fn distance_error(
    estimate: &FrameEstimate,
    truth: &GroundTruthFrame,
    grid: &Grid,
    mode: ErrorMode,
    center: Point,
) -> Vec<f64> {
    let snap = |p: Point| match mode {
        ErrorMode::Zones => grid.locations()[grid.nearest(p)].point(),
        ErrorMode::Locations => p,
    };
    let est: Vec<Point> = estimate.entities.iter().map(|&p| snap(p)).collect();
    let gt: Vec<Point> = truth.entities.iter().map(|e| snap(e.point())).collect();
    let center = snap(center);

    let mut pairs: Vec<(f64, usize, usize)> = est
        .iter()
        .enumerate()
        .flat_map(|(i, e)| gt.iter().enumerate().map(move |(j, g)| (e.distance(g), i, j)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut est_used = vec![false; est.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut errors = Vec::with_capacity(est.len().max(gt.len()));
    for (d, i, j) in pairs {
        if !est_used[i] && !gt_used[j] {
            est_used[i] = true;
            gt_used[j] = true;
            errors.push(d);
        }
    }
    for (j, g) in gt.iter().enumerate() {
        if !gt_used[j] {
            errors.push(center.distance(g));
        }
    }
    for (i, e) in est.iter().enumerate() {
        if !est_used[i] {
            let nearest = gt.iter().map(|g| e.distance(g)).fold(f64::INFINITY, f64::min);
            errors.push(if nearest.is_finite() {
                nearest
            } else {
                e.distance(&center)
            });
        }
    }
    errors
}

/// Signed per-frame count errors `m̂ − m`.
pub fn count_error(estimates: &[FrameEstimate], truths: &[GroundTruthFrame]) -> Result<Vec<i64>> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            expected: truths.len(),
            found: estimates.len(),
        });
    }
    estimates
        .iter()
        .zip(truths)
        .map(|(e, g)| {
            if e.timestamp != g.timestamp {
                return Err(Error::TimestampMismatch {
                    estimate: e.timestamp,
                    truth: g.timestamp,
                });
            }
            Ok(e.m_hat() as i64 - g.entities.len() as i64)
        })
        .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Empirical distribution function at each distinct sample value.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = f,
            _ => out.push((*x, f)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EntityPosition;

    fn est(t: f64, pts: &[(f64, f64)]) -> FrameEstimate {
        FrameEstimate {
            timestamp: t,
            entities: pts.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        }
    }

    fn gt(t: f64, pts: &[(f64, f64)]) -> GroundTruthFrame {
        GroundTruthFrame {
            timestamp: t,
            entities: pts
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| EntityPosition {
                    id: format!("p{i}"),
                    x,
                    y,
                })
                .collect(),
        }
    }

    fn grid() -> Grid {
        Grid::regular(10.0, 10.0, 5, 5).unwrap()
    }

    const C: Point = Point::new(5.0, 5.0);

    #[test]
    fn perfect_and_missing() {
        let g = grid();
        assert_eq!(
            distance_error(
                &est(0.0, &[(3.0, 7.0)]),
                &gt(0.0, &[(3.0, 7.0)]),
                &g,
                ErrorMode::Locations,
                C
            ),
            vec![0.0]
        );
        let miss = distance_error(&est(0.0, &[]), &gt(0.0, &[(1.0, 1.0)]), &g, ErrorMode::Locations, C);
        assert_eq!(miss, vec![Point::new(5.0, 5.0).distance(&Point::new(1.0, 1.0))]);
        assert!(distance_error(&est(0.0, &[]), &gt(0.0, &[]), &g, ErrorMode::Locations, C).is_empty());
        let ghost = distance_error(&est(0.0, &[(8.0, 5.0)]), &gt(0.0, &[]), &g, ErrorMode::Locations, C);
        assert_eq!(ghost, vec![3.0]);
    }

    #[test]
    fn crossed_pairs_take_smaller_total() {
        let g = grid();
        let e = est(0.0, &[(2.0, 0.0), (8.0, 0.0)]);
        let t = gt(0.0, &[(7.0, 0.0), (1.0, 0.0)]);
        let errs = distance_error(&e, &t, &g, ErrorMode::Locations, C);
        let total: f64 = errs.iter().sum();
        // the two pairings by enumeration
        let straight: f64 = 5.0 + 7.0;
        let crossed = 1.0 + 1.0;
        assert_eq!(total, straight.min(crossed));
    }

    #[test]
    fn zones_snap_to_grid() {
        let g = grid();
        let e = est(0.0, &[(1.4, 0.6)]);
        let t = gt(0.0, &[(2.6, 1.2)]);
        // (1,1) vs (3,1)
        assert_eq!(distance_error(&e, &t, &g, ErrorMode::Zones, C), vec![2.0]);
    }

    #[test]
    fn count_errors() {
        let e = vec![est(0.0, &[(0.0, 0.0); 3]), est(1.0, &[])];
        let t = vec![gt(0.0, &[(0.0, 0.0); 2]), gt(1.0, &[(1.0, 1.0); 2])];
        assert_eq!(count_error(&e, &t).unwrap(), vec![1, -2]);
        let shifted = vec![gt(0.5, &[]), gt(1.0, &[])];
        assert!(matches!(
            count_error(&e, &shifted),
            Err(Error::TimestampMismatch { .. })
        ));
    }

    #[test]
    fn summaries() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let cdf = empirical_cdf(&[2.0, 1.0, 2.0, 4.0]);
        assert_eq!(cdf, vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]);
    }
}
