//! RSS smoothing and stream rejection.
//!
//! Raw readings are smoothed per stream with a causal α-trimmed mean filter.
//! A stream whose online mean has moved away from its calibration mean (two
//! group one-way ANOVA) is dropped from the likelihood while the change lasts.

use std::collections::{BTreeMap, BTreeSet};

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::types::{RssFrame, StreamId};

/// Number of samples dropped from each end of a window of `q` samples.
///
/// `α·q` is computed in floating point, so values within 1e-9 of an integer
/// are treated as that integer (0.3·10 must trim 3, not 4).
pub fn trim_count(q: usize, alpha: f64) -> usize {
    let raw = alpha * q as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 0.5)")));
    }
    Ok(())
}

/// Mean of the sorted window after dropping `⌈αq⌉` samples from each end.
pub fn alpha_trimmed_mean(window: &[f64], alpha: f64) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::invalid("empty window"));
    }
    check_alpha(alpha)?;
    let q = window.len();
    let trim = trim_count(q, alpha);
    if q <= 2 * trim {
        return Err(Error::invalid(format!(
            "trimming {trim} samples from each end of {q} leaves nothing"
        )));
    }
    Ok(trimmed_mean_sorted(&sorted(window), trim))
}

fn sorted(window: &[f64]) -> Vec<f64> {
    let mut v = window.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn trimmed_mean_sorted(sorted: &[f64], trim: usize) -> f64 {
    let kept = &sorted[trim..sorted.len() - trim];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Causal smoothing: `out[i]` filters the trailing window ending at `i`.
///
/// Windows shorter than `q` at the start of the stream use every available
/// sample. Any window whose trim would remove every sample is trimmed down to
/// its median instead, so `q = 1` is the identity for every `alpha`.
pub fn smooth_stream(raw: &[f64], q: usize, alpha: f64) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::invalid("window length must be >= 1"));
    }
    check_alpha(alpha)?;
    let mut out = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        let start = (i + 1).saturating_sub(q);
        out.push(trailing_window_mean(&raw[start..=i], alpha));
    }
    Ok(out)
}

/// Filter output for one nonempty trailing window of at most `q` samples.
pub(crate) fn trailing_window_mean(window: &[f64], alpha: f64) -> f64 {
    let window = sorted(window);
    let len = window.len();
    let trim = trim_count(len, alpha).min((len - 1) / 2);
    trimmed_mean_sorted(&window, trim)
}

/// Smooths every stream of a frame sequence independently.
///
/// Frames where a stream is absent stay absent; the stream's window runs over
/// its own readings only.
pub fn smooth_frames(frames: &[RssFrame], q: usize, alpha: f64) -> Result<Vec<RssFrame>> {
    let mut per_stream: BTreeMap<&StreamId, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for (i, f) in frames.iter().enumerate() {
        for (s, &v) in &f.readings {
            let e = per_stream.entry(s).or_default();
            e.0.push(i);
            e.1.push(v);
        }
    }
    let mut out: Vec<RssFrame> = frames.iter().map(|f| RssFrame::new(f.timestamp)).collect();
    for (stream, (idx, vals)) in per_stream {
        let smoothed = smooth_stream(&vals, q, alpha)?;
        for (i, v) in idx.into_iter().zip(smoothed) {
            out[i].readings.insert(stream.clone(), v);
        }
    }
    Ok(out)
}

/// Running count, mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct SampleSummary {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl SampleSummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut s = SampleSummary::default();
        for &x in samples {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// Outcome of the two-group F-test on one stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub kept: bool,
    /// Set when a group had fewer than two samples; the stream is kept.
    pub insufficient_data: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamDecision {
    pub stream: StreamId,
    pub result: AnovaResult,
}

impl StreamDecision {
    pub fn kept(&self) -> bool {
        self.result.kept
    }
}

/// One-way ANOVA of offline vs online samples of a stream.
pub fn anova_stream_test(offline: &[f64], online: &[f64], significance: f64) -> Result<AnovaResult> {
    anova_from_summaries(
        &SampleSummary::from_samples(offline),
        &SampleSummary::from_samples(online),
        significance,
    )
}

/// Same test as [`anova_stream_test`] computed from group summaries.
pub fn anova_from_summaries(a: &SampleSummary, b: &SampleSummary, significance: f64) -> Result<AnovaResult> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::invalid(format!("significance {significance} outside (0, 1)")));
    }
    if a.count < 2 || b.count < 2 {
        return Ok(AnovaResult {
            f_statistic: 0.0,
            p_value: 1.0,
            kept: true,
            insufficient_data: true,
        });
    }
    let n = (a.count + b.count) as f64;
    let grand = (a.count as f64 * a.mean + b.count as f64 * b.mean) / n;
    let ss_between = a.count as f64 * (a.mean - grand).powi(2) + b.count as f64 * (b.mean - grand).powi(2);
    let ss_within = a.m2 + b.m2;
    let df_within = n - 2.0;

    let (f, p) = if ss_within <= 0.0 {
        if ss_between <= 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ss_between / (ss_within / df_within);
        let dist = FisherSnedecor::new(1.0, df_within).map_err(|e| Error::invalid(format!("F distribution: {e}")))?;
        (f, dist.sf(f))
    };
    Ok(AnovaResult {
        f_statistic: f,
        p_value: p,
        kept: p >= significance,
        insufficient_data: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSelection {
    pub kept: BTreeSet<StreamId>,
    pub decisions: Vec<StreamDecision>,
    /// Every stream failed the test and the one with the largest p-value was kept.
    pub fallback: bool,
}

/// Tests each calibrated stream against its readings in `recent`.
pub fn select_streams(fp: &Fingerprint, recent: &[RssFrame], significance: f64) -> Result<StreamSelection> {
    select_streams_from_stats(fp.streams().iter().zip(fp.offline_stats()), recent, significance)
}

pub fn select_streams_from_stats<'a, I>(offline: I, recent: &[RssFrame], significance: f64) -> Result<StreamSelection>
where
    I: IntoIterator<Item = (&'a StreamId, &'a SampleSummary)>,
{
    let mut decisions = Vec::new();
    for (stream, stats) in offline {
        let mut online = SampleSummary::default();
        for f in recent {
            if let Some(v) = f.get(stream) {
                online.push(v);
            }
        }
        decisions.push(StreamDecision {
            stream: stream.clone(),
            result: anova_from_summaries(stats, &online, significance)?,
        });
    }
    let mut kept: BTreeSet<StreamId> = decisions
        .iter()
        .filter(|d| d.kept())
        .map(|d| d.stream.clone())
        .collect();
    let mut fallback = false;
    if kept.is_empty() {
        // first maximum wins, so the choice is stable under ties
        let best = decisions.iter().fold(None::<&StreamDecision>, |best, d| match best {
            Some(b) if b.result.p_value >= d.result.p_value => Some(b),
            _ => Some(d),
        });
        if let Some(best) = best {
            kept.insert(best.stream.clone());
            fallback = true;
        }
    }
    Ok(StreamSelection {
        kept,
        decisions,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn worked_example() {
        let v = alpha_trimmed_mean(&[-60.0, -52.0, -50.0, -48.0, -40.0], 0.2).unwrap();
        assert_eq!(v, -50.0);
    }

    #[test]
    fn zero_alpha_is_mean() {
        let w = [1.0, 2.0, 7.0, -3.5];
        assert_eq!(alpha_trimmed_mean(&w, 0.0).unwrap(), 6.5 / 4.0);
    }

    #[test]
    fn trim_count_is_robust_to_float_products() {
        assert_eq!(trim_count(5, 0.2), 1);
        assert_eq!(trim_count(10, 0.3), 3);
        assert_eq!(trim_count(7, 0.2), 2);
        assert_eq!(trim_count(4, 0.0), 0);
    }

    #[test]
    fn errors() {
        assert!(alpha_trimmed_mean(&[], 0.1).is_err());
        assert!(alpha_trimmed_mean(&[1.0], 0.5).is_err());
        assert!(alpha_trimmed_mean(&[1.0], -0.1).is_err());
        // ceil(0.4 * 2) = 1 from each end of 2 samples
        assert!(alpha_trimmed_mean(&[1.0, 2.0], 0.4).is_err());
    }

    #[test]
    fn median_at_maximal_trim() {
        // q = 7, alpha = 0.49: ceil(3.43) = 4 would trim everything, so use
        // the largest alpha with q - 2*ceil(alpha q) = 1
        let w = [9.0, -1.0, 4.0, 3.0, 100.0, 2.0, 5.0];
        assert_eq!(alpha_trimmed_mean(&w, 3.0 / 7.0).unwrap(), 4.0);
    }

    #[test]
    fn smoothing_constant_and_identity() {
        let c = vec![-50.0; 12];
        assert_eq!(smooth_stream(&c, 5, 0.2).unwrap(), c);
        let raw = [-50.0, -47.0, -90.0, -52.0];
        assert_eq!(smooth_stream(&raw, 1, 0.2).unwrap(), raw.to_vec());
    }

    #[test]
    fn smoothing_removes_impulse() {
        let mut raw = vec![-50.0; 20];
        raw[10] = -90.0;
        let out = smooth_stream(&raw, 5, 0.2).unwrap();
        assert_eq!(out.len(), raw.len());
        for (i, v) in out.iter().enumerate().skip(4) {
            assert_eq!(*v, -50.0, "index {i}");
        }
    }

    #[test]
    fn smoothing_short_prefix_keeps_one_sample() {
        let out = smooth_stream(&[-40.0, -60.0, -50.0], 5, 0.2).unwrap();
        assert_eq!(out[0], -40.0);
        assert_eq!(out[1], -50.0);
        assert_eq!(out[2], -50.0);
    }

    #[test]
    fn smooth_frames_keeps_absent_readings_absent() {
        let a = StreamId::new("a").unwrap();
        let b = StreamId::new("b").unwrap();
        let frames = vec![
            RssFrame::new(0.0)
                .with_reading(a.clone(), -50.0)
                .with_reading(b.clone(), -40.0),
            RssFrame::new(1.0).with_reading(a.clone(), -52.0),
            RssFrame::new(2.0).with_reading(b.clone(), -42.0),
        ];
        let out = smooth_frames(&frames, 3, 0.0).unwrap();
        assert_eq!(out[1].get(&b), None);
        assert_eq!(out[2].get(&a), None);
        assert_eq!(out[2].get(&b), Some(-41.0));
        assert_eq!(out[1].get(&a), Some(-51.0));
    }

    #[test]
    fn anova_identical_groups_kept() {
        let x = [-50.0, -51.0, -49.5, -50.2];
        let r = anova_stream_test(&x, &x, 0.05).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert!(r.kept);
        let c = [-50.0; 5];
        let r = anova_stream_test(&c, &c, 0.05).unwrap();
        assert!(r.kept);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn anova_insufficient_data_is_kept() {
        let r = anova_stream_test(&[-50.0], &[-10.0, -11.0], 0.05).unwrap();
        assert!(r.kept && r.insufficient_data);
    }

    #[test]
    fn anova_large_shift_rejected_against_table_critical_value() {
        // F(1, 198) upper 5% point is 3.889 (standard tables).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let off: Vec<f64> = Normal::new(-50.0, 1.0)
            .unwrap()
            .sample_iter(&mut rng)
            .take(100)
            .collect();
        let on: Vec<f64> = Normal::new(-30.0, 1.0)
            .unwrap()
            .sample_iter(&mut rng)
            .take(100)
            .collect();
        let r = anova_stream_test(&off, &on, 0.05).unwrap();
        assert!(r.f_statistic > 3.889);
        assert!(!r.kept);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn anova_matches_two_sample_t_squared() {
        // Pooled-variance t statistic squared equals the two-group F.
        let a = [1.0, 2.0, 4.0, 7.0];
        let b = [3.0, 5.0, 6.0, 9.0, 10.0];
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let ma = a.iter().sum::<f64>() / na;
        let mb = b.iter().sum::<f64>() / nb;
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (na - 1.0);
        let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (nb - 1.0);
        let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
        let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
        let r = anova_stream_test(&a, &b, 0.05).unwrap();
        assert!((r.f_statistic - t * t).abs() < 1e-12);
    }

    #[test]
    fn f_distribution_p_values_match_tables() {
        // Upper-tail points from standard F tables.
        for (df2, crit5, crit1) in [(10.0, 4.9646, 10.0443), (30.0, 4.1709, 7.5625), (120.0, 3.9201, 6.8509)] {
            let d = FisherSnedecor::new(1.0, df2).unwrap();
            assert!((d.sf(crit5) - 0.05).abs() < 1e-4, "df2 {df2}");
            assert!((d.sf(crit1) - 0.01).abs() < 1e-4, "df2 {df2}");
        }
    }

    #[test]
    fn fallback_keeps_best_stream() {
        let a = StreamId::new("a").unwrap();
        let b = StreamId::new("b").unwrap();
        let off_a = SampleSummary::from_samples(&[-50.0, -51.0, -49.0, -50.5]);
        let off_b = SampleSummary::from_samples(&[-60.0, -61.0, -59.0, -60.5]);
        let recent: Vec<RssFrame> = (0..10)
            .map(|i| {
                RssFrame::new(i as f64)
                    .with_reading(a.clone(), -20.0 + (i % 2) as f64)
                    .with_reading(b.clone(), -56.0 + (i % 2) as f64)
            })
            .collect();
        let sel = select_streams_from_stats([(&a, &off_a), (&b, &off_b)], &recent, 0.05).unwrap();
        assert!(sel.fallback);
        assert_eq!(sel.kept.len(), 1);
        assert!(sel.kept.contains(&b));
    }

    proptest! {
        #[test]
        fn result_within_window_bounds(w in prop::collection::vec(-100.0f64..0.0, 1..40), alpha in 0.0f64..0.49) {
            let q = w.len();
            prop_assume!(q > 2 * trim_count(q, alpha));
            let m = alpha_trimmed_mean(&w, alpha).unwrap();
            let s = sorted(&w);
            let t = trim_count(q, alpha);
            prop_assert!(m >= s[t] - 1e-9 && m <= s[q - 1 - t] + 1e-9);
        }

        #[test]
        fn permutation_invariant(mut w in prop::collection::vec(-100.0f64..0.0, 1..30), alpha in 0.0f64..0.3, seed in any::<u64>()) {
            let q = w.len();
            prop_assume!(q > 2 * trim_count(q, alpha));
            let before = alpha_trimmed_mean(&w, alpha).unwrap();
            use rand::seq::SliceRandom;
            w.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(alpha_trimmed_mean(&w, alpha).unwrap(), before);
        }

        #[test]
        fn anova_symmetric(a in prop::collection::vec(-80.0f64..-20.0, 2..30), b in prop::collection::vec(-80.0f64..-20.0, 2..30)) {
            let ab = anova_stream_test(&a, &b, 0.05).unwrap();
            let ba = anova_stream_test(&b, &a, 0.05).unwrap();
            prop_assert!((ab.f_statistic - ba.f_statistic).abs() <= 1e-9 * ab.f_statistic.abs().max(1.0));
            prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-9);
        }
    }
}
