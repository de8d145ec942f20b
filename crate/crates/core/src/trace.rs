//! Line-oriented text formats for RSS traces and ground truth.
//!
//! Trace lines look like `t=<float> <stream_id>=<dbm> ...` and ground-truth
//! lines like `t=<float> <entity_id>:<x>,<y> ...`. Blank lines and lines whose
//! first non-blank character is `#` are skipped. Floats are written with the
//! shortest representation that parses back to the same bits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{EntityPosition, GroundTruthFrame, RssFrame, StreamId};

/// Content lines as `(1-based line number, text)`.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then_some((i + 1, l))
    })
}

pub(crate) fn parse_finite(token: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::format(line, format!("{what} {token:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::format(line, format!("{what} {token:?} is not finite")));
    }
    Ok(v)
}

/// Splits off the leading `t=<float>` token.
pub(crate) fn parse_timestamp<'a>(line: &'a str, lineno: usize) -> Result<(f64, std::str::SplitWhitespace<'a>)> {
    let mut tokens = line.split_whitespace();
    let first = tokens.next().unwrap_or("");
    let t = first
        .strip_prefix("t=")
        .ok_or_else(|| Error::format(lineno, "line must start with t=<timestamp>"))?;
    Ok((parse_finite(t, lineno, "timestamp")?, tokens))
}

pub(crate) struct MonotoneCheck {
    previous: Option<f64>,
}

impl MonotoneCheck {
    pub(crate) fn new() -> Self {
        MonotoneCheck { previous: None }
    }

    pub(crate) fn check(&mut self, t: f64, line: usize) -> Result<()> {
        if let Some(previous) = self.previous {
            if t < previous {
                return Err(Error::NonMonotoneTimestamp {
                    line,
                    previous,
                    found: t,
                });
            }
        }
        self.previous = Some(t);
        Ok(())
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<RssFrame>> {
    let mut frames = Vec::new();
    let mut order = MonotoneCheck::new();
    for (lineno, line) in content_lines(text) {
        let (t, tokens) = parse_timestamp(line, lineno)?;
        order.check(t, lineno)?;
        let mut frame = RssFrame::new(t);
        for tok in tokens {
            let (id, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::format(lineno, format!("expected stream=dbm, got {tok:?}")))?;
            let id = StreamId::new(id).map_err(|e| Error::format(lineno, e.to_string()))?;
            let dbm = parse_finite(value, lineno, "RSS value")?;
            if frame.readings.insert(id.clone(), dbm).is_some() {
                return Err(Error::format(lineno, format!("stream {id} repeated")));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn format_trace(frames: &[RssFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&format!("t={}", f.timestamp));
        for (id, v) in &f.readings {
            out.push_str(&format!(" {id}={v}"));
        }
        out.push('\n');
    }
    out
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<RssFrame>> {
    parse_trace(&fs::read_to_string(path)?)
}

pub fn save_trace(frames: &[RssFrame], path: impl AsRef<Path>) -> Result<()> {
    for pair in frames.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::invalid("frames must be in timestamp order"));
        }
    }
    write_text(path, &format_trace(frames))
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthFrame>> {
    let mut frames = Vec::new();
    let mut order = MonotoneCheck::new();
    for (lineno, line) in content_lines(text) {
        let (t, tokens) = parse_timestamp(line, lineno)?;
        order.check(t, lineno)?;
        let mut entities = Vec::new();
        for tok in tokens {
            let bad = || Error::format(lineno, format!("expected id:x,y, got {tok:?}"));
            let (id, coords) = tok.split_once(':').ok_or_else(bad)?;
            let (x, y) = coords.split_once(',').ok_or_else(bad)?;
            if id.is_empty() {
                return Err(bad());
            }
            entities.push(EntityPosition {
                id: id.to_string(),
                x: parse_finite(x, lineno, "x coordinate")?,
                y: parse_finite(y, lineno, "y coordinate")?,
            });
        }
        frames.push(GroundTruthFrame { timestamp: t, entities });
    }
    Ok(frames)
}

pub fn format_ground_truth(frames: &[GroundTruthFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&format!("t={}", f.timestamp));
        for e in &f.entities {
            out.push_str(&format!(" {}:{},{}", e.id, e.x, e.y));
        }
        out.push('\n');
    }
    out
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthFrame>> {
    parse_ground_truth(&fs::read_to_string(path)?)
}

pub fn save_ground_truth(frames: &[GroundTruthFrame], path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &format_ground_truth(frames))
}

pub(crate) fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sid(s: &str) -> StreamId {
        StreamId::new(s).unwrap()
    }

    #[test]
    fn parses_three_lines_in_order() {
        let text = "# header\nt=0 a=-50 b=-61.5\n\nt=1 a=-51\nt=2 b=-60 a=-49.25\n";
        let frames = parse_trace(text).unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames[0].get(&sid("b")), Some(-61.5));
        assert_eq!(frames[1].get(&sid("b")), None);
        assert_eq!(frames[2].timestamp, 2.0);
        assert_eq!(frames[2].get(&sid("a")), Some(-49.25));
    }

    #[test]
    fn empty_file_is_empty_trace() {
        assert!(parse_trace("").unwrap().is_empty());
        assert!(parse_trace("# only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn non_numeric_rss_names_line() {
        let err = parse_trace("t=0 a=-50\nt=1 a=loud\n").unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotone_timestamps() {
        let err = parse_trace("t=1 a=-50\nt=0.5 a=-50\n").unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTimestamp { line: 2, .. }));
    }

    #[test]
    fn rejects_missing_timestamp_and_non_finite() {
        assert!(parse_trace("a=-50\n").is_err());
        assert!(parse_trace("t=0 a=inf\n").is_err());
        assert!(parse_trace("t=0 a=-1 a=-2\n").is_err());
    }

    #[test]
    fn missing_stream_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        let frames = vec![
            RssFrame::new(0.0)
                .with_reading(sid("a"), -50.0)
                .with_reading(sid("b"), -40.0),
            RssFrame::new(1.0).with_reading(sid("b"), -41.0),
        ];
        save_trace(&frames, &path).unwrap();
        let back = load_trace(&path).unwrap();
        assert_eq!(back, frames);
        assert_eq!(back[1].get(&sid("a")), None);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = save_trace(&[], "/nonexistent-dir/x/y.trace").unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn ground_truth_round_trip() {
        let text = "t=0 p1:1.5,2 p2:3,4.25\nt=1\n";
        let frames = parse_ground_truth(text).unwrap();
        assert_eq!(frames[0].entities.len(), 2);
        assert_eq!(frames[1].entities.len(), 0);
        assert_eq!(parse_ground_truth(&format_ground_truth(&frames)).unwrap(), frames);
        assert!(parse_ground_truth("t=0 p1:1\n").is_err());
    }

    fn frame_strategy() -> impl Strategy<Value = Vec<RssFrame>> {
        let reading = prop::option::of(-120.0f64..0.0);
        prop::collection::vec((0.0f64..10.0, prop::collection::vec(reading, 4)), 0..100).prop_map(|rows| {
            let mut t = 0.0;
            rows.into_iter()
                .map(|(dt, vals)| {
                    t += dt;
                    let mut f = RssFrame::new(t);
                    for (k, v) in vals.into_iter().enumerate() {
                        if let Some(v) = v {
                            f.readings.insert(sid(&format!("s{k}")), v);
                        }
                    }
                    f
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn trace_round_trip_is_bit_exact(frames in frame_strategy()) {
            let back = parse_trace(&format_trace(&frames)).unwrap();
            prop_assert_eq!(back.len(), frames.len());
            for (a, b) in back.iter().zip(&frames) {
                prop_assert_eq!(a.timestamp.to_bits(), b.timestamp.to_bits());
                prop_assert_eq!(a.readings.len(), b.readings.len());
                for ((ka, va), (kb, vb)) in a.readings.iter().zip(&b.readings) {
                    prop_assert_eq!(ka, kb);
                    prop_assert_eq!(va.to_bits(), vb.to_bits());
                }
            }
        }
    }
}
