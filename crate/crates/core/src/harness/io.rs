//! Text formats for estimates, map sequences and heatmaps.
//!
//! Estimates: `t=<float> m=<int> (<x>,<y>) ...`, one frame per line.
//! Maps: `t=<float> <bits>` with one `0`/`1` per location index.

use std::fmt::Write as _;
use std::path::Path;

use crate::clustering::{window_counts, FrameEstimate};
use crate::error::{Error, Result};
use crate::trace::{content_lines, parse_timestamp, write_text, MonotoneCheck};
use crate::types::{EnvironmentMap, Grid, Point};

pub fn format_estimates(estimates: &[FrameEstimate]) -> String {
    let mut s = String::new();
    for e in estimates {
        let _ = write!(s, "t={} m={}", e.timestamp, e.m_hat());
        for p in &e.entities {
            let _ = write!(s, " ({},{})", p.x, p.y);
        }
        s.push('\n');
    }
    s
}

pub fn parse_estimates(text: &str) -> Result<Vec<FrameEstimate>> {
    let mut out = Vec::new();
    let mut order = MonotoneCheck::new();
    for (line, content) in content_lines(text) {
        let (timestamp, mut tok) = parse_timestamp(content, line)?;
        order.check(timestamp, line)?;
        let m: usize = tok
            .next()
            .and_then(|t| t.strip_prefix("m="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(line, "expected m=<count>"))?;
        let entities = tok
            .map(|t| {
                let inner = t
                    .strip_prefix('(')
                    .and_then(|t| t.strip_suffix(')'))
                    .ok_or_else(|| Error::format(line, format!("expected (x,y), got {t:?}")))?;
                let (x, y) = inner
                    .split_once(',')
                    .ok_or_else(|| Error::format(line, format!("expected (x,y), got {t:?}")))?;
                let num = |v: &str| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::format(line, format!("bad coordinate {v:?}")))
                };
                Ok(Point::new(num(x)?, num(y)?))
            })
            .collect::<Result<Vec<_>>>()?;
        if entities.len() != m {
            return Err(Error::format(line, format!("m={m} but {} coordinates", entities.len())));
        }
        out.push(FrameEstimate { timestamp, entities });
    }
    Ok(out)
}

pub fn save_estimates(estimates: &[FrameEstimate], path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &format_estimates(estimates))
}

pub fn load_estimates(path: impl AsRef<Path>) -> Result<Vec<FrameEstimate>> {
    parse_estimates(&std::fs::read_to_string(path)?)
}

pub fn format_maps(maps: &[EnvironmentMap]) -> String {
    let mut s = String::new();
    for m in maps {
        let bits: String = m.active.iter().map(|&a| if a { '1' } else { '0' }).collect();
        let _ = writeln!(s, "t={} {bits}", m.timestamp);
    }
    s
}

pub fn parse_maps(text: &str) -> Result<Vec<EnvironmentMap>> {
    let mut out: Vec<EnvironmentMap> = Vec::new();
    let mut order = MonotoneCheck::new();
    for (line, content) in content_lines(text) {
        let (timestamp, mut tok) = parse_timestamp(content, line)?;
        order.check(timestamp, line)?;
        let bits = tok
            .next()
            .ok_or_else(|| Error::format(line, "missing activation bits"))?;
        if tok.next().is_some() {
            return Err(Error::format(line, "trailing tokens"));
        }
        let active = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::format(line, format!("bad activation bit {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = out.first() {
            if first.len() != active.len() {
                return Err(Error::format(line, "map length differs from the first map"));
            }
        }
        out.push(EnvironmentMap::from_active(timestamp, active));
    }
    Ok(out)
}

pub fn save_maps(maps: &[EnvironmentMap], path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &format_maps(maps))
}

pub fn load_maps(path: impl AsRef<Path>) -> Result<Vec<EnvironmentMap>> {
    parse_maps(&std::fs::read_to_string(path)?)
}

/// Activation counts laid out as `ny` rows of `nx` values, row `0` at the
/// lowest `y`.
pub fn heatmap_matrix(maps: &[EnvironmentMap], grid: &Grid) -> Result<Vec<Vec<u32>>> {
    let counts = window_counts(maps, grid.len())?;
    Ok(counts.chunks(grid.nx()).map(<[u32]>::to_vec).collect())
}

pub fn format_heatmap(matrix: &[Vec<u32>]) -> String {
    let mut s = String::new();
    for row in matrix {
        let cells: Vec<String> = row.iter().map(u32::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn parse_heatmap(text: &str) -> Result<Vec<Vec<u32>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .map(|c| {
                    c.trim()
                        .parse()
                        .map_err(|_| Error::format(i + 1, format!("bad cell {c:?}")))
                })
                .collect()
        })
        .collect()
}

/// Writes the window activation counts as CSV.
pub fn export_heatmap(maps: &[EnvironmentMap], grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &format_heatmap(&heatmap_matrix(maps, grid)?))
}
