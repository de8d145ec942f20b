//! Binary fingerprint container.
//!
//! Layout: magic `SPOTFP`, format version (u16 LE), payload length (u64 LE),
//! payload, CRC-32 of the payload (u32 LE). The payload is a fixed-order
//! little-endian encoding of every field; floats are stored as raw bits.

use std::fs;
use std::path::Path;

use super::{Fingerprint, LocationFingerprint, RssHistogram, TemporalPrior};
use crate::error::{Error, Result};
use crate::preprocess::SampleSummary;
use crate::types::{ContrastMode, Grid, HmmOrder, ModelParams, StreamId};

pub const MAGIC: &[u8; 6] = b"SPOTFP";
pub const FORMAT_VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt("payload ends early".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Corrupt("length overflow".into()))
    }
    /// A count of items each at least `min_item` bytes long; bounds-checked
    /// against the remaining payload before anything is allocated.
    fn count(&mut self, min_item: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(min_item) > self.buf.len() - self.pos {
            return Err(Error::Corrupt(format!("implausible item count {n}")));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Corrupt("invalid utf-8".into()))
    }
}

fn write_params(w: &mut Writer, p: &ModelParams) {
    w.f64(p.beta);
    w.f64(p.gamma);
    w.f64(p.delta);
    w.usize(p.q);
    w.f64(p.alpha_trim);
    w.f64(p.anova_significance);
    w.usize(p.anova_window);
    w.u8(p.stream_filter as u8);
    w.f64(p.hist_bin_width);
    w.f64(p.hist_smooth_sigma);
    w.usize(p.w);
    w.f64(p.r);
    w.f64(p.min_split_distance);
    w.u8(match p.hmm_order {
        HmmOrder::First => 1,
        HmmOrder::Second => 2,
    });
    w.u8(match p.contrast {
        ContrastMode::Normalized => 0,
        ContrastMode::Literal => 1,
    });
}

fn read_params(r: &mut Reader) -> Result<ModelParams> {
    Ok(ModelParams {
        beta: r.f64()?,
        gamma: r.f64()?,
        delta: r.f64()?,
        q: r.usize()?,
        alpha_trim: r.f64()?,
        anova_significance: r.f64()?,
        anova_window: r.usize()?,
        stream_filter: r.u8()? != 0,
        hist_bin_width: r.f64()?,
        hist_smooth_sigma: r.f64()?,
        w: r.usize()?,
        r: r.f64()?,
        min_split_distance: r.f64()?,
        hmm_order: match r.u8()? {
            1 => HmmOrder::First,
            2 => HmmOrder::Second,
            o => return Err(Error::Corrupt(format!("bad hmm order {o}"))),
        },
        contrast: match r.u8()? {
            0 => ContrastMode::Normalized,
            1 => ContrastMode::Literal,
            c => return Err(Error::Corrupt(format!("bad contrast mode {c}"))),
        },
    })
}

fn write_hist(w: &mut Writer, h: &RssHistogram) {
    w.f64(h.bin_width());
    w.f64(h.origin());
    w.u64(h.samples());
    w.usize(h.len());
    for &p in h.probabilities() {
        w.f64(p);
    }
}

fn read_hist(r: &mut Reader) -> Result<RssHistogram> {
    let bw = r.f64()?;
    let origin = r.f64()?;
    let samples = r.u64()?;
    let len = r.count(8)?;
    let probs = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    RssHistogram::from_parts(bw, origin, probs, samples).map_err(|e| Error::Corrupt(e.to_string()))
}

fn encode_payload(fp: &Fingerprint) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    write_params(&mut w, fp.params());
    let g = fp.grid();
    w.f64(g.width());
    w.f64(g.height());
    w.usize(g.nx());
    w.usize(g.ny());
    w.usize(fp.streams().len());
    for s in fp.streams() {
        w.str(s.as_str());
    }
    for s in fp.offline_stats() {
        w.u64(s.count);
        w.f64(s.mean);
        w.f64(s.m2);
    }
    for h in fp.temporal().counts() {
        w.u64(h[0]);
        w.u64(h[1]);
    }
    for loc in fp.locations() {
        for h in &loc.active {
            write_hist(&mut w, h);
        }
        for h in &loc.inactive {
            write_hist(&mut w, h);
        }
    }
    w.0
}

fn decode_payload(buf: &[u8]) -> Result<Fingerprint> {
    let mut r = Reader { buf, pos: 0 };
    let params = read_params(&mut r)?;
    let (width, height) = (r.f64()?, r.f64()?);
    let (nx, ny) = (r.usize()?, r.usize()?);
    if nx.saturating_mul(ny) > buf.len() {
        return Err(Error::Corrupt(format!("implausible grid {nx}x{ny}")));
    }
    let grid = Grid::regular(width, height, nx, ny).map_err(|e| Error::Corrupt(e.to_string()))?;
    let k = r.count(8)?;
    let streams = (0..k)
        .map(|_| StreamId::new(r.str()?).map_err(|e| Error::Corrupt(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let offline_stats = (0..k)
        .map(|_| {
            Ok(SampleSummary {
                count: r.u64()?,
                mean: r.f64()?,
                m2: r.f64()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = [[0u64; 2]; 4];
    for h in &mut counts {
        h[0] = r.u64()?;
        h[1] = r.u64()?;
    }
    let mut locations = Vec::with_capacity(grid.len());
    for loc in grid.locations() {
        let active = (0..k).map(|_| read_hist(&mut r)).collect::<Result<Vec<_>>>()?;
        let inactive = (0..k).map(|_| read_hist(&mut r)).collect::<Result<Vec<_>>>()?;
        locations.push(LocationFingerprint {
            location: *loc,
            active,
            inactive,
        });
    }
    if r.pos != buf.len() {
        return Err(Error::Corrupt("trailing bytes in payload".into()));
    }
    Fingerprint::from_parts(
        grid,
        streams,
        locations,
        TemporalPrior::from_counts(counts),
        params,
        offline_stats,
    )
    .map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn encode_fingerprint(fp: &Fingerprint) -> Vec<u8> {
    let payload = encode_payload(fp);
    let mut out = Vec::with_capacity(payload.len() + 20);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

pub fn decode_fingerprint(bytes: &[u8]) -> Result<Fingerprint> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC {
        return Err(Error::Corrupt("missing SPOTFP magic".into()));
    }
    let version = u16::from_le_bytes([bytes[6], bytes[7]]);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let rest = &bytes[8..];
    if rest.len() < 8 {
        return Err(Error::Corrupt("truncated header".into()));
    }
    let len = u64::from_le_bytes(rest[..8].try_into().unwrap());
    let body = &rest[8..];
    let len = usize::try_from(len)
        .ok()
        .filter(|&l| l.checked_add(4) == Some(body.len()))
        .ok_or_else(|| {
            Error::Corrupt(format!(
                "payload length {len} does not match file size ({} bytes after header)",
                body.len()
            ))
        })?;
    let (payload, crc) = body.split_at(len);
    let stored = u32::from_le_bytes(crc.try_into().unwrap());
    if crc32fast::hash(payload) != stored {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    decode_payload(payload)
}

pub fn save_fingerprint(fp: &Fingerprint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_fingerprint(fp))?;
    Ok(())
}

pub fn load_fingerprint(path: impl AsRef<Path>) -> Result<Fingerprint> {
    decode_fingerprint(&fs::read(path)?)
}
