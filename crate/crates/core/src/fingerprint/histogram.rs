use crate::error::{Error, Result};

/// Mass mixed in uniformly after smoothing so that no bin is exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-7;

/// Fixed-width RSS histogram normalized to a probability mass function.
#[derive(Debug, Clone, PartialEq)]
pub struct RssHistogram {
    bin_width: f64,
    origin: f64,
    probabilities: Vec<f64>,
    /// Raw readings the histogram was built from.
    samples: u64,
}

impl RssHistogram {
    /// Normalizes raw bin counts. Fails if every count is zero.
    pub fn from_counts(bin_width: f64, origin: f64, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::invalid("empty histogram"));
        }
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::from_parts(bin_width, origin, probabilities, total)
    }

    pub fn from_parts(bin_width: f64, origin: f64, probabilities: Vec<f64>, samples: u64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite() && origin.is_finite()) {
            return Err(Error::invalid("histogram needs a positive bin width and finite origin"));
        }
        if probabilities.is_empty() {
            return Err(Error::invalid("empty histogram"));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("histogram probabilities must be finite and >= 0"));
        }
        Ok(RssHistogram {
            bin_width,
            origin,
            probabilities,
            samples,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Bin holding `dbm`; readings outside the range map to the nearest edge bin.
    pub fn bin_of(&self, dbm: f64) -> usize {
        let pos = ((dbm - self.origin) / self.bin_width).floor();
        if pos < 0.0 || pos.is_nan() {
            0
        } else {
            (pos as usize).min(self.probabilities.len() - 1)
        }
    }

    pub fn probability(&self, dbm: f64) -> f64 {
        self.probabilities[self.bin_of(dbm)]
    }

    /// Mean RSS using bin centers.
    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| p * (self.origin + (i as f64 + 0.5) * self.bin_width))
            .sum::<f64>()
            / self.probabilities.iter().sum::<f64>()
    }
}

/// Convolves the bin mass with a discrete Gaussian kernel truncated at 4σ.
///
/// At the edges the kernel is renormalized over the bins that exist, so a
/// uniform histogram stays uniform. The result is then mixed with a uniform
/// floor of total mass [`PROBABILITY_FLOOR`] so every bin is strictly positive.
pub fn smooth_histogram(h: &RssHistogram, sigma: f64) -> Result<RssHistogram> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let total: f64 = h.probabilities.iter().sum();
    if h.probabilities.is_empty() || total <= 0.0 {
        return Err(Error::invalid("empty histogram"));
    }
    let radius = (4.0 * sigma / h.bin_width).floor() as usize;
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| {
            let d = k as f64 * h.bin_width;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();

    let len = h.probabilities.len();
    let mut out = vec![0.0; len];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(len - 1);
        let mut acc = 0.0;
        let mut norm = 0.0;
        for j in lo..=hi {
            let k = kernel[i.abs_diff(j)];
            acc += k * h.probabilities[j];
            norm += k;
        }
        *o = acc / norm;
    }
    let mass: f64 = out.iter().sum();
    let floor = PROBABILITY_FLOOR / len as f64;
    for o in &mut out {
        *o = (1.0 - PROBABILITY_FLOOR) * (*o / mass) + floor;
    }
    // final pass keeps the sum within a few ulps of 1
    let mass: f64 = out.iter().sum();
    for o in &mut out {
        *o /= mass;
    }
    RssHistogram::from_parts(h.bin_width, h.origin, out, h.samples)
}
