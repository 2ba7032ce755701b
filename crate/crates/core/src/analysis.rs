//! Statistics over spike records and external event series.

use alloc::vec::Vec;

use thiserror::Error;

/// Spike detection level that separates spikes from sub-threshold noise.
pub const DETECTION_THRESHOLD: f64 = 1.0;

/// Default bin width for simulated spike trains: one natural spike period.
pub const DEFAULT_BIN: f64 = 1e-6;

/// Default bin width for frame-sampled external recordings.
pub const DEFAULT_FRAME_BIN: f64 = 0.2;

pub const DEFAULT_GAP_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("event times of source {source_id} are not strictly increasing at index {index}")]
    Unsorted { source_id: u64, index: usize },
    #[error("series {index} has length {len}, expected {expected}")]
    LengthMismatch { index: usize, len: usize, expected: usize },
    #[error("series must have at least two samples")]
    TooShort,
    #[error("bin width must be positive")]
    InvalidBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Origin {
    #[default]
    Simulated,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    pub source: u64,
    pub times: Vec<f64>,
    pub origin: Origin,
}

impl EventSeries {
    pub fn new(source: u64, times: Vec<f64>, origin: Origin) -> Result<Self, AnalysisError> {
        if let Some(index) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(AnalysisError::Unsorted { source_id: source, index: index + 1 });
        }
        Ok(EventSeries { source, times, origin })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Times of rising crossings of `threshold` in a sampled trace. The detector
/// re-arms only once the trace falls back below the threshold. Crossing
/// times are linearly interpolated between samples.
pub fn detect_spikes(trace: &[f64], dt: f64, threshold: f64) -> Vec<f64> {
    let mut events = Vec::new();
    let mut armed = match trace.first() {
        Some(&v) => v < threshold,
        None => return events,
    };
    for (k, w) in trace.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if armed && b >= threshold {
            let frac = if b > a { (threshold - a) / (b - a) } else { 1.0 };
            events.push((k as f64 + frac) * dt);
            armed = false;
        } else if b < threshold {
            armed = true;
        }
    }
    events
}

/// Spike counts per threshold.
pub fn threshold_sweep(trace: &[f64], dt: f64, thresholds: &[f64]) -> Vec<(f64, usize)> {
    thresholds
        .iter()
        .map(|&th| (th, detect_spikes(trace, dt, th).len()))
        .collect()
}

/// Consecutive differences of sorted event times.
pub fn isi(times: &[f64]) -> Vec<f64> {
    times.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Fixed-width histogram with bins `[k w, (k+1) w)` starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn left_edge(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Histogram of non-negative values. Negative and non-finite values are
/// dropped.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Histogram, AnalysisError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(AnalysisError::InvalidBin);
    }
    let mut counts = Vec::new();
    for &v in values {
        if !(v.is_finite() && v >= 0.0) {
            continue;
        }
        let k = libm::floor(v / bin_width) as usize;
        if k >= counts.len() {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    Ok(Histogram { bin_width, counts })
}

/// Median of a sample (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Linear-interpolation percentile, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Splits events into trains wherever an inter-spike interval exceeds
/// `gap_factor` times the median interval. Fewer than two events give no
/// trains.
pub fn trains(times: &[f64], gap_factor: f64) -> Vec<Vec<f64>> {
    if times.len() < 2 {
        return Vec::new();
    }
    let intervals = isi(times);
    let limit = gap_factor * median(&intervals).unwrap_or(0.0);
    let mut out = Vec::new();
    let mut current = alloc::vec![times[0]];
    for (k, &gap) in intervals.iter().enumerate() {
        if gap > limit {
            out.push(core::mem::take(&mut current));
        }
        current.push(times[k + 1]);
    }
    out.push(current);
    out
}

/// Inter-train intervals: last spike of one train to the first of the next.
pub fn iti(trains: &[Vec<f64>]) -> Vec<f64> {
    trains
        .windows(2)
        .filter_map(|w| Some(w[1].first()? - w[0].last()?))
        .collect()
}

/// Event counts per bin over `[0, t_end)`.
pub fn bin_events(times: &[f64], bin_width: f64, t_end: f64) -> Result<Vec<u32>, AnalysisError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(AnalysisError::InvalidBin);
    }
    let n_bins = libm::ceil(t_end / bin_width).max(0.0) as usize;
    let mut counts = alloc::vec![0u32; n_bins];
    for &t in times {
        if t >= 0.0 && t < t_end {
            let k = (libm::floor(t / bin_width) as usize).min(n_bins - 1);
            counts[k] += 1;
        }
    }
    Ok(counts)
}

/// Pearson correlation matrix. Entries involving a zero-variance series are
/// NaN and the series is flagged in `undefined`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub n: usize,
    /// Row-major `n x n` coefficients.
    pub values: Vec<f64>,
    pub labels: Vec<u64>,
    pub bin_width: Option<f64>,
    pub undefined: Vec<bool>,
}

impl CorrelationMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Mean of the defined off-diagonal coefficients between members of the
    /// same group and between members of different groups.
    pub fn block_means(&self, groups: &[usize]) -> BlockMeans {
        let (mut within, mut nw, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let r = self.get(i, j);
                if r.is_nan() {
                    continue;
                }
                if groups[i] == groups[j] {
                    within += r;
                    nw += 1;
                } else {
                    cross += r;
                    nc += 1;
                }
            }
        }
        BlockMeans {
            within: (nw > 0).then(|| within / nw as f64),
            cross: (nc > 0).then(|| cross / nc as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMeans {
    pub within: Option<f64>,
    pub cross: Option<f64>,
}

/// Pearson coefficient for every pair of equal-length series:
/// `rho(A, B) = sum((A - mu_A)(B - mu_B)) / sqrt(sum((A - mu_A)^2) sum((B - mu_B)^2))`,
/// which equals the standardized-product form with `N - 1` normalization.
pub fn pearson_matrix<S: AsRef<[f64]>>(series: &[S]) -> Result<CorrelationMatrix, AnalysisError> {
    let n = series.len();
    let len = series.first().map_or(0, |s| s.as_ref().len());
    for (index, s) in series.iter().enumerate() {
        if s.as_ref().len() != len {
            return Err(AnalysisError::LengthMismatch { index, len: s.as_ref().len(), expected: len });
        }
    }
    if n > 0 && len < 2 {
        return Err(AnalysisError::TooShort);
    }

    let centered: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let s = s.as_ref();
            let mu = s.iter().sum::<f64>() / len as f64;
            s.iter().map(|x| x - mu).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| libm::sqrt(c.iter().map(|x| x * x).sum())).collect();
    let undefined: Vec<bool> = norms.iter().map(|&s| !(s > 0.0)).collect();

    let mut values = alloc::vec![f64::NAN; n * n];
    for i in 0..n {
        if undefined[i] {
            continue;
        }
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            if undefined[j] {
                continue;
            }
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix { n, values, labels: (0..n as u64).collect(), bin_width: None, undefined })
}

/// Two-sample Kolmogorov–Smirnov distance between empirical distributions.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    Some(d)
}
