//! Welch power spectral density estimates for noise validation.

use islandnet_core::noise::{self, NoiseError, NoiseSpec};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsdError {
    #[error("series of {len} samples is too short for {segments} segments (need at least {needed})")]
    TooShort { len: usize, segments: usize, needed: usize },
    #[error("need at least one segment")]
    NoSegments,
    #[error("sample interval must be positive")]
    BadStep,
}

/// One-sided density estimate (A²/Hz for a current series).
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freq: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn bin_width(&self) -> f64 {
        self.freq.get(1).copied().unwrap_or(0.0)
    }

    /// Integrated power over the bins with `lo <= f <= hi`.
    pub fn power_between(&self, lo: f64, hi: f64) -> f64 {
        let df = self.bin_width();
        self.freq.iter().zip(&self.density).filter(|(f, _)| **f >= lo && **f <= hi).map(|(_, p)| p * df).sum()
    }
}

/// Welch estimate with `n_segments` half-overlapping Hann-tapered segments.
///
/// Each segment's mean is taken out before tapering and reported on its own
/// in the zero-frequency bin, so a constant input lands entirely there and
/// the taper never smears it into bin 1.
pub fn psd_estimate(series: &[f64], dt: f64, n_segments: usize) -> Result<Psd, PsdError> {
    if n_segments == 0 {
        return Err(PsdError::NoSegments);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PsdError::BadStep);
    }
    let needed = 8 * n_segments;
    if series.len() < needed {
        return Err(PsdError::TooShort { len: series.len(), segments: n_segments, needed });
    }
    // n segments of length L overlapping by L/2 span (n + 1) L / 2 samples.
    let len = (2 * series.len() / (n_segments + 1)) & !1;
    let hop = len / 2;
    let window: Vec<f64> = (0..len)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / len as f64).sin();
            s * s
        })
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fs = 1.0 / dt;
    let df = fs / len as f64;

    let fft = FftPlanner::new().plan_fft_forward(len);
    let n_bins = len / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for seg in 0..n_segments {
        let chunk = &series[seg * hop..seg * hop + len];
        let mean = chunk.iter().sum::<f64>() / len as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        acc[0] += mean * mean / df;
        for k in 1..n_bins {
            let one_sided = if 2 * k == len { 1.0 } else { 2.0 };
            acc[k] += one_sided * buf[k].norm_sqr() / (fs * w2);
        }
    }
    let density = acc.into_iter().map(|p| p / n_segments as f64).collect();
    let freq = (0..n_bins).map(|k| k as f64 * df).collect();
    Ok(Psd { freq, density })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Psd(#[from] PsdError),
    #[error("need at least one realization")]
    NoSeeds,
}

/// Welch spectrum of `spec` averaged over `seeds` realizations. Realization
/// `k` uses seed `spec.seed + k` on the spec's own stream.
pub fn noise_spectrum(spec: &NoiseSpec, dt: f64, samples: usize, seeds: u64, segments: usize) -> Result<Psd, SpectrumError> {
    if seeds == 0 {
        return Err(SpectrumError::NoSeeds);
    }
    let spectra: Vec<Psd> = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let s = spec.clone().with_stream(spec.seed.wrapping_add(k), spec.stream_id);
            Ok(psd_estimate(&noise::generate(&s, samples, dt)?, dt, segments)?)
        })
        .collect::<Result<_, SpectrumError>>()?;
    Ok(average(&spectra).expect("at least one spectrum"))
}

/// Bin-by-bin mean of spectra that share a frequency grid.
pub fn average(spectra: &[Psd]) -> Option<Psd> {
    let first = spectra.first()?;
    let mut density = vec![0.0; first.density.len()];
    for s in spectra {
        for (d, p) in density.iter_mut().zip(&s.density) {
            *d += p;
        }
    }
    density.iter_mut().for_each(|d| *d /= spectra.len() as f64);
    Some(Psd { freq: first.freq.clone(), density })
}

/// Averages the bins in `[lo, hi)` over log-spaced bands, `per_decade` bands
/// per decade. Returns `(geometric centre, mean density)` for every band
/// holding at least one bin.
pub fn log_bands(psd: &Psd, lo: f64, hi: f64, per_decade: usize) -> Vec<(f64, f64)> {
    let n_bands = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let step = (hi / lo).log10() / n_bands as f64;
    let mut sums = vec![(0.0, 0usize); n_bands];
    for (&f, &p) in psd.freq.iter().zip(&psd.density) {
        if f < lo || f >= hi {
            continue;
        }
        let k = (((f / lo).log10() / step) as usize).min(n_bands - 1);
        sums[k].0 += p;
        sums[k].1 += 1;
    }
    sums.iter()
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(k, (sum, c))| (lo * 10f64.powf(step * (k as f64 + 0.5)), sum / *c as f64))
        .collect()
}

/// Largest deviation, in dB, of any point from the mean level of all points.
pub fn flatness_db(points: &[(f64, f64)]) -> f64 {
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    points.iter().map(|p| (10.0 * (p.1 / mean).log10()).abs()).fold(0.0, f64::max)
}

/// Least-squares slope of `10 log10(p)` against `log10(f)`, in dB per decade.
pub fn slope_db_per_decade(points: &[(f64, f64)]) -> f64 {
    let xy: Vec<(f64, f64)> = points.iter().map(|&(f, p)| (f.log10(), 10.0 * p.log10())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
