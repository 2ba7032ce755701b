//! Seeded zero-mean Gaussian current noise with white or pink spectra.
//!
//! Every source is identified by `(seed, stream_id)`; the pair maps to an
//! independent ChaCha8 keystream, so sources never share random numbers and
//! a given pair reproduces the same series on every run.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Number of first-order pole–zero sections in the pink shaping filter.
pub const PINK_SECTIONS: usize = 6;

/// Default noise band (Hz).
pub const DEFAULT_BAND: (f64, f64) = (10.0, 5e6);

/// Pink filter warm-up, in time constants of its slowest pole.
const WARMUP_TIME_CONSTANTS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NoiseError {
    #[error("band ({lo} Hz, {hi} Hz) is invalid for dt = {dt:e} s (need 0 < f_lo < f_hi <= 1/(2 dt))")]
    InvalidBand { lo: f64, hi: f64, dt: f64 },
    #[error("noise level must be positive and finite")]
    InvalidLevel,
    #[error("series length must be at least 1")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    White,
    Pink,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
        }
    }
}

/// Noise amplitude, either as a spectral density or as an rms current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// One-sided current spectral density (A/√Hz).
    Density(f64),
    /// Rms current (A). White noise spreads it up to Nyquist; pink noise
    /// spreads it over the band.
    Rms(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: NoiseLevel,
    /// `(f_lo, f_hi)` in Hz.
    pub band: (f64, f64),
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseSpec {
    pub fn white(level: NoiseLevel) -> Self {
        NoiseSpec { kind: NoiseKind::White, level, band: DEFAULT_BAND, seed: 0, stream_id: 0 }
    }

    pub fn pink(level: NoiseLevel) -> Self {
        NoiseSpec { kind: NoiseKind::Pink, level, band: DEFAULT_BAND, seed: 0, stream_id: 0 }
    }

    pub fn with_stream(self, seed: u64, stream_id: u64) -> Self {
        NoiseSpec { seed, stream_id, ..self }
    }

    pub fn validate(&self, dt: f64) -> Result<(), NoiseError> {
        let (lo, hi) = self.band;
        if !(dt > 0.0 && lo > 0.0 && lo < hi && hi <= 0.5 / dt * (1.0 + 1e-12)) {
            return Err(NoiseError::InvalidBand { lo, hi, dt });
        }
        let value = match self.level {
            NoiseLevel::Density(d) => d,
            NoiseLevel::Rms(r) => r,
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(NoiseError::InvalidLevel);
        }
        Ok(())
    }

    /// Spectral density in A/√Hz at sampling step `dt`.
    pub fn density(&self, dt: f64) -> f64 {
        match (self.level, self.kind) {
            (NoiseLevel::Density(d), _) => d,
            (NoiseLevel::Rms(r), NoiseKind::White) => r * libm::sqrt(2.0 * dt),
            (NoiseLevel::Rms(r), NoiseKind::Pink) => r / libm::sqrt(self.band.1 - self.band.0),
        }
    }

    /// Rms the generated series is scaled to (pink: in-band rms).
    pub fn rms(&self, dt: f64) -> f64 {
        let d = self.density(dt);
        match self.kind {
            NoiseKind::White => d * libm::sqrt(0.5 / dt),
            NoiseKind::Pink => d * libm::sqrt(self.band.1 - self.band.0),
        }
    }
}

/// SplitMix64 finalizer; used to derive stream ids.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for island `index` under a master seed.
pub fn island_stream(index: usize) -> u64 {
    mix64(0x6973_6c61_6e64_0000 ^ index as u64)
}

fn rng_for(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// One first-order section `(1 - b z^-1) / (1 - a z^-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    a: f64,
    b: f64,
}

/// Cascade of pole–zero sections approximating a 1/f power spectrum over a
/// band, followed by a final pole at the upper band edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PinkFilter {
    sections: [Section; PINK_SECTIONS],
    state: [(f64, f64); PINK_SECTIONS],
    dt: f64,
}

impl PinkFilter {
    /// Poles are log-spaced from `f_lo` to `f_hi`; each pole but the last is
    /// followed by a zero half-way (in log frequency) to the next pole.
    pub fn design(band: (f64, f64), dt: f64) -> Self {
        let (lo, hi) = band;
        let ratio = libm::pow(hi / lo, 1.0 / (PINK_SECTIONS - 1) as f64);
        let mut sections = [Section { a: 0.0, b: 0.0 }; PINK_SECTIONS];
        for (k, s) in sections.iter_mut().enumerate() {
            let pole = lo * libm::pow(ratio, k as f64);
            s.a = libm::exp(-2.0 * PI * pole * dt);
            s.b = if k + 1 < PINK_SECTIONS {
                libm::exp(-2.0 * PI * pole * libm::sqrt(ratio) * dt)
            } else {
                0.0
            };
        }
        PinkFilter { sections, state: [(0.0, 0.0); PINK_SECTIONS], dt }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, (x_prev, y_prev)) in self.sections.iter().zip(self.state.iter_mut()) {
            let y = v - s.b * *x_prev + s.a * *y_prev;
            *x_prev = v;
            *y_prev = y;
            v = y;
        }
        v
    }

    /// `|H(f)|^2` of the cascade.
    pub fn power_gain(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f * self.dt;
        let (c, s) = (libm::cos(w), libm::sin(w));
        self.sections.iter().fold(1.0, |acc, sec| {
            let num = (1.0 - sec.b * c) * (1.0 - sec.b * c) + (sec.b * s) * (sec.b * s);
            let den = (1.0 - sec.a * c) * (1.0 - sec.a * c) + (sec.a * s) * (sec.a * s);
            acc * num / den
        })
    }

    /// Power within `band` of the filter output for unit-variance white input.
    pub fn band_power(&self, band: (f64, f64)) -> f64 {
        // Trapezoid rule in ln f; the integrand is smooth on a log axis.
        const POINTS: usize = 4096;
        let (l0, l1) = (libm::log(band.0), libm::log(band.1));
        let h = (l1 - l0) / (POINTS - 1) as f64;
        let mut sum = 0.0;
        for k in 0..POINTS {
            let f = libm::exp(l0 + h * k as f64);
            let w = if k == 0 || k == POINTS - 1 { 0.5 } else { 1.0 };
            sum += w * self.power_gain(f) * f;
        }
        sum * h * 2.0 * self.dt
    }

    fn warmup_samples(band: (f64, f64), dt: f64) -> usize {
        libm::ceil(WARMUP_TIME_CONSTANTS / (2.0 * PI * band.0 * dt)) as usize
    }
}

fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
}

fn remove_mean(series: &mut [f64]) {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    for x in series.iter_mut() {
        *x -= mean;
    }
}

fn unit_white(seed: u64, stream_id: u64, n: usize) -> Vec<f64> {
    let mut w = alloc::vec![0.0; n];
    fill_standard_normal(&mut rng_for(seed, stream_id), &mut w);
    w
}

/// Generates `n` samples at step `dt`.
///
/// White: i.i.d. Gaussian with standard deviation `density * sqrt(1/(2 dt))`.
/// Pink: white noise through [`PinkFilter`], scaled so the in-band power
/// equals `density^2 * (f_hi - f_lo)`. The sample mean is subtracted.
pub fn generate(spec: &NoiseSpec, n: usize, dt: f64) -> Result<Vec<f64>, NoiseError> {
    if n == 0 {
        return Err(NoiseError::Empty);
    }
    spec.validate(dt)?;
    let density = spec.density(dt);

    let mut series = match spec.kind {
        NoiseKind::White => {
            let mut w = unit_white(spec.seed, spec.stream_id, n);
            let sigma = density * libm::sqrt(0.5 / dt);
            w.iter_mut().for_each(|x| *x *= sigma);
            w
        }
        NoiseKind::Pink => {
            let mut filter = PinkFilter::design(spec.band, dt);
            let scale = density * libm::sqrt((spec.band.1 - spec.band.0) / filter.band_power(spec.band));
            // Warm-up draws come from their own stream.
            let warmup = PinkFilter::warmup_samples(spec.band, dt);
            let mut rng = rng_for(spec.seed, mix64(spec.stream_id ^ 0x7761_726d));
            for _ in 0..warmup {
                let x: f64 = StandardNormal.sample(&mut rng);
                filter.process(x);
            }
            let mut w = unit_white(spec.seed, spec.stream_id, n);
            for x in w.iter_mut() {
                *x = filter.process(*x) * scale;
            }
            w
        }
    };
    remove_mean(&mut series);
    Ok(series)
}
