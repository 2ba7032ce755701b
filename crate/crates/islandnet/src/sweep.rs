//! One-axis parameter sweeps run as independent simulations.

use std::str::FromStr;

use islandnet_core::analysis;
use islandnet_core::engine::{self, SimError, SpikeRecord};
use islandnet_core::noise::{mix64, NoiseLevel};
use islandnet_core::topology::RingSpec;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, Experiment};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown sweep axis `{0}` (expected density, links_per_pair, fanout or multiplicity)")]
    UnknownAxis(String),
    #[error("no sweep values given")]
    Empty,
    #[error("value {value} is not valid for axis {axis}")]
    BadValue { axis: &'static str, value: f64 },
    #[error("axis {0} needs a [ring] table in the config")]
    NoRing(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Noise density of every island, in A/√Hz.
    Density,
    LinksPerPair,
    Fanout,
    Multiplicity,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Density => "density",
            Axis::LinksPerPair => "links_per_pair",
            Axis::Fanout => "fanout",
            Axis::Multiplicity => "multiplicity",
        }
    }
}

impl FromStr for Axis {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "density" => Ok(Axis::Density),
            "links_per_pair" | "links" => Ok(Axis::LinksPerPair),
            "fanout" => Ok(Axis::Fanout),
            "multiplicity" => Ok(Axis::Multiplicity),
            other => Err(SweepError::UnknownAxis(other.to_string())),
        }
    }
}

/// Seed of run `index` in a sweep started from `base`.
pub fn derive_seed(base: u64, index: usize) -> u64 {
    mix64(base ^ mix64(index as u64))
}

fn count(axis: Axis, value: f64) -> Result<usize, SweepError> {
    if value >= 0.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as usize)
    } else {
        Err(SweepError::BadValue { axis: axis.as_str(), value })
    }
}

/// Copy of `exp` with the swept parameter set to `value`.
pub fn apply(exp: &Experiment, axis: Axis, value: f64) -> Result<Experiment, SweepError> {
    let mut out = exp.clone();
    if axis == Axis::Density {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SweepError::BadValue { axis: axis.as_str(), value });
        }
        for spec in &mut out.network.noise {
            spec.level = NoiseLevel::Density(value);
        }
        return Ok(out);
    }
    let n = count(axis, value)?;
    let mut ring = match (&exp.ring, axis) {
        (Some(r), _) => r.clone(),
        (None, Axis::LinksPerPair) => RingSpec::new(0, 1, 1, exp.sim.master_seed),
        (None, _) => return Err(SweepError::NoRing(axis.as_str())),
    };
    match axis {
        Axis::LinksPerPair => ring.links_per_pair = n,
        Axis::Fanout => ring.fanout = n,
        Axis::Multiplicity => ring.multiplicity = n,
        Axis::Density => unreachable!(),
    }
    out.set_ring(Some(ring))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    /// Mean over all inter-spike intervals of all neurons.
    pub mean_isi: Option<f64>,
    pub spike_count: usize,
    pub mean_cross_rho: Option<f64>,
}

/// Summary statistics of one run.
pub fn summarize(value: f64, record: &SpikeRecord, bin: f64) -> Result<SweepRow, SweepError> {
    let intervals: Vec<f64> = record.spikes.iter().flat_map(|s| analysis::isi(s)).collect();
    let cross = if record.island_of.iter().any(|&i| i != record.island_of[0]) {
        record.correlation(bin)?.block_means(&record.island_of).cross
    } else {
        None
    };
    Ok(SweepRow {
        value,
        seed: record.meta.seed,
        mean_isi: analysis::mean(&intervals),
        spike_count: record.total_spikes(),
        mean_cross_rho: cross,
    })
}

pub struct SweepRun {
    pub row: SweepRow,
    pub record: SpikeRecord,
}

/// Runs every value on up to `jobs` threads. Results come back in value order
/// and do not depend on `jobs`.
pub fn run_sweep(exp: &Experiment, axis: Axis, values: &[f64], jobs: usize, bin: f64) -> Result<Vec<SweepRun>, SweepError> {
    if values.is_empty() {
        return Err(SweepError::Empty);
    }
    let runs: Vec<Experiment> = values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut e = apply(exp, axis, v)?;
            e.sim.master_seed = derive_seed(exp.sim.master_seed, k);
            Ok(e)
        })
        .collect::<Result<_, SweepError>>()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    pool.install(|| {
        runs.par_iter()
            .zip(values.par_iter())
            .map(|(e, &v)| {
                let record = engine::run(&e.network, &e.sim)?;
                Ok(SweepRun { row: summarize(v, &record, bin)?, record })
            })
            .collect()
    })
}

/// `value,seed,mean_isi,spike_count,mean_cross_rho`; missing entries are `NA`.
pub fn write_summary<W: std::io::Write>(w: W, rows: &[SweepRow]) -> Result<(), crate::io::IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["value", "seed", "mean_isi", "spike_count", "mean_cross_rho"])?;
    let opt = |x: Option<f64>| x.map_or(crate::io::MISSING.to_string(), |v| v.to_string());
    for r in rows {
        out.write_record([
            r.value.to_string(),
            r.seed.to_string(),
            opt(r.mean_isi),
            r.spike_count.to_string(),
            opt(r.mean_cross_rho),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const RING: &str = r#"
[simulation]
duration = 2e-6
seed = 5

[ring]
links_per_pair = 2
fanout = 3
multiplicity = 1
seed = 9
"#;

    fn islands(n: usize) -> String {
        let mut s = String::from(RING);
        for _ in 0..n {
            s.push_str("\n[[island]]\nneurons = 4\nnoise = { kind = \"white\", density = 2e-10 }\n");
        }
        s
    }

    #[test]
    fn axis_names_parse() {
        assert_eq!("links".parse::<Axis>().unwrap(), Axis::LinksPerPair);
        assert!(matches!("weight".parse::<Axis>(), Err(SweepError::UnknownAxis(_))));
    }

    #[test]
    fn ring_axes_rebuild_links() {
        let exp = parse_config(&islands(4)).unwrap();
        assert_eq!(exp.network.links.len(), 8);
        let more = apply(&exp, Axis::LinksPerPair, 4.0).unwrap();
        assert_eq!(more.network.links.len(), 16);
        let wide = apply(&exp, Axis::Fanout, 4.0).unwrap();
        assert!(wide.network.links.iter().all(|l| l.targets.len() == 4));
        assert!(apply(&exp, Axis::Fanout, 5.0).is_err());
        assert!(apply(&exp, Axis::Multiplicity, 1.5).is_err());
    }

    #[test]
    fn density_sets_every_island() {
        let exp = parse_config(&islands(2)).unwrap();
        let e = apply(&exp, Axis::Density, 4e-10).unwrap();
        assert!(e.network.noise.iter().all(|n| n.level == NoiseLevel::Density(4e-10)));
    }

    #[test]
    fn results_do_not_depend_on_jobs() {
        let exp = parse_config(&islands(2)).unwrap();
        let values = [3e-10, 6e-10];
        let a = run_sweep(&exp, Axis::Density, &values, 1, 1e-6).unwrap();
        let b = run_sweep(&exp, Axis::Density, &values, 2, 1e-6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.row, y.row);
            assert_eq!(x.record.spikes, y.record.spikes);
        }
        assert_ne!(a[0].row.seed, a[1].row.seed);
        assert!(matches!(run_sweep(&exp, Axis::Density, &[], 1, 1e-6), Err(SweepError::Empty)));
    }
}
