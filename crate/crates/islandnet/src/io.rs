//! Plain-text artifacts: spike and event CSVs, traces, matrices, histograms
//! and the run metadata document.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use islandnet_core::analysis::{CorrelationMatrix, Histogram};
use islandnet_core::engine::{SpikeRecord, Trace};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
}

/// Marker written for undefined matrix entries (silent neurons).
pub const MISSING: &str = "NA";

/// Writes `neuron_id,t_seconds`, ordered by neuron then time. Floats use the
/// shortest representation that reads back to the same value.
pub fn write_spikes<W: Write>(w: W, spikes: &[Vec<f64>]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["neuron_id", "t_seconds"])?;
    for (id, times) in spikes.iter().enumerate() {
        for t in times {
            out.write_record([id.to_string(), t.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a `neuron_id,t_seconds` file into per-neuron sorted lists. The
/// result has at least `min_neurons` rows.
pub fn read_spikes<R: Read>(r: R, min_neurons: usize) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); min_neurons];
    let mut input = csv::Reader::from_reader(r);
    for rec in input.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| IoError::Format { line, message: format!("bad {what}") };
        let id: usize = rec.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("neuron_id"))?;
        let t: f64 = rec.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("t_seconds"))?;
        if !t.is_finite() {
            return Err(bad("t_seconds"));
        }
        if id >= rows.len() {
            rows.resize(id + 1, Vec::new());
        }
        rows[id].push(t);
    }
    for r in &mut rows {
        r.sort_by(f64::total_cmp);
    }
    Ok(rows)
}

/// Reads external `source_id,t_seconds` events, grouped by source id (in
/// lexicographic id order) and sorted in time.
pub fn read_events<R: Read>(r: R) -> Result<BTreeMap<String, Vec<f64>>, IoError> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut input = csv::Reader::from_reader(r);
    for rec in input.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec.get(0).map(str::trim).filter(|s| !s.is_empty());
        let t = rec.get(1).and_then(|s| s.trim().parse::<f64>().ok()).filter(|t| t.is_finite());
        match (id, t) {
            (Some(id), Some(t)) => out.entry(id.to_string()).or_default().push(t),
            _ => return Err(IoError::Format { line, message: "expected source_id,t_seconds".to_string() }),
        }
    }
    for v in out.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    Ok(out)
}

/// Writes decimated membrane traces as `t_seconds,v_<id>,...`. All traces
/// must share their sampling.
pub fn write_traces<W: Write>(w: W, traces: &[Trace]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t_seconds".to_string()];
    header.extend(traces.iter().map(|t| format!("v_{}", t.neuron)));
    out.write_record(&header)?;
    let len = traces.iter().map(|t| t.v_m.len()).min().unwrap_or(0);
    let dt = traces.first().map_or(0.0, |t| t.dt);
    for k in 0..len {
        let mut row = vec![(k as f64 * dt).to_string()];
        row.extend(traces.iter().map(|t| t.v_m[k].to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a traces file back into `(dt, [(label, samples)])`.
pub fn read_traces<R: Read>(r: R) -> Result<(f64, Vec<(String, Vec<f64>)>), IoError> {
    let mut input = csv::Reader::from_reader(r);
    let labels: Vec<String> = input.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    let mut times = Vec::new();
    for rec in input.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = rec.iter().map(|s| s.trim().parse::<f64>());
        let bad = || IoError::Format { line, message: "non-numeric sample".to_string() };
        times.push(vals.next().and_then(Result::ok).ok_or_else(bad)?);
        for c in cols.iter_mut() {
            c.push(vals.next().and_then(Result::ok).ok_or_else(bad)?);
        }
    }
    let dt = if times.len() >= 2 { times[1] - times[0] } else { 0.0 };
    Ok((dt, labels.into_iter().zip(cols).collect()))
}

/// Square matrix with a label header row and column; undefined entries are
/// written as [`MISSING`].
pub fn write_matrix<W: Write>(w: W, m: &CorrelationMatrix, labels: &[String]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![String::new()];
    header.extend(labels.iter().cloned());
    out.write_record(&header)?;
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..m.n).map(|j| {
            let v = m.get(i, j);
            if v.is_nan() {
                MISSING.to_string()
            } else {
                v.to_string()
            }
        }));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Two columns: `bin_start,count`.
pub fn write_histogram<W: Write>(w: W, h: &Histogram) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_start", "count"])?;
    for (k, c) in h.counts.iter().enumerate() {
        out.write_record([h.left_edge(k).to_string(), c.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Two numeric columns under `header`.
pub fn write_pairs<W: Write>(w: W, header: [&str; 2], rows: &[(f64, f64)]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for (a, b) in rows {
        out.write_record([a.to_string(), b.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Run metadata written next to `spikes.csv`. The creation time is the only
/// field that changes between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub created_unix: u64,
    pub config: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub n_neurons: usize,
    /// Island index of every neuron.
    pub islands: Vec<usize>,
    pub total_spikes: usize,
    pub versions: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(record: &SpikeRecord, config: Option<String>, config_hash: String) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("islandnet".to_string(), env!("CARGO_PKG_VERSION").to_string());
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Meta {
            created_unix,
            config,
            config_hash,
            seed: record.meta.seed,
            dt: record.meta.dt,
            duration: record.meta.duration,
            n_neurons: record.n_neurons(),
            islands: record.island_of.clone(),
            total_spikes: record.total_spikes(),
            versions,
        }
    }
}

pub fn write_meta<W: Write>(mut w: W, meta: &Meta) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut w, meta)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_meta<R: Read>(r: R) -> Result<Meta, IoError> {
    Ok(serde_json::from_reader(r)?)
}
