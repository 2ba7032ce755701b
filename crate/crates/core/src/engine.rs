//! Fixed-step transient simulation of island networks.
//!
//! Each step runs, in this order: one noise sample per island, shared by all
//! of its neurons; every synapse advanced over the step from the recorded
//! presynaptic spikes; per-neuron input summed as noise plus excitatory minus
//! inhibitory synaptic current; every neuron advanced; spike onsets detected
//! as rising crossings of 1 V, re-armed once the membrane falls below 1 V.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::analysis::DETECTION_THRESHOLD;
use crate::neuron::{self, NeuronError, NeuronParams, NeuronState};
use crate::noise::{self, NoiseError, NoiseSpec};
use crate::synapse::{self, SynapseParams, SynapseState};
use crate::topology::{IslandSpec, NetworkSpec, TopologyError};

pub const DEFAULT_DT: f64 = 10e-9;
pub const DEFAULT_DECIMATION: usize = 10;

/// Conduction delay between a presynaptic spike and the start of its pulse.
/// Any `dt` up to this delay sees every pulse in full.
pub const SYNAPTIC_DELAY: f64 = 20e-9;

/// Neurons with synaptic current above [`SUBSTEP_CURRENT`] are advanced on a
/// grid of this spacing (or `dt`, if finer), which does not move when `dt` is
/// halved.
pub const SYNAPTIC_SUBSTEP: f64 = 1e-9;

/// Synaptic current (above the floor) below which a synapse is integrated
/// with whole steps.
pub const SUBSTEP_CURRENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("noise: {0}")]
    Noise(#[from] NoiseError),
    #[error("neuron: {0}")]
    Neuron(#[from] NeuronError),
    #[error("synapse: {0}")]
    Synapse(#[from] synapse::SynapseError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("non-finite state in neuron {neuron} at t = {time:e} s")]
    BlowUp { neuron: usize, time: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TraceSelector {
    #[default]
    None,
    All,
    Neurons(Vec<usize>),
}

impl TraceSelector {
    fn pick(&self, n: usize) -> Vec<usize> {
        match self {
            TraceSelector::None => Vec::new(),
            TraceSelector::All => (0..n).collect(),
            TraceSelector::Neurons(ids) => ids.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub duration: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub record_traces: TraceSelector,
    /// Keep every `trace_decimation`-th membrane sample.
    pub trace_decimation: usize,
    /// Sample interval of the noise sources, defaulting to `dt`. Must be an
    /// integer multiple of `dt`; each sample is held for that many steps, so
    /// runs sharing `noise_dt` and seed get the same input at any `dt`.
    pub noise_dt: Option<f64>,
}

impl SimConfig {
    pub fn new(duration: f64) -> Self {
        SimConfig {
            duration,
            dt: DEFAULT_DT,
            master_seed: 0,
            record_traces: TraceSelector::None,
            trace_decimation: DEFAULT_DECIMATION,
            noise_dt: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn n_steps(&self) -> usize {
        libm::floor(self.duration / self.dt * (1.0 + 1e-12)) as usize
    }

    /// Steps per noise sample.
    fn noise_hold(&self) -> Result<usize, SimError> {
        let Some(noise_dt) = self.noise_dt else { return Ok(1) };
        let ratio = noise_dt / self.dt;
        let hold = libm::round(ratio);
        if !(hold >= 1.0 && hold <= 1e9) || libm::fabs(ratio - hold) > 1e-9 * ratio {
            return Err(SimError::Config("noise_dt must be an integer multiple of dt".to_string()));
        }
        Ok(hold as usize)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config("dt must be positive".to_string()));
        }
        if !(self.duration >= 10.0 * self.dt * (1.0 - 1e-12)) || !self.duration.is_finite() {
            return Err(SimError::Config("duration must be at least 10 dt".to_string()));
        }
        if self.trace_decimation == 0 {
            return Err(SimError::Config("trace decimation must be at least 1".to_string()));
        }
        self.noise_hold().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub neuron: usize,
    /// Sample spacing; sample `j` is the membrane voltage at `j * dt`.
    pub dt: f64,
    pub v_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMeta {
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRecord {
    /// Sorted spike times of every neuron, in global neuron order.
    pub spikes: Vec<Vec<f64>>,
    pub island_of: Vec<usize>,
    pub meta: RunMeta,
    pub traces: Vec<Trace>,
}

impl SpikeRecord {
    pub fn n_neurons(&self) -> usize {
        self.spikes.len()
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    /// Spike counts per neuron in bins of `bin_width` over the run.
    pub fn binned(&self, bin_width: f64) -> Result<Vec<Vec<f64>>, crate::analysis::AnalysisError> {
        self.spikes
            .iter()
            .map(|s| {
                crate::analysis::bin_events(s, bin_width, self.meta.duration)
                    .map(|b| b.into_iter().map(f64::from).collect())
            })
            .collect()
    }

    /// Pearson matrix of binned spike counts, labelled by neuron id.
    pub fn correlation(&self, bin_width: f64) -> Result<crate::analysis::CorrelationMatrix, crate::analysis::AnalysisError> {
        let mut m = crate::analysis::pearson_matrix(&self.binned(bin_width)?)?;
        m.bin_width = Some(bin_width);
        Ok(m)
    }
}

struct Synapse {
    pre: usize,
    post: usize,
    /// Signed number of parallel identical synapses.
    weight: f64,
    params: SynapseParams,
    tau: f64,
    state: SynapseState,
}

/// Simulates `network` for `sim.duration` starting from rest.
pub fn run(network: &NetworkSpec, sim: &SimConfig) -> Result<SpikeRecord, SimError> {
    network.validate()?;
    sim.validate()?;
    let dt = sim.dt;
    let n_steps = sim.n_steps();
    let offsets = network.offsets();
    let island_of = network.island_of_neurons();
    let n = island_of.len();

    let mut params = Vec::with_capacity(network.islands.len());
    for k in 0..network.islands.len() {
        let (Some(np), Some(sp)) = (network.neuron_params(k), network.synapse_params(k)) else {
            unreachable!("presets checked by validate")
        };
        let max = np.max_dt();
        if dt > max {
            return Err(NeuronError::UnstableStep { dt, max }.into());
        }
        let max = sp.max_dt();
        if dt > max {
            return Err(synapse::SynapseError::UnstableStep { dt, max }.into());
        }
        params.push((*np, *sp));
    }
    let neuron_params: Vec<NeuronParams> = island_of.iter().map(|&k| params[k].0).collect();

    let mut synapses = Vec::new();
    let mut add = |pre: usize, post: usize, weight: f64, p: &SynapseParams, polarity| {
        let p = p.with_polarity(polarity);
        synapses.push(Synapse { pre, post, weight, params: p, tau: synapse::time_constant(&p), state: SynapseState::at_floor(&p) });
    };
    for (k, island) in network.islands.iter().enumerate() {
        for e in &island.crossbar {
            add(offsets[k] + e.pre, offsets[k] + e.post, e.polarity.sign(), &params[k].1, e.polarity);
        }
    }
    for link in &network.links {
        let Some(sp) = network.link_synapse_params(link) else { unreachable!("presets checked by validate") };
        let max = sp.max_dt();
        if dt > max {
            return Err(synapse::SynapseError::UnstableStep { dt, max }.into());
        }
        let pre = offsets[link.src_island] + link.src_neuron;
        for &t in &link.targets {
            let post = offsets[link.dst_island] + t;
            add(pre, post, link.multiplicity as f64, sp, synapse::Polarity::Excitatory);
        }
    }

    let hold = sim.noise_hold()?;
    let n_samples = n_steps.div_ceil(hold).max(1);
    let noise_series: Vec<Vec<f64>> = network
        .noise
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let spec = spec.clone().with_stream(sim.master_seed, noise::island_stream(k));
            noise::generate(&spec, n_samples, dt * hold as f64)
        })
        .collect::<Result<_, _>>()?;

    let mut states: Vec<NeuronState> = neuron_params.iter().map(NeuronState::at_rest).collect();
    let mut armed: Vec<bool> = states.iter().map(|s| s.v_m < DETECTION_THRESHOLD).collect();
    let mut spikes: Vec<Vec<f64>> = alloc::vec![Vec::new(); n];
    let mut input = alloc::vec![0.0f64; n];

    let traced = sim.record_traces.pick(n);
    if let Some(&bad) = traced.iter().find(|&&i| i >= n) {
        return Err(SimError::Config(alloc::format!("traced neuron {bad} does not exist ({n} neurons)")));
    }
    let dec = sim.trace_decimation;
    let mut traces: Vec<Trace> = traced
        .iter()
        .map(|&i| {
            let mut v_m = Vec::with_capacity(n_steps / dec + 1);
            v_m.push(states[i].v_m);
            Trace { neuron: i, dt: dt * dec as f64, v_m }
        })
        .collect();

    let m = libm::ceil(dt / SYNAPTIC_SUBSTEP * (1.0 - 1e-9)).max(1.0) as usize;
    let h = dt / m as f64;
    let mut sub = alloc::vec![0.0f64; n * m];
    let mut busy = alloc::vec![false; n];

    for k in 0..n_steps {
        let t = k as f64 * dt;
        for (i, x) in input.iter_mut().enumerate() {
            *x = noise_series[island_of[i]][k / hold];
        }
        busy.iter_mut().for_each(|b| *b = false);
        for s in &mut synapses {
            // Shifting the window by the delay turns spike times into pulse onsets.
            let pre = &spikes[s.pre];
            let shifted = t - SYNAPTIC_DELAY;
            let end = pre.partition_point(|&x| x < shifted + dt);
            let begin = pre[..end].partition_point(|&x| x + s.params.pulse_width <= shifted);
            let floor = s.params.i_floor();
            if begin == end && s.state.i_out <= floor {
                continue;
            }
            if begin == end && s.state.i_out - floor < SUBSTEP_CURRENT {
                // Neurons see the step average of a weak decaying current.
                let mut charge = 0.0;
                s.state = synapse::pulsed_advance(s.state, &s.params, s.tau, &[], shifted, dt, &mut charge);
                input[s.post] += s.weight * (charge / dt - floor);
                continue;
            }
            let row = &mut sub[s.post * m..(s.post + 1) * m];
            if !busy[s.post] {
                busy[s.post] = true;
                row.iter_mut().for_each(|x| *x = 0.0);
            }
            let window = &pre[begin..end];
            for (j, x) in row.iter_mut().enumerate() {
                let t0 = shifted + j as f64 * h;
                let visible = &window[..window.partition_point(|&sp| sp < t0 + h)];
                let mut charge = 0.0;
                s.state = synapse::pulsed_advance(s.state, &s.params, s.tau, visible, t0, h, &mut charge);
                *x += s.weight * (charge / h - floor);
            }
        }
        for i in 0..n {
            let p = &neuron_params[i];
            let mut state = states[i];
            let pieces = if busy[i] { m } else { 1 };
            let step = if busy[i] { h } else { dt };
            for j in 0..pieces {
                let i_in = if busy[i] { input[i] + sub[i * m + j] } else { input[i] };
                let (next, crossing) = neuron::advance(state, p, i_in, step, DETECTION_THRESHOLD);
                if !(next.v_m.is_finite() && next.v_n.is_finite()) {
                    return Err(SimError::BlowUp { neuron: i, time: t });
                }
                if let (true, Some(offset)) = (armed[i], crossing) {
                    let ts = t + j as f64 * step + offset;
                    if ts <= sim.duration {
                        spikes[i].push(ts);
                    }
                    armed[i] = false;
                }
                if next.v_m < DETECTION_THRESHOLD {
                    armed[i] = true;
                }
                state = next;
            }
            states[i] = state;
        }
        if (k + 1) % dec == 0 {
            for tr in &mut traces {
                tr.v_m.push(states[tr.neuron].v_m);
            }
        }
    }

    Ok(SpikeRecord {
        spikes,
        island_of,
        meta: RunMeta { seed: sim.master_seed, dt, duration: sim.duration, config_hash: None },
        traces,
    })
}

/// One neuron driven by `noise`, with its membrane trace always recorded.
pub fn run_single_neuron(noise: NoiseSpec, params: NeuronParams, sim: &SimConfig) -> Result<SpikeRecord, SimError> {
    const PRESET: &str = "single-neuron";
    let mut network = NetworkSpec::default();
    network.neuron_presets.insert(PRESET.to_string(), params);
    let mut island = IslandSpec::new(1);
    island.neuron_preset = PRESET.to_string();
    network.islands.push(island);
    network.noise.push(noise);
    let mut sim = sim.clone();
    sim.record_traces = TraceSelector::All;
    run(&network, &sim)
}
