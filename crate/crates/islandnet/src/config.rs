//! Experiment config files: TOML text <-> `NetworkSpec` + `SimConfig`.
//!
//! The grammar is documented in `docs/config.md`. A `[ring]` table is
//! expanded into links while parsing; the `RingSpec` is kept alongside so the
//! canonical text writes the table back instead of the generated links.

use std::collections::BTreeMap;

use islandnet_core::engine::{SimConfig, TraceSelector};
use islandnet_core::neuron::NeuronParams;
use islandnet_core::noise::{NoiseKind, NoiseLevel, NoiseSpec, DEFAULT_BAND};
use islandnet_core::synapse::{Polarity, SynapseParams};
use islandnet_core::topology::{
    build_ring, builtin_neuron_presets, builtin_synapse_presets, Edge, InterIslandLink, IslandSpec, NetworkSpec,
    RingSpec, TopologyError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Run length used when a config has no `simulation.duration`.
pub const DEFAULT_DURATION: f64 = 240e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Semantic { path: String, message: String },
}

impl ConfigError {
    fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Semantic { path: path.into(), message: message.into() }
    }
}

impl From<TopologyError> for ConfigError {
    fn from(e: TopologyError) -> Self {
        match e {
            TopologyError::Invalid { path, message } => ConfigError::Semantic { path, message },
            TopologyError::FanoutTooLarge { .. } => ConfigError::semantic("ring.fanout", e.to_string()),
            TopologyError::TooManyLinks { .. } => ConfigError::semantic("ring.links_per_pair", e.to_string()),
            other => ConfigError::semantic("island", other.to_string()),
        }
    }
}

/// A parsed experiment: the network and the run settings stored with it.
/// `network.links` holds the explicit links followed by those generated from
/// `ring`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub network: NetworkSpec,
    pub sim: SimConfig,
    pub ring: Option<RingSpec>,
}

impl Experiment {
    fn ring_links(&self) -> usize {
        match &self.ring {
            Some(r) if r.links_per_pair > 0 && self.network.islands.len() >= 2 => {
                r.links_per_pair * self.network.islands.len()
            }
            _ => 0,
        }
    }

    /// Replaces the ring-generated links.
    pub fn set_ring(&mut self, ring: Option<RingSpec>) -> Result<(), ConfigError> {
        let keep = self.network.links.len() - self.ring_links();
        self.network.links.truncate(keep);
        if let Some(r) = &ring {
            if r.multiplicity == 0 {
                return Err(ConfigError::semantic("ring.multiplicity", "multiplicity must be at least 1"));
            }
            build_ring(&mut self.network, r)?;
        }
        self.ring = ring;
        self.network.validate()?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    simulation: FileSimulation,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    neuron_presets: BTreeMap<String, FileNeuron>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    synapse_presets: BTreeMap<String, FileSynapse>,
    #[serde(default, rename = "island")]
    islands: Vec<FileIsland>,
    #[serde(default, rename = "link", skip_serializing_if = "Vec::is_empty")]
    links: Vec<FileLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ring: Option<FileRing>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSimulation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace_decimation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    traces: Option<FileTraces>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum FileTraces {
    Keyword(String),
    Neurons(Vec<usize>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNeuron {
    c_m: f64,
    v_th: f64,
    i_na_max: f64,
    v_spike: f64,
    c_n: f64,
    i_k_max: f64,
    i_r: f64,
    v_rest: f64,
    v_gate_th: f64,
    mirror_ratio: f64,
    tau_n: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSynapse {
    c_s: f64,
    i_tau: f64,
    kappa: f64,
    u_t: f64,
    i_pulse: f64,
    pulse_width: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIsland {
    neurons: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neuron_preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synapse_preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    excitatory: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inhibitory: Vec<[usize; 2]>,
    noise: Option<FileNoise>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNoise {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    band: Option<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLink {
    from: [usize; 2],
    to: usize,
    targets: Vec<usize>,
    #[serde(default = "one")]
    multiplicity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synapse_preset: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRing {
    links_per_pair: usize,
    fanout: usize,
    #[serde(default = "one")]
    multiplicity: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synapse_preset: Option<String>,
}

fn one() -> usize {
    1
}

impl From<FileNeuron> for NeuronParams {
    fn from(f: FileNeuron) -> Self {
        NeuronParams {
            c_m: f.c_m,
            v_th: f.v_th,
            i_na_max: f.i_na_max,
            v_spike: f.v_spike,
            c_n: f.c_n,
            i_k_max: f.i_k_max,
            i_r: f.i_r,
            v_rest: f.v_rest,
            v_gate_th: f.v_gate_th,
            mirror_ratio: f.mirror_ratio,
            tau_n: f.tau_n,
        }
    }
}

impl From<&NeuronParams> for FileNeuron {
    fn from(p: &NeuronParams) -> Self {
        FileNeuron {
            c_m: p.c_m,
            v_th: p.v_th,
            i_na_max: p.i_na_max,
            v_spike: p.v_spike,
            c_n: p.c_n,
            i_k_max: p.i_k_max,
            i_r: p.i_r,
            v_rest: p.v_rest,
            v_gate_th: p.v_gate_th,
            mirror_ratio: p.mirror_ratio,
            tau_n: p.tau_n,
        }
    }
}

impl From<FileSynapse> for SynapseParams {
    fn from(f: FileSynapse) -> Self {
        SynapseParams {
            c_s: f.c_s,
            i_tau: f.i_tau,
            kappa: f.kappa,
            u_t: f.u_t,
            polarity: Polarity::Excitatory,
            i_pulse: f.i_pulse,
            pulse_width: f.pulse_width,
        }
    }
}

impl From<&SynapseParams> for FileSynapse {
    fn from(p: &SynapseParams) -> Self {
        FileSynapse { c_s: p.c_s, i_tau: p.i_tau, kappa: p.kappa, u_t: p.u_t, i_pulse: p.i_pulse, pulse_width: p.pulse_width }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.chars().rev().take_while(|&c| c != '\n').count() + 1;
    (line, column)
}

/// Parses and validates a config. Semantic errors name the offending entry
/// (`islands[2].excitatory[4].post`, `links[0].targets[1]`, ...).
pub fn parse_config(text: &str) -> Result<Experiment, ConfigError> {
    let file: FileConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((1, 1));
        ConfigError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    from_file(file)
}

fn from_file(file: FileConfig) -> Result<Experiment, ConfigError> {
    let mut network = NetworkSpec::default();
    for (name, p) in file.neuron_presets {
        network.neuron_presets.insert(name, p.into());
    }
    for (name, p) in file.synapse_presets {
        network.synapse_presets.insert(name, p.into());
    }
    for (k, island) in file.islands.into_iter().enumerate() {
        let mut spec = IslandSpec::new(island.neurons);
        if let Some(name) = island.neuron_preset {
            spec.neuron_preset = name;
        }
        if let Some(name) = island.synapse_preset {
            spec.synapse_preset = name;
        }
        spec.crossbar.extend(island.excitatory.iter().map(|&[pre, post]| Edge::excitatory(pre, post)));
        spec.crossbar.extend(island.inhibitory.iter().map(|&[pre, post]| Edge::inhibitory(pre, post)));
        let noise = island
            .noise
            .ok_or_else(|| ConfigError::semantic(format!("islands[{k}].noise"), "every island needs a noise source"))?;
        network.noise.push(noise_from_file(noise, &format!("islands[{k}].noise"))?);
        network.islands.push(spec);
    }
    for link in file.links {
        network.links.push(InterIslandLink {
            src_island: link.from[0],
            dst_island: link.to,
            src_neuron: link.from[1],
            targets: link.targets,
            multiplicity: link.multiplicity,
            synapse_preset: link.synapse_preset,
        });
    }
    // Explicit links are checked before the ring is added.
    network.validate()?;
    let ring = file.ring.map(|r| RingSpec {
        links_per_pair: r.links_per_pair,
        fanout: r.fanout,
        multiplicity: r.multiplicity,
        seed: r.seed,
        synapse_preset: r.synapse_preset,
    });

    let s = file.simulation;
    let mut sim = SimConfig::new(s.duration.unwrap_or(DEFAULT_DURATION));
    if let Some(dt) = s.dt {
        sim.dt = dt;
    }
    if let Some(seed) = s.seed {
        sim.master_seed = seed;
    }
    if let Some(dec) = s.trace_decimation {
        sim.trace_decimation = dec;
    }
    sim.noise_dt = s.noise_dt;
    sim.record_traces = match s.traces {
        None => TraceSelector::None,
        Some(FileTraces::Keyword(w)) if w == "none" => TraceSelector::None,
        Some(FileTraces::Keyword(w)) if w == "all" => TraceSelector::All,
        Some(FileTraces::Keyword(w)) => {
            return Err(ConfigError::semantic("simulation.traces", format!("expected \"none\", \"all\" or a list of neuron ids, got \"{w}\"")))
        }
        Some(FileTraces::Neurons(ids)) => {
            let n = network.n_neurons();
            if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
                return Err(ConfigError::semantic("simulation.traces", format!("neuron {bad} does not exist ({n} neurons)")));
            }
            TraceSelector::Neurons(ids)
        }
    };
    sim.validate().map_err(|e| ConfigError::semantic("simulation", e.to_string()))?;
    let mut exp = Experiment { network, sim, ring: None };
    exp.set_ring(ring)?;
    Ok(exp)
}

fn noise_from_file(f: FileNoise, path: &str) -> Result<NoiseSpec, ConfigError> {
    let level = match (f.density, f.rms) {
        (Some(d), None) => NoiseLevel::Density(d),
        (None, Some(r)) => NoiseLevel::Rms(r),
        _ => return Err(ConfigError::semantic(path, "give exactly one of `density` or `rms`")),
    };
    let mut spec = match f.kind.as_str() {
        "white" => NoiseSpec::white(level),
        "pink" => NoiseSpec::pink(level),
        other => return Err(ConfigError::semantic(format!("{path}.kind"), format!("unknown noise kind `{other}`"))),
    };
    if let Some([lo, hi]) = f.band {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(ConfigError::semantic(format!("{path}.band"), "band must satisfy 0 < f_lo < f_hi"));
        }
        spec.band = (lo, hi);
    }
    let (NoiseLevel::Density(x) | NoiseLevel::Rms(x)) = level;
    if !(x > 0.0 && x.is_finite()) {
        return Err(ConfigError::semantic(path, "noise level must be positive"));
    }
    Ok(spec)
}

fn noise_to_file(spec: &NoiseSpec) -> FileNoise {
    let (density, rms) = match spec.level {
        NoiseLevel::Density(d) => (Some(d), None),
        NoiseLevel::Rms(r) => (None, Some(r)),
    };
    FileNoise {
        kind: match spec.kind {
            NoiseKind::White => "white".to_string(),
            NoiseKind::Pink => "pink".to_string(),
        },
        density,
        rms,
        band: (spec.band != DEFAULT_BAND).then_some([spec.band.0, spec.band.1]),
    }
}

/// Canonical text form: explicit links plus the `[ring]` table, builtin
/// presets omitted unless overridden, default simulation fields left out.
pub fn serialize_config(exp: &Experiment) -> String {
    let net = &exp.network;
    let builtin_n = builtin_neuron_presets();
    let builtin_s = builtin_synapse_presets();
    let neuron_presets = net
        .neuron_presets
        .iter()
        .filter(|(name, p)| builtin_n.get(*name) != Some(*p))
        .map(|(name, p)| (name.clone(), FileNeuron::from(p)))
        .collect();
    let synapse_presets = net
        .synapse_presets
        .iter()
        .filter(|(name, p)| builtin_s.get(*name) != Some(*p))
        .map(|(name, p)| (name.clone(), FileSynapse::from(p)))
        .collect();
    let defaults = SimConfig::new(exp.sim.duration);
    let sim = &exp.sim;
    let simulation = FileSimulation {
        duration: Some(sim.duration),
        dt: (sim.dt != defaults.dt).then_some(sim.dt),
        seed: Some(sim.master_seed),
        trace_decimation: (sim.trace_decimation != defaults.trace_decimation).then_some(sim.trace_decimation),
        noise_dt: sim.noise_dt,
        traces: match &sim.record_traces {
            TraceSelector::None => None,
            TraceSelector::All => Some(FileTraces::Keyword("all".to_string())),
            TraceSelector::Neurons(ids) => Some(FileTraces::Neurons(ids.clone())),
        },
    };
    let islands = net
        .islands
        .iter()
        .zip(&net.noise)
        .map(|(island, noise)| {
            let pairs = |pol: Polarity| {
                island.crossbar.iter().filter(|e| e.polarity == pol).map(|e| [e.pre, e.post]).collect::<Vec<_>>()
            };
            FileIsland {
                neurons: island.n_neurons,
                neuron_preset: (island.neuron_preset != NeuronParams::PRESET_NAME).then(|| island.neuron_preset.clone()),
                synapse_preset: (island.synapse_preset != SynapseParams::PRESET_NAME).then(|| island.synapse_preset.clone()),
                excitatory: pairs(Polarity::Excitatory),
                inhibitory: pairs(Polarity::Inhibitory),
                noise: Some(noise_to_file(noise)),
            }
        })
        .collect();
    let explicit = net.links.len() - exp.ring_links();
    let links = net.links[..explicit]
        .iter()
        .map(|l| FileLink {
            from: [l.src_island, l.src_neuron],
            to: l.dst_island,
            targets: l.targets.clone(),
            multiplicity: l.multiplicity,
            synapse_preset: l.synapse_preset.clone(),
        })
        .collect();
    let ring = exp.ring.as_ref().map(|r| FileRing {
        links_per_pair: r.links_per_pair,
        fanout: r.fanout,
        multiplicity: r.multiplicity,
        seed: r.seed,
        synapse_preset: r.synapse_preset.clone(),
    });
    let file = FileConfig { simulation, neuron_presets, synapse_presets, islands, links, ring };
    toml::to_string(&file).expect("config structures always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[island]]
neurons = 2
excitatory = [[0, 1]]
noise = { kind = "white", density = 200e-12 }
"#;

    #[test]
    fn minimal_config_parses() {
        let exp = parse_config(MINIMAL).unwrap();
        assert_eq!(exp.network.islands.len(), 1);
        assert_eq!(exp.network.islands[0].crossbar, vec![Edge::excitatory(0, 1)]);
        assert_eq!(islandnet_core::topology::inhibitory_ratio(&exp.network), vec![Some(0.0)]);
        assert_eq!(exp.sim.duration, DEFAULT_DURATION);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_config("[[island]]\nneurons = = 3\n").unwrap_err();
        match err {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_errors_are_located_too() {
        let text = "[[island]]\nneurons = \"sixteen\"\nnoise = { kind = \"white\", density = 1e-10 }\n";
        assert!(matches!(parse_config(text), Err(ConfigError::Parse { line: 2, .. })));
        let text = "[[island]]\nneurons = 2\nnoize = 1\n";
        assert!(matches!(parse_config(text), Err(ConfigError::Parse { line: 3, .. })));
    }

    #[test]
    fn dangling_link_names_the_link() {
        let text = r#"
[[island]]
neurons = 16
noise = { kind = "white", density = 200e-12 }
[[island]]
neurons = 16
noise = { kind = "white", density = 200e-12 }
[[link]]
from = [0, 1]
to = 1
targets = [3, 16]
"#;
        match parse_config(text).unwrap_err() {
            ConfigError::Semantic { path, .. } => assert_eq!(path, "links[0].targets[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let missing_noise = "[[island]]\nneurons = 2\n";
        assert!(matches!(parse_config(missing_noise), Err(ConfigError::Semantic { path, .. }) if path == "islands[0].noise"));
        let both = "[[island]]\nneurons = 2\nnoise = { kind = \"white\", density = 1e-10, rms = 1e-6 }\n";
        assert!(matches!(parse_config(both), Err(ConfigError::Semantic { .. })));
        let dup = "[[island]]\nneurons = 2\nexcitatory = [[0, 1], [0, 1]]\nnoise = { kind = \"pink\", rms = 1e-6 }\n";
        assert!(matches!(parse_config(dup), Err(ConfigError::Semantic { path, .. }) if path == "islands[0].excitatory[1]"));
        let preset = "[[island]]\nneurons = 2\nsynapse_preset = \"nope\"\nnoise = { kind = \"white\", density = 1e-10 }\n";
        assert!(matches!(parse_config(preset), Err(ConfigError::Semantic { path, .. }) if path == "islands[0].synapse_preset"));
        let fanout = "[[island]]\nneurons = 2\nnoise = { kind = \"white\", density = 1e-10 }\n[[island]]\nneurons = 2\nnoise = { kind = \"white\", density = 1e-10 }\n[ring]\nlinks_per_pair = 1\nfanout = 3\n";
        assert!(matches!(parse_config(fanout), Err(ConfigError::Semantic { path, .. }) if path == "ring.fanout"));
    }

    #[test]
    fn ring_expands_to_links() {
        let mut text = String::new();
        for _ in 0..4 {
            text.push_str("[[island]]\nneurons = 16\nnoise = { kind = \"white\", density = 200e-12 }\n");
        }
        text.push_str("[ring]\nlinks_per_pair = 8\nfanout = 1\nseed = 7\n");
        let exp = parse_config(&text).unwrap();
        assert_eq!(exp.network.links.len(), 32);
        let canonical = serialize_config(&exp);
        assert!(canonical.contains("[ring]") && !canonical.contains("[[link]]"));
        assert_eq!(parse_config(&canonical).unwrap(), exp);

        let mut swept = exp.clone();
        swept.set_ring(Some(RingSpec::new(3, 15, 3, 7))).unwrap();
        assert_eq!(swept.network.links.len(), 12);
        swept.set_ring(None).unwrap();
        assert!(swept.network.links.is_empty());
    }

    #[test]
    fn custom_presets_round_trip() {
        let mut text = String::from(MINIMAL);
        text.push_str(
            "[synapse_presets.slow]\nc_s = 1e-12\ni_tau = 10e-9\nkappa = 0.7\nu_t = 0.02585\ni_pulse = 1e-6\npulse_width = 1e-6\n",
        );
        text = text.replace("neurons = 2\n", "neurons = 2\nsynapse_preset = \"slow\"\n");
        let exp = parse_config(&text).unwrap();
        assert_eq!(exp.network.synapse_presets["slow"].i_tau, 10e-9);
        assert_eq!(parse_config(&serialize_config(&exp)).unwrap(), exp);
    }
}
