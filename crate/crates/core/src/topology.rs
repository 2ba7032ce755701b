//! Island networks: per-island crossbars, inter-island interneuron links and
//! ring wiring.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::neuron::NeuronParams;
use crate::noise::NoiseSpec;
use crate::synapse::{Polarity, SynapseParams};

pub const DEFAULT_ISLAND_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("fanout {fanout} exceeds destination island {island} size {size}")]
    FanoutTooLarge { fanout: usize, island: usize, size: usize },
    #[error("{links} links per pair exceed source island {island} size {size}")]
    TooManyLinks { links: usize, island: usize, size: usize },
    #[error("cannot place {edges} distinct edges in a {size}-neuron crossbar")]
    TooManyEdges { edges: usize, size: usize },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> TopologyError {
    TopologyError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub pre: usize,
    pub post: usize,
    pub polarity: Polarity,
}

impl Edge {
    pub fn excitatory(pre: usize, post: usize) -> Self {
        Edge { pre, post, polarity: Polarity::Excitatory }
    }

    pub fn inhibitory(pre: usize, post: usize) -> Self {
        Edge { pre, post, polarity: Polarity::Inhibitory }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IslandSpec {
    pub n_neurons: usize,
    pub crossbar: Vec<Edge>,
    pub neuron_preset: String,
    pub synapse_preset: String,
}

impl IslandSpec {
    pub fn new(n_neurons: usize) -> Self {
        IslandSpec {
            n_neurons,
            crossbar: Vec::new(),
            neuron_preset: NeuronParams::PRESET_NAME.to_string(),
            synapse_preset: SynapseParams::PRESET_NAME.to_string(),
        }
    }

    pub fn with_edges(mut self, edges: impl IntoIterator<Item = Edge>) -> Self {
        self.crossbar.extend(edges);
        self
    }
}

impl Default for IslandSpec {
    fn default() -> Self {
        IslandSpec::new(DEFAULT_ISLAND_SIZE)
    }
}

/// Unidirectional connection from one neuron of `src_island` to `targets` in
/// `dst_island`, each target receiving `multiplicity` parallel synapses.
/// Without a `synapse_preset` the destination island's preset is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterIslandLink {
    pub src_island: usize,
    pub dst_island: usize,
    pub src_neuron: usize,
    pub targets: Vec<usize>,
    pub multiplicity: usize,
    pub synapse_preset: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub islands: Vec<IslandSpec>,
    pub links: Vec<InterIslandLink>,
    /// One noise source per island; seeds and stream ids are assigned by the
    /// engine from the run's master seed.
    pub noise: Vec<NoiseSpec>,
    pub neuron_presets: BTreeMap<String, NeuronParams>,
    pub synapse_presets: BTreeMap<String, SynapseParams>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            islands: Vec::new(),
            links: Vec::new(),
            noise: Vec::new(),
            neuron_presets: builtin_neuron_presets(),
            synapse_presets: builtin_synapse_presets(),
        }
    }
}

pub fn builtin_neuron_presets() -> BTreeMap<String, NeuronParams> {
    let mut m = BTreeMap::new();
    m.insert(NeuronParams::PRESET_NAME.to_string(), NeuronParams::PAPER_FAST_MODE);
    m
}

pub fn builtin_synapse_presets() -> BTreeMap<String, SynapseParams> {
    let mut m = BTreeMap::new();
    m.insert(SynapseParams::PRESET_NAME.to_string(), SynapseParams::PAPER_DPI);
    m
}

impl NetworkSpec {
    pub fn n_neurons(&self) -> usize {
        self.islands.iter().map(|i| i.n_neurons).sum()
    }

    /// Global index of the first neuron of every island.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.islands
            .iter()
            .map(|i| {
                let o = acc;
                acc += i.n_neurons;
                o
            })
            .collect()
    }

    /// Island index of every neuron, in global order.
    pub fn island_of_neurons(&self) -> Vec<usize> {
        self.islands
            .iter()
            .enumerate()
            .flat_map(|(k, i)| core::iter::repeat(k).take(i.n_neurons))
            .collect()
    }

    pub fn neuron_params(&self, island: usize) -> Option<&NeuronParams> {
        self.neuron_presets.get(&self.islands.get(island)?.neuron_preset)
    }

    pub fn synapse_params(&self, island: usize) -> Option<&SynapseParams> {
        self.synapse_presets.get(&self.islands.get(island)?.synapse_preset)
    }

    pub fn link_synapse_params(&self, link: &InterIslandLink) -> Option<&SynapseParams> {
        match &link.synapse_preset {
            Some(name) => self.synapse_presets.get(name),
            None => self.synapse_params(link.dst_island),
        }
    }

    /// Checks every referential and structural invariant.
    pub fn validate(&self) -> Result<(), TopologyError> {
        for (name, p) in &self.neuron_presets {
            p.validate()
                .map_err(|e| invalid(format!("neuron_presets.{name}"), e.to_string()))?;
        }
        for (name, p) in &self.synapse_presets {
            p.validate()
                .map_err(|e| invalid(format!("synapse_presets.{name}"), e.to_string()))?;
        }
        if self.noise.len() != self.islands.len() {
            let missing = self.noise.len().min(self.islands.len());
            return Err(invalid(
                format!("islands[{missing}].noise"),
                format!(
                    "every island needs exactly one noise source ({} islands, {} sources)",
                    self.islands.len(),
                    self.noise.len()
                ),
            ));
        }
        for (k, island) in self.islands.iter().enumerate() {
            let path = format!("islands[{k}]");
            if island.n_neurons == 0 {
                return Err(invalid(format!("{path}.neurons"), "island has no neurons"));
            }
            if !self.neuron_presets.contains_key(&island.neuron_preset) {
                return Err(invalid(
                    format!("{path}.neuron_preset"),
                    format!("unknown neuron preset `{}`", island.neuron_preset),
                ));
            }
            if !self.synapse_presets.contains_key(&island.synapse_preset) {
                return Err(invalid(
                    format!("{path}.synapse_preset"),
                    format!("unknown synapse preset `{}`", island.synapse_preset),
                ));
            }
            let n = island.n_neurons;
            let mut seen = alloc::collections::BTreeSet::new();
            // Paths index each polarity's list separately, as in the config file.
            let mut per_polarity = [0usize; 2];
            for edge in &island.crossbar {
                let slot = &mut per_polarity[(edge.polarity == Polarity::Inhibitory) as usize];
                let epath = format!("{path}.{}[{slot}]", edge.polarity.as_str());
                *slot += 1;
                for (field, idx) in [("pre", edge.pre), ("post", edge.post)] {
                    if idx >= n {
                        return Err(invalid(
                            format!("{epath}.{field}"),
                            format!("neuron {idx} out of range for a {n}-neuron island"),
                        ));
                    }
                }
                if !seen.insert(*edge) {
                    return Err(invalid(
                        epath,
                        format!("duplicate {} edge {} -> {}", edge.polarity.as_str(), edge.pre, edge.post),
                    ));
                }
            }
        }
        for (k, link) in self.links.iter().enumerate() {
            let path = format!("links[{k}]");
            let n_islands = self.islands.len();
            for (field, idx) in [("src_island", link.src_island), ("dst_island", link.dst_island)] {
                if idx >= n_islands {
                    return Err(invalid(
                        format!("{path}.{field}"),
                        format!("island {idx} does not exist ({n_islands} islands)"),
                    ));
                }
            }
            if link.src_island == link.dst_island {
                return Err(invalid(path, "a link must connect two distinct islands"));
            }
            let src_n = self.islands[link.src_island].n_neurons;
            if link.src_neuron >= src_n {
                return Err(invalid(
                    format!("{path}.src_neuron"),
                    format!("neuron {} out of range for island {} ({src_n} neurons)", link.src_neuron, link.src_island),
                ));
            }
            if link.targets.is_empty() {
                return Err(invalid(format!("{path}.targets"), "a link needs at least one target"));
            }
            let dst_n = self.islands[link.dst_island].n_neurons;
            for (t, &target) in link.targets.iter().enumerate() {
                if target >= dst_n {
                    return Err(invalid(
                        format!("{path}.targets[{t}]"),
                        format!("neuron {target} out of range for island {} ({dst_n} neurons)", link.dst_island),
                    ));
                }
                if link.targets[..t].contains(&target) {
                    return Err(invalid(format!("{path}.targets[{t}]"), format!("duplicate target {target}")));
                }
            }
            if link.multiplicity == 0 {
                return Err(invalid(format!("{path}.multiplicity"), "multiplicity must be at least 1"));
            }
            if let Some(name) = &link.synapse_preset {
                if !self.synapse_presets.contains_key(name) {
                    return Err(invalid(format!("{path}.synapse_preset"), format!("unknown synapse preset `{name}`")));
                }
            }
        }
        Ok(())
    }
}

/// Fraction of inhibitory edges per island crossbar; `None` for an empty
/// crossbar.
pub fn inhibitory_ratio(spec: &NetworkSpec) -> Vec<Option<f64>> {
    spec.islands
        .iter()
        .map(|island| {
            let total = island.crossbar.len();
            let inhibitory = island
                .crossbar
                .iter()
                .filter(|e| e.polarity == Polarity::Inhibitory)
                .count();
            (total > 0).then(|| inhibitory as f64 / total as f64)
        })
        .collect()
}

/// Order in which islands are chained into a ring. Four islands laid out as
/// a 2x2 grid are walked around its perimeter: 0 -> 1 -> 3 -> 2 -> 0.
pub fn ring_order(n_islands: usize) -> Vec<usize> {
    if n_islands == 4 {
        alloc::vec![0, 1, 3, 2]
    } else {
        (0..n_islands).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingSpec {
    pub links_per_pair: usize,
    pub fanout: usize,
    pub multiplicity: usize,
    pub seed: u64,
    /// Preset given to every generated link.
    pub synapse_preset: Option<String>,
}

impl RingSpec {
    pub fn new(links_per_pair: usize, fanout: usize, multiplicity: usize, seed: u64) -> Self {
        RingSpec { links_per_pair, fanout, multiplicity, seed, synapse_preset: None }
    }
}

/// Uniform index below `n` (`n > 0`).
fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// `k` distinct indices from `0..n`, in draw order.
fn choose_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + below(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Adds unidirectional interneuron links along [`ring_order`]. For every ring
/// edge, `links_per_pair` distinct source neurons are drawn, each feeding
/// `fanout` distinct targets with `multiplicity` synapses apiece.
pub fn build_ring(spec: &mut NetworkSpec, ring: &RingSpec) -> Result<(), TopologyError> {
    if ring.links_per_pair == 0 {
        return Ok(());
    }
    let n = spec.islands.len();
    if n < 2 {
        return Ok(());
    }
    let order = ring_order(n);
    let pairs: Vec<(usize, usize)> = (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
    for &(src, dst) in &pairs {
        let size = spec.islands[dst].n_neurons;
        if ring.fanout > size || ring.fanout == 0 {
            return Err(TopologyError::FanoutTooLarge { fanout: ring.fanout, island: dst, size });
        }
        let size = spec.islands[src].n_neurons;
        if ring.links_per_pair > size {
            return Err(TopologyError::TooManyLinks { links: ring.links_per_pair, island: src, size });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ring.seed);
    rng.set_stream(0x72696e67);
    let multiplicity = ring.multiplicity.max(1);
    for (src, dst) in pairs {
        let sources = choose_distinct(&mut rng, spec.islands[src].n_neurons, ring.links_per_pair);
        for src_neuron in sources {
            let targets = choose_distinct(&mut rng, spec.islands[dst].n_neurons, ring.fanout);
            spec.links.push(InterIslandLink {
                src_island: src,
                dst_island: dst,
                src_neuron,
                targets,
                multiplicity,
                synapse_preset: ring.synapse_preset.clone(),
            });
        }
    }
    Ok(())
}

/// Seeded random crossbar of `n_edges` distinct non-self edges, of which
/// `round(n_edges * inhibitory_fraction)` are inhibitory.
pub fn random_crossbar(
    n_neurons: usize,
    n_edges: usize,
    inhibitory_fraction: f64,
    seed: u64,
) -> Result<Vec<Edge>, TopologyError> {
    let slots = n_neurons * n_neurons.saturating_sub(1);
    if n_edges > slots {
        return Err(TopologyError::TooManyEdges { edges: n_edges, size: n_neurons });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x78626172);
    let picks = choose_distinct(&mut rng, slots, n_edges);
    let n_inhibitory = libm::round(n_edges as f64 * inhibitory_fraction.clamp(0.0, 1.0)) as usize;
    let mut edges: Vec<Edge> = picks
        .iter()
        .enumerate()
        .map(|(k, &slot)| {
            let pre = slot / (n_neurons - 1);
            let mut post = slot % (n_neurons - 1);
            if post >= pre {
                post += 1;
            }
            let polarity = if k < n_inhibitory { Polarity::Inhibitory } else { Polarity::Excitatory };
            Edge { pre, post, polarity }
        })
        .collect();
    edges.sort();
    Ok(edges)
}

/// Like [`random_crossbar`] but every edge runs from a lower to a higher
/// neuron index, so the island has no directed cycle and activity cannot
/// circulate inside it.
pub fn random_feedforward_crossbar(
    n_neurons: usize,
    n_edges: usize,
    inhibitory_fraction: f64,
    seed: u64,
) -> Result<Vec<Edge>, TopologyError> {
    let slots = n_neurons * n_neurons.saturating_sub(1) / 2;
    if n_edges > slots {
        return Err(TopologyError::TooManyEdges { edges: n_edges, size: n_neurons });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x66666472);
    let picks = choose_distinct(&mut rng, slots, n_edges);
    let n_inhibitory = libm::round(n_edges as f64 * inhibitory_fraction.clamp(0.0, 1.0)) as usize;
    let mut edges: Vec<Edge> = picks
        .iter()
        .enumerate()
        .map(|(k, &slot)| {
            let (mut pre, mut rest) = (0, slot);
            while rest >= n_neurons - 1 - pre {
                rest -= n_neurons - 1 - pre;
                pre += 1;
            }
            let polarity = if k < n_inhibitory { Polarity::Inhibitory } else { Polarity::Excitatory };
            Edge { pre, post: pre + 1 + rest, polarity }
        })
        .collect();
    edges.sort();
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseLevel;
    use alloc::vec;

    fn spec_with(islands: Vec<IslandSpec>) -> NetworkSpec {
        let noise = islands.iter().map(|_| NoiseSpec::white(NoiseLevel::Density(200e-12))).collect();
        NetworkSpec { islands, noise, ..NetworkSpec::default() }
    }

    fn four_islands() -> NetworkSpec {
        spec_with((0..4).map(|_| IslandSpec::default()).collect())
    }

    #[test]
    fn minimal_network_is_valid_with_zero_inhibition() {
        let spec = spec_with(vec![IslandSpec::new(2).with_edges([Edge::excitatory(0, 1)])]);
        spec.validate().unwrap();
        assert_eq!(inhibitory_ratio(&spec), vec![Some(0.0)]);
    }

    #[test]
    fn ratio_examples() {
        let mut edges: Vec<Edge> = (0..23).map(|k| Edge::excitatory(k % 16, (k + 1) % 16)).collect();
        edges.push(Edge::inhibitory(0, 5));
        edges.push(Edge::inhibitory(1, 7));
        let spec = spec_with(vec![IslandSpec::default().with_edges(edges), IslandSpec::default()]);
        let r = inhibitory_ratio(&spec);
        assert!((r[0].unwrap() - 0.08).abs() < 1e-12);
        assert_eq!(r[1], None);
    }

    #[test]
    fn out_of_range_neuron_names_the_link() {
        let mut spec = four_islands();
        spec.links.push(InterIslandLink {
            src_island: 0,
            dst_island: 1,
            src_neuron: 2,
            targets: vec![3, 16],
            multiplicity: 1,
            synapse_preset: None,
        });
        let err = spec.validate().unwrap_err();
        match err {
            TopologyError::Invalid { path, .. } => assert_eq!(path, "links[0].targets[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors_are_reported() {
        let mut spec = spec_with(vec![IslandSpec::new(4).with_edges([Edge::excitatory(0, 1), Edge::excitatory(0, 1)])]);
        assert!(matches!(spec.validate(), Err(TopologyError::Invalid { path, .. }) if path == "islands[0].excitatory[1]"));

        spec.islands[0].crossbar.pop();
        spec.noise.clear();
        assert!(matches!(spec.validate(), Err(TopologyError::Invalid { path, .. }) if path == "islands[0].noise"));

        let mut spec = four_islands();
        spec.links.push(InterIslandLink { src_island: 2, dst_island: 2, src_neuron: 0, targets: vec![1], multiplicity: 1, synapse_preset: None });
        assert!(spec.validate().is_err());

        let mut spec = four_islands();
        spec.islands[3].neuron_preset = "nope".into();
        assert!(matches!(spec.validate(), Err(TopologyError::Invalid { path, .. }) if path == "islands[3].neuron_preset"));
    }

    #[test]
    fn ring_with_zero_links_is_a_no_op() {
        let mut spec = four_islands();
        let before = spec.clone();
        build_ring(&mut spec, &RingSpec::new(0, 1, 1, 3)).unwrap();
        assert_eq!(spec, before);
    }

    #[test]
    fn ring_follows_perimeter_order() {
        let mut spec = four_islands();
        build_ring(&mut spec, &RingSpec::new(8, 1, 1, 1)).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.links.len(), 32);
        let pairs: Vec<(usize, usize)> = spec.links.iter().map(|l| (l.src_island, l.dst_island)).collect();
        for (k, expected) in [(0, 1), (1, 3), (3, 2), (2, 0)].iter().enumerate() {
            assert!(pairs[k * 8..(k + 1) * 8].iter().all(|p| p == expected));
        }
        // Eight distinct interneurons per ring edge.
        for chunk in spec.links.chunks(8) {
            let mut src: Vec<usize> = chunk.iter().map(|l| l.src_neuron).collect();
            src.sort();
            src.dedup();
            assert_eq!(src.len(), 8);
        }
    }

    #[test]
    fn ring_fanout_and_multiplicity() {
        let mut spec = four_islands();
        build_ring(&mut spec, &RingSpec::new(3, 8, 3, 9)).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.links.len(), 12);
        assert!(spec.links.iter().all(|l| l.targets.len() == 8 && l.multiplicity == 3));
    }

    #[test]
    fn ring_rejects_oversized_fanout() {
        let mut spec = four_islands();
        let err = build_ring(&mut spec, &RingSpec::new(1, 17, 1, 0));
        assert!(matches!(err, Err(TopologyError::FanoutTooLarge { .. })));
    }

    #[test]
    fn ring_is_deterministic() {
        let ring = RingSpec::new(3, 15, 1, 77);
        let mut a = four_islands();
        let mut b = four_islands();
        build_ring(&mut a, &ring).unwrap();
        build_ring(&mut b, &ring).unwrap();
        assert_eq!(a, b);
        let mut c = four_islands();
        build_ring(&mut c, &RingSpec { seed: 78, ..ring.clone() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_crossbar_counts() {
        let edges = random_crossbar(16, 25, 0.08, 4).unwrap();
        assert_eq!(edges.len(), 25);
        assert_eq!(edges.iter().filter(|e| e.polarity == Polarity::Inhibitory).count(), 2);
        assert!(edges.iter().all(|e| e.pre != e.post && e.pre < 16 && e.post < 16));
        assert!(random_crossbar(3, 7, 0.0, 0).is_err());
    }

    #[test]
    fn feedforward_crossbar_is_acyclic() {
        let edges = random_feedforward_crossbar(16, 25, 0.08, 4).unwrap();
        assert_eq!(edges.len(), 25);
        assert_eq!(edges.iter().filter(|e| e.polarity == Polarity::Inhibitory).count(), 2);
        assert!(edges.iter().all(|e| e.pre < e.post && e.post < 16));
        let all = random_feedforward_crossbar(5, 10, 0.0, 1).unwrap();
        assert_eq!(all.len(), 10);
        assert!(random_feedforward_crossbar(5, 11, 0.0, 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn generated_links_satisfy_invariants(
                n_islands in 2usize..6,
                size in 1usize..20,
                links in 0usize..6,
                fanout in 1usize..20,
                multiplicity in 1usize..4,
                seed in any::<u64>(),
            ) {
                let mut spec = spec_with((0..n_islands).map(|_| IslandSpec::new(size)).collect());
                let ring = RingSpec::new(links, fanout, multiplicity, seed);
                match build_ring(&mut spec, &ring) {
                    Ok(()) => {
                        prop_assert!(spec.validate().is_ok());
                        prop_assert_eq!(spec.links.len(), links * n_islands);
                        for l in &spec.links {
                            prop_assert!(l.src_island != l.dst_island);
                            prop_assert_eq!(l.targets.len(), fanout);
                            prop_assert!(l.multiplicity >= 1);
                        }
                    }
                    Err(_) => prop_assert!(links > 0 && (fanout > size || links > size)),
                }
            }
        }
    }
}
