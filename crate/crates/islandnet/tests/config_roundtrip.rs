use islandnet::config::{parse_config, serialize_config, Experiment};
use islandnet_core::engine::{SimConfig, TraceSelector};
use islandnet_core::neuron::NeuronParams;
use islandnet_core::noise::{NoiseLevel, NoiseSpec};
use islandnet_core::synapse::SynapseParams;
use islandnet_core::topology::{random_crossbar, InterIslandLink, IslandSpec, NetworkSpec, RingSpec};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Shape {
    sizes: Vec<usize>,
    edges: Vec<usize>,
    levels: Vec<(bool, bool, f64)>,
    ring: Option<(usize, usize, usize, u64)>,
    explicit: usize,
    custom_synapse: bool,
    seed: u64,
    duration: f64,
    traces: u8,
}

fn shape() -> impl Strategy<Value = Shape> {
    (1usize..5)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(2usize..10, n),
                proptest::collection::vec(0usize..30, n),
                proptest::collection::vec((any::<bool>(), any::<bool>(), 1e-11f64..1e-9), n),
                proptest::option::of((1usize..3, 1usize..3, 1usize..4, any::<u64>())),
                0usize..3,
                any::<bool>(),
                any::<u64>(),
                (1u32..500).prop_map(|k| k as f64 * 1e-6),
                0u8..3,
            )
        })
        .prop_map(|(sizes, edges, levels, ring, explicit, custom_synapse, seed, duration, traces)| Shape {
            sizes,
            edges,
            levels,
            ring,
            explicit,
            custom_synapse,
            seed,
            duration,
            traces,
        })
}

fn build(s: &Shape) -> Experiment {
    let mut net = NetworkSpec::default();
    if s.custom_synapse {
        net.synapse_presets.insert("slow".to_string(), SynapseParams { i_tau: 20e-9, ..SynapseParams::PAPER_DPI });
        net.neuron_presets.insert("paper-fast-mode".to_string(), NeuronParams { tau_n: 300e-9, ..NeuronParams::PAPER_FAST_MODE });
    }
    for (k, &n) in s.sizes.iter().enumerate() {
        let edges = random_crossbar(n, s.edges[k].min(n * (n - 1)), 0.2, s.seed ^ k as u64).unwrap();
        let mut island = IslandSpec::new(n).with_edges(edges);
        if s.custom_synapse && k == 0 {
            island.synapse_preset = "slow".to_string();
        }
        net.islands.push(island);
        let (pink, rms, x) = s.levels[k];
        let level = if rms { NoiseLevel::Rms(x * 1e3) } else { NoiseLevel::Density(x) };
        net.noise.push(if pink { NoiseSpec::pink(level) } else { NoiseSpec::white(level) });
    }
    if net.islands.len() >= 2 {
        for k in 0..s.explicit {
            net.links.push(InterIslandLink {
                src_island: 0,
                dst_island: 1,
                src_neuron: k % s.sizes[0],
                targets: vec![k % s.sizes[1]],
                multiplicity: k + 1,
                synapse_preset: s.custom_synapse.then(|| "slow".to_string()),
            });
        }
    }
    let mut sim = SimConfig::new(s.duration).with_seed(s.seed);
    sim.record_traces = match s.traces {
        0 => TraceSelector::None,
        1 => TraceSelector::All,
        _ => TraceSelector::Neurons(vec![0]),
    };
    let mut exp = Experiment { network: net, sim, ring: None };
    let min = *s.sizes.iter().min().unwrap();
    if let Some((lpp, fanout, mult, seed)) = s.ring {
        let ring = RingSpec::new(lpp.min(min), fanout.min(min), mult, seed);
        exp.set_ring(Some(ring)).unwrap();
    }
    exp
}

/// Crossbars are edge sets; the file lists excitatory edges before
/// inhibitory ones, so compare them in a fixed order.
fn normalized(mut exp: Experiment) -> Experiment {
    for island in &mut exp.network.islands {
        island.crossbar.sort_by_key(|e| (e.pre, e.post, e.polarity.as_str()));
    }
    exp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_inverts_serialize(s in shape()) {
        let exp = build(&s);
        let text = serialize_config(&exp);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(normalized(back.clone()), normalized(exp));
        prop_assert_eq!(serialize_config(&back), text);
    }

    #[test]
    fn ring_expansion_is_deterministic(s in shape()) {
        prop_assert_eq!(build(&s), build(&s));
    }
}

#[test]
fn shipped_configs_are_canonical_fixed_points() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let exp = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let again = parse_config(&serialize_config(&exp)).unwrap();
        assert_eq!(again, exp, "{}", path.display());
    }
}
