use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use islandnet::config::{parse_config, serialize_config, Experiment};
use islandnet::io::{self as files, Meta};
use islandnet::manifest::{Manifest, Step};
use islandnet::psd;
use islandnet::sweep::{self, Axis};
use islandnet_core::analysis::{self, DEFAULT_BIN, DEFAULT_FRAME_BIN, DEFAULT_GAP_FACTOR};
use islandnet_core::engine::{self, TraceSelector};
use islandnet_core::noise::{NoiseLevel, NoiseSpec, DEFAULT_BAND};
use islandnet_core::topology::inhibitory_ratio;

/// Output root used when `--out` is not given.
const OUT_ENV: &str = "ISLANDNET_OUT";
const DEFAULT_OUT_ROOT: &str = "runs";

#[derive(Parser)]
#[command(name = "islandnet", version, about = "Noise-driven island network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config and write spikes.csv, meta.json and manifest.json.
    Simulate(SimulateArgs),
    /// Correlation matrices, ISI/ITI histograms and threshold sweeps.
    Analyze(AnalyzeArgs),
    /// One run per value of a single parameter, plus a summary table.
    Sweep(SweepArgs),
    /// Averaged noise spectrum with a flatness or slope check.
    NoiseCheck(NoiseCheckArgs),
    /// Parse and validate a config, then print a short report.
    ValidateConfig {
        config: PathBuf,
        /// Print the canonical form of the config.
        #[arg(long)]
        canonical: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the config, seed and steps recorded in a manifest.json.
    #[arg(long, conflicts_with_all = ["config", "seed", "duration", "dt"])]
    manifest: Option<PathBuf>,
    /// Output directory; defaults to `$ISLANDNET_OUT/<config stem>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Write traces.csv for every neuron (overrides the config selection).
    #[arg(long)]
    traces: bool,
    /// Also write matrix.csv with this bin width.
    #[arg(long)]
    analyze_bin: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Simulated `neuron_id,t_seconds` file.
    #[arg(long, group = "input")]
    spikes: Option<PathBuf>,
    /// External `source_id,t_seconds` event file.
    #[arg(long, group = "input")]
    events: Option<PathBuf>,
    /// Membrane traces for `--threshold-sweep`.
    #[arg(long, group = "input")]
    traces: Option<PathBuf>,
    /// Bin width in seconds; defaults to 1 µs for spikes, 0.2 s for events.
    #[arg(long)]
    bin: Option<f64>,
    /// End of the binned window; defaults to meta.json next to the spikes,
    /// else the last event.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Emit the ISI histogram instead of the matrix.
    #[arg(long, conflicts_with_all = ["iti", "threshold_sweep"])]
    isi: bool,
    /// Emit the inter-train interval histogram instead of the matrix.
    #[arg(long, conflicts_with = "threshold_sweep")]
    iti: bool,
    /// Ascending comma-separated thresholds (V); needs `--traces`.
    #[arg(long, value_delimiter = ',', requires = "traces")]
    threshold_sweep: Option<Vec<f64>>,
    /// Histogram bin width; defaults to a tenth of `--bin`.
    #[arg(long)]
    hist_bin: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GAP_FACTOR)]
    gap_factor: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// density (A/√Hz), links_per_pair, fanout or multiplicity.
    #[arg(long)]
    axis: String,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BIN)]
    bin: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    White,
    Pink,
}

#[derive(Args)]
struct NoiseCheckArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// A/√Hz.
    #[arg(long, default_value_t = 2e-10)]
    density: f64,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    band: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-7)]
    dt: f64,
    #[arg(long, default_value_t = 1 << 18)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    segments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Spectrum CSV (`freq_hz,density`).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// 2 for bad input, 1 for failures while running.
enum Fail {
    Usage(String),
    Runtime(String),
}

type CmdResult = Result<(), Fail>;

fn usage(e: impl std::fmt::Display) -> Fail {
    Fail::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Fail {
    Fail::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => run_sweep(a),
        Command::NoiseCheck(a) => noise_check(a),
        Command::ValidateConfig { config, canonical } => validate(&config, canonical),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path) -> Result<(String, Experiment), Fail> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let exp = parse_config(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((text, exp))
}

fn out_dir(out: Option<PathBuf>, config: &Path) -> PathBuf {
    out.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT), PathBuf::from);
        root.join(config.file_stem().unwrap_or_default())
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Fail> {
    File::create(path).map(BufWriter::new).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn simulate(a: SimulateArgs) -> CmdResult {
    let (config, seed, duration, dt, analyze_bin, out) = match &a.manifest {
        Some(path) => {
            let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let m: Manifest = serde_json::from_reader(file).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let (mut duration, mut dt, mut bin) = (None, None, None);
            for step in &m.steps {
                match *step {
                    Step::Simulate { duration: d, dt: h } => (duration, dt) = (Some(d), Some(h)),
                    Step::Analyze { bin: b } => bin = Some(b),
                }
            }
            let (text, _) = load(&m.config)?;
            if !m.matches(&text) {
                return Err(usage(format!("{} changed since the manifest was written", m.config.display())));
            }
            (m.config.clone(), Some(m.seed), duration, dt, bin, a.out.clone().unwrap_or(m.out.clone()))
        }
        None => {
            let config = a.config.clone().expect("clap enforces --config");
            let out = out_dir(a.out.clone(), &config);
            (config, a.seed, a.duration, a.dt, a.analyze_bin, out)
        }
    };
    let (text, mut exp) = load(&config)?;
    if let Some(s) = seed {
        exp.sim.master_seed = s;
    }
    if let Some(d) = duration {
        exp.sim.duration = d;
    }
    if let Some(h) = dt {
        exp.sim.dt = h;
    }
    if a.traces {
        exp.sim.record_traces = TraceSelector::All;
    }
    exp.sim.validate().map_err(usage)?;

    let record = engine::run(&exp.network, &exp.sim).map_err(runtime)?;
    fs::create_dir_all(&out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    files::write_spikes(create(&out.join("spikes.csv"))?, &record.spikes).map_err(runtime)?;
    if !record.traces.is_empty() {
        files::write_traces(create(&out.join("traces.csv"))?, &record.traces).map_err(runtime)?;
    }
    let mut steps = vec![Step::Simulate { duration: exp.sim.duration, dt: exp.sim.dt }];
    if let Some(bin) = analyze_bin {
        let m = record.correlation(bin).map_err(usage)?;
        let labels: Vec<String> = m.labels.iter().map(u64::to_string).collect();
        files::write_matrix(create(&out.join("matrix.csv"))?, &m, &labels).map_err(runtime)?;
        steps.push(Step::Analyze { bin });
    }
    let manifest = Manifest::new(&config, &text, exp.sim.master_seed, &out, steps);
    let meta = Meta::new(&record, Some(config.display().to_string()), manifest.hash.clone());
    files::write_meta(create(&out.join("meta.json"))?, &meta).map_err(runtime)?;
    let mut w = create(&out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(runtime)?;
    println!("{} spikes from {} neurons -> {}", record.total_spikes(), record.n_neurons(), out.display());
    Ok(())
}

/// Neuron spikes or external events with their labels and island grouping.
struct Series {
    labels: Vec<String>,
    times: Vec<Vec<f64>>,
    groups: Option<Vec<usize>>,
    t_end: Option<f64>,
}

fn read_series(a: &AnalyzeArgs) -> Result<Series, Fail> {
    if let Some(path) = &a.spikes {
        let meta = path
            .parent()
            .map(|d| d.join("meta.json"))
            .filter(|p| p.exists())
            .map(|p| File::open(&p).map_err(runtime).and_then(|f| files::read_meta(f).map_err(runtime)))
            .transpose()?;
        let n = meta.as_ref().map_or(0, |m| m.n_neurons);
        let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let times = files::read_spikes(file, n).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(Series {
            labels: (0..times.len()).map(|i| i.to_string()).collect(),
            groups: meta.as_ref().map(|m| m.islands.clone()).filter(|g| g.len() == times.len()),
            t_end: meta.map(|m| m.duration),
            times,
        })
    } else if let Some(path) = &a.events {
        let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let events = files::read_events(file).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let (labels, times) = events.into_iter().unzip();
        Ok(Series { labels, times, groups: None, t_end: None })
    } else {
        Err(usage("one of --spikes, --events or --traces is required"))
    }
}

fn analyze(a: AnalyzeArgs) -> CmdResult {
    if let Some(thresholds) = &a.threshold_sweep {
        if thresholds.windows(2).any(|w| w[1] < w[0]) || thresholds.iter().any(|t| !(*t > 0.0)) {
            return Err(usage("thresholds must be positive and ascending"));
        }
        let path = a.traces.as_ref().expect("clap enforces --traces");
        let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let (dt, cols) = files::read_traces(file).map_err(usage)?;
        let mut totals = vec![0usize; thresholds.len()];
        for (_, v) in &cols {
            for (t, (_, c)) in totals.iter_mut().zip(analysis::threshold_sweep(v, dt, thresholds)) {
                *t += c;
            }
        }
        let rows: Vec<(f64, f64)> = thresholds.iter().zip(&totals).map(|(&t, &c)| (t, c as f64)).collect();
        return files::write_pairs(create(&a.out)?, ["threshold", "count"], &rows).map_err(runtime);
    }
    if a.traces.is_some() {
        return Err(usage("--traces is only used with --threshold-sweep"));
    }

    let series = read_series(&a)?;
    let bin = a.bin.unwrap_or(if a.events.is_some() { DEFAULT_FRAME_BIN } else { DEFAULT_BIN });
    if !(bin > 0.0 && bin.is_finite()) {
        return Err(usage("--bin must be positive"));
    }
    if series.times.iter().all(Vec::is_empty) {
        eprintln!("warning: no events in input");
    }
    if a.isi || a.iti {
        let hist_bin = a.hist_bin.unwrap_or(bin / 10.0);
        if a.iti && !(a.gap_factor > 1.0) {
            return Err(usage("--gap-factor must exceed 1"));
        }
        let values: Vec<f64> = series
            .times
            .iter()
            .flat_map(|t| {
                if a.isi {
                    analysis::isi(t)
                } else {
                    analysis::iti(&analysis::trains(t, a.gap_factor))
                }
            })
            .collect();
        let h = analysis::histogram(&values, hist_bin).map_err(usage)?;
        return files::write_histogram(create(&a.out)?, &h).map_err(runtime);
    }

    let last = series.times.iter().filter_map(|t| t.last()).fold(0.0f64, |m, &t| m.max(t));
    let t_end = a.duration.or(series.t_end).unwrap_or(((last / bin).floor() + 1.0) * bin);
    let counts: Vec<Vec<f64>> = series
        .times
        .iter()
        .map(|t| analysis::bin_events(t, bin, t_end).map(|b| b.into_iter().map(f64::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    if counts.is_empty() {
        return files::write_matrix(create(&a.out)?, &empty_matrix(), &[]).map_err(runtime);
    }
    let m = analysis::pearson_matrix(&counts).map_err(usage)?;
    files::write_matrix(create(&a.out)?, &m, &series.labels).map_err(runtime)?;
    if let Some(groups) = &series.groups {
        let b = m.block_means(groups);
        let show = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.4}"));
        println!("mean rho within islands {}, across islands {}", show(b.within), show(b.cross));
    }
    Ok(())
}

fn empty_matrix() -> analysis::CorrelationMatrix {
    analysis::pearson_matrix::<Vec<f64>>(&[]).expect("empty input is valid")
}

fn run_sweep(a: SweepArgs) -> CmdResult {
    let axis: Axis = a.axis.parse().map_err(usage)?;
    if a.values.is_empty() {
        return Err(usage("no sweep values given"));
    }
    let (_, mut exp) = load(&a.config)?;
    if let Some(s) = a.seed {
        exp.sim.master_seed = s;
    }
    if let Some(d) = a.duration {
        exp.sim.duration = d;
    }
    exp.sim.validate().map_err(usage)?;
    let runs = sweep::run_sweep(&exp, axis, &a.values, a.jobs, a.bin).map_err(|e| match e {
        sweep::SweepError::Sim(_) | sweep::SweepError::Pool(_) => runtime(e),
        _ => usage(e),
    })?;
    let out = out_dir(a.out, &a.config);
    for (k, r) in runs.iter().enumerate() {
        let dir = out.join(format!("run_{k:03}"));
        fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        files::write_spikes(create(&dir.join("spikes.csv"))?, &r.record.spikes).map_err(runtime)?;
    }
    let rows: Vec<_> = runs.into_iter().map(|r| r.row).collect();
    sweep::write_summary(create(&out.join("summary.csv"))?, &rows).map_err(runtime)?;
    println!("{} runs -> {}", rows.len(), out.join("summary.csv").display());
    Ok(())
}

fn noise_check(a: NoiseCheckArgs) -> CmdResult {
    let level = NoiseLevel::Density(a.density);
    let mut spec = match a.kind {
        Kind::White => NoiseSpec::white(level),
        Kind::Pink => NoiseSpec::pink(level),
    }
    .with_stream(a.seed, 0);
    if let Some(b) = &a.band {
        spec.band = (b[0], b[1]);
    }
    let band = a.band.as_ref().map_or(DEFAULT_BAND, |b| (b[0], b[1]));
    spec.validate(a.dt).map_err(usage)?;
    let psd = psd::noise_spectrum(&spec, a.dt, a.samples, a.seeds, a.segments).map_err(usage)?;
    if let Some(path) = &a.out {
        let rows: Vec<(f64, f64)> = psd.freq.iter().copied().zip(psd.density.iter().copied()).collect();
        files::write_pairs(create(path)?, ["freq_hz", "density"], &rows).map_err(runtime)?;
    }
    let (lo, hi) = (band.0 * 10.0, band.1 / 10.0);
    let points = psd::log_bands(&psd, lo.max(4.0 * psd.bin_width()), hi, 10);
    if points.len() < 2 {
        return Err(usage("frequency resolution too coarse for the check band; raise --samples"));
    }
    let ok = match a.kind {
        Kind::White => {
            let dev = psd::flatness_db(&points);
            println!("white: max deviation {dev:.2} dB over {lo:.3e}..{hi:.3e} Hz");
            dev <= 1.5
        }
        Kind::Pink => {
            let slope = psd::slope_db_per_decade(&points);
            println!("pink: slope {slope:.2} dB/decade over {lo:.3e}..{hi:.3e} Hz");
            (slope + 10.0).abs() <= 1.0
        }
    };
    println!("{}", if ok { "PASS" } else { "FAIL" });
    if ok {
        Ok(())
    } else {
        Err(runtime("spectrum outside tolerance"))
    }
}

fn validate(path: &Path, canonical: bool) -> CmdResult {
    let (_, exp) = load(path)?;
    let net = &exp.network;
    println!("{}: {} islands, {} neurons, {} links", path.display(), net.islands.len(), net.n_neurons(), net.links.len());
    for (k, ratio) in inhibitory_ratio(net).into_iter().enumerate() {
        match ratio {
            Some(r) => println!("island {k}: {:.1}% inhibitory synapses", 100.0 * r),
            None => println!("island {k}: no synapses"),
        }
    }
    if canonical {
        print!("{}", serialize_config(&exp));
    }
    Ok(())
}
