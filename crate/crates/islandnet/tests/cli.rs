use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use islandnet::io::{read_meta, read_spikes};
use islandnet::manifest::Manifest;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn config(name: &str) -> String {
    configs().join(format!("{name}.toml")).to_string_lossy().into_owned()
}

fn islandnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_islandnet")).args(args).env_remove("ISLANDNET_OUT").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = islandnet(&["simulate", "--config", "/nonexistent/x.toml", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/x.toml"));
}

#[test]
fn bad_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[simulation]\nduration = \n").unwrap();
    let o = islandnet(&["validate-config", p(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn validate_reports_inhibitory_ratio() {
    let o = islandnet(&["validate-config", &config("fig4B_islands")]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("4 islands, 64 neurons"));
    assert_eq!(text.matches("8.0% inhibitory").count(), 4);
}

#[test]
fn simulate_writes_artifacts_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = islandnet(&["simulate", "--config", &config("fig5A_nobond"), "--out", p(out), "--seed", "4"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["spikes.csv", "meta.json", "manifest.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let spikes = std::fs::read(a.join("spikes.csv")).unwrap();
    assert_eq!(spikes, std::fs::read(b.join("spikes.csv")).unwrap());
    let manifest = |d: &Path| -> Manifest { serde_json::from_reader(std::fs::File::open(d.join("manifest.json")).unwrap()).unwrap() };
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!((&ma.hash, &ma.steps, ma.seed), (&mb.hash, &mb.steps, mb.seed));

    let meta = read_meta(std::fs::File::open(a.join("meta.json")).unwrap()).unwrap();
    assert_eq!((meta.seed, meta.n_neurons, meta.islands.len()), (4, 64, 64));
    let rows = read_spikes(&spikes[..], meta.n_neurons).unwrap();
    assert_eq!(rows.iter().map(Vec::len).sum::<usize>(), meta.total_spikes);
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = islandnet(&[
        "simulate", "--config", &config("fig6G"), "--out", p(&a), "--seed", "2", "--duration", "60e-6",
        "--analyze-bin", "2e-6",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = a.join("manifest.json");
    let o = islandnet(&["simulate", "--manifest", p(&manifest), "--out", p(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["spikes.csv", "matrix.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_detects_changed_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::copy(config("fig3_single_neuron"), &cfg).unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&islandnet(&["simulate", "--config", p(&cfg), "--out", p(&out), "--duration", "20e-6"])), 0);
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n# edited\n");
    std::fs::write(&cfg, text).unwrap();
    let o = islandnet(&["simulate", "--manifest", p(&out.join("manifest.json"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("changed"));
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_islandnet"))
        .args(["simulate", "--config", &config("fig3_single_neuron"), "--duration", "20e-6"])
        .env("ISLANDNET_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("fig3_single_neuron/spikes.csv").exists());
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let o = islandnet(&["simulate", "--config", &config("fig3_single_neuron"), "--duration", "20e-6", "--out", p(&file.join("sub"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn analyze_modes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = islandnet(&["simulate", "--config", &config("fig5A_nobond"), "--out", p(&run), "--traces", "--duration", "40e-6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let spikes = run.join("spikes.csv");

    let matrix = dir.path().join("m.csv");
    let o = islandnet(&["analyze", "--spikes", p(&spikes), "--bin", "1e-6", "--out", p(&matrix)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("across islands"));
    let text = std::fs::read_to_string(&matrix).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 65);
    assert!(lines.iter().all(|l| l.split(',').count() == 65));
    assert!(lines[0].starts_with(",0,1,2"));
    assert!(lines[1].starts_with("0,"));

    let hist = dir.path().join("isi.csv");
    assert_eq!(code(&islandnet(&["analyze", "--spikes", p(&spikes), "--isi", "--out", p(&hist)])), 0);
    let text = std::fs::read_to_string(&hist).unwrap();
    assert!(text.starts_with("bin_start,count\n"));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 2));

    let iti = dir.path().join("iti.csv");
    assert_eq!(code(&islandnet(&["analyze", "--spikes", p(&spikes), "--iti", "--out", p(&iti)])), 0);

    let sweep = dir.path().join("thr.csv");
    let o = islandnet(&[
        "analyze", "--traces", p(&run.join("traces.csv")), "--threshold-sweep", "0.25,1,2", "--out", p(&sweep),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let counts: Vec<f64> = std::fs::read_to_string(&sweep)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts.len(), 3);
    assert!(counts[0] >= counts[1] && counts[1] >= counts[2]);

    let bad = islandnet(&["analyze", "--traces", p(&run.join("traces.csv")), "--threshold-sweep", "2,1", "--out", p(&sweep)]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn analyze_empty_spike_file_warns() {
    let dir = tempfile::tempdir().unwrap();
    let spikes = dir.path().join("spikes.csv");
    std::fs::write(&spikes, "neuron_id,t_seconds\n").unwrap();
    let out = dir.path().join("m.csv");
    let o = islandnet(&["analyze", "--spikes", p(&spikes), "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() <= 1);
}

#[test]
fn analyze_external_events() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("ev.csv");
    let mut text = String::from("source_id,t_seconds\n");
    for k in 0..50 {
        let t = k as f64 * 0.5;
        text.push_str(&format!("roi_a,{t}\nroi_b,{}\n", t + 0.01));
        if k % 3 == 0 {
            text.push_str(&format!("roi_c,{}\n", t + 0.25));
        }
    }
    std::fs::write(&events, text).unwrap();
    let out = dir.path().join("m.csv");
    let o = islandnet(&["analyze", "--events", p(&events), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = m.lines().collect();
    assert_eq!(lines[0], ",roi_a,roi_b,roi_c");
    // Same 200 ms frame for a and b.
    assert!(lines[1].starts_with("roi_a,1,1,"), "{}", lines[1]);
}

#[test]
fn sweep_arguments_are_checked() {
    let cfg = config("fig5B_ring8");
    assert_eq!(code(&islandnet(&["sweep", "--config", &cfg, "--axis", "links_per_pair", "--out", "/tmp/unused"])), 2);
    let o = islandnet(&["sweep", "--config", &cfg, "--axis", "weight", "--values", "1", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown sweep axis"));
    let o = islandnet(&["sweep", "--config", &config("fig5A_nobond"), "--axis", "fanout", "--values", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn links_sweep_raises_cross_island_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let o = islandnet(&[
        "sweep", "--config", &config("fig5B_ring8"), "--axis", "links_per_pair", "--values", "0,8", "--jobs", "2",
        "--out", p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "value,seed,mean_isi,spike_count,mean_cross_rho");
    let rho: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(rho[1] > rho[0], "{rho:?}");
    assert!(dir.path().join("run_001/spikes.csv").exists());
}

#[test]
fn noise_check_passes_for_white_and_pink() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["white", "pink"] {
        let out = dir.path().join(format!("{kind}.csv"));
        let o = islandnet(&["noise-check", "--kind", kind, "--seeds", "20", "--out", p(&out)]);
        assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
        assert!(std::fs::read_to_string(&out).unwrap().starts_with("freq_hz,density\n"));
    }
    let o = islandnet(&["noise-check", "--kind", "white", "--dt", "1e-6"]);
    assert_eq!(code(&o), 2);
}
