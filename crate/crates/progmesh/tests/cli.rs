use std::path::Path;
use std::process::{Command, Output};

use progmesh::dump::read_raw;
use progmesh::geometry::{l_channel, load_geometry};

fn progmesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_progmesh")).args(args).output().expect("spawn progmesh")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"
stencil = "d2q9"
domain = [32, 32, 1]
tile_extent = 16
iterations = 20
report_interval = 10
snapshot_interval = 20
snapshot_pgm = true
devices = 2

[[component]]
tau = 0.8

[[seed]]
box = { min = [4.0, 4.0, 0.0], max = [8.0, 8.0, 1.0] }
density = [1.05]
"#;

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(progmesh(&["run", "--bogus"]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "stencil = \"d4q99\"\n");
    let out = progmesh(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_config_exits_with_one() {
    assert_eq!(progmesh(&["run", "--config", "/nonexistent/x.toml"]).status.code(), Some(1));
}

#[test]
fn gen_geometry_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.geo");
    let out = progmesh(&[
        "gen-geometry", "l-channel", "--dims", "64", "48", "16", "--tile", "16", "--width", "8", "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_geometry(&path).unwrap(), l_channel([64, 48, 16], 16, 8));
}

#[test]
fn run_writes_reports_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let outdir = dir.path().join("out");
    let out = progmesh(&["run", "--config", &cfg, "--output", outdir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series = std::fs::read_to_string(outdir.join("timeseries.csv")).unwrap();
    assert_eq!(series.lines().count(), 4);
    assert!(std::fs::read_to_string(outdir.join("creation_log.csv")).unwrap().contains("seed"));
    let raw = read_raw(&outdir.join("snapshots/rho_c0_000020.raw")).unwrap();
    assert_eq!(raw.len(), 32 * 32);
    assert!(outdir.join("snapshots/rho_c0_000020.pgm").exists());
}

#[test]
fn static_run_spreads_tiles_evenly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let outdir = dir.path().join("out");
    let out = progmesh(&[
        "run", "--config", &cfg, "--mode", "static", "--devices", "3", "--output", outdir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(outdir.join("summary.txt")).unwrap();
    let line = summary.lines().find(|l| l.starts_with("device_tile_counts")).unwrap();
    let mut counts: Vec<usize> = line.split('=').nth(1).unwrap().split_whitespace().map(|c| c.parse().unwrap()).collect();
    counts.sort_unstable();
    assert_eq!(counts, [1, 1, 2], "{summary}");
}

#[test]
fn check_topology_lists_hubs() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../topologies/8dev-2hub.txt");
    let out = progmesh(&["check-topology", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("class 0: devices 0 1 2 3 (full p2p)"), "{text}");
    assert!(text.contains("class 1: devices 4 5 6 7"), "{text}");
}

#[test]
fn shipped_scenarios_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["pulse.toml", "l_channel.toml"] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        progmesh::config::parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn l_channel_compare_rows_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let geo = dir.path().join("l_channel.geo");
    progmesh::geometry::save_geometry(&l_channel([64, 48, 16], 16, 8), &geo).unwrap();
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/l_channel.toml")).unwrap();
    let topo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../topologies/8dev-2hub.txt");
    let text = text
        .replace("iterations = 400", "iterations = 60")
        .replace("../topologies/8dev-2hub.txt", topo.to_str().unwrap());
    let cfg = write_config(dir.path(), &text);
    let outdir = dir.path().join("out");
    let out = progmesh(&["compare", "--config", &cfg, "--output", outdir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = std::fs::read_to_string(outdir.join("compare_summary.txt")).unwrap();
    let value = |key: &str| -> f64 {
        summary.lines().find_map(|l| l.strip_prefix(key)).unwrap().trim_start_matches(" = ").parse().unwrap()
    };
    assert!(value("progressive_peak_bytes") < value("static_peak_bytes"));
    assert!(value("field_diff_max") <= 1e-10);

    let series = std::fs::read_to_string(outdir.join("progressive/timeseries.csv")).unwrap();
    let mut last = [0u64; 3];
    for row in series.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        let active: usize = cols[2].parse().unwrap();
        assert!(active <= 64 * 48 * 16);
        for (k, col) in [4, 5, 6].into_iter().enumerate() {
            let v: u64 = cols[col].parse().unwrap();
            assert!(v >= last[k]);
            last[k] = v;
        }
        let (mlups, bbox): (f64, f64) = (cols[13].parse().unwrap(), cols[14].parse().unwrap());
        assert!(bbox >= mlups, "{row}");
    }
}

#[test]
fn readme_config_example_parses() {
    let readme = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let cfg = progmesh::config::parse_config(block).unwrap();
    assert_eq!(cfg.periodic(), [false, false, true]);
    assert!(cfg.component_params(0).unwrap().eos.a > 0.0);
}
