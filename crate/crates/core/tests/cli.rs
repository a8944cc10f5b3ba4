use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ponsim");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn metric(csv: &str, scope: &str, name: &str) -> String {
    csv.lines()
        .map(|l| l.splitn(3, ',').collect::<Vec<_>>())
        .find(|f| f.len() == 3 && f[0] == scope && f[1] == name)
        .unwrap_or_else(|| panic!("{scope}/{name} missing"))[2]
        .to_string()
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["simulate", "--out", path(&out), "--packets"]);
    for f in ["metrics.csv", "metrics.json", "packets.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("scope,metric,value\n"));
    assert_eq!(metric(&csv, "meta", "seed"), "1");
    let packets = fs::read_to_string(out.join("packets.csv")).unwrap();
    assert!(packets.starts_with("flow_id,created_at,delivered_at\n"));
    serde_json::from_str::<serde_json::Value>(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["simulate", "--seed", "9", "--out", path(&a)]);
    ok(&["simulate", "--seed", "10", "--out", path(&b)]);
    let ca = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let cb = fs::read_to_string(b.join("metrics.csv")).unwrap();
    assert_eq!(metric(&ca, "meta", "seed"), "9");
    assert_ne!(metric(&ca, "meta", "event_hash"), metric(&cb, "meta", "event_hash"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["simulate", "--out", path(&a)]);
    ok(&["simulate", "--out", path(&b)]);
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn seed_sweep_writes_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seeds", "3..5", "--out", path(dir.path())]);
    for s in 3..=5 {
        let csv = fs::read_to_string(dir.path().join(format!("seed-{s}/metrics.csv"))).unwrap();
        assert_eq!(metric(&csv, "meta", "seed"), s.to_string());
    }
}

#[test]
fn generated_trace_replays_like_the_internal_one() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    ok(&["gen-trace", "--seed", "4", "--out", path(&trace)]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["simulate", "--seed", "4", "--out", path(&a)]);
    ok(&["simulate", "--seed", "4", "--trace", path(&trace), "--out", path(&b)]);
    let ca = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let cb = fs::read_to_string(b.join("metrics.csv")).unwrap();
    for (scope, name) in [
        ("totals", "vod_requests"),
        ("cache.onu", "hit_ratio"),
        ("flow.vod", "delay_mean_s"),
    ] {
        assert_eq!(metric(&ca, scope, name), metric(&cb, scope, name), "{scope}/{name}");
    }
}

#[test]
fn protocol_check_runs() {
    assert!(ok(&["protocol-check", "--ops", "0"]).starts_with("ok: 0 steps"));
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("ops.csv");
    let first = ok(&[
        "protocol-check",
        "--ops",
        "2000",
        "--seed",
        "3",
        "--save-script",
        path(&script),
    ]);
    assert_eq!(ok(&["protocol-check", "--script", path(&script)]), first);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["cache-bench", "--gen", "--policies", "arc", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("arc"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[workload]\nzipf_s = -1\nbogus = 3\n").unwrap();
    let out = run(&["simulate", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("zipf_s") && err.contains("bogus"), "{err}");
}

fn small_workload(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("small.toml");
    fs::write(
        &cfg,
        "[workload]\nn_objects = 20\nsegments_per_object = 5\nrequest_rate = 5\nduration = 200\n",
    )
    .unwrap();
    cfg
}

fn bench_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("bench.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("policy,capacity,requests,hits1,hits2,misses,drops,hit_ratio,byte_hit_ratio")
    );
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn bench_single_policy_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_workload(dir.path());
    ok(&[
        "cache-bench",
        "--gen",
        "--config",
        path(&cfg),
        "--policies",
        "lru",
        "--decisions",
        "--out",
        path(dir.path()),
    ]);
    let rows = bench_rows(dir.path());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "lru");
    assert!(dir.path().join("decisions-lru.csv").is_file());
}

#[test]
fn bench_with_room_for_everything_agrees_across_policies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_workload(dir.path());
    ok(&[
        "cache-bench",
        "--gen",
        "--config",
        path(&cfg),
        "--capacity",
        "400",
        "--store1-fraction",
        "0.5",
        "--out",
        path(dir.path()),
    ]);
    let rows = bench_rows(dir.path());
    assert_eq!(rows.len(), 3);
    // Every segment is inserted on first sight and never leaves.
    for r in &rows {
        assert_eq!(r[6], "0", "{} dropped segments", r[0]);
        assert_eq!(r[7], rows[0][7], "{} hit ratio", r[0]);
    }
}
