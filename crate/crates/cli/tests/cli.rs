use std::path::Path;
use std::process::{Command, Output};

fn voxtopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxtopo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn two_rooms(dir: &Path) -> std::path::PathBuf {
    let fx = dir.join("fx");
    let o = voxtopo(&["fixture", "two_rooms_door", "-o", s(&fx)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    fx
}

#[test]
fn fixture_build_eval_inspect() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = two_rooms(tmp.path());
    assert!(fx.join("cloud.ply").is_file());
    assert!(fx.join("truth.json").is_file());

    let out = tmp.path().join("map");
    let o = voxtopo(&[
        "--threads",
        "2",
        "build",
        s(&fx.join("cloud.ply")),
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for f in [
        "topomap_d0.json",
        "topomap_d1.json",
        "topomap_d2.json",
        "topomap_d3.json",
        "run_report.json",
        "s0_leaves.png",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(out.join("meshes").is_dir());

    let json = tmp.path().join("mcc.json");
    let o = voxtopo(&[
        "eval",
        s(&out.join("s0_leaves.png")),
        s(&fx.join("gt_labels.png")),
        "--json",
        s(&json),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report["aggregate"].as_f64().unwrap() >= 0.97);

    let o = voxtopo(&["inspect", s(&out.join("topomap_d3.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = voxtopo(&["inspect", s(&out.join("topomap_d0.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("Region1"), "{}", text(&o));
}

#[test]
fn only_requested_dims_are_written() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = two_rooms(tmp.path());
    let out = tmp.path().join("map");
    let o = voxtopo(&[
        "build",
        s(&fx.join("cloud.ply")),
        "-o",
        s(&out),
        "--dims",
        "d0,d1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(out.join("topomap_d1.json").is_file());
    assert!(!out.join("topomap_d3.json").exists());
}

#[test]
fn missing_input_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = voxtopo(&["build", s(&tmp.path().join("nope.ply")), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(!out.exists());
}

#[test]
fn bad_flag_is_a_usage_error() {
    let o = voxtopo(&["build", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = voxtopo(&["build", "x.ply", "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let o = voxtopo(&["build", "x.ply", "--voxel", "-1"]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn memory_cap_is_a_pipeline_error() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = two_rooms(tmp.path());
    let out = tmp.path().join("map");
    let o = voxtopo(&[
        "build",
        s(&fx.join("cloud.ply")),
        "-o",
        s(&out),
        "--set",
        "memory_cap=1000",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
    assert!(text(&o).contains("cap"), "{}", text(&o));
    assert!(!out.exists());
}

#[test]
fn print_config_applies_overrides() {
    let o = voxtopo(&[
        "build",
        "--print-config",
        "--voxel",
        "0.1",
        "--set",
        "alpha=3",
        "--peaks",
        "0,2.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let t = String::from_utf8(o.stdout).unwrap();
    assert!(t.contains("voxel = 0.1"), "{t}");
    assert!(t.contains("alpha = 3.0"), "{t}");
    assert!(t.contains("peaks = [0.0, 2.5]"), "{t}");
}

#[test]
fn config_file_is_read() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "voxel = 0.2\na_th = 10.0\n").unwrap();
    let o = voxtopo(&["build", "-c", s(&cfg), "--print-config"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let t = String::from_utf8(o.stdout).unwrap();
    assert!(
        t.contains("voxel = 0.2") && t.contains("a_th = 10.0"),
        "{t}"
    );

    std::fs::write(&cfg, "voxle = 0.2\n").unwrap();
    let o = voxtopo(&["build", "-c", s(&cfg), "--print-config"]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn fixture_list_names_every_kind() {
    let o = voxtopo(&["fixture", "--list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 7);
    let o = voxtopo(&["fixture", "castle"]);
    assert_eq!(o.status.code(), Some(1));
}
