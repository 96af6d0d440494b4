use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bladepress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bladepress"))
        .args(args)
        .env_remove("BLADEPRESS_OUT")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_manifest(dir: &Path, name: &str, body: serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

fn short_manifest(extra: serde_json::Value) -> serde_json::Value {
    let mut base = serde_json::json!({
        "campaign_id": "cli",
        "aoa_list": [-10, -8, -6, -4, -2, 0, 4, 8, 12, 16, 20, 24],
        "duration": 4,
        "seed": 11
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    base
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn pipeline(dir: &Path, manifest: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let sim = dir.join("sim");
    let proc = dir.join("proc");
    let ana = dir.join("ana");
    assert_eq!(bladepress(&["simulate", "--manifest", s(manifest), "--out", s(&sim)]).status.code(), Some(0));
    let out = bladepress(&["process", "--input", s(&sim.join("run_index.json")), "--out", s(&proc)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bladepress(&["analyze", "--input", s(&proc.join("aggregates.csv")), "--out", s(&ana)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    (sim, proc, ana)
}

#[test]
fn out_of_range_aoa_exits_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", serde_json::json!({"aoa_list": [0, 10, 95]}));
    let out = bladepress(&["simulate", "--manifest", s(&m), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("aoa_list[2]"));
}

#[test]
fn malformed_manifest_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, "{\n  \"duration\": 4,\n  \"seed\": -3\n}").unwrap();
    let out = bladepress(&["simulate", "--manifest", s(&path), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn missing_manifest_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = bladepress(&["simulate", "--manifest", s(&dir.path().join("none.json")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn default_geometry_writes_one_file_per_channel() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", serde_json::json!({"duration": 2}));
    let sim = dir.path().join("sim");
    assert_eq!(bladepress(&["simulate", "--manifest", s(&m), "--out", s(&sim)]).status.code(), Some(0));
    let names: Vec<String> = sorted_files(&sim)
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let inst_channels = names.iter().filter(|n| n.contains("_instrumented_") && !n.contains("__stationary_")).count();
    let inst_still = names.iter().filter(|n| n.contains("__stationary_")).count();
    let clean = names.iter().filter(|n| n.contains("_clean_")).count();
    assert_eq!(inst_channels, 18 * 18);
    assert_eq!(inst_still, 18 * 10);
    assert_eq!(clean, 18 * 8);
    assert!(names.contains(&"run_index.json".to_string()));
    assert!(names.contains(&"campaign_instrumented_00__mems_00.csv".to_string()));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", short_manifest(serde_json::json!({})));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    pipeline(&a, &m);
    pipeline(&b, &m);
    for stage in ["sim", "proc", "ana"] {
        let fa = sorted_files(&a.join(stage));
        let fb = sorted_files(&b.join(stage));
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn seed_flag_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", short_manifest(serde_json::json!({"blade_states": ["clean"]})));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    bladepress(&["simulate", "--manifest", s(&m), "--out", s(&a)]);
    bladepress(&["simulate", "--manifest", s(&m), "--out", s(&b), "--seed", "99"]);
    let f = "cli_clean_00__tap_00.csv";
    assert_ne!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
}

#[test]
fn missing_stationary_file_isolates_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", short_manifest(serde_json::json!({"blade_states": ["instrumented"]})));
    let sim = dir.path().join("sim");
    bladepress(&["simulate", "--manifest", s(&m), "--out", s(&sim)]);
    std::fs::remove_file(sim.join("cli_instrumented_03__stationary_mems_04.csv")).unwrap();
    let proc = dir.path().join("proc");
    let out = bladepress(&["process", "--input", s(&sim.join("run_index.json")), "--out", s(&proc)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cli_instrumented_03"));
    let agg = std::fs::read_to_string(proc.join("aggregates.csv")).unwrap();
    assert!(!agg.contains("cli_instrumented_03,"));
    assert!(agg.contains("cli_instrumented_04,"));
    let cal: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(proc.join("calibration.json")).unwrap()).unwrap();
    assert_eq!(cal["failures"].as_array().unwrap().len(), 1);
    assert_eq!(cal["source"], "calibrated");
}

#[test]
fn alpha_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", short_manifest(serde_json::json!({"blade_states": ["instrumented"], "aoa_list": [0, 24]})));
    let sim = dir.path().join("sim");
    bladepress(&["simulate", "--manifest", s(&m), "--out", s(&sim)]);
    let proc = dir.path().join("proc");
    let out = bladepress(&["process", "--input", s(&sim.join("run_index.json")), "--out", s(&proc), "--alpha", "0.9"]);
    assert_eq!(out.status.code(), Some(0));
    let cal: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(proc.join("calibration.json")).unwrap()).unwrap();
    assert_eq!(cal["alpha"], 0.9);
    assert_eq!(cal["source"], "override");
    let bad = bladepress(&["process", "--input", s(&sim.join("run_index.json")), "--out", s(&proc), "--alpha", "-1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn analysis_outputs_and_self_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", short_manifest(serde_json::json!({})));
    let (_, proc, ana) = pipeline(dir.path(), &m);
    for f in ["suction_curves.csv", "chordwise_profiles.csv", "separation_onsets.csv", "separation_fronts.csv", "comparison.csv", "impact.csv", "summary.json"] {
        assert!(ana.join(f).exists(), "{f}");
    }
    let profiles = std::fs::read_to_string(ana.join("chordwise_profiles.csv")).unwrap();
    assert!(profiles.starts_with("blade_state,kind,aoa_deg,station_xc,mean_pa,std_pa\n"));
    assert!(profiles.contains("\ninstrumented,mems,12,"));
    assert!(profiles.contains("\ninstrumented,mems,16,"));
    let impact = std::fs::read_to_string(ana.join("impact.csv")).unwrap();
    assert!(impact.starts_with("station_xc,onset_shift_deg,peak_std_ratio\n"));

    let agg = proc.join("aggregates.csv");
    let cmp = dir.path().join("cmp");
    let out = bladepress(&["compare", "--input", s(&agg), "--input", s(&agg), "--out", s(&cmp)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(cmp.join("comparison.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("station_xc,mean_error_pct,std_error_pct"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 18);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!((f[1], f[2]), ("0", "0"), "{row}");
    }

    let mems_vs_taps = bladepress(&[
        "compare", "--input", s(&agg), "--input", s(&agg), "--out", s(&cmp),
        "--candidate-kind", "mems", "--reference-kind", "tap",
    ]);
    assert_eq!(mems_vs_taps.status.code(), Some(0));
}

#[test]
fn disjoint_stations_cannot_be_compared() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let header = "run_id,station_xc,kind,aoa_deg,mean_pa,std_pa,n\n";
    std::fs::write(&a, format!("{header}r_instrumented_00,0.1,tap,0,-100,10,100\nr_instrumented_01,0.1,tap,4,-500,12,100\n")).unwrap();
    std::fs::write(&b, format!("{header}r_instrumented_00,0.9,tap,0,-100,10,100\nr_instrumented_01,0.9,tap,4,-500,12,100\n")).unwrap();
    let out = bladepress(&["compare", "--input", s(&a), "--input", s(&b), "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    let one = bladepress(&["compare", "--input", s(&a), "--out", s(&dir.path().join("c"))]);
    assert_eq!(one.status.code(), Some(2));
}

#[test]
fn clean_only_campaign_has_no_impact_report() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", short_manifest(serde_json::json!({"blade_states": ["clean"]})));
    let (_, _, ana) = pipeline(dir.path(), &m);
    assert!(!ana.join("impact.csv").exists());
    let summary = std::fs::read_to_string(ana.join("summary.json")).unwrap();
    assert!(summary.contains("impact report not produced"), "{summary}");
}

#[test]
fn malformed_aggregates_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    std::fs::write(&a, "run_id,station_xc,kind,aoa_deg,mean_pa,std_pa,n\nr,0.3,laser,0,1,1,10\n").unwrap();
    let out = bladepress(&["analyze", "--input", s(&a), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&a, "wrong,header\n").unwrap();
    let out = bladepress(&["analyze", "--input", s(&a), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}
