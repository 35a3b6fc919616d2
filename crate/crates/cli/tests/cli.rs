use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adtomo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adtomo"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, profile: &str, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let out = adtomo(&["init", "--profile", profile], dir);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    edit(&mut v);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(adtomo(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(adtomo(&["run", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(adtomo(&["run", "--profile", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(adtomo(&["run"], dir.path()).status.code(), Some(2));
}

#[test]
fn indivisible_folds_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small", |v| v["folds"] = 3.into());
    let out = adtomo(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("folds:"), "{}", stderr(&out));
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = adtomo(&["run", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let out = adtomo(&["syncdetect", "--input", "nowhere"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn infer_before_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(adtomo(&["simulate", "--profile", "single-edge", "--out", "o"], d).status.success());
    assert!(adtomo(&["flag", "--profile", "single-edge", "--out", "o"], d).status.success());
    let records = d.join("o/records.jsonl");
    let text = fs::read_to_string(&records).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["is_different_from_control"] = serde_json::Value::Null;
            v.to_string() + "\n"
        })
        .collect();
    fs::write(&records, stripped).unwrap();
    let out = adtomo(&["infer", "--profile", "single-edge", "--out", "o"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("flag stage required"), "{}", stderr(&out));
}

#[test]
fn rerunning_infer_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = adtomo(&["run", "--profile", "single-edge", "--seed", "4", "--out", "a"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "precision 1.0000 recall 1.0000");
    let out = adtomo(&["infer", "--profile", "single-edge", "--seed", "4", "--input", "a", "--out", "b"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "t0 -> a0");
    for f in ["report.json", "report.csv"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn h1_on_disjoint_groups() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("logs");
    fs::create_dir(&d).unwrap();
    let mut adlog = String::new();
    let mut personas = Vec::new();
    for (g, words) in [("cars", ["engine", "wheel"]), ("pets", ["kitten", "puppy"])] {
        personas.push(serde_json::json!({ "id": format!("{g}-p"), "group": g, "blocking": [], "is_control": false }));
        for run in 0..3 {
            let line = serde_json::json!({
                "run": run, "persona": format!("{g}-p"), "slot": "s", "advertiser": "a",
                "tokens": words[..1 + run % 2].to_vec(),
            });
            adlog.push_str(&(line.to_string() + "\n"));
        }
    }
    fs::write(d.join("adlog.jsonl"), adlog).unwrap();
    fs::write(d.join("personas.json"), serde_json::to_string(&personas).unwrap()).unwrap();
    let out = adtomo(&["h1", "--out", "logs"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(d.join("h1.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        if r[0] != r[1] {
            assert_eq!(r[2], "0.0");
        }
    }
}

#[test]
fn init_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = adtomo(&["init", "--profile", "small", "--seed", "3", "--out", "c.json"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["folds"], 4);
    let listed = adtomo(&["profiles"], dir.path());
    assert!(String::from_utf8_lossy(&listed.stdout).contains("single-edge"));
}
