use std::fs;
use std::process::{Command, Output};

fn isingtri(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_isingtri")).args(args).env_remove("ISINGTRI_CACHE").output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn oracle_count_is_json() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&isingtri(&["oracle", "count", "--p", "1", "--q", "0", "--edges", "2"]))).unwrap();
    assert_eq!(v["coeffs"], serde_json::json!(["0", "1", "1"]));
}

#[test]
fn table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("z.json");
    let f = f.to_str().unwrap();
    isingtri(&["tables", "build", "--order", "5", "--out", f, "--check"]);
    isingtri(&["tables", "verify", "--in", f, "--order", "5"]);

    let mut file: serde_json::Value = serde_json::from_slice(&fs::read(f).unwrap()).unwrap();
    let last = file["entries"].as_array_mut().unwrap().last_mut().unwrap();
    last[3][0][0] = "12345".into();
    fs::write(f, serde_json::to_vec(&file).unwrap()).unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_isingtri")).args(["tables", "verify", "--in", f, "--order", "5"]).output().unwrap();
    assert!(!st.status.success());
}

#[test]
fn constants_json_digits() {
    let o = isingtri(&["constants", "--nu", "1.2", "--json", "--digits", "40"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["digits"], 40);
    let t_c = v["values"].as_array().unwrap().iter().find(|e| e[0] == "t_c").unwrap()[1].as_str().unwrap().to_string();
    assert!(t_c.len() >= 40, "{t_c}");
    let o = Command::new(env!("CARGO_BIN_EXE_isingtri"))
        .args(["constants", "--nu", "nu_c", "--json"])
        .env("ISINGTRI_DIGITS", "25")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["digits"], 25);
}

#[test]
fn boltzmann_tables_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("w.json");
    isingtri(&["tables", "boltzmann", "--nu", "1.2", "--kmax", "2048", "--out", f.to_str().unwrap()]);
    let t = isingtri::coefficients::CoefficientTables::load(&f).unwrap();
    assert_eq!(t.k_max(), 2048);
    assert!((t.nu - 1.2).abs() < 1e-15);
}

#[test]
fn simulate_writes_records_and_maps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.jsonl");
    let maps = dir.path().join("maps.jsonl");
    isingtri(&[
        "simulate", "--regime", "finite", "--p", "4", "--q", "3", "--runs", "5", "--seed", "7", "--small", "--out",
        out.to_str().unwrap(), "--map-out", maps.to_str().unwrap(),
    ]);
    let lines: Vec<serde_json::Value> =
        fs::read_to_string(&out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    for l in &lines {
        assert_eq!(l["seed"], 7);
        assert_eq!(l["stop"], "End");
        assert!(l["eta"].as_u64().unwrap() >= 1);
    }
    let maps: Vec<serde_json::Value> =
        fs::read_to_string(&maps).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(maps.len(), 5);
    assert!(maps[0]["map"]["spin"].is_array());
}

#[test]
fn scaling_report_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "nu = \"nu_c\"\np = 40\nm = [5, 10]\nruns = 200\nseed = 11\nsmall = true\n").unwrap();
    let rep = dir.path().join("hit.json");
    isingtri(&["scaling", "hitting", "--config", cfg.to_str().unwrap(), "--runs", "300", "--out", rep.to_str().unwrap()]);
    let v: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(&rep).unwrap()).unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v[0]["params"]["runs"], 300);
    assert_eq!(v[1]["params"]["m"], 10);
    let csv = fs::read_to_string(dir.path().join("hit-1.csv")).unwrap();
    assert!(csv.starts_with("x,F\n") && csv.lines().count() > 10);

    fs::write(&cfg, "bogus = 1\n").unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_isingtri")).args(["scaling", "drift", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!st.status.success());
}
