use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasesource"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("phasesource-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn stability_run_writes_reproducible_files() {
    let dir = scratch("stability");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "stability.duration = 2000\n").unwrap();
    let out = dir.join("o");
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let status = bin()
            .args(["stability", "--config"])
            .arg(&cfg)
            .args(["--seed", "5", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let files: Vec<Vec<u8>> = ["stability_series.csv", "stability_histogram.csv", "stability.json"]
            .iter()
            .map(|n| fs::read(out.join(n)).unwrap())
            .collect();
        snapshots.push(files);
    }
    assert!(snapshots[0] == snapshots[1], "rerun changed the outputs");
    let outputs = [out];
    let csv = fs::read_to_string(outputs[0].join("stability_series.csv")).unwrap();
    assert!(csv.contains("# rng_seed = 5"));
    assert!(csv.contains("# stability.duration = 2000"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 2001);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(outputs[0].join("stability.json")).unwrap()).unwrap();
    assert_eq!(json["rng_seed"], 5);
    assert_eq!(json["config"]["stability.duration"], "2000");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "detector.efficiency = 2\n").unwrap();
    let out = bin().args(["bb84-sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("detector.efficiency"));
    fs::write(&cfg, "bogus.key = 1\n").unwrap();
    let out = bin().args(["dps-sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = scratch("diverge");
    let cfg = dir.join("hot.cfg");
    fs::write(&cfg, "phase_voltage.bias = 1e305\nphase_voltage.voltages = 0.1\n").unwrap();
    let out = bin()
        .args(["phase-voltage", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn dps_sweep_from_fiber_lengths() {
    let dir = scratch("dps");
    let cfg = dir.join("dps.cfg");
    fs::write(&cfg, "sweep.fiber_km = 50, 100\nsweep.trials = 100000\nsweep.min_sifted = 2000\n").unwrap();
    let out = bin()
        .args(["dps-sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.join("o/dps_sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("loss_db,clocks,sifted_count"));
    assert!(rows[1].starts_with("10,") && rows[2].starts_with("20,"));
    let curve = fs::read_to_string(dir.join("o/dps_sweep_rate_curve.csv")).unwrap();
    assert!(curve.lines().any(|l| l == "loss_db,sifted_rate_bps,qber,secure_rate_bps"));
}
