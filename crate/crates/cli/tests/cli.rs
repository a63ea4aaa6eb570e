use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_laguerre-flow"));
    cmd.current_dir(dir).args(args);
    if let Some(text) = config {
        std::fs::write(dir.join("run.toml"), text).unwrap();
        cmd.args(["--config", "run.toml"]);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn barenblatt_preset_writes_one_rate_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["simulate", "-o", "out"], Some("gamma = 2.0\nn = 100\n"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let rates = std::fs::read_to_string(dir.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 2);
    assert!(rates.lines().nth(1).unwrap().starts_with("2,100,"));
    let m = manifest(&dir);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["results"]["epsilon"], 0.1);
    assert!((m["results"]["tau"].as_f64().unwrap() - 1e-3).abs() < 1e-18);
    assert_eq!(m["config"]["epsilon"], "standard");
    let energy = std::fs::read_to_string(dir.join("energy.csv")).unwrap();
    let f = column(&energy, "F");
    assert!(f.windows(2).all(|p| p[1] <= p[0] + 1e-12 * (1.0 + p[0].abs())));
    let snaps = std::fs::read_to_string(dir.join("snapshots.csv")).unwrap();
    // initial and final states of 100 particles
    assert_eq!(snaps.lines().count(), 1 + 2 * 100);
}

#[test]
fn invalid_configurations_leave_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    for (k, text) in ["tau = 0.0", "tau = -1.0", "t_end = 0.01", "not toml [", "mode = \"other\"", "n = 0"].iter().enumerate() {
        let name = format!("out{k}");
        let out = run(tmp.path(), &["simulate", "-o", &name], Some(text));
        assert!(!out.status.success(), "{text}");
        assert!(!tmp.path().join(&name).exists(), "{text}");
    }
    let out = run(tmp.path(), &["simulate", "-o", "missing", "--config", "nowhere.toml"], None);
    assert!(!out.status.success());
    let out = run(tmp.path(), &["cross", "-o", "clash"], Some("case = \"barenblatt\""));
    assert!(!out.status.success());
    assert!(!tmp.path().join("clash").exists());
}

const CUSTOM: &str = "case = \"custom\"\nmode = \"full\"\ndomain_file = \"domain.csv\"\nparticle_file = \"particles.csv\"\n\
                      epsilon = 0.1\ntau = 0.01\nt_end = 0.2\nsnapshot_times = [0.1]\nseed = 5\n";

fn write_custom_inputs(dir: &Path) {
    std::fs::write(dir.join("domain.csv"), "x,y\n0,0\n1,0\n1,1\n0,1\n").unwrap();
    std::fs::write(dir.join("particles.csv"), "x,y,mass\n0.2,0.3,0.2\n0.7,0.25,0.3\n0.5,0.8,0.25 # top\n").unwrap();
}

#[test]
fn identical_runs_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    write_custom_inputs(tmp.path());
    for name in ["a", "b"] {
        let out = run(tmp.path(), &["simulate", "-o", name, "--workers", "2"], Some(CUSTOM));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["snapshots.csv", "energy.csv", "manifest.json"] {
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        if file == "manifest.json" {
            // only the output directory differs
            let (ma, mb): (Value, Value) = (serde_json::from_slice(&a).unwrap(), serde_json::from_slice(&b).unwrap());
            assert_eq!(ma["results"], mb["results"]);
        } else {
            assert_eq!(a, b, "{file}");
        }
    }
    let m = manifest(&tmp.path().join("a"));
    assert_eq!(m["config"]["seed"], 5);
    assert_eq!(m["results"]["particles"], 3);
    let snaps = std::fs::read_to_string(tmp.path().join("a/snapshots.csv")).unwrap();
    assert_eq!(column(&snaps, "time").iter().filter(|&&t| t == 0.1).count(), 3);
}

#[test]
fn custom_case_checks_its_files() {
    let tmp = tempfile::tempdir().unwrap();
    write_custom_inputs(tmp.path());
    std::fs::write(tmp.path().join("particles.csv"), "0.2,0.3\n").unwrap();
    let out = run(tmp.path(), &["simulate", "-o", "out"], Some(CUSTOM));
    assert!(!out.status.success());
    std::fs::write(tmp.path().join("particles.csv"), "0.2,0.3,0.1\n3.0,0.5,0.1\n").unwrap();
    let out = run(tmp.path(), &["simulate", "-o", "out"], Some(CUSTOM));
    assert!(!out.status.success());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn cross_moves_toward_the_equilibrium_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["cross", "-o", "out", "--seed", "3"], Some("n = 150\nt_end = 1.0\nepsilon = 0.3\n"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let m = manifest(&dir);
    let target = m["results"]["equilibrium_internal_energy"].as_f64().unwrap();
    assert!((target - 1.1056e-2).abs() < 1e-6);
    assert_eq!(m["config"]["seed"], 3);
    assert_eq!(m["config"]["potential"], "quadratic");
    let energy = std::fs::read_to_string(dir.join("energy.csv")).unwrap();
    let internal = column(&energy, "internal");
    let first = (internal[0] - target).abs();
    let last = (internal.last().unwrap() - target).abs();
    assert!(last < 0.5 * first, "{first} -> {last}");
}

#[test]
fn study_tabulates_rates_for_each_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let config = "gammas = [2.0, 4.0]\nns = [20, 40]\nt_end = 0.1\nlloyd_iters = 5\n";
    let out = run(tmp.path(), &["study", "-o", "out", "-w", "2"], Some(config));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let rates = std::fs::read_to_string(dir.join("rates.csv")).unwrap();
    let rows: Vec<Vec<&str>> = rates.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[0][0], rows[0][1], rows[0][4]), ("2", "20", ""));
    assert!(rows[1][4].parse::<f64>().is_ok());
    assert_eq!(rows[3][0], "4");
    for file in ["energy_gamma2_n20.csv", "energy_gamma4_n40.csv"] {
        assert!(dir.join(file).is_file());
    }
    assert_eq!(manifest(&dir)["results"]["runs"].as_array().unwrap().len(), 4);
}
