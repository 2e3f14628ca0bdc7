use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn binlat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binlat"))
        .args(args)
        .env_remove("BINLAT_SEED")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, contents).unwrap();
    p
}

fn simulated(dir: &TempDir) -> PathBuf {
    let p = dir.path().join("sim.csv");
    let out = binlat(&[
        "simulate",
        "--n",
        "120",
        "--m",
        "3",
        "--tau",
        "1",
        "--phi",
        "0.5",
        "--seed",
        "11",
        "--output",
        path_str(&p),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = binlat(&[
            "simulate",
            "--n",
            "50",
            "--m",
            "2",
            "--tau",
            "0.5",
            "--seed",
            "3",
            "-o",
            path_str(p),
        ]);
        assert!(out.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("y,m,x1\n"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn seed_comes_from_environment() {
    let run = |env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_binlat"));
        c.args(["simulate", "--n", "30", "--tau", "1", "--json"])
            .env_remove("BINLAT_SEED");
        if let Some(s) = env {
            c.env("BINLAT_SEED", s);
        }
        json_of(&c.output().unwrap())["seed"].as_u64()
    };
    assert_eq!(run(None), Some(42));
    assert_eq!(run(Some("9")), Some(9));
}

#[test]
fn json_envelope_for_fits() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let glm = json_of(&binlat(&["fit-glm", path_str(&data), "--json"]));
    for key in ["config", "results", "diagnostics", "seed", "version"] {
        assert!(glm.get(key).is_some(), "missing {key}");
    }
    assert_eq!(glm["config"]["command"], "fit-glm");
    assert_eq!(glm["results"]["beta_hat"].as_array().unwrap().len(), 2);
    assert_eq!(glm["diagnostics"]["n"], 120);

    let fit_path = dir.path().join("fit.json");
    let out = binlat(&["fit-marginal", path_str(&data), "--json-out", path_str(&fit_path)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("pile-up"));
    let fit: Value = serde_json::from_str(&fs::read_to_string(&fit_path).unwrap()).unwrap();
    let tau = fit["results"]["tau_hat"].as_f64().unwrap();
    assert!(tau > 0.0 && tau < 100.0, "tau_hat = {tau}");

    // Reusing the saved fit gives the same statistic as fitting inline.
    let inline = json_of(&binlat(&["test-serial", path_str(&data), "--json"]));
    let reused = json_of(&binlat(&[
        "test-serial",
        path_str(&data),
        "--fit",
        path_str(&fit_path),
        "--json",
    ]));
    assert_eq!(inline["results"]["statistic"], reused["results"]["statistic"]);
    assert_eq!(reused["results"]["df"], 2);
}

#[test]
fn latent_test_with_simulated_null() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let v = json_of(&binlat(&[
        "test-latent",
        path_str(&data),
        "--grid",
        "-0.5:0.5:0.25",
        "--simulated-null",
        "40",
        "--seed",
        "5",
        "--json",
    ]));
    let r = &v["results"];
    assert_eq!(r["sup"]["grid"].as_array().unwrap().len(), 5);
    assert!(r["statistic"].as_f64().unwrap() >= r["standard"]["statistic"].as_f64().unwrap());
    let p = r["simulated_null"]["p_value_sup"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(v["seed"], 5);
}

#[test]
fn table1_csv_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (p, workers) in [(&a, "1"), (&b, "2")] {
        let out = binlat(&[
            "table1",
            "--reps",
            "60",
            "--cells",
            "80x1,80x2",
            "--workers",
            workers,
            "--csv",
            path_str(p),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("n,m,level,davies,empirical_sup,empirical_standard,level_se\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 4);
}

#[test]
fn pile_up_exits_with_degeneracy_status() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("y,m,x1\n");
    for t in 1..=40 {
        csv.push_str(&format!("2,4,{t}\n"));
    }
    let data = write(&dir, "flat.csv", &csv);
    let out = binlat(&["test-serial", path_str(&data)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("piled up"), "{err}");
}

#[test]
fn bad_data_exits_with_status_2() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "bad.csv", "y,m,x1\n1,2,0.1\n5,2,0.3\n");
    let out = binlat(&["fit-glm", path_str(&data)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let missing = dir.path().join("absent.csv");
    assert_eq!(binlat(&["fit-glm", path_str(&missing)]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_status_1() {
    assert_eq!(binlat(&["fit-glm", "--bogus"]).status.code(), Some(1));
    assert_eq!(binlat(&["table1", "--grid", "0:2:0.5"]).status.code(), Some(1));
    assert_eq!(
        binlat(&["table1", "--reps", "0", "--cells", "50x1"]).status.code(),
        Some(1)
    );
    assert_eq!(binlat(&["--help"]).status.code(), Some(0));
}

#[test]
fn text_tables_use_four_decimals() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let out = binlat(&["fit-glm", path_str(&data)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().find(|l| l.starts_with("intercept")).unwrap();
    for cell in row.split_whitespace().skip(1) {
        assert_eq!(cell.split('.').nth(1).map(str::len), Some(4), "{row}");
    }
}
