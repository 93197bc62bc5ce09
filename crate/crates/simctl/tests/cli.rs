use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn simctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simctl"))
        .args(args)
        .output()
        .expect("simctl runs")
}

fn preset(name: &str) -> String {
    String::from_utf8(simctl(&["preset", name]).stdout).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    simctl(&[
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

/// Every file under `dir` except the manifest, as relative path and bytes.
fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn last_row(csv: &Path) -> Vec<String> {
    let text = fs::read_to_string(csv).unwrap();
    text.lines()
        .last()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

#[test]
fn preset_listing_and_unknown_preset() {
    let out = simctl(&["preset"]);
    assert_eq!(code(&out), 0);
    let names = String::from_utf8(out.stdout).unwrap();
    for n in [
        "logistic",
        "equilibrium",
        "disruptive",
        "ghost",
        "sweep-benchmark",
    ] {
        assert!(names.lines().any(|l| l == n), "{n} missing");
    }
    assert_eq!(code(&simctl(&["preset", "nope"])), 2);
}

#[test]
fn logistic_run_is_deterministic_and_reaches_r() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "logistic.toml", &preset("logistic"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let first = run("run-eps", &cfg, &a);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert_eq!(code(&run("run-eps", &cfg, &b)), 0);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.iter().any(|(p, _)| p == "diagnostics.csv"));
    assert!(ta.iter().any(|(p, _)| p.starts_with("snapshots")));
    assert_eq!(ta, tb);

    let mass: f64 = last_row(&a.join("diagnostics.csv"))[1].parse().unwrap();
    assert!((mass - 0.5).abs() < 1e-3, "final mass {mass}");

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outcome"]["status"], "completed");
    assert_eq!(manifest["command"], "run-eps");
}

#[test]
fn nonnegative_rate_at_boundary_names_boundeta() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("logistic").replace("outside = -0.5", "outside = 0.1");
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    let out = run("run-eps", &cfg, &tmp.path().join("out"));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("boundeta"), "{}", stderr(&out));
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("logistic").replace("[grid]\n", "[grid]\nspacing = 0.1\n");
    let cfg = write_config(tmp.path(), "typo.toml", &text);
    assert_eq!(code(&run("run-eps", &cfg, &tmp.path().join("out"))), 2);
    assert_eq!(
        code(&run(
            "run-eps",
            &tmp.path().join("missing.toml"),
            &tmp.path().join("out")
        )),
        2
    );
}

#[test]
fn slope_below_rate_gradient_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("equilibrium").replace("slope = 3.3", "slope = 0.5");
    let cfg = write_config(tmp.path(), "weak.toml", &text);
    let out = run("run-limit", &cfg, &tmp.path().join("out"));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("assdep"));
}

#[test]
fn equilibrium_limit_run_is_static() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("eq");
    let out = simctl(&[
        "run-limit",
        "--config",
        "preset:equilibrium",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(out_dir.join("events.jsonl")).unwrap(),
        ""
    );
    let text = fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let m0: f64 = rows[0][1].parse().unwrap();
    for r in &rows {
        let m: f64 = r[1].parse().unwrap();
        assert!((m - m0).abs() <= 1e-8);
        assert_eq!(r[9], rows[0][9], "atoms moved");
    }
}

#[test]
fn population_started_where_r_is_negative_is_extinct_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let text =
        preset("equilibrium").replace("peaks = [{ center = 0.0,", "peaks = [{ center = 1.1,");
    let cfg = write_config(tmp.path(), "dead.toml", &text);
    let out = run("run-limit", &cfg, &tmp.path().join("out"));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("extinct"), "{}", stderr(&out));
}

#[test]
fn ess_prints_certified_measure() {
    let out = simctl(&["ess", "--config", "preset:equilibrium"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["certificate"]["pass"], true);
    assert!(report["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn ess_single_resource_total_is_max_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "one.toml", &preset("logistic"));
    let out = simctl(&["ess", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["total"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn ess_on_negative_rate_is_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("equilibrium").replace("omega = [-1.0, 1.0]", "omega = [1.1, 1.3]");
    let cfg = write_config(tmp.path(), "dead.toml", &text);
    let out = simctl(&["ess", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["measure"].as_array().unwrap().len(), 0);
    assert_eq!(report["certificate"]["pass"], true);
}

#[test]
fn disruptive_limit_run_logs_one_branching() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("split");
    let out = simctl(&[
        "run-limit",
        "--config",
        "preset:disruptive",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let events = fs::read_to_string(out_dir.join("events.jsonl")).unwrap();
    assert_eq!(
        events.lines().filter(|l| l.contains("branching")).count(),
        1,
        "{events}"
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("limit_report.json")).unwrap()).unwrap();
    assert_eq!(report["speed_ok"], true);
}
