use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn sps_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sps-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPS_LAB_CONFIG")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: [&str; 4] = ["--grid-n", "2048", "--rmax", "30"];

#[test]
fn solve_writes_a_verified_solution() {
    let dir = tempdir().unwrap();
    let mut args = vec!["solve", "--p", "4", "--eps", "1", "--out", "sol.json"];
    args.extend(SMALL);
    let o = sps_lab(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("m         25.6168"));
    let doc = json(&dir.path().join("sol.json"));
    assert!(doc["version"].as_str().unwrap().starts_with("sps-lab "));
    assert_eq!(doc["config"]["grid_n"], 2048);
    assert_eq!(doc["config"]["rmax"], 30.0);
    assert!(doc["residuals"]["nehari"].as_f64().unwrap().abs() < 1e-8);

    let o = sps_lab(dir.path(), &["verify", "sol.json"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("all identities hold"));
}

#[test]
fn lambda_is_converted_to_eps() {
    let dir = tempdir().unwrap();
    let mut args = vec!["solve", "--p", "4", "--lambda", "4", "--out", "s.json"];
    args.extend(SMALL);
    assert_eq!(code(&sps_lab(dir.path(), &args)), 0);
    let doc = json(&dir.path().join("s.json"));
    assert_eq!(doc["params"]["eps"], 0.5);
    assert_eq!(doc["params"]["lambda"], 4.0);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempdir().unwrap();
    let o = sps_lab(dir.path(), &["solve", "--p", "2.5", "--eps", "1"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("p outside (3,6)") && err.contains("3 < p < 6"), "{err}");
    assert_eq!(code(&sps_lab(dir.path(), &["solve", "--p", "4"])), 1);
    assert_eq!(
        code(&sps_lab(dir.path(), &["solve", "--p", "4", "--eps", "1", "--lambda", "2"])),
        1
    );
    assert_eq!(code(&sps_lab(dir.path(), &["solve", "--p", "four", "--eps", "1"])), 1);
    assert_eq!(
        code(&sps_lab(dir.path(), &["sweep", "--p", "4", "--eps-list", "1,0.5"])),
        1
    );
    assert_eq!(
        code(&sps_lab(dir.path(), &["sweep", "--p", "4", "--eps-list", "0.5,1,0"])),
        1
    );
    assert_eq!(code(&sps_lab(dir.path(), &["verify", "missing.json"])), 1);
    assert_eq!(code(&sps_lab(dir.path(), &["--help"])), 0);
}

#[test]
fn iteration_cap_exits_2_and_still_writes() {
    let dir = tempdir().unwrap();
    let mut args = vec!["solve", "--p", "4", "--eps", "1", "--max-iters", "2", "--out", "s.json"];
    args.extend(SMALL);
    let o = sps_lab(dir.path(), &args);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&dir.path().join("s.json"))["converged"], false);
    assert_eq!(code(&sps_lab(dir.path(), &["verify", "s.json"])), 3);
}

#[test]
fn corrupted_profile_fails_verification() {
    let dir = tempdir().unwrap();
    let mut args = vec!["solve", "--p", "4", "--eps", "1", "--out", "sol.json"];
    args.extend(SMALL);
    assert_eq!(code(&sps_lab(dir.path(), &args)), 0);
    let mut doc = json(&dir.path().join("sol.json"));
    let u = doc["u"].as_array_mut().unwrap();
    for v in u.iter_mut().take(200) {
        *v = serde_json::json!(v.as_f64().unwrap() * 1.05);
    }
    std::fs::write(dir.path().join("bad.json"), doc.to_string()).unwrap();
    let o = sps_lab(dir.path(), &["verify", "bad.json"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stdout).unwrap().contains("identity violated"));
}

#[test]
fn malformed_files_report_their_location() {
    let dir = tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{\n  \"version\": \"x\",\n  oops\n}").unwrap();
    let o = sps_lab(dir.path(), &["verify", "broken.json"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("broken.json: line 3"), "{err}");

    let header = "eps,lambda,m_eps,gap,eps_times_B,t_proj,e_dist,decay_rate";
    std::fs::write(
        dir.path().join("s.csv"),
        format!("{header}\n1,1,2,3,4,0.9,1,1\n0.5,,x,1,1,1,1,1\n"),
    )
    .unwrap();
    let o = sps_lab(dir.path(), &["report", "s.csv"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("s.csv: line 3"), "{err}");
}

#[test]
fn config_file_and_env_with_flag_override() {
    let dir = tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"p": 4, "eps": 1, "grid_n": 2048, "rmax": 30, "tol": 1e-8}"#,
    )
    .unwrap();
    let o = sps_lab(
        dir.path(),
        &["--config", "run.json", "solve", "--out", "a.json", "--grid-n", "3072"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("a.json"));
    assert_eq!(doc["config"]["grid_n"], 3072);
    assert_eq!(doc["config"]["p"], 4.0);
    assert_eq!(doc["grid"]["n"], 3072);

    let o = Command::new(env!("CARGO_BIN_EXE_sps-lab"))
        .args(["solve", "--out", "b.json"])
        .current_dir(dir.path())
        .env("SPS_LAB_CONFIG", dir.path().join("run.json"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("b.json"))["config"]["grid_n"], 2048);

    std::fs::write(dir.path().join("typo.json"), r#"{"p": 4, "grid": 10}"#).unwrap();
    let o = sps_lab(dir.path(), &["--config", "typo.json", "solve", "--eps", "1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("typo.json: line 1"));
}

#[test]
fn sweep_then_report() {
    let dir = tempdir().unwrap();
    let mut args = vec![
        "sweep", "--p", "4", "--eps-list", "1,0.1,0.01,0", "--out", "run/sweep.csv", "--svg", "plots",
    ];
    args.extend(SMALL);
    let o = sps_lab(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("eps,lambda,m_eps,gap,eps_times_B,t_proj,e_dist,decay_rate\n"));
    let doc = json(&dir.path().join("run/sweep.json"));
    assert_eq!(doc["pass"], true);
    assert!(doc["m_inf"].as_f64().unwrap() > 17.0);
    assert_eq!(doc["config"]["eps_list"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("plots/gap_vs_eps.svg").exists());

    let o = sps_lab(dir.path(), &["report", "run/sweep.csv", "--svg", "out"]);
    assert_eq!(code(&o), 0);
    for f in ["gap_vs_eps.svg", "e_dist_vs_eps.svg", "summary.txt"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("m_inf") && summary.contains("pass    true"));
}

#[test]
fn lambda_list_sweep_in_parallel_matches_sequential_rows() {
    let dir = tempdir().unwrap();
    let mut seq = vec!["sweep", "--p", "4", "--lambda-list", "1,100", "--out", "a.csv"];
    seq.extend(SMALL);
    let mut par = vec![
        "sweep", "--p", "4", "--lambda-list", "1,100", "--out", "b.csv", "--no-continuation",
        "--jobs", "2",
    ];
    par.extend(SMALL);
    assert_eq!(code(&sps_lab(dir.path(), &seq)), 0);
    assert_eq!(code(&sps_lab(dir.path(), &par)), 0);
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    let (a, b) = (read("a.csv"), read("b.csv"));
    let row: Vec<f64> = a.lines().nth(2).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[0] - 0.1).abs() < 1e-15 && (row[1] - 100.0).abs() < 1e-12);
    // same rows up to solver tolerance
    for (la, lb) in a.lines().skip(1).zip(b.lines().skip(1)) {
        let m = |l: &str| l.split(',').nth(2).unwrap().parse::<f64>().unwrap();
        assert!((m(la) - m(lb)).abs() <= 1e-7 * m(la), "{la} vs {lb}");
    }
}
