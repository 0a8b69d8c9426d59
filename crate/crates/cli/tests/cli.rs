use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn unhinged(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unhinged")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn every_subcommand_succeeds_with_defaults() {
    for cmd in ["gamma-sweep", "eta-sweep", "dynamics", "loss-report", "robust-check", "recession-probe"] {
        let out = unhinged(&[cmd]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{cmd}");
    }
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(unhinged(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(unhinged(&["eta-sweep", "--loss", "squared"]).status.code(), Some(2));
    assert_eq!(unhinged(&["robust-check", "--eta", "0.5"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"grid": {"start": 0.0, "stop": 1.2, "count": 5}}"#);
    assert_eq!(unhinged(&["gamma-sweep", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"gird": {"start": 0.1, "stop": 0.2, "count": 5}}"#);
    assert_eq!(unhinged(&["gamma-sweep", "--config", &cfg]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(unhinged(&["loss-report", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn failed_claim_exits_with_one() {
    // a grid that never crosses the threshold cannot confirm it
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"grid": {"start": 0.2, "stop": 0.3, "count": 5}}"#);
    let out = unhinged(&["gamma-sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("claim FAILED"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["gamma-sweep", "robust-check", "recession-probe"] {
        for dir in [&a, &b] {
            let extra: &[&str] = if cmd == "gamma-sweep" { &[] } else { &["--trials", "25", "--seed", "42"] };
            let mut args = vec![cmd, "--out-dir", dir.path().to_str().unwrap(), "--plot"];
            args.extend_from_slice(extra);
            assert_eq!(unhinged(&args).status.code(), Some(0), "{cmd}");
        }
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn different_seeds_give_different_campaigns() {
    let a = unhinged(&["robust-check", "--trials", "10", "--seed", "1"]);
    let b = unhinged(&["robust-check", "--trials", "10", "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn svg_plots_are_small_and_self_contained() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    for args in [
        vec!["gamma-sweep"],
        vec!["eta-sweep"],
        vec!["loss-report"],
        vec!["dynamics", "--iterations", "200000"],
        vec!["recession-probe"],
        vec!["robust-check", "--trials", "200"],
    ] {
        let mut full = args.clone();
        full.extend(["--out-dir", out_dir, "--plot"]);
        assert_eq!(unhinged(&full).status.code(), Some(0), "{args:?}");
    }
    let svgs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    assert_eq!(svgs.len(), 6);
    for svg in svgs {
        let text = fs::read_to_string(&svg).unwrap();
        assert!(text.len() < 1_000_000, "{svg:?} is {} bytes", text.len());
        assert!(text.starts_with("<svg") && !text.contains("href") && !text.contains("<image"));
    }
}

#[test]
fn config_file_drives_dynamics() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("sample.csv");
    fs::write(&sample, "x1,x2,y\n0,-5,1\n0.5,1,-1\n").unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"mode": "cd", "sample": {:?}, "iterations": 4, "tie_rule": "report-all", "out_dir": {:?}}}"#,
            sample.to_str().unwrap(),
            dir.path().to_str().unwrap()
        ),
    );
    assert_eq!(unhinged(&["dynamics", "--config", &cfg]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("dynamics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,v_1,v_2,loss,angle_rad,chosen_coord");
    assert_eq!(lines.len(), 6);
    // g = (-0.5, -6): second coordinate, descending direction
    assert!(lines[1..].iter().skip(1).all(|l| l.ends_with(",1")));
    assert!(lines[4].starts_with("3,0,-3,"));
}

#[test]
fn json_format_writes_single_document() {
    let dir = tempfile::tempdir().unwrap();
    let out = unhinged(&["eta-sweep", "--format", "json", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eta_sweep.json")).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r["clean_error"] == 0.5 && r["noisy_fit_error"] == 0.5));
    assert!(!dir.path().join("eta_sweep.csv").exists());
}

#[test]
fn csv_rows_match_library_calls() {
    use unhinged::{make_counterexample, unhinged_minimizer};
    let out = unhinged(&["gamma-sweep"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let gamma: f64 = rec[0].parse().unwrap();
        let fit = unhinged_minimizer(&make_counterexample(gamma).unwrap(), 1.0).unwrap();
        assert_eq!(rec[1].parse::<f64>().unwrap(), fit.v()[0]);
        assert_eq!(rec[2].parse::<f64>().unwrap(), fit.v()[1]);
    }
}
