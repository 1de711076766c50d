use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_hesilab");

fn run(args: &[&str]) -> (i32, String, String) {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn hesilab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn stable_system(dir: &Path) -> PathBuf {
    let path = dir.join("stable.json");
    fs::write(
        &path,
        r#"{
  "n": 2,
  "m": 2,
  "A": [[-1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-2.0, 0.0]],
  "B": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
  "label": "stable pair"
}"#,
    )
    .unwrap();
    path
}

fn unstabilizable_system(dir: &Path) -> PathBuf {
    let path = dir.join("bad.json");
    fs::write(
        &path,
        r#"{
  "n": 2,
  "m": 1,
  "A": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.0]],
  "B": [[0.0, 0.0], [1.0, 0.0]],
  "label": "unreachable unstable mode"
}"#,
    )
    .unwrap();
    path
}

#[test]
fn pointwise_verdict_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let (code, _, _) = run(&[
        "model", "pointwise", "--c", "45", "--x0", "1/2", "--verdict", "--out", out,
    ]);
    assert_eq!(code, 2, "x0=1/2 silences an unstable mode");
    let (code, _, _) = run(&[
        "model", "pointwise", "--c", "45", "--x0", "1/3", "--verdict", "--out", out,
    ]);
    assert_eq!(code, 0, "x0=1/3 sees every unstable mode");
}

#[test]
fn malformed_inputs_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = tmp.path().join("broken.json");
    fs::write(&broken, "{\"n\": 2,").unwrap();
    let (code, _, err) = run(&[
        "hesi",
        "--system",
        broken.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"), "stderr was: {err}");

    let (code, _, _) = run(&["hesi", "--no-such-flag"]);
    assert_eq!(code, 1);

    let (code, _, _) = run(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn hesi_csv_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = stable_system(tmp.path());
    let out = tmp.path().join("rep");
    let (code, _, err) = run(&[
        "hesi",
        "--system",
        sys.to_str().unwrap(),
        "--beta",
        "0.5,1.0",
        "--variant",
        "both",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");

    let csv = fs::read_to_string(out.join("hesi_report.csv")).unwrap();
    let lines: Vec<&str> = csv.split("\r\n").collect();
    assert_eq!(
        lines[0],
        "beta,variant,constant,witness_re,witness_im,converged"
    );
    assert_eq!(lines.len(), 6, "header, four rows, trailing terminator");
    assert_eq!(lines[5], "");
    for row in &lines[1..5] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 6);
        let c: f64 = fields[2].parse().unwrap();
        assert!(c.is_finite() && c > 0.0);
        assert!(
            fields[2].contains('e') && fields[2].contains('.'),
            "field not in scientific form: {}",
            fields[2]
        );
        let mantissa_digits = fields[2]
            .split('e')
            .next()
            .unwrap()
            .chars()
            .filter(|ch| ch.is_ascii_digit())
            .count();
        assert_eq!(mantissa_digits, 17, "want 17 significant digits: {}", fields[2]);
    }
    let txt = fs::read_to_string(out.join("hesi_report.txt")).unwrap();
    assert!(txt.contains("verdict: half-plane constant finite"));
    assert!(txt.contains("tolerances:"));
}

#[test]
fn non_stabilizable_input_is_a_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = unstabilizable_system(tmp.path());
    let out = tmp.path().join("rep");
    let (code, _, err) = run(&[
        "hesi",
        "--system",
        sys.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stderr: {err}");
    let csv = fs::read_to_string(out.join("hesi_report.csv")).unwrap();
    assert!(csv.contains(",inf,"), "csv was: {csv}");
    let txt = fs::read_to_string(out.join("hesi_report.txt")).unwrap();
    assert!(txt.contains("verdict: not stabilizable at the requested parameters"));
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = stable_system(tmp.path());
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out = tmp.path().join(name);
        let (code, _, _) = run(&[
            "hesi",
            "--system",
            sys.to_str().unwrap(),
            "--beta",
            "0.5,1.0,2.0",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push((
            fs::read(out.join("hesi_report.csv")).unwrap(),
            fs::read(out.join("hesi_report.txt")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
}

#[test]
fn obs_report_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = stable_system(tmp.path());
    let out = tmp.path().join("rep");
    let (code, _, _) = run(&[
        "obs",
        "--system",
        sys.to_str().unwrap(),
        "--T",
        "1.0,2.0",
        "--delta",
        "0.25,0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("obs_report.csv")).unwrap();
    let lines: Vec<&str> = csv.split("\r\n").collect();
    assert_eq!(lines[0], "T,delta,constant");
    assert_eq!(lines.len(), 6);
}

#[test]
fn synth_exports_a_closed_loop_that_reloads() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = unstabilizable_system(tmp.path());
    let out = tmp.path().join("rep");
    let (code, _, _) = run(&[
        "synth",
        "--system",
        sys.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "no feedback can move the unreachable mode");

    let sys = stable_system(tmp.path());
    let (code, _, err) = run(&[
        "synth",
        "--system",
        sys.to_str().unwrap(),
        "--alpha",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    for name in ["gain.json", "closed_loop.json", "synth_report.csv"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let closed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("closed_loop.json")).unwrap()).unwrap();
    assert_eq!(closed["n"], 2);
    let (code, _, _) = run(&[
        "hesi",
        "--system",
        out.join("closed_loop.json").to_str().unwrap(),
        "--out",
        tmp.path().join("closed").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn run_config_sweeps_and_caps() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = stable_system(tmp.path());
    let out = tmp.path().join("rep");
    let config = tmp.path().join("sweep.json");
    fs::write(
        &config,
        format!(
            r#"{{
  "command": "hesi",
  "system": "{}",
  "beta": [0.25, 0.5, 1.0],
  "seed": 3,
  "out": "{}"
}}"#,
            sys.display(),
            out.display()
        ),
    )
    .unwrap();
    let (code, _, err) = run(&["run", config.to_str().unwrap()]);
    assert_eq!(code, 0, "stderr: {err}");
    let csv = fs::read_to_string(out.join("hesi_report.csv")).unwrap();
    assert_eq!(csv.split("\r\n").count(), 5, "header, three rows, terminator");

    let betas: Vec<String> = (0..10_001).map(|i| format!("{}", 0.1 + i as f64 * 1e-4)).collect();
    let capped = tmp.path().join("capped.json");
    fs::write(
        &capped,
        format!(
            r#"{{"command": "hesi", "system": "{}", "beta": [{}], "out": "{}"}}"#,
            sys.display(),
            betas.join(", "),
            out.display()
        ),
    )
    .unwrap();
    let (code, _, err) = run(&["run", capped.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("over the cap"), "stderr was: {err}");

    let unknown = tmp.path().join("unknown.json");
    fs::write(
        &unknown,
        r#"{"command": "frobnicate", "out": "."}"#,
    )
    .unwrap();
    let (code, _, err) = run(&["run", unknown.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("frobnicate"), "stderr was: {err}");
}

#[test]
fn config_rejects_unknown_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = stable_system(tmp.path());
    let config = tmp.path().join("typo.json");
    fs::write(
        &config,
        format!(
            r#"{{"command": "hesi", "system": "{}", "betaa": [1.0]}}"#,
            sys.display()
        ),
    )
    .unwrap();
    let (code, _, err) = run(&["run", config.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("betaa") || err.contains("unknown field"), "stderr was: {err}");
}

#[test]
fn jobs_env_overrides_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = stable_system(tmp.path());
    let out = tmp.path().join("rep");
    let (code, _, err) = run_env(
        &[
            "hesi",
            "--system",
            sys.to_str().unwrap(),
            "--jobs",
            "64",
            "--out",
            out.to_str().unwrap(),
        ],
        &[("HESILAB_JOBS", "1")],
    );
    assert_eq!(code, 0, "stderr: {err}");
}

#[test]
fn verify_report_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["v1", "v2"] {
        let out = tmp.path().join(name);
        let (code, _, err) = run(&[
            "verify",
            "--all",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "stderr: {err}");
        reports.push(fs::read(out.join("verify_report.txt")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports[0].clone()).unwrap();
    assert!(text.contains("200/200 cases passed"), "report was: {text}");
    assert!(text.contains("overall: all suites passed"));
}
