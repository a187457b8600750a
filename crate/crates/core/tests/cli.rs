use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn mesocov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mesocov")).args(args).env_remove("MESOCOV_SEED").output().unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn predict_reports_leading_conjugate_term() {
    let out = mesocov(&["predict", "--beta", "1", "--N", "400", "--E", "0", "--omega", "0.1", "--eta", "0.01", "--goe"]);
    assert!(out.status.success());
    let rec = &json_lines(&out)[0];
    assert_eq!(rec["schema_version"], 1);
    assert_eq!(rec["subcommand"], "predict");
    assert!(rec["build_id"].as_str().is_some_and(|s| !s.is_empty()));
    let terms = rec["results"][0]["prediction"]["terms"].as_array().unwrap();
    let leading = terms.iter().find(|t| t["label"] == "leading").unwrap();
    // −2/(N² (z1 − z̄2)²) with z1 − z̄2 = −0.1 + 0.02i.
    let (dr, di) = (-0.1f64, 0.02f64);
    let (sr, si) = (dr * dr - di * di, 2.0 * dr * di);
    let norm = sr * sr + si * si;
    let scale = -2.0 / 160_000.0;
    let (re, im) = (scale * sr / norm, -scale * si / norm);
    assert!((leading["re"].as_f64().unwrap() - re).abs() < 1e-12);
    assert!((leading["im"].as_f64().unwrap() - im).abs() < 1e-12);
    assert!((re + 1.109e-3).abs() < 1e-6 && (im + 4.62e-4).abs() < 1e-6);
}

#[test]
fn bad_arguments_exit_with_config_status() {
    assert_eq!(mesocov(&["predict", "--goe", "--beta", "2"]).status.code(), Some(2));
    assert_eq!(mesocov(&["predict", "--eta", "-1"]).status.code(), Some(2));
    assert_eq!(mesocov(&["simulate", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
    assert_eq!(mesocov(&["predict", "--E", "0", "--omega", "0.1", "--eta", "0.2", "--quantity", "linstat"]).status.code(), Some(2));
}

#[test]
fn kernel_writes_csv() {
    let out = mesocov(&["kernel", "--from", "0", "--to", "2", "--step", "0.5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "u,s,Y1,Y2,Y1_avg_asym");
    assert_eq!(lines.len(), 6);
    let row: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
    // u = 1: s = sin(π)/π ≈ 0 and Y2 = −s².
    assert_eq!(row[0], 1.0);
    assert!(row[1].abs() < 1e-15 && row[3].abs() < 1e-30);
}

#[test]
fn formal_reads_stdin_line_by_line() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mesocov"))
        .args(["formal", "--alpha", "0.5", "--beta-exp", "0.5"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let input = "# comment\nN^{α+1} E[u(G,3)] E[u(B*,4)] E[e(A,2,i1,i2) e(B,2,i3,i3) e(A,2,i2,i4)] E[e(A,1,i6,i1) e(B,1,i5,i6) au(A,7)]\n\nN^0 E[u(G,1)]\n";
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let recs = json_lines(&out);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["line"], 2);
    assert_eq!(recs[0]["report"]["nu"], serde_json::json!([5, 9, 2, 1, 2, 3]));
    assert_eq!(recs[0]["report"]["b0"], 6.25);
    assert_eq!(recs[1]["line"], 4);
}

#[test]
fn formal_parse_error_is_reported_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "N^1 E[u(G,1)]\nN^1 E[u(G,1)\n").unwrap();
    let out = mesocov(&["formal", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let recs = json_lines(&out);
    assert_eq!(recs[1]["error"]["line"], 1);
    assert!(recs[1]["error"]["column"].as_u64().unwrap() > 10);
}

#[test]
fn simulate_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"spec":{"beta":1,"N":40,"offdiag":{"family":"gaussian"},"diag":{"family":"gaussian"}},
            "n_samples":1600,"batch_count":20,"master_seed":5,
            "observables":[{"kind":"mean_stieltjes","z_re":0.3,"z_im":0.5},
                           {"kind":"poly_linstat_variance","coeffs":[0,1]}]}"#,
    )
    .unwrap();
    let sim = dir.path().join("sim.jsonl");
    let out = mesocov(&["simulate", "--config", cfg.to_str().unwrap(), "--out", sim.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&sim).unwrap();
    let recs: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 21);
    assert!(recs[..20].iter().all(|r| r["record"] == "progress"));
    assert_eq!(recs[20]["record"], "final");
    assert_eq!(recs[20]["config"]["master_seed"], 5);

    let pred = dir.path().join("pred.json");
    let p = mesocov(&["predict", "--config", cfg.to_str().unwrap()]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    std::fs::write(&pred, &p.stdout).unwrap();
    let c = mesocov(&["compare", "--simulation", sim.to_str().unwrap(), "--prediction", pred.to_str().unwrap()]);
    let rec = &json_lines(&c)[0];
    assert_eq!(rec["results"]["entries"].as_array().unwrap().len(), 2);
    assert_eq!(c.status.code(), Some(if rec["results"]["verdict"] == "PASS" { 0 } else { 1 }));

    // An impossible threshold together with a tampered prediction must fail.
    let mut tampered: Value = serde_json::from_slice(&p.stdout).unwrap();
    tampered["results"][1]["prediction"]["terms"][0]["re"] = Value::from(50.0);
    tampered["results"][1]["prediction"]["error_bound"] = Value::from(0.0);
    std::fs::write(&pred, tampered.to_string()).unwrap();
    let c = mesocov(&["compare", "--simulation", sim.to_str().unwrap(), "--prediction", pred.to_str().unwrap(), "--threshold", "0"]);
    assert_eq!(c.status.code(), Some(1));
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"spec":{"beta":2,"N":10,"offdiag":{"family":"gaussian"},"diag":{"family":"gaussian"}},
            "n_samples":800,"batch_count":20,"master_seed":1,
            "observables":[{"kind":"mean_stieltjes","z_re":0.0,"z_im":0.5}]}"#,
    )
    .unwrap();
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mesocov"));
        cmd.args(["simulate", "--config", cfg.to_str().unwrap()]).env_remove("MESOCOV_SEED");
        if let Some(s) = seed {
            cmd.env("MESOCOV_SEED", s);
        }
        let out = cmd.output().unwrap();
        let last = json_lines(&out).pop().unwrap_or(Value::Null);
        (out.status.code(), last["config"]["master_seed"].clone(), last["results"]["estimates"][0]["estimate"]["re"].clone())
    };
    let (code, seed, a) = run(None);
    assert_eq!((code, seed), (Some(0), Value::from(1)));
    let (_, seed, b) = run(Some("99"));
    assert_eq!(seed, Value::from(99));
    assert_ne!(a, b);
    assert_eq!(run(Some("not-a-seed")).0, Some(2));
}

#[test]
fn selftest_passes() {
    let out = mesocov(&["selftest", "--json"]);
    assert!(out.status.success());
    let rec = &json_lines(&out)[0];
    assert_eq!(rec["results"]["verdict"], "PASS");
    assert!(rec["results"]["checks"].as_array().unwrap().len() >= 10);
}
