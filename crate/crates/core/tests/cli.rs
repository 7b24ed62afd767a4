use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invspec"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("invspec-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn error_json(o: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&o.stderr);
    let last = line.lines().last().expect("stderr has a report");
    serde_json::from_str(last).expect("error report is JSON")
}

fn eigenvalues(json: &[u8]) -> Vec<(f64, f64)> {
    let v: serde_json::Value = serde_json::from_slice(json).unwrap();
    v["eigenvalues"].as_array().unwrap().iter().map(|e| (e["re"].as_f64().unwrap(), e["im"].as_f64().unwrap())).collect()
}

#[test]
fn forward_zero_problem_lists_four_eigenvalues() {
    let zero = data("zero.json");
    let o = run(&["forward", "--problem", zero.to_str().unwrap(), "--variant", "L", "--region", "-50", "50", "-1", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ev = eigenvalues(&o.stdout);
    let pi2 = std::f64::consts::PI.powi(2);
    let want = [-4.0 * pi2, -pi2, pi2 / 4.0, 9.0 * pi2 / 4.0];
    assert_eq!(ev.len(), 4);
    for ((re, im), w) in ev.iter().zip(want) {
        assert!((re - w).abs() < 1e-8 * w.abs() && im.abs() < 1e-8, "{re} vs {w}");
    }
}

#[test]
fn forward_oracle_agrees_for_l12() {
    let zero = data("zero.json");
    let o = run(&["forward", "--problem", zero.to_str().unwrap(), "--variant", "L12", "--first", "6", "--oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let diff: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diff[0]["variant"], "L12");
    assert_eq!(diff[0]["pass"], true);
    assert!(eigenvalues(&o.stdout).len() >= 6);
}

#[test]
fn oracle_refuses_nonzero_potential() {
    let o = run(&["forward", "--problem", data("linear.json").to_str().unwrap(), "--first", "3", "--oracle"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_json_exits_one_with_report() {
    let d = scratch("bad");
    let bad = d.join("bad.json");
    std::fs::write(&bad, "{ \"alpha\": ").unwrap();
    let o = run(&["forward", "--problem", bad.to_str().unwrap(), "--first", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert_eq!(e["exit_code"], 1);
    assert!(e["message"].as_str().unwrap().contains("problem file"));
}

#[test]
fn inadmissible_alpha_exits_two() {
    let d = scratch("adm");
    let f = d.join("p.json");
    std::fs::write(&f, r#"{"alpha":{"re":-1.5,"im":0},"p":{"type":"poly","coeffs":[]},"q":{"type":"poly","coeffs":[]}}"#)
        .unwrap();
    let o = run(&["forward", "--problem", f.to_str().unwrap(), "--first", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "AdmissibilityError");
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let zero = data("zero.json");
    let z = zero.to_str().unwrap();
    assert_eq!(run(&["verify", "--suite", "nonsense", "--problem", z]).status.code(), Some(1));
    assert_eq!(run(&["forward", "--problem", z]).status.code(), Some(1));
    assert_eq!(run(&["forward", "--problem", z, "--region", "1", "0", "0", "1"]).status.code(), Some(1));
    assert_eq!(run(&["forward", "--problem", z, "--first", "2", "--out", "/nonexistent/dir/x.json"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_suites_pass_on_sample_problems() {
    let rp = data("randpoly.json");
    let zero = data("zero.json");
    for (suite, prob, extra) in [
        ("wronskian", &rp, vec![]),
        ("cramer", &rp, vec![]),
        ("asymptotics", &zero, vec!["--ray", "0"]),
    ] {
        let mut args = vec!["verify", "--suite", suite, "--problem", prob.to_str().unwrap()];
        args.extend(extra);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", String::from_utf8_lossy(&o.stdout));
        let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(r["suite"], suite);
        assert_eq!(r["pass"], true);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let d = scratch("det");
    let rp = data("randpoly.json");
    let mut outs = vec![];
    for k in 0..2 {
        let f = d.join(format!("s{k}.json"));
        let o = run(&["forward", "--problem", rp.to_str().unwrap(), "--first", "8", "--out", f.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        outs.push(std::fs::read(&f).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let seq = run(&["--sequential", "forward", "--problem", rp.to_str().unwrap(), "--first", "8"]);
    assert_eq!(seq.stdout, outs[0].iter().chain(b"\n").copied().collect::<Vec<u8>>());
}

#[test]
fn invert_reports_nonconvergence_with_exit_four() {
    let d = scratch("inv");
    // constants cannot fit a linear potential
    let lin = data("linear.json");
    let z = lin.to_str().unwrap();
    let spec = d.join("spec");
    let o = run(&["forward", "--problem", z, "--variant", "L", "--variant", "L11", "--first", "6", "--out", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = d.join("fit.json");
    std::fs::write(&cfg, r#"{"basis":"poly:0","N":6,"starts":1,"seed":1,"mode":"eigen","max_iter":1,"tol_fit":1e-300,"start_scale":0.5}"#)
        .unwrap();
    let rep = d.join("rep.json");
    let s = |v: &str| spec.join(format!("{v}.json")).to_str().unwrap().to_string();
    let o = run(&[
        "invert", "--spectrum", &s("L"), "--spectrum", &s("L11"), "--config", cfg.to_str().unwrap(), "--alpha", "0", "0",
        "--out", rep.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert_eq!(r["converged"], false);
    assert_eq!(error_json(&o)["error"], "ConvergenceError");
}

#[test]
fn reduce_and_weyl_write_csv_tables() {
    let d = scratch("csv");
    let rp = data("randpoly.json");
    let out = d.join("fo.csv");
    let o = run(&["reduce", "--problem", rp.to_str().unwrap(), "--form", "firstorder", "--grid", "33", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap().trim_start_matches("# ")).unwrap();
    assert!(header.get("lambda_star").is_some());
    assert!(lines.next().unwrap().starts_with("x,u11_re"));
    assert_eq!(lines.count(), 33);

    let csv = d.join("w.csv");
    let o = run(&["weyl", "--problem", rp.to_str().unwrap(), "--lambda", "3", "-2", "--grid", "9", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["relative_discrepancy"].as_f64().unwrap() < 1e-8);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 10);
}

#[test]
fn charscan_and_reconstruct_emit_tables() {
    let d = scratch("rec");
    let zero = data("zero.json");
    let z = zero.to_str().unwrap();
    let o = run(&["charscan", "--problem", z, "--region", "-10", "10", "0", "0", "--points", "3", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // Delta(0) = -1 for the free problem
    assert!((row[2] + 1.0).abs() < 1e-12);

    let spec = d.join("L.json");
    assert_eq!(run(&["forward", "--problem", z, "--first", "40", "--out", spec.to_str().unwrap()]).status.code(), Some(0));
    let out = d.join("rec");
    let o = run(&[
        "reconstruct", "--spectrum", spec.to_str().unwrap(), "--alpha", "0", "0", "--region", "-20", "20", "0", "0", "--points",
        "5", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let k: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("constants.json")).unwrap()).unwrap();
    let c = &k[0]["constant"];
    assert!((c["re"].as_f64().unwrap() + 1.0).abs() < 1e-2);
    assert_eq!(k[0]["ray_limits"].as_array().unwrap().len(), 4);
    assert_eq!(std::fs::read_to_string(out.join("L_scan.csv")).unwrap().lines().count(), 6);
}
