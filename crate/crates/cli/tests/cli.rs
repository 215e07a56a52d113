use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaintorque")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn gm(name: &str) -> String {
    data(name).display().to_string()
}

fn exact(v: &Value) -> &str {
    v["exact"].as_str().unwrap()
}

#[test]
fn analyze_rose() {
    let out = run(&["analyze", &gm("plastic.gm")]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(exact(&v["eg_set"][0]), "1");
    let lambda = v["strata"][0]["lambda"]["approx"].as_f64().unwrap();
    assert!((lambda - 1.3247180).abs() < 1e-7);
    assert_eq!(v["phi"][2], "x1 x2");
    assert_eq!(v["marking"][0]["loop"], "a");
}

#[test]
fn analyze_identity_has_no_eg_strata() {
    let dir = std::env::temp_dir().join(format!("ct-id-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("id.gm");
    std::fs::write(&f, "graph id\nvertex * v\nedge a * v\nedge b * v\nedge c * v\nbasepoint *\ntree a\nvmap * -> *\nvmap v -> v\nemap a -> a\nemap b -> b\nemap c -> c\n").unwrap();
    let v = json(&run(&["analyze", f.to_str().unwrap()]));
    assert_eq!(v["eg_set"], Value::Array(vec![]));
}

#[test]
fn malformed_input_exits_two_with_line() {
    let dir = std::env::temp_dir().join(format!("ct-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("bad.gm");
    std::fs::write(&f, "graph bad\nvertex *\nedge a * nowhere\n").unwrap();
    let out = run(&["analyze", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(run(&["analyze", "/nonexistent.gm"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", &gm("plastic.gm"), "--bogus"]).status.code(), Some(2));
}

#[test]
fn nielsen_verdicts() {
    let out = run(&["nielsen", &gm("theta.gm"), "--v", "x1 x2 x1^-1 x2^-1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["certificate"]["verdict"]["kind"], "geometric");
    assert_eq!(exact(&v["certificate"]["verdict"]["d"]), "6");
    let out = run(&["nielsen", &gm("rose3.gm"), "--v", "x1 x1 x2 x3 x2^-1 x3^-1"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["nielsen", &gm("plastic.gm"), "--v", "x1 x2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["certificate"]["endpoints_fixed"], false);
}

#[test]
fn trho_ball_and_dot() {
    let dot = std::env::temp_dir().join(format!("ct-trho-{}.dot", std::process::id()));
    let out = run(&["trho", &gm("theta.gm"), "--rho", &gm("theta_commutator.chain"), "--radius", "1", "--dot", dot.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 7);
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("graph trho {"));
    let v = json(&run(&["trho", &gm("rose3.gm"), "--v", "x1 x1 x2 x3 x2^-1 x3^-1", "--radius", "1"]));
    assert_eq!(v["vertices"].as_array().unwrap().len(), 7);
    assert_eq!(v["edges"].as_array().unwrap().len(), 6);
    let v = json(&run(&["trho", &gm("theta.gm"), "--rho", &gm("theta_commutator.chain"), "--radius", "0"]));
    assert_eq!(v["vertices"].as_array().unwrap().len(), 1);
    let out = run(&["trho", &gm("rose3.gm"), "--v", "x2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn torsion_reports() {
    let v = json(&run(&["torsion", &gm("poly.gm")]));
    assert_eq!(exact(&v["total"]), "0");
    let out = run(&["torsion", &gm("plastic.gm"), "--terms", "100"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["total"]["approx"].as_f64().unwrap() > 0.0);
    assert_eq!(v["partial_sum_tails"][0]["tail"].as_array().unwrap().len(), 10);
    let v = json(&run(&["torsion", &gm("swap.gm"), "--stabilize", "--terms", "6"]));
    assert_eq!(exact(&v["k"]), "2");
}

#[test]
fn missing_inverse_images_exit_three() {
    let dir = std::env::temp_dir().join(format!("ct-inv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("noinv.gm");
    let text = std::fs::read_to_string(data("plastic.gm")).unwrap();
    let stripped: String = text.lines().filter(|l| !l.starts_with("invimages")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&f, stripped).unwrap();
    let out = run(&["torsion", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invimages"));
}

#[test]
fn det_and_moments_accept_both_formats() {
    let v = json(&run(&["det", &gm("t_minus_2.rm"), "--terms", "200"]));
    assert!((v["estimate"]["approx"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-3);
    let v = json(&run(&["moments", &gm("plastic.gm")]));
    let m: Vec<&str> = v["moments"].as_array().unwrap().iter().map(exact).collect();
    assert_eq!(m, ["3", "0", "0", "0", "0", "0", "0"]);
    let v = json(&run(&["det", &gm("plastic.gm"), "--terms", "10"]));
    let from_rm = json(&run(&["det", &gm("plastic_L.rm"), "--terms", "10"]));
    assert_eq!(v["partial_sums"], from_rm["partial_sums"]);
}

#[test]
fn jacobian_round_trips_through_rm() {
    let dir = std::env::temp_dir().join(format!("ct-jac-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::copy(data("plastic.gm"), dir.join("plastic.gm")).unwrap();
    let rm = dir.join("l.rm");
    let out = run(&["jacobian", dir.join("plastic.gm").to_str().unwrap(), "--shift", "--rm", rm.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&rm).unwrap();
    assert!(text.starts_with("context fbc plastic.gm\n"));
    let v = json(&run(&["moments", rm.to_str().unwrap(), "--kmax", "3"]));
    let m: Vec<&str> = v["moments"].as_array().unwrap().iter().map(exact).collect();
    assert_eq!(m, ["3", "0", "0", "0"]);
}

#[test]
fn flare_scan_planted_and_jobs() {
    let a = run(&["flare-scan", &gm("planted.gm"), "--budget", "20000"]);
    let b = run(&["--jobs", "1", "flare-scan", &gm("planted.gm"), "--budget", "20000"]);
    let c = Command::new(env!("CARGO_BIN_EXE_chaintorque"))
        .env("CHAINTORQUE_JOBS", "2")
        .args(["flare-scan", &gm("planted.gm"), "--budget", "20000"])
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let v = json(&a);
    assert!(v["lambda_min"]["approx"].as_f64().unwrap() <= 1.0);
    assert_eq!(v["witness_verified"], true);
    let out = run(&["flare-scan", &gm("planted.gm"), "--budget", "20000", "--lambda", "1.1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_is_byte_identical() {
    let a = run(&["analyze", &gm("theta.gm")]);
    let b = run(&["analyze", &gm("theta.gm")]);
    assert_eq!(a.stdout, b.stdout);
}
