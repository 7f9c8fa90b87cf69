use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixdeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fixdeg")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = fixdeg(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fixdeg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Composite Simpson on [0, 1].
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn isolated_plane_is_nowhere_strongly_regular() {
    let v = json(&["regularity", "--catalog", "isolated-plane"]);
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 25);
    for p in pts {
        assert_eq!(p["flag"], false);
        assert_eq!(p["rank"], 1);
        assert_eq!(p["ell"], 3);
    }
}

#[test]
fn engel_graph_area_against_one_dimensional_integral() {
    let v = json(&["area", "--catalog", "engel-graph:theta=x", "--degree", "4", "--grid", "64x64"]);
    assert_eq!(v["d"], 4);
    assert_eq!(v["grid"], "64x64");
    assert_eq!(v["metric"], "frame-orthonormal");
    // κ = cos x, X_1(κ) = −sin x cos x
    let oracle = simpson(|x| (1.0 + (x.sin() * x.cos()).powi(2)).sqrt(), 2000);
    let a = v["value"].as_f64().unwrap();
    assert!((a - oracle).abs() < 1e-10, "{} vs {}", a, oracle);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["mean-curvature", "--catalog", "engel-graph:theta=0.3*x+y^2", "--grid", "3", "--degree", "4"];
    assert_eq!(fixdeg(&args).stdout, fixdeg(&args).stdout);
    let args = ["verify", "--catalog", "engel-graph", "--format", "json", "--seed", "7"];
    assert_eq!(fixdeg(&args).stdout, fixdeg(&args).stdout);
}

#[test]
fn verify_passes_and_reports_deviations() {
    let out = fixdeg(&["verify", "--catalog", "all"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0 failed"));
    assert!(text.contains("DEVIATION"));
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn spec_errors_name_the_field() {
    let m = scratch(
        "bad-manifold.json",
        r#"{"coordinates":["x","y","t"],"frame":[{"degree":1,"components":["1","0","-y/2"]},
            {"degree":1,"components":["0","1","x/+"]},{"degree":2,"components":["0","0","1"]}]}"#,
    );
    let out = fixdeg(&["degree-scan", "--manifold", m.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("frame[1].components[2]"));
    let out = fixdeg(&["area", "--catalog", "engel-graph:phi=x"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("phi"));
    let out = fixdeg(&["area", "--catalog", "rt-graph", "--grid", "4x4x4"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--grid"));
}

#[test]
fn file_inputs_and_fd_check() {
    let m = scratch(
        "heis.json",
        r#"{"coordinates":["x","y","t"],"frame":[{"degree":1,"components":["1","0","-y/2"]},
            {"degree":1,"components":["0","1","x/2"]},{"degree":2,"components":["0","0","1"]}]}"#,
    );
    let i = scratch("surf.json", r#"{"params":["x","y"],"components":["x","y","0.3*x*y + 0.1*y^2"],"domain":[[0,1],[0,1]]}"#);
    let f = scratch("field.json", r#"{"frame":"coordinates","components":["0","0","(x*(1-x)*y*(1-y))^2*(1+x)"]}"#);
    let (m, i, f) = (m.to_str().unwrap(), i.to_str().unwrap(), f.to_str().unwrap());
    let v = json(&["first-variation", "--manifold", m, "--immersion", i, "--field", f, "--fd-check", "--grid", "16"]);
    assert_eq!(v["d"], 3);
    assert_eq!(v["fd_check"]["pass"], true);
    assert!(v["first_variation"].as_f64().unwrap().abs() > 1e-6);
    let scan = json(&["degree-scan", "--manifold", m, "--immersion", i, "--grid", "5"]);
    assert_eq!(scan["degree"], 3);
}

#[test]
fn gr_limit_emits_csv_table() {
    let out = fixdeg(&["gr-limit", "--catalog", "rt-graph", "--degree", "3", "--grid", "12", "--r-seq", "1e-1,1e-2,1e-3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,v");
    assert_eq!(lines.len(), 4);
    let last: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    let oracle = simpson(|x| (1.0 + x.cos().powi(2)).sqrt(), 2000);
    assert!((last - oracle).abs() < 1e-2);
}

#[test]
fn el_residual_requires_an_engel_graph() {
    let out = fixdeg(&["el-residual", "--catalog", "rt-graph"]);
    assert!(!out.status.success());
    let v = json(&["el-residual", "--catalog", "engel-graph:theta=0.2*x+0.1*y", "--grid", "2"]);
    assert_eq!(v["points"].as_array().unwrap().len(), 4);
}
