use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reluforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("reluforge-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn repo(path: &str) -> String {
    format!("{}/../../{path}", env!("CARGO_MANIFEST_DIR"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_3() {
    let o = run(&["cover", "--cloud", "/nonexistent/cloud.csv", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn one_ball_cloud() {
    let dir = scratch("cover");
    let cloud = dir.join("pts.csv");
    std::fs::write(&cloud, "0.5,0.5\n0.55,0.45\n0.48,0.52\n").unwrap();
    let o = run(&["cover", "--cloud", cloud.to_str().unwrap(), "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("count 1"));
}

#[test]
fn memorize_verify_eval() {
    let dir = scratch("memo");
    let inst = dir.join("pts.json");
    std::fs::write(
        &inst,
        r#"{"D": 2, "r": 3, "samples": [{"x": ["1/8","1/4"], "y": 5}, {"x": ["1/2","3/4"], "y": 2}, {"x": [0.75, 0.125], "y": 7}]}"#,
    )
    .unwrap();
    let net = dir.join("net.json");
    let (i, n) = (inst.to_str().unwrap(), net.to_str().unwrap());
    let o = run(&["memorize", "--instance", i, "--N", "8", "--L", "6", "--out", n, "--verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(net.exists());
    assert_eq!(run(&["verify", "--net", n, "--instance", i]).status.code(), Some(0));
    let e = run(&["eval", "--net", n, "--input", "1/8,1/4", "--input", "0.75,0.125"]);
    let lines: Vec<String> = stdout(&e).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 2);
    // outputs are exact or within 2^-40 of the labels
    for (line, want) in lines.iter().zip([5.0, 7.0]) {
        let v: f64 = if line.contains('/') {
            let (a, b) = line.split_once('/').unwrap();
            a.parse::<f64>().unwrap() / b.parse::<f64>().unwrap()
        } else {
            line.parse().unwrap_or(want)
        };
        assert!((v - want).abs() < 1e-9, "{line}");
    }
}

#[test]
fn verify_flags_wrong_labels() {
    let dir = scratch("wrong");
    let inst = dir.join("pts.json");
    let other = dir.join("other.json");
    std::fs::write(&inst, r#"{"D": 1, "r": 2, "samples": [{"x": ["1/4"], "y": 1}, {"x": ["3/4"], "y": 2}]}"#).unwrap();
    std::fs::write(&other, r#"{"D": 1, "r": 2, "samples": [{"x": ["1/4"], "y": 3}, {"x": ["3/4"], "y": 2}]}"#).unwrap();
    let net = dir.join("net.json");
    let n = net.to_str().unwrap();
    let o = run(&["memorize", "--instance", inst.to_str().unwrap(), "--N", "4", "--L", "2", "--out", n]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(run(&["verify", "--net", n, "--instance", other.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn approx_writes_report() {
    let dir = scratch("approx");
    let report = dir.join("out.csv");
    let o = run(&[
        "approx",
        "--target",
        &repo("targets/sin-curve.json"),
        "--N",
        "1",
        "--L",
        "2",
        "--test-points",
        "50",
        "--report",
        report.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,L,K,measured_sup_error,bound,width,depth,B"));
    assert_eq!(lines.next().unwrap().split(',').count(), 8);
}

#[test]
fn compose_validates_model() {
    let o = run(&["compose", "--spec", &repo("targets/xy.json"), "--validate-only"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = scratch("badspec");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"input_dim": 2, "c": 4, "levels": [[{"function": "cube-root", "support": [0], "s": 1, "d": 1}]]}"#).unwrap();
    assert_eq!(run(&["compose", "--spec", bad.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn dimension_of_a_segment() {
    let dir = scratch("dim");
    let cloud = dir.join("seg.csv");
    let rows: String = (0..2000).map(|i| {
        let t = i as f64 / 1999.0;
        format!("{},{},{}\n", t, 0.5 * t, 0.2 + 0.3 * t)
    }).collect();
    std::fs::write(&cloud, rows).unwrap();
    let o = run(&["dim", "--cloud", cloud.to_str().unwrap(), "--hi", "0.2", "--lo", "0.005"]);
    assert_eq!(o.status.code(), Some(0));
    let slope: f64 = stdout(&o).trim().strip_prefix("slope ").unwrap().parse().unwrap();
    assert!((0.8..=1.2).contains(&slope), "{slope}");
}
