use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kernelwave")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// `(re, im)` columns of a kernel CSV.
fn values(csv: &str) -> Vec<(f64, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[6].parse().unwrap(), f[7].parse().unwrap())
        })
        .collect()
}

#[test]
fn eval_from_flags() {
    let o = run(&["eval", "--kernel", "sine-ext", "--tau1", "0", "--tau2", "0", "--u", "0.5", "--v", "0"]);
    assert!(o.status.success());
    let v = values(&stdout(&o));
    assert!((v[0].0 - 2.0 / PI).abs() < 1e-14);

    let o = run(&["eval", "--kernel", "s1", "--u", "1", "--v", "1", "--tau1", "0", "--tau2", "0"]);
    assert!((values(&stdout(&o))[0].0 - 1.0 / PI).abs() < 1e-15);

    let o = run(&["eval", "--kernel", "transition-a", "--a", "1.5", "--u=-0.2", "--format", "json"]);
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(rec["query"]["a_param"], 1.5);
    assert_eq!(rec["result"]["converged"], true);
}

#[test]
fn malformed_input_exits_one() {
    assert_eq!(run(&["eval", "--kernel", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["eval", "--kernel", "transition-a"]).status.code(), Some(1));
    assert_eq!(run(&["eval"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"kernel\": \"s1\", \"tau1\": 0}\n").unwrap();
    let o = run(&["eval", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn starved_quadrature_is_an_accuracy_warning() {
    let o = run(&["eval", "--kernel", "airy-ext", "--u=-0.3", "--max-depth", "1", "--rel-tol", "1e-15", "--abs-tol", "1e-300", "--nodes", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(values(&stdout(&o)).len(), 1);
}

#[test]
fn batch_keeps_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("q.jsonl");
    let mut text = String::new();
    for k in 0..100 {
        let u = -1.0 + 0.02 * k as f64;
        text.push_str(&format!("{{\"kernel\": \"s2\", \"tau1\": 0.1, \"tau2\": -0.2, \"u\": {u}, \"v\": 0.3}}\n"));
    }
    std::fs::write(&input, text).unwrap();
    let out = dir.path().join("out.csv");
    let o = run(&["eval", "-i", input.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 100);
    for (k, r) in rows.iter().enumerate() {
        let u: f64 = r.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(u, -1.0 + 0.02 * k as f64);
    }
}

fn sweep_to(path: &Path, seed: &str) -> Output {
    run(&[
        "sweep", "--kernel", "pearcey-ext", "--tau1=-0.5:0.5:3", "--tau2", "0.2", "--u=-1:1:7", "--v=-1:1:7",
        "--random", "12", "--seed", seed, "-o", path.to_str().unwrap(),
    ])
}

#[test]
fn random_sweeps_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    assert!(sweep_to(&a, "7").status.success());
    assert!(sweep_to(&b, "7").status.success());
    assert!(sweep_to(&c, "8").status.success());
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sweep_output_feeds_back_into_eval() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let o = run(&[
        "sweep", "--kernel", "transition-a", "--a", "0.75", "--tau1", "0.1", "--tau2=-0.3", "--u=-0.6:0.6:4", "--v=-0.4:0.5:3",
        "-o", grid.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = dir.path().join("again.csv");
    let o = run(&["eval", "--input", grid.to_str().unwrap(), "--output", again.to_str().unwrap()]);
    assert!(o.status.success());
    let first = values(&std::fs::read_to_string(&grid).unwrap());
    let second = values(&std::fs::read_to_string(&again).unwrap());
    assert_eq!(first.len(), 12);
    assert_eq!(first.len(), second.len());
    for (x, y) in first.iter().zip(&second) {
        assert!((x.0 - y.0).abs() <= 1e-12 && (x.1 - y.1).abs() <= 1e-12);
    }
}

#[test]
fn coefficient_dump() {
    let o = run(&["coeffs", "--transition", "airy-to-s1", "--point", "0,0,0,0", "--order", "4", "--moments"]);
    assert!(o.status.success());
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let b10 = &j["b"][1][0];
    assert!(b10[0].as_f64().unwrap().abs() < 1e-15);
    assert!((b10[1].as_f64().unwrap() + 1.0 / 6.0).abs() < 1e-14);
    assert!((j["moments"]["c"][0].as_f64().unwrap() - PI.sqrt()).abs() < 1e-14);
}

#[test]
fn level_curve_through_the_upper_saddle() {
    let o = run(&["trace", "--phase", "airy", "--level", "upper"]);
    assert!(o.status.success());
    let near = stdout(&o)
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace().map(|t| t.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .any(|(x, y)| x.hypot(y - 1.0) < 0.03);
    assert!(near);

    let o = run(&["trace", "--phase", "pearcey", "--level", "real", "--paths", "--format", "json"]);
    let paths: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(paths.as_array().unwrap().len(), 4);
}

#[test]
fn expansion_rows() {
    let o = run(&["expand", "--transition", "pearcey", "--point", "0.2,-0.1,0,0", "--a", "5,8", "--terms", "2", "--compare"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "transition,u,v,tau1,tau2,N,a,value,lhs,residual");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').skip(5).map(|t| t.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 6);
    // At each a the residual shrinks from N = 0 to N = 2.
    for chunk in rows.chunks(3) {
        assert!(chunk[2][4] < chunk[0][4]);
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# shared settings\nkernel = s1\nu = 1\nv = 1\nrel_tol = 1e-12\ntransition = airy\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = run(&["eval", "--config", c]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((values(&stdout(&o))[0].0 - 1.0 / PI).abs() < 1e-15);
    let o = run(&["--config", c, "eval", "--kernel", "sine-ext", "--u", "0.5", "--v", "0"]);
    assert!((values(&stdout(&o))[0].0 - 2.0 / PI).abs() < 1e-14);
    std::fs::write(&cfg, "not a pair\n").unwrap();
    assert_eq!(run(&["eval", "--config", c]).status.code(), Some(1));
}

#[test]
fn verify_check_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, summary) = (dir.path().join("res.csv"), dir.path().join("summary.json"));
    let o = run(&[
        "verify", "--transition", "airy", "--check", "-o", csv.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("transition,u,v,tau1,tau2,N,a,residual\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 3 * 7);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s["pass"], true);
    assert_eq!(s["summaries"].as_array().unwrap().len(), 3);
    assert_eq!(run(&["verify", "--a", "5,4,6"]).status.code(), Some(1));
}
