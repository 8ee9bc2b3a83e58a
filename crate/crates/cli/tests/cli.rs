use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn robzero(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robzero"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run robzero")
}

fn ok(args: &[&str]) -> String {
    let out = robzero(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn text_field(dims: &[u32], codomain: usize, alpha: f64, rows: &[String]) -> String {
    let grid: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    format!(
        "robf 1\ntopology cube\ndims {}\ngrid {}\ncodomain {codomain}\nalpha {alpha}\nnorm inf\ndata text\n{}\n",
        dims.len(),
        grid.join(" "),
        rows.join("\n")
    )
}

fn constant_field(dir: &TempDir, alpha: f64) -> PathBuf {
    let p = path(dir, "const.robf");
    let rows = vec!["1.0 0.0".to_string(); 16];
    std::fs::write(&p, text_field(&[4, 4], 2, alpha, &rows)).unwrap();
    p
}

fn report(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

#[test]
fn generated_quadratic_reproduces_table_persistence() {
    let dir = TempDir::new().unwrap();
    let q = path(&dir, "q.robf");
    ok(&["gen", "quadratic", "--n", "2", "--grid", "100", "--out", s(&q)]);
    for mode in ["--simplicial", "--cubical"] {
        let r = report(&["robustness", "--input", s(&q), mode]);
        assert_eq!(r["schema"], 1);
        assert_eq!(r["verdict"], "robust_zero");
        assert_eq!(format!("{:.4}", r["r1"].as_f64().unwrap()), "0.8285");
    }
}

#[test]
fn cubical_bounds_on_the_fine_grid() {
    let dir = TempDir::new().unwrap();
    let q = path(&dir, "q.robf");
    ok(&["gen", "quadratic", "--n", "2", "--grid", "500", "--out", s(&q)]);
    let r = report(&["robustness", "--input", s(&q), "--cubical"]);
    let lb = r["lower_bound"].as_f64().unwrap();
    let ub = r["upper_bound"].as_f64().unwrap();
    assert_eq!(format!("{:.2}", r["r1"].as_f64().unwrap()), "0.83");
    assert_eq!(format!("{lb:.3}"), "0.814");
    assert_eq!(format!("{ub:.3}"), "0.878");
    assert!(lb <= 0.828 && 0.828 <= ub);
}

#[test]
fn constant_field_has_no_zero() {
    let dir = TempDir::new().unwrap();
    let f = constant_field(&dir, 0.1);
    let r = report(&["robustness", "--input", s(&f)]);
    assert_eq!(r["verdict"], "no_guarantee_of_zero");
    assert_eq!(r["lower_bound"], "none");
    let robust = r["nonexistence_robustness"].as_f64().unwrap();
    assert!((robust - 0.9).abs() < 1e-12);
}

#[test]
fn hopf_secondary_is_reported_separately() {
    let dir = TempDir::new().unwrap();
    let h = path(&dir, "h.robf");
    ok(&["gen", "hopf", "--n", "3", "--grid", "10", "--out", s(&h)]);
    let r = report(&["robustness", "--input", s(&h), "--secondary"]);
    assert_eq!(r["depth"], "secondary");
    assert_eq!(r["r1"], "below_r0");
    assert_eq!(format!("{:.2}", r["r2"].as_f64().unwrap()), "0.79");
    let primary = report(&["robustness", "--input", s(&h), "--primary"]);
    assert_eq!(primary["r2"], "none");
    assert_eq!(primary["verdict"], "no_guarantee_of_zero");
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (path(&dir, "a"), path(&dir, "b"), path(&dir, "c"));
    for (p, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        ok(&[
            "gen", "gaussian", "--l", "3.0", "--grid", "6", "--seed", seed, "--out", s(p),
        ]);
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    ok(&["gen", "quadratic-random", "--grid", "5", "--seed", "1", "--out", s(&a)]);
    ok(&["gen", "quadratic-random", "--grid", "5", "--seed", "1", "--out", s(&b)]);
    assert_eq!(read(&a), read(&b));
}

#[test]
fn gaussian_file_is_valid() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "g.robf");
    ok(&[
        "gen", "gaussian", "--l", "3.0", "--grid", "30", "--dims", "4", "--codomain", "3",
        "--topology", "cube", "--seed", "7", "--out", s(&f),
    ]);
    let field = robzero::fields::load_field(&f).unwrap();
    assert_eq!(field.domain.vertex_count(), 30usize.pow(4));
    assert_eq!(field.domain.dims(), &[30, 30, 30, 30]);
    assert_eq!(field.n, 3);
    assert!(field.alpha > 0.0);
    assert!(field.values.iter().all(|v| v.is_finite()));
}

#[test]
fn text_and_binary_encodings_agree() {
    let dir = TempDir::new().unwrap();
    let (t, b) = (path(&dir, "t"), path(&dir, "b"));
    ok(&["gen", "hopf", "--n", "3", "--grid", "5", "--encoding", "text", "--out", s(&t)]);
    ok(&["gen", "hopf", "--n", "3", "--grid", "5", "--out", s(&b)]);
    assert!(std::fs::read_to_string(&t).unwrap().starts_with("robf 1"));
    let load = |p: &Path| robzero::fields::load_field(p).unwrap();
    assert_eq!(load(&t), load(&b));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "missing.robf");
    assert_eq!(robzero(&["robustness", "--input", s(&missing)]).status.code(), Some(1));

    let bad = path(&dir, "bad.robf");
    std::fs::write(&bad, "robf 1\n").unwrap();
    assert_eq!(robzero(&["robustness", "--input", s(&bad)]).status.code(), Some(1));

    let coarse = constant_field(&dir, 10.0);
    let out = robzero(&["robustness", "--input", s(&coarse), "--start", "lipschitz"]);
    assert_eq!(out.status.code(), Some(2));

    let f = constant_field(&dir, 0.1);
    let clash = robzero(&["robustness", "--input", s(&f), "--cubical", "--simplicial"]);
    assert_eq!(clash.status.code(), Some(1));
    assert_eq!(robzero(&["gen", "quadratic", "--n", "0", "--grid", "5", "--out", s(&bad)]).status.code(), Some(1));
}

#[test]
fn optimize_curve_in_one_dimension() {
    // f(x) = x on [-1, 1] with objective o(x) = x: OPT(r) = -r
    let dir = TempDir::new().unwrap();
    let g = 41;
    let xs: Vec<f64> = (0..g).map(|i| -1.0 + 2.0 * i as f64 / (g - 1) as f64).collect();
    let rows: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
    let alpha = 2.0 / (g - 1) as f64;
    let (f, o) = (path(&dir, "f.robf"), path(&dir, "o.robf"));
    std::fs::write(&f, text_field(&[g], 1, alpha, &rows)).unwrap();
    std::fs::write(&o, text_field(&[g], 1, alpha, &rows)).unwrap();
    let csv = ok(&["optimize", "--input", s(&f), "--objective", s(&o), "--r-max", "0.5"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,opt_lower"));
    let mut last = f64::INFINITY;
    let mut count = 0;
    for line in lines {
        let (r, lower) = line.split_once(',').unwrap();
        let r: f64 = r.parse().unwrap();
        let lower: f64 = lower.parse().unwrap();
        assert!(r <= 0.5 + 1e-12);
        assert!((lower + r).abs() <= alpha + 1e-12, "r={r} lower={lower}");
        assert!(lower <= last);
        last = lower;
        count += 1;
    }
    assert!(count > 5);
}

#[test]
fn optimize_marks_the_end_of_the_curve() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f.robf");
    let o = path(&dir, "o.robf");
    let lin: Vec<String> = ["-1", "-0.5", "0", "0.5", "1"].map(String::from).to_vec();
    std::fs::write(&f, text_field(&[5], 1, 0.25, &lin)).unwrap();
    let flat = vec!["3.0".to_string(); 5];
    std::fs::write(&o, text_field(&[5], 1, 0.5, &flat)).unwrap();
    let csv = ok(&["optimize", "--input", s(&f), "--objective", s(&o), "--r-max", "5"]);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let (last, body) = rows.split_last().unwrap();
    assert!(last.ends_with(",none"), "{csv}");
    for row in body {
        assert!(row.ends_with(",3"), "{csv}");
    }
}

#[test]
fn experiment_is_deterministic_and_summarized() {
    let args = [
        "experiment", "--l", "3.0", "--grid", "8", "--count", "3", "--seed", "11",
    ];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "kind,l,g,seed,r0,r1,r2,frac_r1_gt_r0,avg_r1,max_r1,frac_r2_gt_r1"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1..4].iter().all(|l| l.starts_with("sample,3,8,")));
    assert!(lines[4].starts_with("summary,3,8,11,"));

    let one = ok(&["experiment", "--l", "3.0", "--grid", "8", "--count", "1", "--seed", "11"]);
    let rows: Vec<Vec<&str>> = one.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let (sample, summary) = (&rows[0], &rows[1]);
    assert_eq!(sample[4], summary[4]);
    if let Ok(r1) = sample[5].parse::<f64>() {
        assert_eq!(summary[8].parse::<f64>().unwrap(), r1);
        assert_eq!(summary[9].parse::<f64>().unwrap(), r1);
        assert_eq!(summary[7], "1");
    } else {
        assert_eq!(summary[7], "0");
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let dir = TempDir::new().unwrap();
    let h = path(&dir, "h.robf");
    ok(&["gen", "hopf", "--n", "3", "--grid", "8", "--out", s(&h)]);
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_robzero"))
            .args(["robustness", "--input", s(&h)])
            .env("ROBZERO_THREADS", threads)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["diagnostics"]["timings"] = Value::Null;
        v
    };
    assert_eq!(run("1"), run("2"));
}
