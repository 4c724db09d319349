use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn faithlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faithlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn faithlab_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faithlab"))
        .env("FAITHLAB_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_files_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--experiment".into(),
            "eprb".into(),
            "--grid".into(),
            "0,0.3927".into(),
            "--n".into(),
            "200000".into(),
            "--seed".into(),
            "42".into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let run = |out: &Path, threads: &str| {
        let v = args(out);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        ok(faithlab_threads(threads, &refs))
    };
    let summary = run(&a, "4");
    assert!(summary.contains("200000 events of eprb"));
    run(&b, "4");
    run(&c, "1");
    for f in ["events.csv", "events.json"] {
        let first = fs::read(a.join(f)).unwrap();
        assert_eq!(first, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(first, fs::read(c.join(f)).unwrap(), "{f} with one thread");
    }
    let header = fs::read_to_string(a.join("events.csv")).unwrap();
    assert!(header.starts_with("alpha_idx,beta_idx,a,b\n"));
    assert_eq!(json(&a.join("config.json"))["command"], "simulate");
}

#[test]
fn hidden_input_channel_is_not_written() {
    let dir = tempfile::tempdir().unwrap();
    ok(faithlab(&[
        "simulate",
        "--experiment",
        "icseprb",
        "--demon-p",
        "0.5",
        "--hidden",
        "--n",
        "1000",
        "--out",
        p(dir.path()),
    ]));
    let csv = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(csv.starts_with("alpha_idx,beta_idx,b\n"));
}

#[test]
fn replay_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(faithlab(&[
        "simulate",
        "--experiment",
        "seprb",
        "--demon-p",
        "0.3",
        "--revealed",
        "--alpha-grid",
        "0,45",
        "--beta-grid",
        "22.5",
        "--degrees",
        "--policy",
        "round-robin",
        "--n",
        "5000",
        "--seed",
        "7",
        "--out",
        p(&a),
    ]));
    ok(faithlab(&["replay", p(&a.join("config.json")), "--out", p(&b)]));
    assert_eq!(
        fs::read(a.join("events.csv")).unwrap(),
        fs::read(b.join("events.csv")).unwrap()
    );
    let cfg = json(&b.join("config.json"));
    assert_eq!(cfg["grid"]["alpha"][1], Value::from(std::f64::consts::FRAC_PI_4));
    assert_eq!(cfg["out"], p(&b));
}

#[test]
fn analyze_accepts_eprb_and_flags_biased_demon() {
    let dir = tempfile::tempdir().unwrap();
    let (sim, rep) = (dir.path().join("sim"), dir.path().join("rep"));
    ok(faithlab(&[
        "simulate",
        "--grid",
        "0,0.3927",
        "--n",
        "1000000",
        "--seed",
        "3",
        "--out",
        p(&sim),
    ]));
    let out = ok(faithlab(&[
        "analyze",
        "--batch",
        p(&sim.join("events.csv")),
        "--out",
        p(&rep),
    ]));
    assert_eq!(out.matches("-> independent").count(), 2, "{out}");
    let report = json(&rep.join("report.json"));
    assert_eq!(report["signalling_detected"], false);
    assert_eq!(report["correlations"].as_array().unwrap().len(), 4);
    assert!(rep.join("nosignalling.csv").exists() && rep.join("correlations.csv").exists());

    let (bsim, brep) = (dir.path().join("bsim"), dir.path().join("brep"));
    ok(faithlab(&[
        "simulate",
        "--experiment",
        "seprb",
        "--demon-p",
        "0.55",
        "--hidden",
        "--grid",
        "0,0.785398",
        "--n",
        "100000",
        "--seed",
        "5",
        "--out",
        p(&bsim),
    ]));
    let out = ok(faithlab(&[
        "analyze",
        "--batch",
        p(&bsim.join("events.csv")),
        "--out",
        p(&brep),
    ]));
    assert!(
        out.contains("(B ⊥ alpha | beta)") && out.contains("-> dependent"),
        "{out}"
    );
    assert_eq!(json(&brep.join("report.json"))["signalling_detected"], true);
}

#[test]
fn analyze_reports_sparse_data_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    ok(faithlab(&["simulate", "--n", "10", "--out", p(dir.path())]));
    let o = faithlab(&[
        "analyze",
        "--batch",
        p(&dir.path().join("events.csv")),
        "--out",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sparse"));

    let o = faithlab(&["analyze", "--batch", p(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn chsh_exact_empirical_and_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(faithlab(&["chsh", "--exact", "--out", p(&dir.path().join("x"))]));
    assert!(out.contains("|S| = 2.828427"), "{out}");
    assert!(out.contains("classical bound: 2"));
    let svg = fs::read_to_string(dir.path().join("x/correlation.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("<circle").count() == 4);

    let out = ok(faithlab(&[
        "chsh",
        "--exact",
        "--spec",
        "0.3,0.3,0.3,0.3",
        "--out",
        p(&dir.path().join("d")),
    ]));
    assert!(out.contains("|S| = 2.000000"), "{out}");

    let sim = dir.path().join("sim");
    ok(faithlab(&[
        "simulate",
        "--revealed",
        "--n",
        "1000000",
        "--seed",
        "9",
        "--out",
        p(&sim),
    ]));
    ok(faithlab(&[
        "chsh",
        "--batch",
        p(&sim.join("events.csv")),
        "--out",
        p(&dir.path().join("e")),
    ]));
    let report = json(&dir.path().join("e/chsh.json"));
    let abs_s = report["report"]["abs_s"].as_f64().unwrap();
    assert!((abs_s - 2.0 * 2f64.sqrt()).abs() <= 0.01, "{abs_s}");
    assert_eq!(report["classical_bound"], 2.0);
}

#[test]
fn chsh_on_batch_without_the_pairs_fails() {
    let dir = tempfile::tempdir().unwrap();
    ok(faithlab(&[
        "simulate",
        "--grid",
        "0.1,0.2",
        "--n",
        "2000",
        "--out",
        p(dir.path()),
    ]));
    let o = faithlab(&[
        "chsh",
        "--batch",
        p(&dir.path().join("events.csv")),
        "--out",
        p(&dir.path().join("c")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn triad_summary_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(faithlab(&["triad", "--include-latent", "--out", p(dir.path())]));
    assert!(out.lines().any(|l| l == "explanatory-and-faithful: 0"), "{out}");
    let csv = fs::read_to_string(dir.path().join("triad.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1648);
    assert_eq!(json(&dir.path().join("triad.json"))["summary"]["total"], 1648);

    let out = ok(faithlab(&[
        "triad",
        "--unconstrained",
        "--out",
        p(&dir.path().join("u")),
    ]));
    assert!(out.contains("DAGs: 543"), "{out}");
}

#[test]
fn finetune_both_models() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["seprb", "cancelling-paths"] {
        let out_dir = dir.path().join(model);
        let out = ok(faithlab(&[
            "finetune",
            "--model",
            model,
            "--eps",
            "0.01,-0.05,0.1",
            "--out",
            p(&out_dir),
        ]));
        assert!(out.contains("verdict: fine-tuned"), "{out}");
        assert_eq!(json(&out_dir.join("stability.json"))["verdict"], "fine_tuned");
        let mut r = csv::Reader::from_path(out_dir.join("dependence.csv")).unwrap();
        let rows: Vec<(f64, f64, f64)> = r.deserialize().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 3);
        for (_, measured, closed) in rows {
            assert!((measured - closed).abs() < 1e-9);
        }
        assert!(out_dir.join("dependence.svg").exists());
    }
    let o = faithlab(&[
        "finetune",
        "--model",
        "cancelling-paths",
        "--eps",
        "0.95",
        "--out",
        p(&dir.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = faithlab(&["finetune", "--model", "seprb", "--eps", "abc"]);
    assert_eq!(o.status.code(), Some(1));
    let o = faithlab(&[
        "finetune",
        "--model",
        "seprb",
        "--p",
        "0.6",
        "--out",
        p(&dir.path().join("y")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn equivalence_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(faithlab(&["equivalence", "--density", "19", "--out", p(dir.path())]));
    assert!(out.contains("equivalent: true"));
    let report = json(&dir.path().join("equivalence.json"));
    assert!(report["max_discrepancy"].as_f64().unwrap() < 1e-12);
    assert_eq!(report["cells"], 361);
    assert_eq!(json(&dir.path().join("config.json"))["density"], 19);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(faithlab(&[]).status.code(), Some(1));
    assert_eq!(faithlab(&["bogus"]).status.code(), Some(1));
    assert_eq!(faithlab(&["simulate", "--experiment", "nope"]).status.code(), Some(1));
    assert_eq!(faithlab(&["simulate", "--hidden", "--revealed"]).status.code(), Some(1));
    assert_eq!(faithlab(&["simulate", "--demon-p", "1.5"]).status.code(), Some(1));
    assert_eq!(faithlab(&["chsh"]).status.code(), Some(1));
    assert_eq!(faithlab(&["chsh", "--exact", "--spec", "1,2"]).status.code(), Some(1));
    assert_eq!(faithlab(&["equivalence", "--density", "1"]).status.code(), Some(1));
    assert_eq!(
        faithlab(&["analyze", "--batch", "x.csv", "--level", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(faithlab_threads("zero", &["equivalence"]).status.code(), Some(1));
    assert_eq!(faithlab(&["replay", "/nonexistent/config.json"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let o = faithlab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
    assert_eq!(faithlab(&["--version"]).status.code(), Some(0));
    assert_eq!(faithlab(&["triad", "--help"]).status.code(), Some(0));
}
