use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_besovkit")).args(args).output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn norm_of_three_four_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("a.json");
    let entries = json!({"grid_ref": "", "entries": [
        {"j": 0, "xi_index": 0, "re": 3.0, "im": 0.0},
        {"j": 1, "xi_index": 1, "re": 0.0, "im": 4.0},
    ]});
    std::fs::write(&seq, entries.to_string()).unwrap();
    let out = run(&["norm", "--alpha", "0", "--p", "2", "--q", "2", "--d", "1", "--seq", p(&seq)]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert!((v["norm"].as_f64().unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(v["seed"], 0);
}

#[test]
fn embed_reports_predicate() {
    let out = run(&["embed", "--from", "1,2,2", "--to", "0,2,2", "--d", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["exists"], true);
    let out = run(&["embed", "--from", "0.1,1,1", "--to", "0,2,2", "--d", "1"]);
    assert_eq!(report(&out)["exists"], false);
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(run(&["norm", "--alpha", "0"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    let out = run(&["norm", "--alpha", "0", "--p", "2", "--q", "2", "--d", "1", "--seq", "/nonexistent/a.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["wavelet", "check", "--basis", "spline:D=9,Dt=1", "--manifold", "interval", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn grid_roundtrip_and_broken_covering() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.json");
    let out = run(&["grid", "build", "--d", "1", "--manifold", "interval", "--max-level", "5", "--out", p(&grid)]);
    assert_eq!(out.status.code(), Some(0));
    let args = |g: &Path| {
        run(&["grid", "check", "--input", p(g), "--axiom", "a1", "--max-level", "5"])
    };
    assert_eq!(args(&grid).status.code(), Some(0));

    // Two adjacent points removed at level 3 open a gap of 3·2^{-3}.
    let mut g: Value = serde_json::from_str(&std::fs::read_to_string(&grid).unwrap()).unwrap();
    let level = g["levels"][3].as_array_mut().unwrap();
    level.retain(|pt| {
        let y = pt["y"][0].as_f64().unwrap();
        y != 0.125 && y != 0.25
    });
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, g.to_string()).unwrap();
    let out = args(&broken);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["ok"], false);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let out = run(&["--seed", "5", "diagram", "--d", "2", "--csv", p(&csv), "--samples", "7"]);
        assert_eq!(out.status.code(), Some(0));
        (out.stdout, std::fs::read(&csv).unwrap())
    };
    assert_eq!(run_once("a"), run_once("b"));

    let matrix = |tag: &str| {
        let m = dir.path().join(format!("{tag}.bin"));
        let out = run(&[
            "gramian", "--basis-a", "haar", "--basis-b", "spline:D=2,Dt=2", "--manifold", "interval", "--levels", "4",
            "--out", p(&m),
        ]);
        assert_eq!(out.status.code(), Some(0));
        (out.stdout, std::fs::read(&m).unwrap())
    };
    assert_eq!(matrix("a"), matrix("b"));
}

#[test]
fn failed_checks_exit_one() {
    // Haar against (2,2) decays like 2^{-ℓ/2} above the diagonal, short of the α = 0 requirement.
    let out = run(&[
        "gramian", "--basis-a", "haar", "--basis-b", "spline:D=2,Dt=2", "--manifold", "interval", "--levels", "6",
        "--alpha", "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["ok"], false);

    let out = run(&["wavelet", "check", "--basis", "spline:D=2,Dt=2", "--manifold", "interval", "--levels", "4"]);
    assert_eq!(out.status.code(), Some(0));
}
