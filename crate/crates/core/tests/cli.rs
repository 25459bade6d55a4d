use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_offline-co");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

/// Small end-to-end pipeline; returns stdout of the optimize and eval steps.
fn pipeline(dir: &Path) -> Vec<String> {
    ok(
        dir,
        &[
            "gen-train",
            "--out",
            "train.jsonl",
            "--count",
            "40",
            "--cities",
            "20",
            "--seed",
            "1",
        ],
    );
    ok(
        dir,
        &[
            "gen-test",
            "--out",
            "test.jsonl",
            "--count",
            "3",
            "--min-cities",
            "40",
            "--max-cities",
            "60",
            "--seed",
            "2",
        ],
    );
    ok(
        dir,
        &[
            "train",
            "--data",
            "train.jsonl",
            "--out",
            "model.json",
            "--report",
            "train.csv",
            "--epochs",
            "2",
            "--pairs-per-epoch",
            "40",
            "--hidden-dim",
            "8",
            "--feature-dim",
            "4",
        ],
    );
    let opt = ok(
        dir,
        &[
            "optimize",
            "--model",
            "model.json",
            "--data",
            "test.jsonl",
            "--id",
            "1",
            "--iters",
            "400",
            "--out",
            "traj.csv",
        ],
    );
    let eval = ok(
        dir,
        &[
            "eval",
            "--model",
            "model.json",
            "--data",
            "test.jsonl",
            "--report",
            "report.csv",
            "--summary",
            "summary.csv",
            "--iters",
            "300",
            "--trajectories",
            "traj",
        ],
    );
    ok(
        dir,
        &[
            "plot",
            "--input",
            "traj/0_baseline.csv",
            "--input",
            "traj/0_proposed.csv",
            "--out",
            "plot.svg",
        ],
    );
    vec![opt, eval]
}

const ARTIFACTS: &[&str] = &[
    "train.jsonl",
    "test.jsonl",
    "model.json",
    "train.csv",
    "traj.csv",
    "report.csv",
    "summary.csv",
    "traj/0_baseline.csv",
    "traj/2_proposed.csv",
    "plot.svg",
    "model.json.manifest.json",
    "report.csv.manifest.json",
    "traj.csv.manifest.json",
];

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = pipeline(a.path());
    let out_b = pipeline(b.path());
    assert_eq!(out_a, out_b);
    for name in ARTIFACTS {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }

    let d = a.path();
    assert_eq!(first_line(&d.join("train.csv")), "epoch,mean_loss,holdout_accuracy");
    assert_eq!(
        first_line(&d.join("traj.csv")),
        "iter,temperature,cost,score,md,true_length,best_true_length"
    );
    assert_eq!(first_line(&d.join("summary.csv")), "bucket,count,mean_reduction");
    assert!(first_line(&d.join("report.csv")).starts_with("instance_id,"));
    let svg = std::fs::read_to_string(d.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("0_baseline") && svg.contains("0_proposed"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"]["train"]["epochs"], 2);
    assert_eq!(manifest["tool"], "offline-co");
}

#[test]
fn baseline_equals_proposed_without_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let common = [
        "--model",
        "model.json",
        "--data",
        "test.jsonl",
        "--id",
        "0",
        "--iters",
        "500",
        "--seed",
        "9",
    ];
    let mut base = vec!["optimize", "--mode", "baseline", "--out", "b.csv"];
    base.extend(common);
    let mut free = vec!["optimize", "--mode", "proposed", "--lambda", "0", "--out", "p.csv"];
    free.extend(common);
    assert_eq!(ok(d, &base).replace("Baseline", "Proposed"), ok(d, &free));
    assert_eq!(
        std::fs::read(d.join("b.csv")).unwrap(),
        std::fs::read(d.join("p.csv")).unwrap()
    );
}

#[test]
fn zero_iterations_reports_initial_length() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let out = ok(
        d,
        &[
            "optimize",
            "--model",
            "model.json",
            "--data",
            "test.jsonl",
            "--id",
            "0",
            "--iters",
            "0",
            "--out",
            "z.csv",
        ],
    );
    let text = std::fs::read_to_string(d.join("z.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(text.lines().count(), 2);
    assert!(out.contains(&format!("true length {}", row[5])), "{out} vs {row:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);

    assert_eq!(code(&run_in(d, &[])), 2);
    assert_eq!(code(&run_in(d, &["--help"])), 0);
    assert_eq!(
        code(&run_in(
            d,
            &["train", "--data", "train.jsonl", "--out", "m.json", "--epochs", "0"]
        )),
        2
    );
    assert_eq!(code(&run_in(d, &["gen-train", "--count", "3"])), 2);
    assert_eq!(code(&run_in(d, &["gen-train", "--out", "missing/dir/x.jsonl"])), 3);
    assert_eq!(
        code(&run_in(d, &["train", "--data", "nope.jsonl", "--out", "m.json"])),
        3
    );

    std::fs::write(d.join("bad.jsonl"), "{\"id\":0,\"cities\":[[0.1,0.2]],\"oops\":1}\n").unwrap();
    let out = run_in(d, &["train", "--data", "bad.jsonl", "--out", "m.json"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = run_in(
        d,
        &[
            "optimize",
            "--model",
            "model.json",
            "--data",
            "test.jsonl",
            "--id",
            "99",
            "--out",
            "x.csv",
        ],
    );
    assert_eq!(code(&out), 4);

    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    let out = run_in(
        d,
        &[
            "eval",
            "--model",
            "model.json",
            "--data",
            "empty.jsonl",
            "--report",
            "r.csv",
            "--summary",
            "s.csv",
        ],
    );
    assert_eq!(code(&out), 4);

    std::fs::write(
        d.join("broken.csv"),
        "iter,temperature,cost,score,md,true_length,best_true_length\n0,1.0,2.0,,,30.0,30.0\n50,1.0,2.0,,,abc,30.0\n",
    )
    .unwrap();
    let out = run_in(d, &["plot", "--input", "broken.csv", "--out", "p.svg"]);
    assert_eq!(code(&out), 4);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("true_length"), "{err}");

    // Finite weights whose score overflows: saturated features times huge weights.
    let mut model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model.json")).unwrap()).unwrap();
    let fill = |v: &mut serde_json::Value, x: f64| {
        for e in v.as_array_mut().unwrap() {
            *e = serde_json::json!(x);
        }
    };
    fill(&mut model["weights"]["feature"]["data"], 0.0);
    fill(&mut model["weights"]["feature"]["bias"], 100.0);
    fill(&mut model["weights"]["score"]["data"], 1.7e308);
    fill(&mut model["weights"]["score"]["bias"], 1.7e308);
    std::fs::write(d.join("huge.json"), model.to_string()).unwrap();
    let out = run_in(
        d,
        &[
            "optimize",
            "--model",
            "huge.json",
            "--data",
            "test.jsonl",
            "--id",
            "0",
            "--out",
            "h.csv",
        ],
    );
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_sample_trajectory_plots_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("one.csv"),
        "iter,temperature,cost,score,md,true_length,best_true_length\n0,1.000000,2.000000,,,30.000000,30.000000\n",
    )
    .unwrap();
    ok(d, &["plot", "--input", "one.csv", "--out", "p.svg"]);
    let svg = std::fs::read_to_string(d.join("p.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 1);
    assert_eq!(svg.matches("<polyline").count(), 0);
}

#[test]
fn lipschitz_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["gen-train", "--out", "small.jsonl", "--count", "2", "--cities", "5"],
    );
    let sampled = ok(
        d,
        &["lipschitz", "--data", "small.jsonl", "--id", "0", "--samples", "200"],
    );
    let exact = ok(d, &["lipschitz", "--data", "small.jsonl", "--id", "0", "--exhaustive"]);
    let k = |s: &str| s.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap();
    assert!(k(&sampled) <= k(&exact));
    assert!(exact.ends_with("pairs 7140\n"), "{exact}");
}

#[test]
fn edge_cases_from_the_command_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-test", "--out", "none.jsonl", "--count", "0"]);
    assert_eq!(std::fs::read_to_string(d.join("none.jsonl")).unwrap(), "");

    let out = run_in(d, &["gen-train"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));

    std::fs::write(d.join("same.jsonl"), "{\"id\":0,\"cities\":[[0.5,0.5],[0.5,0.5],[0.5,0.5],[0.5,0.5]]}\n").unwrap();
    let printed = ok(d, &["lipschitz", "--data", "same.jsonl", "--id", "0", "--samples", "50"]);
    assert!(printed.starts_with("k_hat 0.000000 "), "{printed}");

    let seeded = ["lipschitz", "--data", "same.jsonl", "--id", "0", "--samples", "1000", "--seed", "7"];
    assert_eq!(ok(d, &seeded), ok(d, &seeded));
}
