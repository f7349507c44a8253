use std::path::Path;
use std::process::{Command, Output};

fn avi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avi"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &str = r#"
seeds = [0]
checkpoints = false

[aavi]
n_iterations = 2
pool_capacity = 20
induction_episodes = 4
eval_episodes = 4

[aavi.ars]
n_directions = 4
top_b = 2
iterations_per_round = 1
episode_horizon = 10

[aavi.estimation]
m_starts = 3
horizon = 20
"#;

#[test]
fn bound_reports_contraction() {
    let out = stdout(&avi(&["bound", "--regions", "10", "--eps-t", "0.001", "--eps-r", "0.01", "--gamma", "0.9"]));
    assert!(out.contains("assumption holds"), "{out}");
    let factor: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("contraction factor "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((factor - 0.91).abs() < 1e-12);
    let bad = stdout(&avi(&["bound", "--regions", "10", "--eps-t", "0.02", "--eps-r", "0", "--gamma", "0.9"]));
    assert!(bad.contains("violated"));
}

#[test]
fn regions_generate_validate_print() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.toml");
    let p = path.to_str().unwrap();
    stdout(&avi(&["regions", "generate", "--kind", "random", "--n", "8", "--k", "3", "--seed", "4", "--out", p]));
    assert_eq!(stdout(&avi(&["regions", "validate", p])).trim(), "valid");
    let printed = stdout(&avi(&["regions", "print", p]));
    assert!(printed.starts_with("initial 8 goal 9"), "{printed}");
    std::fs::write(&path, "initial_id = 0\ngoal_id = 3\nedges = []\nregions = []\n").unwrap();
    assert!(!avi(&["regions", "validate", p]).status.success());
}

fn train_tiny(dir: &Path) -> String {
    let cfg = dir.join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.join("run");
    stdout(&avi(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--iterations",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]))
}

#[test]
fn train_then_eval_and_transfer() {
    let dir = tempfile::tempdir().unwrap();
    let log = train_tiny(dir.path());
    assert!(log.starts_with("seed 0:"), "{log}");
    let run = dir.path().join("run");
    // the flag overrides the file's two iterations
    let curve = std::fs::read_to_string(run.join("seed_0/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 2);
    assert!(!run.join("seed_0/checkpoints").exists());
    let art = run.join("seed_0");
    let a = art.to_str().unwrap();
    let eval = stdout(&avi(&["eval", "--artifacts", a, "--episodes", "5", "--seed", "2"]));
    assert!(eval.contains("episodes 5"));
    assert_eq!(eval, stdout(&avi(&["eval", "--artifacts", a, "--episodes", "5", "--seed", "2"])));
    let tout = dir.path().join("transfer");
    let t = stdout(&avi(&[
        "transfer",
        "--artifacts",
        a,
        "--env",
        "nine_rooms_obstacle",
        "--grid",
        "2",
        "--episodes",
        "3",
        "--out",
        tout.to_str().unwrap(),
    ]));
    assert!(t.contains("estimation_steps"), "{t}");
    for f in ["spec.toml", "interval_tables.csv", "policy.csv", "values.csv"] {
        assert!(tout.join(f).exists(), "{f}");
    }
    // a directory without spec.toml is not a run
    assert!(!avi(&["eval", "--artifacts", dir.path().to_str().unwrap()]).status.success());
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[aavi]\nn_iterations = 0\n").unwrap();
    let o = avi(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("iteration"));
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert!(!avi(&["train", "--config", cfg.to_str().unwrap()]).status.success());
}
