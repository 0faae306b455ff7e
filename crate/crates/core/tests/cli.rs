use std::path::Path;
use std::process::{Command, Output};

fn conrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conrl"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from:\n{text}"))
        .to_string()
}

#[test]
fn run_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out_str = out_dir.to_str().unwrap();
    let out = conrl(&[
        "run",
        "--env",
        "random",
        "--horizon",
        "3",
        "--episodes",
        "25",
        "--seed",
        "4",
        "--out",
        out_str,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run_text = stdout(&out);
    assert_eq!(value(&run_text, "episodes"), "25");
    assert!(out_dir.join("episodes.csv").exists() && out_dir.join("manifest.txt").exists());

    let eval = conrl(&["eval", out_str]);
    assert!(eval.status.success());
    let eval_text = stdout(&eval);
    assert_eq!(value(&eval_text, "episodes"), "25");
    let a: f64 = value(&run_text, "final_rew_reg").parse().unwrap();
    let b: f64 = value(&eval_text, "final_rew_reg").parse().unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "# small random run\nenv = random\nhorizon = 3\nepisodes = 50\nplanner = lagrangian\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = conrl(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--episodes",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(value(&stdout(&out), "episodes"), "10");
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("planner = lagrangian"));
}

#[test]
fn plan_default_mars() {
    let out = conrl(&["plan"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let planned: f64 = value(&text, "planned_reward").parse().unwrap();
    assert!((planned - 0.9837700097305602).abs() < 1e-9);
    let free: f64 = value(&text, "unconstrained_reward").parse().unwrap();
    assert!(free > planned);
}

#[test]
fn bench_oracle_prints_exact_optimum() {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/two_state.cmdp");
    let out = conrl(&["bench", "oracle", file.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(value(&text, "lp_optimum"), "2/3");
    assert_eq!(value(&text, "deterministic_policies"), "16");
}

#[test]
fn bench_runs_prints_one_row_per_stream() {
    let dir = tempfile::tempdir().unwrap();
    let out = conrl(&[
        "bench",
        "runs",
        "--env",
        "random",
        "--horizon",
        "3",
        "--episodes",
        "10",
        "--runs",
        "3",
        "--threads",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
            .count(),
        3
    );
    assert!(text.contains("mean_final_rew_reg = "));
}

#[test]
fn error_exit_codes() {
    assert_eq!(conrl(&["run", "--planner", "magic"]).status.code(), Some(2));
    assert_eq!(
        conrl(&["run", "--map", "/nonexistent/map.txt"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(conrl(&["eval", "/nonexistent/dir"]).status.code(), Some(4));
    assert_eq!(
        conrl(&["bench", "oracle", "/nonexistent/file"])
            .status
            .code(),
        Some(4)
    );
}
