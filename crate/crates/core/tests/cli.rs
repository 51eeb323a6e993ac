use std::path::Path;
use std::process::Command;

fn fertcast() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fertcast"))
}

fn simulate(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("rates.csv");
    let status = fertcast()
        .args(["simulate", "--lambda", "0.5", "--seed", "7", "--walk-sd", "0.005", "-o"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    path
}

fn run(args: &[&str], input: &Path) -> (i32, String, String) {
    let out = fertcast().args(args).arg("--input").arg(input).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn forecast_emits_one_row_per_horizon_and_age() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    let (code, out, _) = run(&["forecast", "--lambda", "0.46", "--horizon", "1"], &input);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "horizon,age,point,lower,upper,clamped");
    assert_eq!(lines.len(), 1 + 35);

    let (code, out, _) = run(&["forecast", "--lambda", "0.46"], &input);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1 + 12 * 35);
}

#[test]
fn forecast_is_byte_identical_across_runs_and_leaves_input_alone() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    let before = std::fs::read(&input).unwrap();
    let a = run(&["forecast", "--lambda", "0.3"], &input).1;
    let b = run(&["forecast", "--lambda", "0.3"], &input).1;
    assert_eq!(a, b);
    assert_eq!(std::fs::read(&input).unwrap(), before);
}

#[test]
fn evaluate_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    let (code, out, _) = run(&["evaluate", "--lambda", "0.5"], &input);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "h,mafe,interval_score");
    assert_eq!(lines.len(), 1 + 12 + 2);
    assert!(lines[13].starts_with("mean,") && lines[14].starts_with("median,"));

    let out_path = dir.path().join("table.csv");
    let (code, _, _) = run(
        &["evaluate", "--lambdas", "0.46,0,0.4", "--output", out_path.to_str().unwrap()],
        &input,
    );
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(out_path).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "h,mafe_0.46,mafe_0,mafe_0.4,score_0.46,score_0,score_0.4");
    assert!(text.lines().all(|l| l.split(',').count() == 7));
}

#[test]
fn select_lambda_reports_selection_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    let (code, out, _) = run(&["select-lambda", "--method", "grid"], &input);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "kind,lambda,objective");
    assert!(lines[1].starts_with("selected,"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("eval,")).count(), 101);
}

#[test]
fn decompose_emits_all_parts() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    let (code, out, _) = run(&["decompose", "--lambda", "0", "--horizon", "5"], &input);
    assert_eq!(code, 0);
    let kinds: std::collections::BTreeSet<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let expected: std::collections::BTreeSet<&str> =
        ["mean", "singular_value", "loading", "score", "score_forecast"].into_iter().collect();
    assert_eq!(kinds, expected);
    assert_eq!(out.lines().filter(|l| l.starts_with("mean,")).count(), 35);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    // validation
    assert_eq!(run(&["select-lambda", "--test-fraction", "0.9"], &input).0, 1);
    assert_eq!(run(&["forecast", "--lambda", "1.5"], &input).0, 1);
    assert_eq!(run(&["evaluate"], &input).0, 1);
    // data
    let missing = dir.path().join("missing.csv");
    let (code, _, err) = run(&["forecast", "--lambda", "0.5"], &missing);
    assert_eq!(code, 2);
    assert!(err.contains("missing.csv"));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "year,age,rate\n2000,15,0.1\n2000,16,-0.2\n").unwrap();
    assert_eq!(run(&["forecast", "--lambda", "0.5"], &bad).0, 2);
}
