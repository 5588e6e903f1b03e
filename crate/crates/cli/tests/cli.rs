use std::process::{Command, Output};

fn besov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_besov")).args(args).output().unwrap()
}

const PROBLEM: [&str; 10] = ["--sigma-d", "1", "--p-d", "2", "--sigma-g", "1", "--p-g", "2", "--l-g", "4"];

#[test]
fn rate_reports_both_classes() {
    let out = besov(&["rate", "--dim", "4", "--sigma-d", "1", "--p-d", "inf", "--sigma-g", "0", "--p-g", "inf"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let general = text.lines().find(|l| l.starts_with("general,")).unwrap();
    assert!(general.contains("0.250000000000,dense"), "{general}");
    assert!(text.lines().any(|l| l.starts_with("linear,")));
}

#[test]
fn rate_json_is_valid() {
    let out = besov(&["rate", "--sigma-d", "0", "--p-d", "2", "--sigma-g", "2", "--p-g", "2", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["general"]["rate"]["regime"], "dense");
}

#[test]
fn out_of_domain_exponent_is_rejected() {
    let out = besov(&["rate", "--sigma-d", "1", "--p-d", "2", "--sigma-g", "1", "--p-g", "0.5"]);
    assert!(!out.status.success());
}

#[test]
fn unknown_subcommand_fails() {
    assert!(!besov(&["frobnicate"]).status.success());
}

#[test]
fn missing_input_is_an_error() {
    let out = besov(&["estimate", "--input", "/nonexistent/samples.csv", "--sigma-g", "1", "--p-g", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn undersized_generator_ball_is_a_hypothesis_error() {
    let mut args = vec!["adversarial", "--kind", "sparse", "--n", "4096"];
    args.extend_from_slice(&PROBLEM[..8]);
    args.extend_from_slice(&["--l-g", "0.1"]);
    let out = besov(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hypothesis"));
}

#[test]
fn adversarial_audit_passes_and_writes_pairs() {
    let mut args = vec!["adversarial", "--kind", "sparse", "--n", "16384"];
    args.extend_from_slice(&PROBLEM);
    let out = besov(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("row,")));
    assert!(text.lines().any(|l| l.starts_with("pair,")));
}

#[test]
fn phase_diagram_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pd.csv");
    let svg = dir.path().join("pd.svg");
    let out = besov(&[
        "phase-diagram", "--dim", "4", "--p-d", "1.2", "--p-g", "2", "--resolution", "20",
        "--output", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 401);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn estimate_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let xs: Vec<String> = (0..3000).map(|i| format!("{:.6}", ((i * 7919) % 3000) as f64 / 3000.0)).collect();
    std::fs::write(&input, xs.join("\n")).unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_besov"))
            .args(["--threads", threads, "estimate", "--input", input.to_str().unwrap(), "--sigma-g", "1", "--p-g", "1"])
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("6"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}
