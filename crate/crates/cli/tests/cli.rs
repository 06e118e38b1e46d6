//! End-to-end checks of the `ljc` binary: exit codes, the JSON report
//! schema, the constraint dump, and run-to-run determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ljc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_fixture(name: &str, extra: &[&str]) -> Output {
    let path = fixture(name);
    let mut args: Vec<&str> = extra.to_vec();
    let path_str = path.to_str().unwrap().to_string();
    let leaked: &'static str = Box::leak(path_str.into_boxed_str());
    args.push(leaked);
    run(&args)
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn ok_program_exits_zero() {
    let out = run_fixture("base_accept.ljc", &[]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok: 1");
}

#[test]
fn contract_violation_exits_one_with_report() {
    let out = run_fixture("addone.ljc", &["--json"]);
    assert_eq!(exit_code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stdout is a JSON report");
    assert_eq!(report["status"], "contract-violation");
    assert_eq!(report["blamed"][0]["label"], "addOne");
    assert_eq!(report["blamed"][0]["party"], "subject");
    assert_eq!(report["result"], serde_json::Value::Null);
    assert!(report["constraints"].as_u64().unwrap() > 0);

    // fixed key order in the serialized report
    let text = String::from_utf8_lossy(&out.stdout);
    let idx = |k: &str| text.find(k).unwrap_or_else(|| panic!("missing key {}", k));
    assert!(idx("\"status\"") < idx("\"blamed\""));
    assert!(idx("\"blamed\"") < idx("\"constraints\""));
    assert!(idx("\"constraints\"") < idx("\"result\""));
}

#[test]
fn sandbox_violation_exits_two() {
    let out = run_fixture("sandbox_faulty_length_two.ljc", &["--json"]);
    assert_eq!(exit_code(&out), 2);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "sandbox-violation");
    assert_eq!(report["blamed"].as_array().unwrap().len(), 0);
}

#[test]
fn parse_error_exits_three() {
    let dir = std::env::temp_dir();
    let path = dir.join("ljc_cli_parse_error.ljc");
    std::fs::write(&path, "assert(1,").unwrap();
    let out = run(&["--json", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "runtime-error");
}

#[test]
fn missing_file_exits_three() {
    let out = run(&["/nonexistent/really-not-here.ljc"]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn runtime_error_exits_three() {
    let dir = std::env::temp_dir();
    let path = dir.join("ljc_cli_runtime_error.ljc");
    std::fs::write(&path, "missingVariable").unwrap();
    let out = run(&["--json", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "runtime-error");
}

#[test]
fn dump_constraints_shows_the_conflicting_root() {
    let out = run_fixture("addone.ljc", &["--json", "--dump-constraints", "--seed-labels"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    let _report = lines.next().expect("report line");
    let dump: serde_json::Value =
        serde_json::from_str(lines.next().expect("dump line")).expect("dump is JSON");
    assert_eq!(dump["solution"]["addOne"]["subject"], "top");
    assert_eq!(dump["solution"]["addOne"]["context"], "t");
    let constraints = dump["constraints"].as_array().unwrap();
    assert!(constraints
        .iter()
        .any(|c| c["target"] == "addOne" && c["form"] == "intersection"));
}

#[test]
fn reports_are_deterministic() {
    let a = run_fixture("addone.ljc", &["--json", "--dump-constraints", "--seed-labels"]);
    let b = run_fixture("addone.ljc", &["--json", "--dump-constraints", "--seed-labels"]);
    assert_eq!(a.stdout, b.stdout, "byte-identical reports across runs");
    assert_eq!(exit_code(&a), exit_code(&b));
}

#[test]
fn trace_goes_to_stderr() {
    let out = run_fixture("base_accept.ljc", &["--trace"]);
    assert_eq!(exit_code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.lines().any(|l| l.starts_with("RULE Assert ")));
    assert!(stderr.lines().any(|l| l.starts_with("RULE NoBlame")));
    // the report itself stays on stdout
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok: 1");
}

#[test]
fn exception_outcome_flag_switches_the_truthiness_of_predicate_errors() {
    let dir = std::env::temp_dir();
    let path = dir.join("ljc_cli_exc_outcome.ljc");
    std::fs::write(
        &path,
        "assert:'l'(1, Base(fun(x){ missing }))",
    )
    .unwrap();
    for mode in ["false", "top"] {
        let out = run(&[
            "--json",
            "--exception-outcome",
            mode,
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 1, "mode {}", mode);
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["blamed"][0]["party"], "subject");
    }
}

#[test]
fn exit_codes_agree_with_reported_status_on_every_fixture() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("ljc") {
            continue;
        }
        let out = run(&["--json", path.to_str().unwrap()]);
        let report: serde_json::Value = serde_json::from_slice(&out.stdout)
            .unwrap_or_else(|e| panic!("{}: bad report: {}", path.display(), e));
        let expected = match report["status"].as_str().unwrap() {
            "ok" => 0,
            "contract-violation" => 1,
            "sandbox-violation" => 2,
            _ => 3,
        };
        assert_eq!(
            exit_code(&out),
            expected,
            "{}: exit code disagrees with status",
            path.display()
        );
        let blamed = report["blamed"].as_array().unwrap();
        assert_eq!(
            !blamed.is_empty(),
            report["status"] == "contract-violation",
            "{}: blamed must be non-empty exactly for contract violations",
            path.display()
        );
    }
}
