use std::process::Command;

fn twoway(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_twoway")).args(args).output().expect("run twoway")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("twoway-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn help_lists_subcommands() {
    let out = twoway(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["analyze", "simulate", "sweep", "preset", "compare"] {
        assert!(text.contains(sub), "missing {sub}");
    }
}

#[test]
fn analyze_emits_json() {
    let out = twoway(&["analyze", "--json", "--set", "release.zeta_r=1e-16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    let p = v[0]["breakdown"]["avg_bep"].as_f64().unwrap();
    assert!((0.0..=0.5).contains(&p));
}

#[test]
fn bad_override_fails() {
    let out = twoway(&["analyze", "--set", "release.nonsense=1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_traces() {
    let trace = scratch("trace.ndjson");
    let out = twoway(&[
        "simulate", "--trials", "2000", "--scheme", "pnc", "--trace-out", trace.to_str().unwrap(), "--trace-limit", "5", "-j", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(lines.lines().count(), 5);
    for line in lines.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn sweep_then_compare_exit_codes() {
    let csv = scratch("sweep.csv");
    let out = twoway(&[
        "sweep", "--variable", "zeta", "--grid", "3e-17,1e-16", "--trials", "100000", "-o", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ok = twoway(&["compare", csv.to_str().unwrap(), "--z-limit", "5"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let strict = twoway(&["compare", csv.to_str().unwrap(), "--z-limit", "0"]);
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn deterministic_across_workers() {
    let run = |j: &str| twoway(&["simulate", "--trials", "150000", "--seed", "9", "--json", "-j", j]).stdout;
    assert_eq!(run("1"), run("4"));
}
