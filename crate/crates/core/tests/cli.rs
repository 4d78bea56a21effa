//! The `paraguard` binary end to end: outputs, artefacts and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::model_path;
use paraguard::shell::exit;

fn paraguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paraguard")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn check_prints_closed_forms_and_exact_values() {
    let tiny = model_path("tiny.toml");
    let out = paraguard(&["check", "--model", arg(&tiny), "--truth", "--exact"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("= 4/5"), "{text}");
    // 1 - (3/4)^5 of the mass leaving S1, four fifths of it to the goal
    assert!(text.contains("= 781/1280"), "{text}");

    let out = paraguard(&["check", "--model", arg(&tiny)]);
    assert_eq!(code(&out), exit::OK);
    let text = stdout(&out);
    assert!(text.contains("closed form: (p) / (p + q)"), "{text}");
    assert!(text.contains("p: increasing") && text.contains("q: decreasing"), "{text}");
}

#[test]
fn check_over_a_box_reports_bounds() {
    let out = paraguard(&[
        "check",
        "--model",
        arg(&model_path("uuv-fig1.toml")),
        "--box",
        arg(&model_path("uuv-reference-box.toml")),
    ]);
    assert_eq!(code(&out), exit::OK);
    let text = stdout(&out);
    assert!(text.contains("R1") && text.contains("R2"), "{text}");
}

#[test]
fn a_violated_threshold_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("bad.toml");
    std::fs::write(&v, "p = \"0.01\"\nq = \"0.4\"\n").unwrap();
    let out = paraguard(&["check", "--model", arg(&model_path("tiny.toml")), "--valuation", arg(&v)]);
    assert_eq!(code(&out), exit::THRESHOLD);
}

#[test]
fn malformed_and_invalid_models_are_distinguished() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "[model\nname = 1").unwrap();
    assert_eq!(code(&paraguard(&["check", "--model", arg(&broken)])), exit::PARSE);

    let tiny = std::fs::read_to_string(model_path("tiny.toml")).unwrap();
    let invalid = dir.path().join("invalid.toml");
    std::fs::write(&invalid, tiny.replace("S1 = \"remainder\"", "S1 = \"0.9\"")).unwrap();
    assert_eq!(code(&paraguard(&["check", "--model", arg(&invalid)])), exit::VALIDATION);

    assert_eq!(code(&paraguard(&["check", "--model", "/nonexistent/model.toml"])), exit::IO);
}

#[test]
fn simulate_premission_monitor_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_path("uuv-fig1.toml");
    let m = arg(&model);
    let campaign = dir.path().join("campaign.jsonl");
    let out = paraguard(&["simulate", "--model", m, "--seed", "7", "--missions", "10", "--out", arg(&campaign)]);
    assert_eq!(code(&out), exit::OK);

    // same seed, same bytes; another seed, another campaign
    let again = dir.path().join("again.jsonl");
    paraguard(&["simulate", "--model", m, "--seed", "7", "--missions", "10", "--out", arg(&again)]);
    let other = dir.path().join("other.jsonl");
    paraguard(&["simulate", "--model", m, "--seed", "8", "--missions", "10", "--out", arg(&other)]);
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&campaign), read(&again));
    assert_ne!(read(&campaign), read(&other));

    let pre = dir.path().join("pre");
    let out = paraguard(&["premission", "--model", m, "--trace", arg(&campaign), "--out", arg(&pre)]);
    assert_eq!(code(&out), exit::OK);
    assert!(stdout(&out).contains("post. est."));

    let showcase = dir.path().join("showcase.jsonl");
    let out = paraguard(&["simulate", "--model", m, "--seed", "7", "--missions", "10", "--showcase", "--out", arg(&showcase)]);
    assert_eq!(code(&out), exit::OK);

    let mon = dir.path().join("mon");
    let out = paraguard(&[
        "monitor",
        "--model",
        m,
        "--seed",
        "7",
        "--cache",
        arg(&pre.join("cache.json")),
        "--premission",
        arg(&pre.join("premission.json")),
        "--trace",
        arg(&showcase),
        "--out",
        arg(&mon),
    ]);
    assert!(matches!(code(&out), exit::OK | exit::THRESHOLD), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["series.csv", "verdicts.jsonl", "conflicts.jsonl"] {
        assert!(mon.join(f).exists(), "{f} missing");
    }

    // a trace with a gap in it is a chain error
    let text = std::fs::read_to_string(&showcase).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(lines.len() / 2);
    let gapped = dir.path().join("gapped.jsonl");
    std::fs::write(&gapped, lines.join("\n")).unwrap();
    let out = paraguard(&[
        "monitor",
        "--model",
        m,
        "--cache",
        arg(&pre.join("cache.json")),
        "--premission",
        arg(&pre.join("premission.json")),
        "--trace",
        arg(&gapped),
        "--out",
        arg(&dir.path().join("mon2")),
    ]);
    assert_eq!(code(&out), exit::CHAIN);

    // a cache built for another model is refused
    let out = paraguard(&[
        "monitor",
        "--model",
        arg(&model_path("tiny.toml")),
        "--cache",
        arg(&pre.join("cache.json")),
        "--premission",
        arg(&pre.join("premission.json")),
        "--trace",
        arg(&showcase),
        "--out",
        arg(&dir.path().join("mon3")),
    ]);
    assert_eq!(code(&out), exit::VALIDATION);
}

#[test]
fn config_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\nn_missions = 2\nbogus = true\n").unwrap();
    let out = paraguard(&[
        "simulate",
        "--model",
        arg(&model_path("tiny.toml")),
        "--config",
        arg(&cfg),
        "--out",
        arg(&dir.path().join("t.jsonl")),
    ]);
    assert_eq!(code(&out), exit::PARSE);
}
