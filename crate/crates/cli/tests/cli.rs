use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CALM: &str = r#"{"synth":{"effort_sd":0,"event_jitter":0,"blink_rate_hz":0}}"#;

fn dyadlens(config: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dyadlens"));
    cmd.args(args).env_remove("DYADLENS_CONFIG");
    if let Some(c) = config {
        cmd.env("DYADLENS_CONFIG", c);
    }
    cmd.output().expect("spawn dyadlens")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, config: Option<&Path>, seed: u64, extra: &[&str]) -> PathBuf {
    let seed_s = seed.to_string();
    let mut args = vec!["simulate", "--seed", &seed_s, "--duration-s", "300", "-o", s(dir)];
    args.extend_from_slice(extra);
    ok(dyadlens(config, &args));
    dir.join(format!("dyad-{seed:04}.jsonl"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = simulate(&tmp.path().join("a"), None, 7, &[]);
    let b = simulate(&tmp.path().join("b"), None, 7, &[]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(tmp.path().join("a/dyad-0007.truth.json").is_file());
    let c = simulate(&tmp.path().join("c"), None, 8, &[]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn calm_session_gives_empty_reactive_log() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), CALM);
    for seed in [1, 2] {
        let session = simulate(&tmp.path().join("s"), Some(&cfg), seed, &[]);
        let out = tmp.path().join(format!("f{seed}"));
        ok(dyadlens(Some(&cfg), &["feedback", "--mode", "reactive", s(&session), "-o", s(&out)]));
        assert_eq!(std::fs::read_to_string(out.join("events_reactive.jsonl")).unwrap(), "");
        assert!(out.join("baseline.json").is_file());
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let session = simulate(tmp.path(), None, 3, &[]);
    let out = tmp.path().join("out");

    assert_eq!(dyadlens(None, &["analyze", "--no-such-flag", s(&session)]).status.code(), Some(2));
    assert_eq!(dyadlens(None, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(dyadlens(None, &["analyze", "--window-jme", "-1", s(&session)]).status.code(), Some(2));
    assert_eq!(dyadlens(None, &["analyze", s(&tmp.path().join("missing.jsonl"))]).status.code(), Some(2));
    let r = dyadlens(None, &["feedback", "--mode", "proactive", s(&session), "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--model"));

    let bad = write_config(tmp.path(), r#"{"no_such_key": 1}"#);
    assert_eq!(dyadlens(Some(&bad), &["analyze", s(&session)]).status.code(), Some(2));
    assert_eq!(dyadlens(None, &["compare", "--cohort", "x"]).status.code(), Some(2));
}

#[test]
fn malformed_session_exits_1() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, "{ not json\n").unwrap();
    let r = dyadlens(None, &["analyze", s(&bad), "-o", s(&tmp.path().join("out"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error:"));
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let session = simulate(tmp.path(), None, 4, &[]);
    let cfg = write_config(tmp.path(), r#"{"pipeline":{"effort":{"jme_window_s":20}}}"#);

    let from_file = tmp.path().join("file");
    ok(dyadlens(Some(&cfg), &["analyze", s(&session), "-o", s(&from_file)]));
    let header = std::fs::read_to_string(from_file.join("jme.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains("window_s=20"), "{header:.80}");

    let from_flag = tmp.path().join("flag");
    ok(dyadlens(Some(&cfg), &["analyze", "--window-jme", "30", s(&session), "-o", s(&from_flag)]));
    let header = std::fs::read_to_string(from_flag.join("jme.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains("window_s=30"), "{header:.80}");
}

#[test]
fn pipeline_commands_write_their_outputs() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    let cohort_a = p.join("a");
    let cohort_b = p.join("b");
    ok(dyadlens(None, &["simulate", "--seed", "10", "--count", "3", "--duration-s", "300", "--link", "effort-leads", "-o", s(&cohort_a)]));
    ok(dyadlens(None, &["simulate", "--seed", "20", "--count", "3", "--duration-s", "300", "--kappa", "0", "-o", s(&cohort_b)]));
    let one = cohort_a.join("dyad-0010.jsonl");

    let out = p.join("analyze");
    ok(dyadlens(None, &["analyze", s(&one), "-o", s(&out)]));
    for f in ["jva.csv", "jva_fine.csv", "me_a.csv", "me_b.csv", "jme.csv", "frames.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let frames = std::fs::read_to_string(out.join("frames.csv")).unwrap();
    assert_eq!(frames.lines().next(), Some("t_ms,jva,jme,me_a,me_b"));

    let out = p.join("episodes");
    ok(dyadlens(None, &["episodes", s(&one), "-o", s(&out)]));
    let props: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("proportions.json")).unwrap()).unwrap();
    assert!(props.is_object());
    assert!(out.join("episodes.csv").is_file());

    let out = p.join("causality");
    ok(dyadlens(None, &["causality", s(&cohort_a), "-o", s(&out)]));
    let scatter = std::fs::read_to_string(out.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 4);
    assert!(out.join("quadrants.json").is_file());

    let out = p.join("model");
    ok(dyadlens(None, &["forecast", "train", s(&cohort_a), "-o", s(&out)]));
    let model = out.join("model.json");
    ok(dyadlens(None, &["forecast", "eval", "--model", s(&model), s(&cohort_b), "-o", s(&out)]));
    let skill: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("skill.json")).unwrap()).unwrap();
    assert!(!skill.is_null());

    let out = p.join("feedback");
    ok(dyadlens(None, &["feedback", "--mode", "both", "--model", s(&model), s(&one), "-o", s(&out)]));
    for f in ["baseline.json", "events_reactive.jsonl", "events_proactive.jsonl"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let out = p.join("compare");
    let (ca, cb) = (format!("coupled={}", s(&cohort_a)), format!("uncoupled={}", s(&cohort_b)));
    ok(dyadlens(None, &["compare", "--cohort", &ca, "--cohort", &cb, "-o", s(&out)]));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(report["cohorts"][0]["n"], 3);
    assert_eq!(report["tables"].as_array().unwrap().len(), 9);
}
