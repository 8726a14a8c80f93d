use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn legoc(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_legoc"));
    c.args(args);
    for var in ["LEGOC_MODE", "LEGOC_BACKEND", "LEGOC_MAX_RETRIES", "LEGOC_CONFIG", "LEGOC_LLM_ENDPOINT"] {
        c.env_remove(var);
    }
    c.envs(envs.iter().copied());
    c.output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lego_compile_with_tests_passes_and_writes_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let o = legoc(
        &[
            "compile",
            s(&fixture("sum.c")),
            "--mode",
            "lego",
            "--backend",
            "ref",
            "--tests",
            s(&fixture("sum.tests.toml")),
            "--split-threshold",
            "5",
            "--out-dir",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sum.s", "sum.symbols.txt", "sum.parts.txt", "report.json", "attempt-1.s"] {
        assert!(out.path().join(f).exists(), "missing {f}");
    }
    let r = report(out.path());
    assert_eq!(r["outcome"], "pass");
    assert_eq!(r["max_retries"], 5);
    assert_eq!(r["attempts"].as_array().unwrap().len(), 1);
    let parts = std::fs::read_to_string(out.path().join("sum.parts.txt")).unwrap();
    assert!(parts.lines().filter(|l| !l.starts_with('#')).count() > 1);
}

#[test]
fn llm_backend_without_endpoint_is_an_infrastructure_error() {
    let o = legoc(&["compile", s(&fixture("sum.c")), "--mode", "direct", "--backend", "llm"], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("endpoint"));
}

#[test]
fn overflowing_immediate_is_a_semantic_failure() {
    let out = tempfile::tempdir().unwrap();
    let o = legoc(
        &[
            "compile",
            s(&fixture("overflow.c")),
            "--tests",
            s(&fixture("overflow.tests.toml")),
            "--out-dir",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    let r = report(out.path());
    assert_eq!(r["stage"], "translate");
    assert!(r["message"].as_str().unwrap().contains("does not fit in 16 bits"));
}

#[test]
fn flags_override_environment_and_environment_overrides_file() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("legoc.toml");
    std::fs::write(&cfg, "mode = \"workflow\"\nmax_retries = 2\n").unwrap();
    let run = |extra: &[&str], envs: &[(&str, &str)], dir: &str| {
        let d = out.path().join(dir);
        let src = fixture("sum.c");
        let mut args = vec!["compile", s(&src), "--config", s(&cfg), "--out-dir", s(&d)];
        args.extend_from_slice(extra);
        assert_eq!(legoc(&args, envs).status.code(), Some(0));
        report(&d)
    };
    let r = run(&[], &[], "file");
    assert_eq!((r["mode"].as_str(), r["max_retries"].as_u64()), (Some("workflow"), Some(2)));
    let r = run(&[], &[("LEGOC_MODE", "direct")], "env");
    assert_eq!(r["mode"], "direct");
    let r = run(&["--mode", "lego"], &[("LEGOC_MODE", "direct")], "flag");
    assert_eq!(r["mode"], "lego");
}

#[test]
fn empty_manifest_gives_empty_report() {
    let out = tempfile::tempdir().unwrap();
    let m = out.path().join("manifest.toml");
    std::fs::write(&m, "").unwrap();
    let o = legoc(&["batch", s(&m), "--out-dir", s(&out.path().join("b"))], &[]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("b/summary.json")).unwrap()).unwrap();
    assert!(summary["rows"].as_array().unwrap().is_empty());
}

#[test]
fn generated_corpus_passes_in_every_mode() {
    let out = tempfile::tempdir().unwrap();
    let corpus = out.path().join("corpus");
    let o = legoc(&["gen-corpus", "--count", "4", "--out-dir", s(&corpus)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = legoc(
        &[
            "batch",
            s(&corpus.join("manifest.toml")),
            "--modes",
            "direct,workflow,lego",
            "--jobs",
            "2",
            "--out-dir",
            s(&out.path().join("b")),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for mode in ["direct", "workflow", "lego"] {
        assert!(text.contains(&format!("{mode:<9} 4/4 passed (100.0%)")), "{text}");
    }
    assert!(text.contains("hard cases:"));
    assert!(out.path().join("b/lego/seed3_b25/report.json").exists());
}
