mod common;

use std::path::Path;

use common::{run_in, stage_workspace, SODA};

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn build_index(dir: &Path) {
    let out = run_in(
        dir,
        &["index", "build", "--lexicon", "fixtures/lexicon.jsonl", "--out", "out/frames.fsix"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn group_test(dir: &Path) {
    let out = run_in(
        dir,
        &["dataset", "group", "--in", "fixtures/test_instances.jsonl", "--out", "out/test.jsonl", "--split", "test"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn pipeline_matches_goldens() {
    let ws = stage_workspace();
    let artifacts = common::run_demo(ws.path());
    if std::env::var_os(common::BLESS_ENV).is_some() {
        common::bless(&artifacts);
        return;
    }
    let mismatches = common::golden_mismatches(&artifacts, &common::load_goldens());
    assert!(
        mismatches.is_empty(),
        "golden mismatches (rerun with {}=1 to regenerate):\n{}",
        common::BLESS_ENV,
        mismatches.join("\n")
    );
}

#[test]
fn help_and_version_exit_zero() {
    let ws = stage_workspace();
    for flag in ["--help", "--version"] {
        let out = run_in(ws.path(), &[flag]);
        assert_eq!(code(&out), 0);
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    let ws = stage_workspace();
    let dir = ws.path();
    build_index(dir);
    let cases: &[&[&str]] = &[
        &["--bogus"],
        &["lexicon"],
        &["--workers", "0", "lexicon", "validate", "fixtures/lexicon.jsonl"],
        &["lcq2f", "build", "--questions", "fixtures/questions.jsonl", "--corpus", "fixtures/kb_corpus.jsonl", "--plus", "--out", "out/x"],
        &[
            "identify",
            "--index",
            "out/frames.fsix",
            "--lexicon",
            "fixtures/lexicon.jsonl",
            "--sentence",
            SODA,
            "--demos",
            "fixtures/train.jsonl",
            "--prompt-only",
        ],
        &[
            "identify",
            "--index",
            "out/frames.fsix",
            "--lexicon",
            "fixtures/lexicon.jsonl",
            "--sentence",
            SODA,
            "--chat",
            "mock:gold",
        ],
        &["eval", "complexity", "--tokens", "0", "--lexicon-size", "10"],
    ];
    for args in cases {
        let out = run_in(dir, args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn data_errors_exit_two() {
    let ws = stage_workspace();
    let dir = ws.path();
    build_index(dir);
    std::fs::write(dir.join("fixtures/broken.jsonl"), "{\"label\": \n").unwrap();
    let cases: &[&[&str]] = &[
        &["lexicon", "validate", "fixtures/nope.jsonl"],
        &["--config", "fixtures/missing.toml", "lexicon", "validate", "fixtures/lexicon.jsonl"],
        &["lexicon", "validate", "fixtures/broken.jsonl"],
        &["--embedder", "fallback:64", "retrieve", "--index", "out/frames.fsix", "--sentence", SODA],
        &["index", "search", "--index", "fixtures/lexicon.jsonl", "--query", "x"],
    ];
    for args in cases {
        let out = run_in(dir, args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("error: "));
    }
}

#[test]
fn provider_errors_exit_three() {
    let ws = stage_workspace();
    let dir = ws.path();
    build_index(dir);
    group_test(dir);
    let out = run_in(
        dir,
        &[
            "identify",
            "--index",
            "out/frames.fsix",
            "--lexicon",
            "fixtures/lexicon.jsonl",
            "--dataset",
            "out/test.jsonl",
            "--sentence",
            "a sentence the gold file does not contain",
            "--chat",
            "mock:gold",
        ],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_rejected() {
    let ws = stage_workspace();
    let dir = ws.path();
    std::fs::write(dir.join("bad.toml"), "seed = 1\nspeed = 2\n").unwrap();
    let out = run_in(dir, &["--config", "bad.toml", "lexicon", "validate", "fixtures/lexicon.jsonl"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("speed"), "{}", stderr(&out));
}

#[test]
fn config_file_sets_prompt_defaults() {
    let ws = stage_workspace();
    let dir = ws.path();
    build_index(dir);
    std::fs::write(dir.join("run.toml"), "[prompt]\nmax_candidate_detail = \"label_only\"\n").unwrap();
    let out = run_in(
        dir,
        &[
            "--config",
            "run.toml",
            "identify",
            "--index",
            "out/frames.fsix",
            "--lexicon",
            "fixtures/lexicon.jsonl",
            "--sentence",
            SODA,
            "-k",
            "3",
            "--prompt-only",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let prompt = String::from_utf8(out.stdout).unwrap();
    assert!(prompt.contains("1. "));
    assert!(!prompt.contains("Description:"));
}

#[test]
fn run_manifest_records_inputs_and_outputs() {
    let ws = stage_workspace();
    let dir = ws.path();
    group_test(dir);
    let text = std::fs::read_to_string(dir.join("out/test.jsonl.manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["tool"], "framescout");
    assert_eq!(manifest["seed"], 3407);
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["path"], "fixtures/test_instances.jsonl");
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"][0], "out/test.jsonl");
    assert!(manifest["started_at"].as_str().unwrap() <= manifest["finished_at"].as_str().unwrap());
}

#[test]
fn worker_count_does_not_change_predictions() {
    let ws = stage_workspace();
    let dir = ws.path();
    build_index(dir);
    group_test(dir);
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let pred = format!("out/pred_{workers}.jsonl");
        let out = run_in(
            dir,
            &[
                "--workers",
                workers,
                "identify",
                "--index",
                "out/frames.fsix",
                "--lexicon",
                "fixtures/lexicon.jsonl",
                "--dataset",
                "out/test.jsonl",
                "--chat",
                "mock:echo",
                "--out",
                &pred,
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        outputs.push((
            std::fs::read(dir.join(&pred)).unwrap(),
            std::fs::read(dir.join(format!("{pred}.audit.jsonl"))).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn single_sentence_identification_reports_provenance() {
    let ws = stage_workspace();
    let dir = ws.path();
    build_index(dir);
    group_test(dir);
    let out = run_in(
        dir,
        &[
            "--format",
            "table",
            "identify",
            "--index",
            "out/frames.fsix",
            "--lexicon",
            "fixtures/lexicon.jsonl",
            "--dataset",
            "out/test.jsonl",
            "--sentence",
            SODA,
            "--chat",
            "mock:gold",
            "-k",
            "3",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("Goal") && l.ends_with("candidate")));
    assert!(table.lines().any(|l| l.starts_with("Commerce_buy") && l.ends_with("completed")));
}
