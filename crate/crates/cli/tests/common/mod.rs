#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

pub const BLESS_ENV: &str = "FRAMESCOUT_BLESS";

pub const SODA: &str = "I went to the snack bar to buy a soda .";

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_framescout")
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Temp workspace holding a copy of the fixtures under `fixtures/` and an
/// empty `out/`, so commands can be run with stable relative paths.
pub fn stage_workspace() -> TempDir {
    let dir = tempfile::tempdir().expect("tempdir");
    let dest = dir.path().join("fixtures");
    std::fs::create_dir_all(&dest).unwrap();
    for entry in std::fs::read_dir(fixtures_dir()).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dest.join(entry.file_name())).unwrap();
    }
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    dir
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn framescout")
}

pub struct Step {
    pub name: &'static str,
    pub args: Vec<&'static str>,
}

fn step(name: &'static str, args: &[&'static str]) -> Step {
    Step {
        name,
        args: args.to_vec(),
    }
}

pub const PROMPT_STEPS: [&str; 4] = ["prompt_zero_shot", "prompt_few_shot", "prompt_gold_count", "prompt_fsrl"];

pub fn prompt_steps() -> Vec<Step> {
    let base = [
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
    ];
    let with = |extra: &[&'static str]| base.iter().chain(extra).copied().collect::<Vec<_>>();
    vec![
        Step {
            name: "prompt_zero_shot",
            args: with(&[]),
        },
        Step {
            name: "prompt_few_shot",
            args: with(&["--mode", "few", "--demos", "fixtures/train.jsonl", "--demo-count", "2"]),
        },
        Step {
            name: "prompt_gold_count",
            args: with(&["--gold-count", "5"]),
        },
        step(
            "prompt_fsrl",
            &[
                "identify",
                "--index",
                "out/frames.fsix",
                "--lexicon",
                "fixtures/lexicon.jsonl",
                "--sentence",
                SODA,
                "--fsrl",
                "Commerce_buy",
            ],
        ),
    ]
}

/// The offline pipeline: fallback embedder, mock chat, fixture corpus.
pub fn demo_steps() -> Vec<Step> {
    let mut steps = vec![
        step("lexicon_validate", &["lexicon", "validate", "fixtures/lexicon.jsonl"]),
        step(
            "dataset_group",
            &["dataset", "group", "--in", "fixtures/test_instances.jsonl", "--out", "out/test.jsonl", "--split", "test"],
        ),
        step("dataset_stats", &["--format", "table", "dataset", "stats", "--in", "out/test.jsonl"]),
        step(
            "dataset_merge",
            &[
                "dataset",
                "merge",
                "--train",
                "fixtures/train.jsonl",
                "--exemplars",
                "fixtures/exemplars.jsonl",
                "--out",
                "out/merged.jsonl",
            ],
        ),
        step("embed", &["embed", "--in", "fixtures/embed_texts.txt", "--out", "out/embeddings.jsonl"]),
        step(
            "index_build",
            &["index", "build", "--lexicon", "fixtures/lexicon.jsonl", "--variant", "rep3", "--out", "out/frames.fsix"],
        ),
        step(
            "index_search",
            &["--format", "table", "index", "search", "--index", "out/frames.fsix", "--query", "buy a soda", "-k", "5"],
        ),
        step(
            "retrieve_eval",
            &[
                "retrieve",
                "eval",
                "--dataset",
                "out/test.jsonl",
                "--index",
                "out/frames.fsix",
                "-k",
                "1,5,24",
                "--out",
                "out/retrieval.json",
                "--candidates-out",
                "out/candidates.jsonl",
            ],
        ),
        step(
            "identify_oracle",
            &[
                "--workers",
                "3",
                "identify",
                "--index",
                "out/frames.fsix",
                "--lexicon",
                "fixtures/lexicon.jsonl",
                "--dataset",
                "out/test.jsonl",
                "--chat",
                "mock:oracle",
                "--out",
                "out/pred_oracle.jsonl",
            ],
        ),
        step(
            "identify_gold_plus_unknown",
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
                "--chat",
                "mock:gold-plus-unknown",
                "--with-gold-count",
                "--out",
                "out/pred_gold_plus_unknown.jsonl",
            ],
        ),
        step(
            "eval_detect",
            &["eval", "detect", "--pred", "out/pred_oracle.jsonl", "--gold", "out/test.jsonl", "--out", "out/detect.json"],
        ),
        step(
            "eval_recall_at_k",
            &[
                "--format",
                "table",
                "eval",
                "recall-at-k",
                "--ranked",
                "out/candidates.jsonl",
                "--gold",
                "out/test.jsonl",
                "-k",
                "1,3,5,24",
                "--out",
                "out/recall.json",
            ],
        ),
        step(
            "eval_bleu",
            &["eval", "bleu", "--hyp", "fixtures/bleu_hyp.txt", "--ref", "fixtures/bleu_ref.txt", "--out", "out/bleu.json"],
        ),
        step(
            "eval_complexity",
            &["eval", "complexity", "--tokens", "20", "--lexicon-size", "1019", "--candidates", "24"],
        ),
        step(
            "lcq2f_build",
            &[
                "lcq2f",
                "build",
                "--questions",
                "fixtures/questions.jsonl",
                "--corpus",
                "fixtures/kb_corpus.jsonl",
                "--combined",
                "--out",
                "out/lcq2f",
            ],
        ),
        step(
            "lcq2f_plus_build",
            &[
                "--format",
                "table",
                "lcq2f",
                "build",
                "--questions",
                "fixtures/questions.jsonl",
                "--corpus",
                "fixtures/kb_corpus.jsonl",
                "--plus",
                "--lexicon",
                "fixtures/lexicon.jsonl",
                "--out",
                "out/lcq2f_plus",
            ],
        ),
    ];
    steps.extend(prompt_steps());
    steps
}

fn is_run_manifest(path: &Path) -> bool {
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    name.ends_with(".manifest.json") || name == "run.manifest.json"
}

fn collect_files(root: &Path, dir: &Path, into: &mut BTreeMap<String, Vec<u8>>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(root, &path, into);
        } else if !is_run_manifest(&path) {
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            into.insert(rel, std::fs::read(&path).unwrap());
        }
    }
}

/// Runs `steps` in `dir` and returns every artifact keyed by its golden path:
/// `stdout/<step>.txt` for console output and `out/...` for written files.
/// Run manifests are left out because they carry timestamps.
pub fn run_steps(dir: &Path, steps: &[Step]) -> BTreeMap<String, Vec<u8>> {
    let mut artifacts = BTreeMap::new();
    for s in steps {
        let out = run_in(dir, &s.args);
        assert!(
            out.status.success(),
            "step {} failed with {:?}\nstderr:\n{}",
            s.name,
            out.status,
            String::from_utf8_lossy(&out.stderr)
        );
        artifacts.insert(format!("stdout/{}.txt", s.name), out.stdout);
    }
    collect_files(dir, &dir.join("out"), &mut artifacts);
    artifacts
}

pub fn run_demo(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    run_steps(dir, &demo_steps())
}

/// Golden files under `tests/golden`, keyed like [`run_steps`] output.
pub fn load_goldens() -> BTreeMap<String, Vec<u8>> {
    let root = golden_dir();
    let mut goldens = BTreeMap::new();
    if root.exists() {
        for sub in ["stdout", "out"] {
            if root.join(sub).exists() {
                collect_files(&root, &root.join(sub), &mut goldens);
            }
        }
    }
    goldens
}

pub fn bless(artifacts: &BTreeMap<String, Vec<u8>>) {
    let root = golden_dir();
    let _ = std::fs::remove_dir_all(&root);
    for (rel, bytes) in artifacts {
        let path = root.join(rel);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, bytes).unwrap();
    }
}

/// Names of artifacts that are missing, extra or differ from the goldens.
pub fn golden_mismatches(artifacts: &BTreeMap<String, Vec<u8>>, goldens: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut bad = Vec::new();
    for (name, bytes) in artifacts {
        match goldens.get(name) {
            None => bad.push(format!("{name} (no golden)")),
            Some(g) if g != bytes => bad.push(format!("{name} (differs)")),
            Some(_) => {}
        }
    }
    for name in goldens.keys() {
        if !artifacts.contains_key(name) {
            bad.push(format!("{name} (not produced)"));
        }
    }
    bad
}
