use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write_config(dir: &Path, run: &str) -> PathBuf {
    let path = dir.join(format!("{run}.toml"));
    let text = format!(
        r#"
run_dir = "{}"
seed = 3
resolution = 16
pretrain_matrices = 6
finetune_matrices = 2
test_matrices = 3
configs_per_matrix = 20
k_list = [1, 5]

[corpus]
count = 12
rows = [64, 400]
seed = 9

[pretrain]
epochs = 2
lr = 0.001
batch = 16
pairs_per_matrix = 32
val_fraction = 0.2

[finetune]
epochs = 2
lr = 0.001
batch = 16
pairs_per_matrix = 32

[autoencoder]
epochs = 50
"#,
        dir.join(run).display()
    );
    fs::write(&path, text).unwrap();
    path
}

fn sparsetune(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsetune"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(config: &Path, args: &[&str]) -> Output {
    let out = sparsetune(config, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn full_pipeline_emits_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run");
    for cmd in ["gen-corpus", "gen-data", "train-ae", "pretrain", "finetune", "no-transfer", "eval"] {
        ok(&cfg, &[cmd]);
    }
    let run = tmp.path().join("run");
    for sub in ["corpus", "datasets", "checkpoints", "reports"] {
        assert!(run.join(sub).is_dir(), "{sub} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("reports/eval_transfer.json")).unwrap()).unwrap();
    let report = &summary["report"];
    assert_eq!(report["platform"], "spade");
    assert_eq!(report["matrices"].as_array().unwrap().len(), 3);
    assert!(report["optimal_speedup"].as_f64().unwrap() >= report["speedups"][0].as_f64().unwrap());
    assert_eq!(summary["seed"], 3);
    assert!(!summary["oracle_version"].as_str().unwrap().is_empty());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("checkpoints/finetune.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"][0]["path"], "checkpoints/source.json");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);

    ok(&cfg, &["eval", "--checkpoint", run.join("checkpoints/no_transfer.json").to_str().unwrap()]);
    assert!(run.join("reports/eval_no_transfer_matrices.csv").exists());

    // tune on a 256-configuration platform prints exactly k rows
    let matrix = fs::read_dir(run.join("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "mtx"))
        .unwrap();
    let out = ok(
        &cfg,
        &[
            "tune",
            "--matrix",
            matrix.to_str().unwrap(),
            "--checkpoint",
            run.join("checkpoints/transfer.json").to_str().unwrap(),
            "--k",
            "5",
        ],
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "rank,config,score");
    assert_eq!(lines.len() - 1, 5);
    assert!(lines[1].starts_with("1,"));

    // a cpu checkpoint cannot be evaluated on spade
    let out = sparsetune(
        &cfg,
        &["eval", "--checkpoint", run.join("checkpoints/source.json").to_str().unwrap(), "--platform", "spade"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing"));
}

#[test]
fn corpus_manifests_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a");
    let b = write_config(tmp.path(), "b");
    ok(&a, &["gen-corpus"]);
    ok(&b, &["gen-corpus"]);
    let read = |run: &str, file: &str| fs::read_to_string(tmp.path().join(run).join("corpus").join(file)).unwrap();
    assert_eq!(read("a", "manifest.csv"), read("b", "manifest.csv"));
    assert_eq!(read("a", "gen-corpus.manifest.json"), read("b", "gen-corpus.manifest.json"));

    let csv = read("a", "manifest.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    for kind in ["uniform", "banded", "power_law"] {
        assert!(rows.iter().any(|r| r.starts_with(kind)), "{kind} missing");
    }
}

#[test]
fn stale_oracle_version_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run");
    ok(&cfg, &["gen-corpus"]);
    ok(&cfg, &["gen-data"]);
    let path = tmp.path().join("run/datasets/source.jsonl");
    let text = fs::read_to_string(&path).unwrap().replace("surrogate-v1", "surrogate-v0");
    fs::write(&path, text).unwrap();
    ok(&cfg, &["train-ae"]);
    let out = sparsetune(&cfg, &["pretrain"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
}

#[test]
fn missing_artifacts_fail_with_nonzero_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run");
    let out = sparsetune(&cfg, &["gen-data"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gen-corpus"));
}
