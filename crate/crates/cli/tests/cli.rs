use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tard::datagen::read_dataset;
use tard::eval::read_csv;
use tard::pipeline::{load_checkpoint, predict, prepare};

const SMALL: &str = r#"
val_events = 10
test_events = 20
seeds = [3, 4]

[source]
num_events = 40
size_dist = [4, 12]

[train]
epochs = 4
"#;

fn tard(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tard"))
        .current_dir(dir)
        .args(args)
        .env("TARD_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = tard(dir, args);
    assert!(
        out.status.success(),
        "tard {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    ok(
        dir.path(),
        &["gen", "--config", "small.toml", "--out", "data"],
    );
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn gen_writes_four_files_with_configured_counts() {
    let dir = setup();
    let data = dir.path().join("data");
    let mut names: Vec<String> = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["meta.json", "test.jsonl", "train.jsonl", "val.jsonl"]
    );
    assert_eq!(read_dataset(&data.join("train.jsonl")).unwrap().len(), 40);
    assert_eq!(read_dataset(&data.join("val.jsonl")).unwrap().len(), 10);
    assert_eq!(read_dataset(&data.join("test.jsonl")).unwrap().len(), 20);
    let meta = fs::read_to_string(data.join("meta.json")).unwrap();
    assert!(meta.contains("config_hash"));
    assert!(meta.contains("rotation_angle"));
}

#[test]
fn gen_is_deterministic_and_creates_nested_dirs() {
    let dir = setup();
    ok(
        dir.path(),
        &["gen", "--config", "small.toml", "--out", "again/nested"],
    );
    for f in ["train.jsonl", "val.jsonl", "test.jsonl", "meta.json"] {
        assert_eq!(
            fs::read(dir.path().join("data").join(f)).unwrap(),
            fs::read(dir.path().join("again/nested").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn train_writes_a_valid_checkpoint_and_echoes_overrides() {
    let dir = setup();
    let out = ok(
        dir.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--alpha1",
            "0.25",
            "--out",
            "run",
        ],
    );
    let err = stderr(&out);
    assert!(err.contains("alpha1 = 0.25"), "{err}");
    assert!(err.contains("config_hash = "));
    assert!(stdout(&out).starts_with("L_m\t"));
    let model = load_checkpoint(&dir.path().join("run/checkpoint.json")).unwrap();
    assert_eq!(model.config.alpha1, 0.25);
}

#[test]
fn corrupt_dataset_reports_the_line() {
    let dir = setup();
    let path = dir.path().join("data/train.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{\"id\": \"broken\"";
    fs::write(&path, lines.join("\n")).unwrap();
    let out = tard(
        dir.path(),
        &["train", "--config", "small.toml", "--out", "run"],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn eval_prints_four_metric_columns_and_writes_records() {
    let dir = setup();
    ok(
        dir.path(),
        &["train", "--config", "small.toml", "--out", "run"],
    );
    let out = ok(
        dir.path(),
        &[
            "eval",
            "--config",
            "small.toml",
            "--checkpoint",
            "run/checkpoint.json",
            "--out",
            "run",
        ],
    );
    let row = stdout(&out);
    assert_eq!(row.trim().split('\t').count(), 4, "{row}");
    let events = fs::read_to_string(dir.path().join("run/events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 20);
    let metrics = fs::read_to_string(dir.path().join("run/metrics.json")).unwrap();
    assert!(metrics.contains("config_hash"));
}

#[test]
fn eval_without_adaptation_matches_plain_inference() {
    let dir = setup();
    ok(
        dir.path(),
        &["train", "--config", "small.toml", "--out", "run"],
    );
    ok(
        dir.path(),
        &[
            "eval",
            "--config",
            "small.toml",
            "--checkpoint",
            "run/checkpoint.json",
            "--ttt-steps",
            "0",
            "--out",
            "run",
        ],
    );
    let model = load_checkpoint(&dir.path().join("run/checkpoint.json")).unwrap();
    let test = prepare(
        &read_dataset(&dir.path().join("data/test.jsonl")).unwrap(),
        model.config.adjacency,
    )
    .unwrap();
    let records = fs::read_to_string(dir.path().join("run/events.jsonl")).unwrap();
    for (line, s) in records.lines().zip(&test) {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        let plain = predict(&s.graph, &model.params).unwrap();
        assert_eq!(r["predicted"].as_u64().unwrap() as usize, plain.class);
        let probs: Vec<f64> = r["probs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        assert_eq!(probs, plain.probs);
    }
}

#[test]
fn eval_rejects_mismatched_feature_dims() {
    let dir = setup();
    ok(
        dir.path(),
        &["train", "--config", "small.toml", "--out", "run"],
    );
    fs::write(
        dir.path().join("wide.toml"),
        SMALL.replace("[source]", "[source]\nfeature_dim = 5"),
    )
    .unwrap();
    ok(
        dir.path(),
        &["gen", "--config", "wide.toml", "--out", "wide"],
    );
    let out = tard(
        dir.path(),
        &[
            "eval",
            "--config",
            "small.toml",
            "--checkpoint",
            "run/checkpoint.json",
            "--data",
            "wide",
            "--out",
            "run",
        ],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("feature dim"), "{}", stderr(&out));
}

#[test]
fn ablate_writes_one_row_per_variant_and_seed_repeatably() {
    let dir = setup();
    ok(
        dir.path(),
        &["ablate", "--config", "small.toml", "--out", "a"],
    );
    ok(
        dir.path(),
        &["ablate", "--config", "small.toml", "--out", "b"],
    );
    let (hash, rows) = read_csv(&dir.path().join("a/ablation.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(hash.len(), 16);
    for seed in [3, 4] {
        let variants: Vec<&str> = rows
            .iter()
            .filter(|r| r.seed == seed)
            .map(|r| r.variant.as_str())
            .collect();
        assert_eq!(variants, ["TARD", "TARD-constraint", "TARD-ttt"]);
    }
    assert_eq!(
        fs::read(dir.path().join("a/ablation.csv")).unwrap(),
        fs::read(dir.path().join("b/ablation.csv")).unwrap()
    );
    let svg = fs::read_to_string(dir.path().join("a/ablation.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn sweep_has_nine_rows_per_seed() {
    let dir = setup();
    let out = ok(
        dir.path(),
        &[
            "sweep",
            "alpha2",
            "--config",
            "small.toml",
            "--seed",
            "7",
            "--out",
            "s",
        ],
    );
    assert_eq!(stdout(&out).lines().count(), 9);
    let (_, rows) = read_csv(&dir.path().join("s/sweep_alpha2.csv")).unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.seed == 7));
    assert!(dir.path().join("s/sweep_alpha2.svg").exists());
}

#[test]
fn invalid_configs_fail_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[train]\nalpha1 = -1.0\n").unwrap();
    let out = tard(
        dir.path(),
        &["gen", "--config", "bad.toml", "--out", "data"],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("alpha1"));
    assert!(!dir.path().join("data").exists());

    fs::write(dir.path().join("typo.toml"), "[train]\nalpah1 = 1.0\n").unwrap();
    let out = tard(dir.path(), &["gen", "--config", "typo.toml"]);
    assert!(!out.status.success());

    let out = tard(dir.path(), &["gen", "--mode", "sideways"]);
    assert!(!out.status.success());

    let out = tard(dir.path(), &["train", "--data", "missing", "--out", "run"]);
    assert!(!out.status.success());
}
