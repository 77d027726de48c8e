//! End-to-end checks of the binary: the full pipeline on a toy fixture,
//! exit codes, and rerun determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gazeboost"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn gazeboost")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Ten training sentences with five correlated targets, two test
/// sentences, annotations, two lexicons and a bigram file.
fn write_fixture(dir: &Path) -> PathBuf {
    let words = [
        "the", "quick", "brown", "fox", "jumps", "over", "lazy", "dog", "a", "small",
        "bird", "sang", "loudly", "today", "rivers", "flow",
    ];
    let mut train = String::from("sentence_id,word_id,word,nFix,FFD,GPT,TRT,fixProp\n");
    for s in 0..10u32 {
        let len = 4 + (s % 3) as usize;
        for w in 0..len {
            let word = words[(s as usize * 3 + w * 2) % words.len()];
            let base = (word.len() * 7 % 23) as f64 + w as f64;
            train.push_str(&format!(
                "{},{},{word},{},{},{},{},{}\n",
                s + 1,
                w + 1,
                base,
                base / 2.0,
                base / 3.0,
                base / 1.5,
                base * 2.0
            ));
        }
    }
    fs::write(dir.join("train.csv"), train).unwrap();

    let mut test = String::from("sentence_id,word_id,word\n");
    for s in 0..2u32 {
        for w in 0..5usize {
            let word = words[(s as usize * 5 + w) % words.len()];
            test.push_str(&format!("{},{},{word}\n", s + 100, w + 1));
        }
    }
    fs::write(dir.join("test.csv"), test).unwrap();

    let mut ann = String::new();
    for s in 0..10u32 {
        ann.push_str(&format!("{}\t1\tthe\tDT\n", s + 1));
        ann.push_str(&format!("{}\t2\tword\tNN\n", s + 1));
    }
    fs::write(dir.join("annotations.tsv"), ann).unwrap();
    let mut test_ann = String::new();
    for s in 0..2u32 {
        test_ann.push_str(&format!("{}\t1\tthe\tDT\n", s + 100));
    }
    fs::write(dir.join("test_annotations.tsv"), test_ann).unwrap();

    let mut freq = String::from("word\tcount\n");
    let mut norms = String::from("word\taoa\tfam\n");
    for (i, w) in words.iter().enumerate() {
        freq.push_str(&format!("{w}\t{}\n", (i + 1) * 100));
        norms.push_str(&format!("{w}\t{}\t{}\n", i as f64 / 2.0, (i % 5) as f64));
    }
    fs::write(dir.join("freq.tsv"), freq).unwrap();
    fs::write(dir.join("norms.tsv"), norms).unwrap();

    let mut bigrams = String::from("#N\t10000\n");
    for (i, w) in words.iter().enumerate() {
        bigrams.push_str(&format!("1\t{w}\t{}\n", (i + 1) * 20));
    }
    for pair in words.windows(2) {
        bigrams.push_str(&format!("2\t{}\t{}\t{}\n", pair[0], pair[1], 3));
    }
    fs::write(dir.join("bigrams.tsv"), bigrams).unwrap();

    let manifest = serde_json::json!({
        "train_csv": "train.csv",
        "test_csv": "test.csv",
        "annotations": "annotations.tsv",
        "test_annotations": "test_annotations.tsv",
        "lexicons": [
            {"path": "freq.tsv", "name": "freq", "group": "frequency"},
            {"path": "norms.tsv", "name": "norms", "group": "norms"}
        ],
        "bigrams": "bigrams.tsv",
        "train_config": {
            "objective": "mae",
            "learning_rate": 0.3,
            "num_leaves": 4,
            "max_bin": 32,
            "min_data_in_bin": 1,
            "min_data_in_leaf": 2,
            "n_iter": 30,
            "early_stopping_rounds": 5,
            "seed": 7
        },
        "cv_folds": 5,
        "seed": 42,
        "out_dir": "out"
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

#[test]
fn full_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());

    // features: deterministic across reruns.
    assert_ok(&run_in(dir.path(), &["--config", "manifest.json", "features"]));
    let first = fs::read(dir.path().join("out/features.csv")).unwrap();
    let manifest_first = fs::read(dir.path().join("out/features.manifest.json")).unwrap();
    assert_ok(&run_in(dir.path(), &["--config", "manifest.json", "features"]));
    assert_eq!(first, fs::read(dir.path().join("out/features.csv")).unwrap());
    assert_eq!(
        manifest_first,
        fs::read(dir.path().join("out/features.manifest.json")).unwrap()
    );
    // 3 length + 2 position + 4 categorical + 1 freq + 2 norms + 8 AM.
    let header = String::from_utf8_lossy(&first);
    let n_cols = header.lines().next().unwrap().split(',').count();
    assert_eq!(n_cols, 2 + 20);

    // cv writes a report with five folds per DV.
    assert_ok(&run_in(dir.path(), &["--config", "manifest.json", "cv"]));
    let cv: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/cv_report.json")).unwrap())
            .unwrap();
    assert_eq!(cv["folds"], 5);
    assert_eq!(cv["per_dv"].as_array().unwrap().len(), 5);
    for dv in cv["per_dv"].as_array().unwrap() {
        assert_eq!(dv["fold_mae"].as_array().unwrap().len(), 5);
        assert!(dv["picked_n_iter"].is_number());
    }

    // train with the CV-picked iteration counts, then predict the test
    // split.
    assert_ok(&run_in(
        dir.path(),
        &["--config", "manifest.json", "train", "--iters", "out/cv_report.json"],
    ));
    for dv in ["nFix", "FFD", "GPT", "TRT", "fixProp"] {
        assert!(dir.path().join(format!("out/model_{dv}.json")).exists());
    }
    assert_ok(&run_in(dir.path(), &["--config", "manifest.json", "predict"]));
    let preds = fs::read_to_string(dir.path().join("out/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 10);
    assert_eq!(
        preds.lines().next().unwrap(),
        "sentence_id,word_id,nFix,FFD,GPT,TRT,fixProp"
    );
    for line in preds.lines().skip(1) {
        for v in line.split(',').skip(2) {
            let v: f64 = v.parse().unwrap();
            assert!((0.0..=100.0).contains(&v), "{v} outside [0, 100]");
        }
    }

    // tune with a small trial budget.
    assert_ok(&run_in(
        dir.path(),
        &["--config", "manifest.json", "--dv", "nFix", "tune", "--trials", "3"],
    ));
    let tune: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/tune_nFix.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(tune["trials"].as_array().unwrap().len(), 3);

    // ablation includes the reference row at exactly 0%.
    assert_ok(&run_in(
        dir.path(),
        &["--config", "manifest.json", "--dv", "nFix", "ablate"],
    ));
    let ablate: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/ablation_report.json")).unwrap(),
    )
    .unwrap();
    let rows = ablate["rows"].as_array().unwrap();
    assert_eq!(rows[0]["pct_mean"], 0.0);
    // Reference plus one row per group present in the fixture matrix.
    assert_eq!(rows.len(), 1 + 6);

    // stepwise baseline under the same folds.
    assert_ok(&run_in(
        dir.path(),
        &["--config", "manifest.json", "--dv", "nFix", "baseline"],
    ));
    assert!(dir.path().join("out/baseline_report.json").exists());
}

#[test]
fn score_from_direct_maes_reproduces_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["score", "--maes", "3.879,0.655,2.197,1.524,10.812"],
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("3.8134"), "{stdout}");
}

#[test]
fn score_perfect_predictions_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    // Predictions equal to gold: copy targets into a predictions file.
    let gold = fs::read_to_string(dir.path().join("train.csv")).unwrap();
    let mut pred = String::from("sentence_id,word_id,nFix,FFD,GPT,TRT,fixProp\n");
    for line in gold.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        pred.push_str(&format!(
            "{},{},{}\n",
            fields[0],
            fields[1],
            fields[3..8].join(",")
        ));
    }
    fs::write(dir.path().join("pred.csv"), pred).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "score",
            "--pred",
            "pred.csv",
            "--gold",
            "train.csv",
            "--json",
            "score.json",
        ],
    );
    assert_ok(&out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("score.json")).unwrap()).unwrap();
    assert_eq!(report["official_score"], 0.0);
}

#[test]
fn missing_resource_path_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    fs::remove_file(dir.path().join("freq.tsv")).unwrap();
    let out = run_in(dir.path(), &["--config", "manifest.json", "features"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("freq.tsv"), "{stderr}");
}

#[test]
fn schema_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = write_fixture(dir.path());
    assert_ok(&run_in(
        dir.path(),
        &["--config", "manifest.json", "--dv", "nFix", "train"],
    ));
    // Retarget the manifest at a reduced feature set; the trained model
    // no longer matches.
    let mut manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    manifest["feature_groups"] = serde_json::json!(["length", "position"]);
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    let out = run_in(
        dir.path(),
        &["--config", "manifest.json", "--dv", "nFix", "predict"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    write_fixture(dir1.path());
    write_fixture(dir2.path());
    assert_ok(&run_in(
        dir1.path(),
        &["--config", "manifest.json", "--dv", "nFix", "--threads", "1", "cv"],
    ));
    assert_ok(&run_in(
        dir2.path(),
        &["--config", "manifest.json", "--dv", "nFix", "--threads", "4", "cv"],
    ));
    let a = fs::read(dir1.path().join("out/cv_report.json")).unwrap();
    let b = fs::read(dir2.path().join("out/cv_report.json")).unwrap();
    assert_eq!(a, b);
}
