mod common;

use std::fs;

use common::{labeled_tsv, p, predictions, run, stdout, write};

const METRICS_HEADER: &str =
    "model\tPrecision\tRecall\tAccuracy\tF1-Score\tMacro-Precision\tMacro-Recall\tMacro-F1";

fn train_linear(dir: &std::path::Path, model: &str, seed: &str, out: &str) -> std::process::Output {
    let train = dir.join("train.tsv");
    if !train.exists() {
        write(dir, "train.tsv", &labeled_tsv(40));
    }
    run(&["train", "--model", model, "--seed", seed, "--dataset", p(&train), "--out", p(&dir.join(out))])
}

#[test]
fn train_twice_gives_identical_archives_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let a = train_linear(dir.path(), "pac", "7", "a.fnd");
    let b = train_linear(dir.path(), "pac", "7", "b.fnd");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(fs::read(dir.path().join("a.fnd")).unwrap(), fs::read(dir.path().join("b.fnd")).unwrap());
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert_eq!(out.lines().next(), Some(METRICS_HEADER));
    assert!(out.lines().nth(1).unwrap().starts_with("pac\t"));
}

#[test]
fn missing_dataset_fails_without_archive() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("m.fnd");
    let o = run(&["train", "--model", "pac", "--dataset", p(&dir.path().join("nope.tsv")), "--out", p(&archive)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!archive.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.tsv", &labeled_tsv(10));
    let out = dir.path().join("m.fnd");
    assert_eq!(run(&["train", "--model", "xgboost", "--dataset", p(&train), "--out", p(&out)]).status.code(), Some(1));
    assert_eq!(run(&["train", "--dataset", p(&train), "--out", p(&out)]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let bad = write(dir.path(), "bad.toml", "[features]\nmode = \"bag\"\n");
    assert_eq!(run(&["--config", p(&bad), "train", "--model", "pac"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn config_file_supplies_paths_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "train.tsv", &labeled_tsv(20));
    let cfg = write(
        dir.path(),
        "run.toml",
        "seed = 3\nmodel = \"svm\"\n[paths]\ndataset = \"train.tsv\"\nout = \"svm.fnd\"\n[features]\nchar_max_features = 0\n",
    );
    let o = run(&["--config", p(&cfg), "train"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("svm\t"));
    let o = run(&["--config", p(&cfg), "train", "--model", "logreg", "--out", p(&dir.path().join("lr.fnd"))]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("logreg\t"));
    assert!(dir.path().join("svm.fnd").exists() && dir.path().join("lr.fnd").exists());
}

#[test]
fn single_record_and_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_linear(dir.path(), "pac", "1", "m.fnd").status.success());
    let archive = dir.path().join("m.fnd");

    let one = write(dir.path(), "one.tsv", "id\ttweet\nq1\tbleach cures the virus\n");
    let o = run(&["predict", "--members", p(&archive), "--dataset", p(&one)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("id\tlabel\tp_fake"));
    let rows = predictions(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, "q1");
    assert!((0.0..=1.0).contains(&rows[0].2));

    for empty in ["", "id\ttweet\n"] {
        let input = write(dir.path(), "empty.tsv", empty);
        let out = dir.path().join("pred.tsv");
        let o = run(&["predict", "--members", p(&archive), "--dataset", p(&input), "--out", p(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(fs::read_to_string(&out).unwrap(), "id\tlabel\tp_fake\n");
    }
}

#[test]
fn ensemble_of_three_is_the_mean_of_members() {
    let dir = tempfile::tempdir().unwrap();
    let names = [("pac", "1", "a.fnd"), ("svm", "2", "b.fnd"), ("logreg", "3", "c.fnd")];
    for (model, seed, out) in names {
        assert!(train_linear(dir.path(), model, seed, out).status.success());
    }
    let one = write(dir.path(), "one.tsv", "id\ttweet\nq\tcases confirmed after testing in the hospital\n");
    let mut member_p = Vec::new();
    for (_, _, archive) in names {
        let o = run(&["predict", "--members", p(&dir.path().join(archive)), "--dataset", p(&one)]);
        member_p.push(predictions(&stdout(&o))[0].2);
    }
    let members = names.map(|(_, _, a)| p(&dir.path().join(a)).to_string()).join(",");
    let o = run(&["predict", "--members", &members, "--dataset", p(&one)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ens = predictions(&stdout(&o));
    let mean = member_p.iter().sum::<f64>() / 3.0;
    assert!((ens[0].2 - mean).abs() < 1e-12, "{} vs {mean}", ens[0].2);
    assert_eq!(ens[0].1, if mean >= 0.5 { "fake" } else { "real" });
}

#[test]
fn predict_rejects_wrong_archive_version() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_linear(dir.path(), "pac", "1", "m.fnd").status.success());
    let path = dir.path().join("m.fnd");
    let mut bytes = fs::read(&path).unwrap();
    bytes[8..12].copy_from_slice(&99u32.to_le_bytes());
    fs::write(&path, bytes).unwrap();
    let input = write(dir.path(), "in.tsv", "id\ttweet\nx\thello\n");
    let o = run(&["predict", "--members", p(&path), "--dataset", p(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("version 99"));
}

fn gold(dir: &std::path::Path) -> std::path::PathBuf {
    write(dir, "gold.tsv", "id\ttweet\tlabel\na\tone\treal\nb\ttwo\treal\nc\tthree\tfake\n")
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let gold = gold(dir.path());
    let pred = write(dir.path(), "perfect.tsv", "id\tlabel\tp_fake\nc\tfake\t0.9\na\treal\t0.1\nb\treal\t0.2\n");
    let o = run(&["evaluate", "--predictions", p(&pred), "--dataset", p(&gold)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), format!("{METRICS_HEADER}\nperfect{}\n", "\t1.000000".repeat(7)));
}

#[test]
fn evaluate_hand_case_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let gold = gold(dir.path());
    let m1 = write(dir.path(), "m1.tsv", "id\tlabel\na\treal\nb\tfake\nc\tfake\n");
    let m2 = write(dir.path(), "m2.tsv", "id\tlabel\na\treal\nb\treal\nc\treal\n");
    let ens = write(dir.path(), "ens.tsv", "id\tlabel\na\treal\nb\treal\nc\tfake\n");
    let (out, confusion, mis) = (dir.path().join("m.tsv"), dir.path().join("c.tsv"), dir.path().join("x.tsv"));
    let preds = format!("{},{}", p(&m1), p(&m2));
    let o = run(&[
        "evaluate", "--predictions", &preds, "--ensemble", p(&ens), "--dataset", p(&gold), "--out", p(&out),
        "--confusion", p(&confusion), "--misclassified", p(&mis),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER);
    let cells: Vec<&str> = lines[1].split('\t').collect();
    assert_eq!(cells[0], "m1");
    // golds [real, real, fake], preds [real, fake, fake]
    assert_eq!(cells[3], "0.666667");
    assert_eq!(cells[4], "0.666667");
    // real: p 1, r 1/2, f1 2/3; fake: p 1/2, r 1, f1 2/3
    assert_eq!(&cells[5..], ["0.750000", "0.750000", "0.666667"]);
    assert!(lines[3].starts_with("ensemble\t1.000000"));

    let c = fs::read_to_string(&confusion).unwrap();
    assert!(c.contains("m1\treal\t1\t1\n"));
    assert!(c.contains("m2\tfake\t0\t1\n"));

    let report = fs::read_to_string(&mis).unwrap();
    assert_eq!(report, "id\ttext\tgold\tm1\tm2\tensemble\nb\ttwo\treal\t✗\t✓\t✓\nc\tthree\tfake\t✓\t✗\t✓\n");
}

#[test]
fn evaluate_lists_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let gold = gold(dir.path());
    let pred = write(dir.path(), "p.tsv", "id\tlabel\na\treal\nzz\tfake\n");
    let o = run(&["evaluate", "--predictions", p(&pred), "--dataset", p(&gold)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing: b, c"), "{err}");
    assert!(err.contains("not in gold: zz"), "{err}");
}

#[test]
fn preprocess_and_report_terms() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.tsv", "id\ttweet\tlabel\n1\tvirus kill kill\tfake\n2\ttest test lab\treal\n3\t#IndiaFightsCorona now\treal\n");
    let o = run(&["preprocess", "--dataset", p(&data)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "id\ttokens\n1\tviru kill kill\n2\ttest test lab\n3\tindia fight corona now\n");

    let o = run(&["report-terms", "--dataset", p(&data), "--label", "fake", "--k", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "rank\ttoken\tcount\n1\tkill\t2\n");

    let stop = write(dir.path(), "stop.txt", "kill\n");
    let o = run(&["report-terms", "--dataset", p(&data), "--k", "1", "--stopwords", p(&stop)]);
    assert_eq!(stdout(&o), "rank\ttoken\tcount\n1\tviru\t1\n");
}
