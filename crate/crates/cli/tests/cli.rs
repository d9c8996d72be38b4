use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steinerwl")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let train = String::from_utf8(ok(dir.path(), &["train", "--help"]).stdout).unwrap();
    for want in ["--lr <LR>", "[default: 0.0001]", "[default: 0.00001]", "--batch-size", "[default: 16]", "--threshold", "[default: 0.3]"] {
        assert!(train.contains(want), "train help lacks {want}");
    }
    let eval = String::from_utf8(ok(dir.path(), &["eval", "--help"]).stdout).unwrap();
    assert!(eval.contains("[default: 3:64]"));
    assert!(eval.contains("[default: 0.3]"));
    let fine = String::from_utf8(ok(dir.path(), &["fine-tune", "--help"]).stdout).unwrap();
    assert!(fine.contains("[default: 0.00001]"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["eval", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn operational_errors_are_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["eval", "--nets", "missing.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("steinerwl-error: io: "), "{err}");

    std::fs::write(dir.path().join("bad.jsonl"), "{\"id\":\"a\",\"pins\":[[0,0],[1,1],[2,2]]}\nnot json\n").unwrap();
    let err = String::from_utf8(run(dir.path(), &["eval", "--nets", "bad.jsonl"]).stderr).unwrap();
    assert!(err.starts_with("steinerwl-error: malformed: ") && err.contains("bad.jsonl:2:"), "{err}");
}

#[test]
fn gen_data_is_reproducible_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--count", "50", "--degrees", "5:8", "--seed", "7", "--out", "a.jsonl"]);
    ok(d, &["--seed", "7", "gen-data", "--count", "50", "--degrees", "5:8", "--out", "b.jsonl"]);
    assert_eq!(read(d, "a.jsonl"), read(d, "b.jsonl"));
    assert_eq!(read(d, "a.jsonl").lines().count(), 51);
    let m: serde_json::Value = serde_json::from_str(&read(d, "a.jsonl.manifest.json")).unwrap();
    assert_eq!(m["seed"], 7);
    assert_eq!(m["command"], "gen-data");
    assert!(m["config_sha256"].as_str().unwrap().len() == 64);

    // Replaying the recorded command line regenerates the same file.
    std::fs::remove_file(d.join("a.jsonl")).unwrap();
    let argv: Vec<String> = m["argv"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    ok(d, &argv[1..].iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(read(d, "a.jsonl"), read(d, "b.jsonl"));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.kv"), "count = 5\ndegrees = 4:4\n").unwrap();
    ok(d, &["--config", "c.kv", "gen-data", "--out", "a.jsonl"]);
    assert_eq!(read(d, "a.jsonl").lines().count(), 6);
    ok(d, &["--config", "c.kv", "gen-data", "--count", "3", "--out", "b.jsonl"]);
    let b = read(d, "b.jsonl");
    assert_eq!(b.lines().count(), 4);
    assert!(b.contains("degrees=4:4"));
}

#[test]
fn eval_writes_deterministic_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--count", "40", "--degrees", "3:7", "--out", "d.jsonl"]);
    ok(d, &["eval", "--nets", "d.jsonl", "--methods", "mst,exact", "--out", "r1.csv"]);
    ok(d, &["eval", "--nets", "d.jsonl", "--methods", "mst,exact", "--out", "r2.csv"]);
    assert_eq!(read(d, "r1.csv"), read(d, "r2.csv"));
    assert_eq!(read(d, "r1.summary.csv"), read(d, "r2.summary.csv"));
    let csv = read(d, "r1.csv");
    assert!(csv.starts_with("netlist,net,degree,reference,wl_ref,wl_mst,wl_i1s,wl_exact,wl_model"));
    assert_eq!(csv.lines().count(), 41);
    let summary = read(d, "r1.summary.csv");
    assert_eq!(summary.lines().filter(|l| l.starts_with("degree,") && l.contains(",mst,")).count(), 7);
    assert!(d.join("r1.timing.csv").exists());

    let rep = String::from_utf8(ok(d, &["report", "--input", "r1.csv", "--out", "s.csv"]).stdout).unwrap();
    assert!(rep.contains("overall"));
    assert_eq!(read(d, "s.csv"), summary);
}

#[test]
fn bookshelf_netlists_are_filtered() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.pl"), "UCLA pl 1.0\na 0 0 : N\nb 10 3 : N\nc 4 9 : N\ne 7 7 : N\n").unwrap();
    std::fs::write(d.join("t.nets"), "UCLA nets 1.0\nNumNets : 2\nNetDegree : 2 two\n a I\n b O\nNetDegree : 4 four\n a I\n b O\n c I\n e I\n").unwrap();
    let o = ok(d, &["eval", "--nets", "t.nets,t.pl", "--methods", "mst,i1s,exact"]);
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.contains("t,four,4,exact"));
    assert!(String::from_utf8(o.stderr).unwrap().contains("1 excluded"));
}

#[test]
fn train_predict_and_fine_tune_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--count", "60", "--degrees", "4:6", "--out", "d.jsonl"]);
    let small = ["--layers", "1", "--hidden", "8", "--mlp-hidden", "8", "--steps", "10", "--val-count", "10", "--val-every", "5"];
    let mut args = vec!["train", "--data", "d.jsonl", "--lr", "0.001", "--out", "m.nstn"];
    args.extend(small);
    ok(d, &args);
    let metrics = read(d, "m.metrics.csv");
    assert!(metrics.starts_with("step,loss,val_precision,val_recall,val_wl_error_pct,wallclock_ms"));
    assert_eq!(metrics.lines().count(), 11);
    assert!(std::fs::read(d.join("m.nstn")).unwrap().starts_with(b"NSTN1"));

    let out = String::from_utf8(ok(d, &["predict", "--checkpoint", "m.nstn", "--nets", "d.jsonl"]).stdout).unwrap();
    assert_eq!(out.lines().count(), 61);
    for line in out.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 5);
        assert!(f[3].parse::<i64>().unwrap() > 0);
    }

    ok(d, &["fine-tune", "--checkpoint", "m.nstn", "--data", "d.jsonl", "--steps", "0", "--val-count", "10", "--out", "same.nstn"]);
    assert_eq!(std::fs::read(d.join("m.nstn")).unwrap(), std::fs::read(d.join("same.nstn")).unwrap());

    let o = run(
        d,
        &["fine-tune", "--checkpoint", "m.nstn", "--data", "d.jsonl", "--expect-arch", "layers=2,hidden=8,mlp_hidden=8", "--out", "x.nstn"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("steinerwl-error: architecture_mismatch: "));
    assert!(!d.join("x.nstn").exists());

    let o = ok(d, &["bench", "--nets", "d.jsonl", "--checkpoints", "m.nstn", "--thresholds", "0.3,0.5", "--batch-sizes", "1,4"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 5);
}

#[test]
fn label_turns_netlists_into_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("n.jsonl"), "{\"id\":\"x\",\"pins\":[[0,0],[2,4],[5,1],[3,3]]}\n{\"id\":\"y\",\"pins\":[[0,0],[9,9]]}\n").unwrap();
    ok(d, &["label", "--nets", "n.jsonl", "--out", "l.jsonl"]);
    let text = read(d, "l.jsonl");
    assert!(text.starts_with("# "));
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("\"provenance\":\"exact\""));
}
