//! Command-level checks: exit codes, config precedence, and bit-identical
//! reruns from a recorded run_config.txt.

use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emopred"))
}

fn write_toy_dataset(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let tweets = dir.join("tweets.txt");
    let labels = dir.join("labels.txt");
    let mut t = String::new();
    let mut l = String::new();
    let happy = ["great day", "so happy", "love this", "we win", "best ever"];
    let sad = ["awful day", "so sad", "hate this", "we lost", "worst ever"];
    for i in 0..40 {
        let bank = if i % 2 == 0 { &happy } else { &sad };
        t.push_str(bank[i % bank.len()]);
        t.push('\n');
        l.push_str(if i % 2 == 0 { "0\n" } else { "1\n" });
    }
    std::fs::write(&tweets, t).unwrap();
    std::fs::write(&labels, l).unwrap();
    (tweets, labels)
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let output = bin().arg("bogus").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("Usage"), "stderr: {}", stderr);
}

#[test]
fn runtime_error_exits_1() {
    let output = bin()
        .args([
            "stats",
            "--input",
            "/definitely/missing.txt",
            "--output",
            "/tmp/x",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    let output = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--out-dir"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("bogus_key"));
}

#[test]
fn preprocess_filter_round_trips_simple_lines() {
    let mut child = bin()
        .arg("preprocess")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"Hello WORLD :)\n@user check www.example.com\n")
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    let got = String::from_utf8(output.stdout).unwrap();
    assert_eq!(got, "hello world <allcaps> <happy>\n<user> check <url>\n");
}

#[test]
fn train_rerun_from_recorded_config_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (tweets, labels) = write_toy_dataset(dir.path());
    let run1 = dir.path().join("run1");
    let output = bin()
        .args(["train", "--train-text"])
        .arg(&tweets)
        .arg("--train-labels")
        .arg(&labels)
        .args([
            "--classes",
            "2",
            "--embed-dim",
            "6",
            "--hidden-size",
            "5",
            "--batch-size",
            "8",
            "--max-epochs",
            "2",
            "--patience",
            "2",
            "--seed",
            "11",
            "--split",
            "0.7,0.15,0.15",
            "--out-dir",
        ])
        .arg(&run1)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "first run failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let run2 = dir.path().join("run2");
    let output = bin()
        .args(["train", "--config"])
        .arg(run1.join("run_config.txt"))
        .arg("--out-dir")
        .arg(&run2)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "rerun failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    for file in ["checkpoint.json", "history.tsv", "run_config.txt"] {
        let a = std::fs::read(run1.join(file)).unwrap();
        let b = std::fs::read(run2.join(file)).unwrap();
        assert_eq!(a, b, "{} differs between runs", file);
    }
}

#[test]
fn cli_flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "a b a b\nb a b a\n").unwrap();
    let embed_cfg = dir.path().join("embed.cfg");
    std::fs::write(&embed_cfg, "dim = 4\nepochs = 1\nmin_count = 1\nseed = 3\n").unwrap();
    let out1 = dir.path().join("e1");
    let status = bin()
        .args(["embed", "--corpus"])
        .arg(&corpus)
        .arg("--config")
        .arg(&embed_cfg)
        .arg("--out-dir")
        .arg(&out1)
        .status()
        .unwrap();
    assert!(status.success());
    let resolved = std::fs::read_to_string(out1.join("run_config.txt")).unwrap();
    assert!(resolved.contains("dim = 4"), "resolved: {}", resolved);

    // CLI --dim beats the config file's dim.
    let out2 = dir.path().join("e2");
    let status = bin()
        .args(["embed", "--corpus"])
        .arg(&corpus)
        .arg("--config")
        .arg(&embed_cfg)
        .args(["--dim", "6", "--out-dir"])
        .arg(&out2)
        .status()
        .unwrap();
    assert!(status.success());
    let resolved = std::fs::read_to_string(out2.join("run_config.txt")).unwrap();
    assert!(resolved.contains("dim = 6"), "resolved: {}", resolved);
    let header = std::fs::read_to_string(out2.join("vectors.txt")).unwrap();
    assert!(header.starts_with(&format!("{} 6\n", header.split(' ').next().unwrap())));
}
