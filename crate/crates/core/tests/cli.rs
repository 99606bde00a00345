//! Black-box tests of the command-line binary: exit codes, artifact
//! layout, config embedding, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stargraph"));
    // isolate from the ambient environment
    cmd.env_remove("STARGRAPH_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Two fixed, well-separated static blobs: trains in seconds even unoptimized.
fn tiny_spec_json() -> &'static str {
    r#"{
      "classes": [
        {"name": "a", "centroids": [{"base": [1.0, 1.0, 0.5], "amplitude": [0,0,0], "frequency": [0,0,0], "phase": [0,0,0], "drift": [0,0,0]}]},
        {"name": "b", "centroids": [{"base": [3.0, 1.0, 0.5], "amplitude": [0,0,0], "frequency": [0,0,0], "phase": [0,0,0], "drift": [0,0,0]}]}
      ],
      "points_min": 2,
      "points_max": 4,
      "sigma": 0.05,
      "fps": 10.0,
      "seq_len": 4
    }"#
}

fn write_tiny_dataset(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.json");
    std::fs::write(&spec, tiny_spec_json()).unwrap();
    let data = dir.join("tiny.jsonl");
    let out = run(bin()
        .args(["generate", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&data)
        .args(["--n-per-class", "6", "--seed", "3"]));
    assert_eq!(code(&out), 0, "generate failed: {}", stderr(&out));
    data
}

fn train_tiny(dir: &Path, data: &Path) -> PathBuf {
    let run_dir = dir.join("run");
    let out = run(bin()
        .args(["train", "--input"])
        .arg(data)
        .arg("--out")
        .arg(&run_dir)
        .args([
            "--epochs",
            "3",
            "--validate-every",
            "1",
            "--patience",
            "2",
            "--fc-dim",
            "6",
            "--gcn-dims",
            "5,4",
            "--lstm-hidden",
            "3",
            "--seed",
            "3",
        ]));
    assert_eq!(code(&out), 0, "train failed: {}", stderr(&out));
    run_dir
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(bin().arg("--help"))), 0);
    assert_eq!(code(&run(bin().arg("--version"))), 0);
    let out = run(bin().args(["train", "--help"]));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("--graph"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(bin().args(["generate", "--does-not-exist"]));
    assert_eq!(code(&out), 1);
}

#[test]
fn generate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl.gz");
    let b = dir.path().join("b.jsonl.gz");
    let c = dir.path().join("c.jsonl.gz");
    for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = run(bin()
            .args(["generate", "--out"])
            .arg(path)
            .args(["--n-per-class", "2", "--seed", seed]));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap(), "same seed, different bytes");
    assert_ne!(bytes_a, std::fs::read(&c).unwrap(), "different seed, same bytes");
}

#[test]
fn seed_env_var_matches_explicit_flag() {
    let dir = tempfile::tempdir().unwrap();
    let via_env = dir.path().join("env.jsonl");
    let via_flag = dir.path().join("flag.jsonl");
    let out = run(bin()
        .env("STARGRAPH_SEED", "11")
        .args(["generate", "--out"])
        .arg(&via_env)
        .args(["--n-per-class", "2"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(bin()
        .args(["generate", "--out"])
        .arg(&via_flag)
        .args(["--n-per-class", "2", "--seed", "11"]));
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(&via_env).unwrap(), std::fs::read(&via_flag).unwrap());
}

#[test]
fn generate_scales_with_n_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.jsonl");
    let out = run(bin()
        .args(["generate", "--out"])
        .arg(&path)
        .args(["--n-per-class", "10", "--seed", "1"]));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("40 sequences"), "stdout: {}", stdout(&out));
}

#[test]
fn invalid_spec_leaves_no_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("broken.json");
    std::fs::write(&spec, "{\"classes\": []").unwrap();
    let target = dir.path().join("out.jsonl");
    let out = run(bin()
        .args(["generate", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&target)
        .args(["--seed", "1"]));
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(!target.exists(), "partial file left behind");

    // valid JSON but an impossible spec is also a usage error
    std::fs::write(&spec, tiny_spec_json().replace("\"sigma\": 0.05", "\"sigma\": -1.0")).unwrap();
    let out = run(bin()
        .args(["generate", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&target)
        .args(["--seed", "1"]));
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(!target.exists());
}

#[test]
fn unknown_graph_type_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let out = run(bin()
        .args(["train", "--input"])
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("run"))
        .args(["--graph", "banana"]));
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    for name in ["dstar", "ustar", "knn", "radius", "fc", "empty"] {
        assert!(err.contains(name), "error should list '{name}': {err}");
    }
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["train", "--input"])
        .arg(dir.path().join("nope.jsonl"))
        .arg("--out")
        .arg(dir.path().join("run")));
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
}

#[test]
fn malformed_dataset_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(
        &path,
        "{\"format\":\"pcseq\",\"version\":1,\"seq_len\":1,\"classes\":2}\nnot json\n",
    )
    .unwrap();
    let out = run(bin()
        .args(["train", "--input"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("run")));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "stderr: {}", stderr(&out));
}

#[test]
fn train_writes_artifacts_with_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let run_dir = train_tiny(dir.path(), &data);

    let log = std::fs::read_to_string(run_dir.join("train_log.csv")).unwrap();
    assert!(log.starts_with("# config: {"), "log head: {}", &log[..60.min(log.len())]);
    assert!(log.contains("epoch,train_loss,val_acc"));

    let ckpt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("checkpoint.json")).unwrap())
            .unwrap();
    assert_eq!(ckpt["version"], 1);
    assert_eq!(ckpt["config"]["command"], "train");
    assert_eq!(ckpt["graph"]["graph_type"], "dstar");

    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("eval.json")).unwrap())
            .unwrap();
    assert_eq!(eval["split"], "val");
    assert!(eval["report"]["overall_accuracy"].is_f64() || eval["report"]["overall_accuracy"].is_number());
}

#[test]
fn train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let run1 = train_tiny(&dir.path().join("one"), &data);
    let run2 = train_tiny(&dir.path().join("two"), &data);
    // the `# config:` line embeds --out, so compare the body below it
    let body = |p: &Path| -> String {
        let text = std::fs::read_to_string(p.join("train_log.csv")).unwrap();
        text.split_once('\n').unwrap().1.to_string()
    };
    assert_eq!(body(&run1), body(&run2));
    // checkpoints differ only in embedded --out path; parameters match
    let load = |p: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(p.join("checkpoint.json")).unwrap()).unwrap()
    };
    assert_eq!(load(&run1)["model"], load(&run2)["model"]);
}

#[test]
fn eval_writes_report_and_confusion() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let run_dir = train_tiny(dir.path(), &data);
    let eval_dir = dir.path().join("eval");
    let out = run(bin()
        .args(["eval", "--input"])
        .arg(&data)
        .arg("--checkpoint")
        .arg(run_dir.join("checkpoint.json"))
        .arg("--out")
        .arg(&eval_dir)
        .args(["--subjects", "5", "--confusion-csv"]));
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("accuracy"));

    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("eval.json")).unwrap())
            .unwrap();
    assert_eq!(eval["config"]["command"], "eval");
    assert!(eval["report"]["confusion"].is_array());

    let confusion = std::fs::read_to_string(eval_dir.join("confusion.csv")).unwrap();
    assert!(confusion.starts_with("# config: {"));
    // 2x2 integer matrix under the config line
    let rows: Vec<&str> = confusion.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row.split(',').count(), 2);
        for cell in row.split(',') {
            cell.parse::<u64>().unwrap();
        }
    }
}

#[test]
fn eval_warns_on_graph_mismatch_and_honors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let run_dir = train_tiny(dir.path(), &data);
    let out = run(bin()
        .args(["eval", "--input"])
        .arg(&data)
        .arg("--checkpoint")
        .arg(run_dir.join("checkpoint.json"))
        .arg("--out")
        .arg(dir.path().join("eval2"))
        .args(["--graph", "ustar"]));
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("warning") && err.contains("ustar"), "stderr: {err}");
    assert!(stdout(&out).contains("\"graph_type\":\"ustar\""), "config should show the override");
}

#[test]
fn corrupt_checkpoint_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let ckpt = dir.path().join("checkpoint.json");
    std::fs::write(&ckpt, "{\"version\": 99}").unwrap();
    let out = run(bin()
        .args(["eval", "--input"])
        .arg(&data)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--out")
        .arg(dir.path().join("eval")));
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
}

#[test]
fn preprocess_round_trips_through_loader() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let cleaned = dir.path().join("clean.jsonl.gz");
    let out = run(bin()
        .args(["preprocess", "--input"])
        .arg(&data)
        .arg("--out")
        .arg(&cleaned)
        .args(["--eps", "0.5", "--min-pts", "2"]));
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    // the cleaned file is itself a valid dataset
    let run_dir = dir.path().join("run_clean");
    let out = run(bin()
        .args(["train", "--input"])
        .arg(&cleaned)
        .arg("--out")
        .arg(&run_dir)
        .args(["--epochs", "1", "--validate-every", "1", "--fc-dim", "4", "--gcn-dims", "4,3", "--lstm-hidden", "2"]));
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn bench_writes_scaling_report() {
    let dir = tempfile::tempdir().unwrap();
    let bench_dir = dir.path().join("bench");
    let out = run(bin()
        .args(["bench", "--out"])
        .arg(&bench_dir)
        .args(["--sizes", "32,64,128", "--reps", "3", "--graph", "dstar", "--seed", "5"]));
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let scaling: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bench_dir.join("scaling.json")).unwrap())
            .unwrap();
    assert_eq!(scaling["config"]["command"], "bench");
    let construction = scaling["construction"].as_array().unwrap();
    assert_eq!(construction.len(), 1);
    // some sizes may land under the timer floor, but kept + dropped covers all
    let kept = construction[0]["points"].as_array().unwrap().len();
    let dropped = construction[0]["dropped"].as_array().unwrap().len();
    assert!(kept >= 2, "too few points kept: {kept}");
    assert_eq!(kept + dropped, 3);
    assert!(construction[0]["slope"].is_number());
}

#[test]
fn bench_rejects_half_configured_inference() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["bench", "--out"])
        .arg(dir.path().join("bench"))
        .args(["--sizes", "32,64", "--reps", "2"])
        .arg("--checkpoint")
        .arg(dir.path().join("whatever.json")));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--input"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"seed\": 5, \"n_per_class\": 2}").unwrap();

    // file seed applies when no flag is given
    let from_file = dir.path().join("file.jsonl");
    let out = run(bin()
        .args(["generate", "--out"])
        .arg(&from_file)
        .arg("--config")
        .arg(&cfg));
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("\"seed\":5"));
    assert!(stdout(&out).contains("8 sequences"));

    // explicit flag wins over the file
    let from_flag = dir.path().join("flag.jsonl");
    let out = run(bin()
        .args(["generate", "--out"])
        .arg(&from_flag)
        .arg("--config")
        .arg(&cfg)
        .args(["--seed", "6"]));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("\"seed\":6"));

    // unknown keys in the file are usage errors
    std::fs::write(&cfg, "{\"sede\": 5}").unwrap();
    let out = run(bin()
        .args(["generate", "--out"])
        .arg(dir.path().join("x.jsonl"))
        .arg("--config")
        .arg(&cfg));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sede"), "stderr: {}", stderr(&out));
}

#[test]
fn ablate_emits_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_tiny_dataset(dir.path());
    let abl_dir = dir.path().join("abl");
    let out = run(bin()
        .args(["ablate", "--input"])
        .arg(&data)
        .arg("--out")
        .arg(&abl_dir)
        .args([
            "--epochs",
            "1",
            "--validate-every",
            "1",
            "--patience",
            "0",
            "--fc-dim",
            "4",
            "--gcn-dims",
            "4,3",
            "--lstm-hidden",
            "2",
            "--seed",
            "9",
        ]));
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(abl_dir.join("ablate.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));
    let lines: Vec<&str> = csv.lines().collect();
    // config line + header + 10 variant rows
    assert_eq!(lines.len(), 12, "csv:\n{csv}");
    assert_eq!(lines[1], "graph,center,k,r,seed,epochs_run,best_val_acc,test_acc");
    let variants: Vec<String> = lines[2..]
        .iter()
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            format!("{}/{}", cells[0], cells[1])
        })
        .collect();
    assert_eq!(
        variants,
        [
            "dstar/static",
            "dstar/mean",
            "dstar/zero",
            "ustar/static",
            "ustar/mean",
            "ustar/zero",
            "knn/-",
            "radius/-",
            "fc/-",
            "empty/-"
        ]
    );
    // the shared seed is recorded in every row
    for line in &lines[2..] {
        assert_eq!(line.split(',').nth(4), Some("9"), "row missing seed: {line}");
    }
    // the dstar-vs-fc comparison is logged, not asserted
    assert!(stdout(&out).contains("note: dstar/static"), "stdout: {}", stdout(&out));
}
