//! End-to-end tests of the binary: file formats, reproducibility, and exit
//! codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn permch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn kernel_identity_roundtrip_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kernel.json");
    let run = permch(&[
        "kernel",
        "--q",
        "2",
        "--n",
        "4",
        "--U",
        "identity",
        "--out",
        out.to_str().unwrap(),
        "--oracle",
    ]);
    assert_success(&run);
    let first = fs::read(&out).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["q"], 2);
    assert_eq!(parsed["rows"].as_array().unwrap().len(), 5);
    // Identity kernel: rows are unit vectors.
    for (i, row) in parsed["rows"].as_array().unwrap().iter().enumerate() {
        for (j, v) in row.as_array().unwrap().iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert_eq!(v.as_f64().unwrap(), expect);
        }
    }
    // Re-running with the same config reproduces the file byte for byte.
    let rerun = permch(&[
        "kernel",
        "--q",
        "2",
        "--n",
        "4",
        "--U",
        "identity",
        "--out",
        out.to_str().unwrap(),
        "--oracle",
    ]);
    assert_success(&rerun);
    assert_eq!(first, fs::read(&out).unwrap());
}

#[test]
fn quantize_hand_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tri.json");
    fs::write(&input, "[0.3, 0.3, 0.4]").unwrap();
    let out = dir.path().join("mtype.json");
    let report = dir.path().join("report.csv");
    let run = permch(&[
        "quantize",
        "--q",
        "2",
        "--n",
        "3",
        "--M",
        "2",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_success(&run);
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let masses: Vec<f64> = parsed["masses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(masses, vec![0.0, 0.5, 0.5, 0.0]);
    assert!(fs::read_to_string(&report).unwrap().contains("algorithm,binary-carry"));
}

#[test]
fn quantize_two_stage_writes_exact_mtype() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("dist.json");
    fs::write(
        &input,
        r#"{"support":[{"point":[3,2,1],"mass":0.35},{"point":[0,6,0],"mass":0.25},{"point":[2,2,2],"mass":0.4}]}"#,
    )
    .unwrap();
    let out = dir.path().join("mtype.json");
    let run = permch(&[
        "quantize",
        "--q",
        "3",
        "--n",
        "6",
        "--c",
        "2.0",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--U",
        "uniform-mix:0.3",
    ]);
    assert_success(&run);
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let m = parsed["M"].as_u64().unwrap();
    let total: u64 = parsed["numerators"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["k"].as_u64().unwrap())
        .sum();
    assert_eq!(total, m);
}

#[test]
fn verify_suite_exits_clean_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let run = permch(&[
        "verify",
        "--suite",
        "all",
        "--q",
        "2",
        "--n",
        "8..16",
        "--U",
        "bsc:0.2",
        "--seed",
        "7",
        "--trials",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&run);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# config: verify"));
    assert!(text.contains("single-shift"));
    assert!(!text.contains(",false"));
    let side = Path::new(out.to_str().unwrap()).with_extension("multinomial.csv");
    let mtext = fs::read_to_string(side).unwrap();
    assert!(mtext.contains("kl_bound"));
    assert!(!mtext.contains(",false"));
}

#[test]
fn idcode_build_eval_converse_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("code.json");
    let build = permch(&[
        "idcode",
        "build-det",
        "--q",
        "2",
        "--n",
        "16",
        "--U",
        "bsc:0.1",
        "--spacing",
        "8",
        "--out",
        code.to_str().unwrap(),
    ]);
    assert_success(&build);
    let errs = dir.path().join("errs.json");
    let eval = permch(&[
        "idcode",
        "eval",
        "--q",
        "2",
        "--n",
        "16",
        "--U",
        "bsc:0.1",
        "--code",
        code.to_str().unwrap(),
        "--out",
        errs.to_str().unwrap(),
    ]);
    assert_success(&eval);
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&errs).unwrap()).unwrap();
    assert!(parsed["lambda1"].as_f64().unwrap() < 0.2);
    let conv = permch(&[
        "idcode",
        "converse",
        "--q",
        "2",
        "--n",
        "16",
        "--U",
        "bsc:0.1",
        "--code",
        code.to_str().unwrap(),
    ]);
    assert_success(&conv);
    let stdout = String::from_utf8_lossy(&conv.stdout);
    assert!(stdout.contains("converse lower bound"));
}

#[test]
fn bad_inputs_exit_nonzero() {
    // bsc on a ternary alphabet.
    let run = permch(&[
        "verify", "--suite", "all", "--q", "3", "--n", "8", "--U", "bsc:0.2",
    ]);
    assert!(!run.status.success());
    // Unknown suite.
    let run = permch(&[
        "verify", "--suite", "nope", "--q", "2", "--n", "8", "--U", "bsc:0.2",
    ]);
    assert!(!run.status.success());
    // Kernel cap too small.
    let run = permch(&[
        "kernel", "--q", "2", "--n", "64", "--U", "bsc:0.2", "--kernel-cap", "10", "--out",
        "/tmp/never.json",
    ]);
    assert!(!run.status.success());
}
