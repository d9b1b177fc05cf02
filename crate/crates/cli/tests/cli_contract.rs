//! End-to-end contract of the command-line surface: exit codes, output
//! files, config echo round-trips and byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lipbench")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lipbench-test-{tag}-{}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn no_args_prints_usage_with_exit_2() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn unknown_command_exits_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unknown_learner_exits_2_with_usage() {
    let dir = tmp_dir("learner");
    let out = run(&["nfr", "--learner", "nope", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown learner"));
}

#[test]
fn unknown_key_exits_2() {
    let out = run(&["nfr", "--frob", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn infeasible_cover_margin_exits_2() {
    let dir = tmp_dir("margin");
    let out = run(&[
        "cover",
        "--delta",
        "0.49",
        "--cell",
        "1.0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_files_exit_2() {
    let dir = tmp_dir("missing");
    let out = run(&[
        "train",
        "--data",
        "mnist32",
        "--data-root",
        "/definitely/not/here",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tiny_nfr_run_writes_all_artifacts() {
    let dir = tmp_dir("nfr-artifacts");
    let out = run(&[
        "nfr",
        "--n",
        "1",
        "--trials",
        "1",
        "--test",
        "10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["rows.csv", "summary.json", "config.echo"] {
        assert!(dir.join(file).exists(), "{file} missing");
    }
    let csv = String::from_utf8(read(&dir.join("rows.csv"))).unwrap();
    assert!(csv.starts_with("n,d,trial,clean_acc,adv_acc"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn rerun_from_config_echo_is_byte_identical() {
    let dir_a = tmp_dir("echo-a");
    let out = run(&[
        "nfr",
        "--n",
        "8",
        "--trials",
        "5",
        "--test",
        "50",
        "--seed",
        "9",
        "--out",
        dir_a.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows_a = read(&dir_a.join("rows.csv"));
    let echo_a = read(&dir_a.join("config.echo"));

    // rerun purely from the echoed config, into the same directory
    let out2 = run(&["nfr", "--config", dir_a.join("config.echo").to_str().unwrap()]);
    assert_eq!(out2.status.code(), Some(0));
    assert_eq!(read(&dir_a.join("rows.csv")), rows_a, "rerun must be byte-identical");
    assert_eq!(read(&dir_a.join("config.echo")), echo_a);
}

#[test]
fn scale_rows_are_deterministic_and_timestamped_nowhere() {
    let dir = tmp_dir("scale-det");
    let args = [
        "scale",
        "--data",
        "toy",
        "--sizes",
        "32,64",
        "--seeds",
        "0",
        "--base-epochs",
        "2",
        "--width",
        "8",
        "--depth",
        "3",
        "--batch",
        "32",
        "--peak-lr",
        "0.05",
        "--out",
    ];
    let mut a1 = args.to_vec();
    let d1 = dir.join("one");
    a1.push(d1.to_str().unwrap());
    assert_eq!(run(&a1).status.code(), Some(0));
    let mut a2 = args.to_vec();
    let d2 = dir.join("two");
    a2.push(d2.to_str().unwrap());
    assert_eq!(run(&a2).status.code(), Some(0));
    assert_eq!(read(&d1.join("rows.csv")), read(&d2.join("rows.csv")));
    assert!(d1.join("plot.svg").exists());
    let csv = String::from_utf8(read(&d1.join("rows.csv"))).unwrap();
    assert!(csv.starts_with("experiment,n,seed,clean_acc,cra,train_acc,train_cra,wall_seconds"));
    for line in csv.lines().skip(1) {
        assert!(line.ends_with(",0.000000"), "wall column must be deterministic: {line}");
    }
}

#[test]
fn smooth_echoes_paper_defaults() {
    let dir = tmp_dir("smooth-defaults");
    let out = run(&[
        "smooth",
        "--data",
        "toy",
        "--n",
        "128",
        "--eval-n",
        "5",
        "--samples",
        "1000",
        "--sigma",
        "0.125",
        "--epochs",
        "2",
        "--width",
        "8",
        "--depth",
        "3",
        "--batch",
        "64",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = String::from_utf8(read(&dir.join("config.echo"))).unwrap();
    assert!(echo.contains("sigma=0.125"));
    assert!(echo.contains("samples=1000"));
    let csv = String::from_utf8(read(&dir.join("rows.csv"))).unwrap();
    assert!(csv.starts_with("sample_id,top_class,correct,radius"));
}

#[test]
fn divergence_exits_3() {
    let dir = tmp_dir("diverge");
    let out = run(&[
        "train",
        "--data",
        "toy",
        "--n",
        "64",
        "--width",
        "8",
        "--depth",
        "3",
        "--layer",
        "standard",
        "--init",
        "uniform",
        "--epochs",
        "20",
        "--batch",
        "32",
        "--peak-lr",
        "1e200",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    // partial outputs: the config echo and a divergence summary exist
    assert!(dir.join("config.echo").exists());
    assert!(dir.join("summary.json").exists());
}

/// Serializes an IDX image/label pair the way the MNIST files are laid out.
fn write_idx_pair(dir: &Path, prefix: &str, images: &[[u8; 784]], labels: &[u8]) {
    let mut img = Vec::new();
    img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&28u32.to_be_bytes());
    img.extend_from_slice(&28u32.to_be_bytes());
    for image in images {
        img.extend_from_slice(image);
    }
    let mut lab = Vec::new();
    lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    let (img_name, lab_name) = if prefix == "train" {
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
    } else {
        ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")
    };
    std::fs::write(dir.join(img_name), img).unwrap();
    std::fs::write(dir.join(lab_name), lab).unwrap();
}

fn synthetic_digit(class: u8, jitter: u8) -> [u8; 784] {
    let mut img = [0u8; 784];
    for (i, px) in img.iter_mut().enumerate() {
        let (row, col) = (i / 28, i % 28);
        // class 0: bright left half; class 1: bright right half
        let bright = if class == 0 { col < 14 } else { col >= 14 };
        if bright {
            *px = 180 + ((row as u8).wrapping_mul(7).wrapping_add(jitter) % 60);
        }
    }
    img
}

#[test]
fn mnist32_pipeline_runs_on_idx_files() {
    let dir = tmp_dir("idx-pipeline");
    std::fs::create_dir_all(&dir).unwrap();
    let make_set = |count: usize, salt: u8| -> (Vec<[u8; 784]>, Vec<u8>) {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..count {
            let class = (i % 2) as u8;
            images.push(synthetic_digit(class, salt.wrapping_add(i as u8)));
            labels.push(class);
        }
        (images, labels)
    };
    let (train_imgs, train_labels) = make_set(64, 1);
    let (test_imgs, test_labels) = make_set(16, 101);
    write_idx_pair(&dir, "train", &train_imgs, &train_labels);
    write_idx_pair(&dir, "t10k", &test_imgs, &test_labels);

    let out_dir = dir.join("run");
    let out = run(&[
        "train",
        "--data",
        "mnist32",
        "--data-root",
        dir.to_str().unwrap(),
        "--width",
        "16",
        "--depth",
        "3",
        "--epochs",
        "8",
        "--batch",
        "32",
        "--peak-lr",
        "0.1",
        "--augment",
        "crop",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    // the two half-bright classes are linearly separable; the pipeline
    // (load, center, pad to 32x32, train) should classify them perfectly
    assert_eq!(summary["results"]["test_accuracy"].as_f64(), Some(1.0));
    assert_eq!(summary["results"]["channel_means"].as_array().unwrap().len(), 1);
}

#[test]
fn help_keys_lists_schema() {
    let out = run(&["cover", "--help-keys"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("--delta"));
    assert!(text.contains("--trials"));
}
