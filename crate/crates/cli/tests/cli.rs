use std::path::Path;
use std::process::{Command, Output};

use rfa_cli::{idx, pgm::Pgm};
use rfa_core::zoo::Dataset;
use rfa_core::{SeededRng, Tensor};

fn rfa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfa"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn rfa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_TRAIN: &[&str] = &[
    "--set", "train_size=96", "--set", "test_size=32", "--set", "epochs=1", "--set", "batch=16",
];

#[test]
fn gradcheck_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfa(dir.path(), &["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("gradcheck.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows.len() >= 15);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{csv}");
    for name in ["conv2d", "rfaconv", "rfcbamconv", "rfcaconv"] {
        assert!(rows.iter().any(|r| r.starts_with(&format!("{name},"))), "{name}");
    }
    assert!(stderr(&o).contains("# config: seed = 0"));
}

#[test]
fn gradcheck_catches_corrupt_adjoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfa(dir.path(), &["gradcheck", "--mutate", "conv_backward"]);
    assert_eq!(o.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("gradcheck.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("conv2d,") && l.ends_with(",false")), "{csv}");
}

#[test]
fn gradcheck_fails_at_unreachable_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfa(dir.path(), &["gradcheck", "--tol", "1e-12"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_mutation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfa(dir.path(), &["gradcheck", "--mutate", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown mutation"));
}

#[test]
fn equivalence_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfa(dir.path(), &["equivalence"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = std::fs::read_to_string(dir.path().join("equivalence.txt")).unwrap();
    assert!(text.contains("unfold_vs_groupconv PASS"));
    assert!(text.contains("uniform_reduction k=1"));
    assert!(text.contains("uniform_reduction k=3"));
    assert!(text.contains("naive_audit k=3"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn count_reports_reference_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfa(dir.path(), &["count", "--factory", "rfa"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("model,factory,input,params,macs"));
    assert!(lines[1].starts_with("resnet18,standard,224,11689512,"));
    assert!(lines[2].starts_with("resnet18,rfa,224,"));
}

#[test]
fn bench_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfa(
        dir.path(),
        &[
            "bench-extract", "--set", "bench_n=1", "--set", "channels=2,4", "--set", "bench_hw=8,12",
            "--set", "bench_warmup=2", "--set", "bench_iters=5",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("bench_extract.csv")).unwrap();
    assert!(csv.contains("equivalence gate passed"));
    assert!(csv.contains("baseline 6.81"));
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "path,N,C,H,W,k,median_ns,ratio");
    assert_eq!(body.len(), 9);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 3\nlearning_rate = 0.1\n").unwrap();
    let o = rfa(dir.path(), &["--config", cfg.to_str().unwrap(), "count"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("learning_rate"), "{err}");
    assert!(err.contains("line 2"), "{err}");

    let o = rfa(dir.path(), &["--set", "bogus=1", "count"]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_idx(dir: &Path, n: usize, seed: u64) -> (String, String) {
    let mut rng = SeededRng::new(seed);
    let mut images = Tensor::uniform(&[n, 1, 8, 8], 0.0, 1.0, &mut rng);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    // quantise so the round trip through bytes is exact
    for v in images.data_mut() {
        *v = (*v * 255.0).round() / 255.0;
    }
    let data = Dataset::new(images, labels, 2).unwrap();
    let (im, lb) = (dir.join(format!("img{seed}.idx")), dir.join(format!("lbl{seed}.idx")));
    idx::save(&data, &im, &lb).unwrap();
    let back = idx::load(&im, &lb, None).unwrap();
    assert_eq!(back.images, data.images);
    assert_eq!(back.labels, data.labels);
    (im.to_str().unwrap().into(), lb.to_str().unwrap().into())
}

#[test]
fn idx_files_train_and_malformed_files_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let (ti, tl) = write_idx(dir.path(), 32, 1);
    let (ei, el) = write_idx(dir.path(), 16, 2);
    let sets = [
        "--set".to_string(), format!("train_images={ti}"), "--set".into(), format!("train_labels={tl}"),
        "--set".into(), format!("test_images={ei}"), "--set".into(), format!("test_labels={el}"),
        "--set".into(), "epochs=1".into(), "--set".into(), "batch=8".into(),
    ];
    let mut args: Vec<&str> = sets.iter().map(String::as_str).collect();
    args.push("train");
    let o = rfa(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bytes = std::fs::read(&ti).unwrap();
    let truncated = dir.path().join("truncated.idx");
    std::fs::write(&truncated, &bytes[..bytes.len() - 7]).unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[3] = 0x09;
    let magic = dir.path().join("magic.idx");
    std::fs::write(&magic, bad_magic).unwrap();
    for (path, needle) in [(&truncated, "truncated"), (&magic, "magic")] {
        let mut a = sets.clone();
        a[1] = format!("train_images={}", path.display());
        let mut args: Vec<&str> = a.iter().map(String::as_str).collect();
        args.push("train");
        let o = rfa(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2));
        let err = stderr(&o);
        assert!(err.starts_with("error:") || err.contains("\nerror:"), "{err}");
        assert!(err.to_lowercase().contains(needle), "{err}");
        assert!(!err.contains("panicked"), "{err}");
    }
}

#[test]
fn train_eval_gradcam_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_TRAIN.to_vec();
    args.extend(["--factory", "rfa", "train"]);
    let o = rfa(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,lr,loss,top1,top5\n"));
    assert_eq!(log.lines().count(), 2);
    let run_cfg = dir.path().join("run.cfg");
    let ckpt = dir.path().join("model.ckpt");
    assert!(ckpt.exists());

    let cfg_arg = run_cfg.to_str().unwrap();
    let ckpt_arg = ckpt.to_str().unwrap();
    let o = rfa(dir.path(), &["--config", cfg_arg, "eval", "--checkpoint", ckpt_arg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("samples,loss,top1,top5\n32,"), "{out}");

    let o = rfa(dir.path(), &["--config", cfg_arg, "gradcam", "--checkpoint", ckpt_arg, "--index", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pgm = Pgm::decode(&std::fs::read(dir.path().join("gradcam.pgm")).unwrap()).unwrap();
    assert_eq!((pgm.width, pgm.height, pgm.maxval), (28, 28, 255));

    // a PGM image as input, with an explicit class
    let img = dir.path().join("input.pgm");
    std::fs::write(&img, pgm.encode()).unwrap();
    let o = rfa(
        dir.path(),
        &["--config", cfg_arg, "gradcam", "--checkpoint", ckpt_arg, "--image", img.to_str().unwrap(), "--class", "1"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("class 1: 28x28 heatmap"));

    let o = rfa(dir.path(), &["--config", cfg_arg, "gradcam", "--checkpoint", ckpt_arg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = SMALL_TRAIN.to_vec();
    args.extend(["--seed", "11", "train"]);
    for d in [&a, &b] {
        let o = rfa(d.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["train_log.csv", "model.ckpt", "run.cfg"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}
