use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use layerprobe::features::FeatureMatrix;
use layerprobe::report::read_report;

fn layerprobe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerprobe")).args(args).current_dir(cwd).output().expect("spawn")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

const SMALL: &str = r#"{"synth": {"n_classes": 4, "samples_per_class": 5, "image_size": 96}, "split_fraction": 0.6}"#;

#[test]
fn synth_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), SMALL).unwrap();
    ok(layerprobe(&["synth", "--config", "c.json", "--out", "a"], dir.path()));
    ok(layerprobe(&["synth", "--config", "c.json", "--out", "b"], dir.path()));
    let a = tree(&dir.path().join("a"));
    assert_eq!(a.len(), 21);
    assert_eq!(a, tree(&dir.path().join("b")));
    ok(layerprobe(&["synth", "--config", "c.json", "--seed", "7", "--out", "c"], dir.path()));
    assert_ne!(a, tree(&dir.path().join("c")));
}

#[test]
fn pipeline_stages() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.json"), SMALL).unwrap();
    ok(layerprobe(&["synth", "--config", "c.json", "--out", "data"], d));
    let common = ["--config", "c.json", "--manifest", "data/manifest.csv"];

    ok(layerprobe(&[&common[..], &["normalize", "--out", "norm"]].concat(), d));
    assert_eq!(fs::read_dir(d.join("norm/normalized")).unwrap().count(), 20);

    ok(layerprobe(&[&common[..], &["extract", "--taps", "1,3", "--out", "feat"]].concat(), d));
    let f = FeatureMatrix::read(&d.join("feat/features/tap_03.lpfm")).unwrap();
    assert_eq!((f.n(), f.d(), f.layer_name.as_str()), (20, 4 * 16 * 128,"conv2_block1_2_conv"));
    assert!(d.join("feat/features/tap_01.lpfm").exists());
    assert_eq!(fs::read_to_string(d.join("feat/taps.csv")).unwrap().lines().count(), 9);

    let run = |out: &str| ok(layerprobe(&[&common[..], &["sweep", "--threads", "1", "--out", out]].concat(), d));
    run("r1");
    run("r2");
    let (r1, r2) = (fs::read(d.join("r1/report.json")).unwrap(), fs::read(d.join("r2/report.json")).unwrap());
    assert_eq!(r1, r2);
    let layers = fs::read_to_string(d.join("r1/layers.csv")).unwrap();
    assert_eq!(layers.lines().count(), 1 + 8);

    let report = read_report(&d.join("r1/report.json")).unwrap();
    let best = report.best.unwrap();
    let roc = ok(layerprobe(&[&common[..], &["roc", "--out", "r1"]].concat(), d));
    assert!(roc.contains(&format!("tap {} ", best.tap)), "{roc}");
    let roc_csv = fs::read_to_string(d.join(format!("r1/roc_{}.csv", best.tap))).unwrap();
    assert_eq!(roc_csv.lines().count(), 1 + best.roc.points.len());

    ok(layerprobe(&["report", "--report", "r1/report.json", "--out", "plots"], d));
    assert_eq!(tree(&d.join("plots")).len(), 4);
    assert_eq!(fs::read(d.join("plots/report.json")).unwrap(), r1);
}

#[test]
fn default_synthetic_sweep_writes_one_row_per_tap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(layerprobe(&["synth", "--out", "data"], d));
    ok(layerprobe(&["sweep", "--manifest", "data/manifest.csv", "--preset", "mini", "--out", "run"], d));
    let layers = fs::read_to_string(d.join("run/layers.csv")).unwrap();
    let mut lines = layers.lines();
    assert_eq!(lines.next(), Some("tap,layer_name,feature_len,pca_dims,accuracy"));
    let taps: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(taps, ["1", "2", "3", "4", "5", "6", "7", "8"]);
}

#[test]
fn failures_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.json"), r#"{"split_fraction": 1.5}"#).unwrap();
    let out = layerprobe(&["sweep", "--config", "bad.json"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage config") && err.contains("split_fraction"), "{err}");

    let out = layerprobe(&["sweep"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));

    let out = layerprobe(&["roc", "--out", "nowhere"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage roc"));

    let out = layerprobe(&["extract", "--taps", "99", "--manifest", "bad.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tap 99"));
}
