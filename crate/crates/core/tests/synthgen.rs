mod common;

use std::fs;

use layerprobe::synthgen::{generate, ImageFormat, SynthConfig};

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn same_config_same_bytes() {
    let cfg = SynthConfig { n_classes: 3, samples_per_class: 3, image_size: 80, ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(&cfg, a.path()).unwrap();
    generate(&cfg, b.path()).unwrap();
    let fa = files(a.path());
    assert_eq!(fa.len(), 10);
    assert_eq!(fa, files(b.path()));

    let gray = SynthConfig { format: ImageFormat::Gray, ..cfg };
    let c = tempfile::tempdir().unwrap();
    generate(&gray, c.path()).unwrap();
    assert!(files(c.path()).iter().any(|(n, _)| n.ends_with(".gray")));
}

#[test]
fn unperturbed_samples_are_identical() {
    let cfg = SynthConfig {
        n_classes: 2,
        samples_per_class: 3,
        image_size: 64,
        rotation_jitter: 0.0,
        dilation_jitter: 0.0,
        noise_sigma: 0.0,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    generate(&cfg, dir.path()).unwrap();
    let all = files(dir.path());
    let class = |c: u32| -> Vec<&Vec<u8>> {
        all.iter().filter(|(n, _)| n.starts_with(&format!("c{c:04}_"))).map(|(_, b)| b).collect()
    };
    for c in 0..2 {
        let imgs = class(c);
        assert_eq!(imgs.len(), 3);
        assert!(imgs.iter().all(|b| *b == imgs[0]));
    }
    assert_ne!(class(0)[0], class(1)[0]);
}

#[test]
fn textures_correlate_within_classes() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::synthetic_dataset(dir.path(), &SynthConfig::default());
    assert_eq!(data.len(), 200);
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            let r = common::correlation(data.irises[i].values(), data.irises[j].values()).abs();
            if data.labels[i] == data.labels[j] {
                within.push(r);
            } else {
                between.push(r);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (w, b) = (mean(&within), mean(&between));
    println!("within {w:.4} between {b:.4}");
    assert!(w > b, "within {w} between {b}");
}
