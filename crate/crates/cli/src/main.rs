mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use layerprobe::container::{Archive, TensorEntry};
use layerprobe::dataset::Dataset;
use layerprobe::eval::{extract_features, layer_sweep, stratified_split, tpr_at_fmr};
use layerprobe::model::{load_weights, write_tap_table, ModelSpec, Preset};
use layerprobe::report::{emit, read_report};
use layerprobe::seed::{derive_seed, stream};
use layerprobe::synthgen;

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "layerprobe", version, about = "Layer-wise deep-feature evaluation for iris images")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `all` or a list like `1,4,10-12`.
    #[arg(long, global = true)]
    taps: Option<String>,
    #[arg(long, global = true)]
    preset: Option<Preset>,
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic annotated eye-image dataset.
    Synth,
    /// Unwrap every manifest image into a 64×512 tensor file.
    Normalize,
    /// Write one LPFM feature matrix per tap.
    Extract,
    /// Evaluate every selected tap and write the report files.
    Sweep,
    /// Print the best tap's TPR at the configured FMR and write its ROC CSV.
    Roc {
        /// Defaults to `<out>/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-emit the plot files from a saved report.
    Report {
        /// Defaults to `<out>/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = &cli.taps {
        cfg.taps = t.clone();
    }
    if let Some(p) = cli.preset {
        cfg.preset = p;
    }
    if let Some(w) = &cli.weights {
        cfg.weights = Some(w.clone());
    }
    if let Some(m) = &cli.manifest {
        cfg.manifest = Some(m.clone());
    }
    cfg.finish()
}

fn load_model(cfg: &RunConfig) -> Result<ModelSpec> {
    match &cfg.weights {
        Some(path) => Ok(load_weights(path, cfg.preset)?),
        None => Ok(ModelSpec::random(cfg.preset, derive_seed(cfg.seed, &[stream::WEIGHTS]))),
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let manifest = cfg.manifest()?;
    Dataset::from_manifest(manifest).with_context(|| format!("loading {}", manifest.display()))
}

fn create_out(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let manifest = synthgen::generate(&cfg.synth, &cfg.out).context("stage synth")?;
    println!("{}", manifest.display());
    Ok(())
}

fn normalize(cfg: &RunConfig) -> Result<()> {
    let dataset = load_dataset(cfg).context("stage normalize")?;
    let dir = cfg.out.join("normalized");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for ((iris, &label), name) in dataset.irises.iter().zip(&dataset.labels).zip(&dataset.names) {
        let mut a = Archive::new();
        a.push(TensorEntry::new("iris", vec![iris.rows(), iris.cols()], iris.values().to_vec()))?;
        a.push(TensorEntry::scalar("label", label as f32))?;
        let stem = Path::new(name).file_stem().map_or(name.as_str(), |s| s.to_str().unwrap_or(name));
        a.write(&dir.join(format!("{stem}.lpwt"))).context("stage normalize")?;
    }
    println!("{} images -> {}", dataset.len(), dir.display());
    Ok(())
}

fn extract(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg).context("stage model")?;
    let taps = cfg.tap_set(&model)?;
    let dataset = load_dataset(cfg).context("stage extract")?;
    let dir = cfg.out.join("features");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_tap_table(&model, &cfg.out.join("taps.csv"))?;
    let all: Vec<_> = taps.into_iter().collect();
    let chunk = cfg.sweep.taps_per_pass.unwrap_or(all.len()).max(1);
    for group in all.chunks(chunk) {
        let group = group.iter().copied().collect();
        let features =
            extract_features(&model, &dataset.irises, &dataset.labels, &group, cfg.sweep.tap_point)
                .context("stage extract")?;
        for f in features {
            let path = dir.join(format!("tap_{:02}.lpfm", f.tap.get()));
            f.write(&path)?;
            println!("{} {}x{} -> {}", f.layer_name, f.n(), f.d(), path.display());
        }
    }
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg).context("stage model")?;
    let taps = cfg.tap_set(&model)?;
    let dataset = load_dataset(cfg).context("stage dataset")?;
    let plan = stratified_split(&dataset.labels, cfg.split_fraction, derive_seed(cfg.seed, &[stream::SPLIT]))
        .context("stage split")?;
    let report = layer_sweep(&model, &dataset, &plan, &taps, &cfg.sweep).context("stage sweep")?;
    for t in &report.taps {
        println!("{:>3} {:<24} d={:<8} pca={:<5} acc={:.4}", t.tap, t.layer_name, t.feature_len, t.pca_dims, t.accuracy);
    }
    if let Some(best) = &report.best {
        println!(
            "best tap {} ({}) acc={:.4} tpr@fmr{}={:.4}",
            best.tap, best.layer_name, best.accuracy, best.fmr_target, best.tpr_at_fmr
        );
    }
    emit(&report, create_out(cfg)?).context("stage report")?;
    Ok(())
}

fn roc(cfg: &RunConfig, report: Option<&Path>) -> Result<()> {
    let path = report.map_or_else(|| cfg.out.join("report.json"), Path::to_path_buf);
    let report = read_report(&path).context("stage roc")?;
    let best = report.best.as_ref().context("stage roc: report has no evaluated taps")?;
    let target = cfg.sweep.fmr_target;
    println!(
        "tap {} ({}) tpr@fmr{} = {}",
        best.tap,
        best.layer_name,
        target,
        tpr_at_fmr(&best.roc, target)
    );
    let out = create_out(cfg)?.join(format!("roc_{}.csv", best.tap));
    let mut csv = String::from("fmr,tpr\n");
    for p in &best.roc.points {
        csv.push_str(&format!("{},{}\n", p.fmr, p.tpr));
    }
    fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn report(cfg: &RunConfig, report: Option<&Path>) -> Result<()> {
    let path = report.map_or_else(|| cfg.out.join("report.json"), Path::to_path_buf);
    let report = read_report(&path).context("stage report")?;
    for f in emit(&report, create_out(cfg)?).context("stage report")? {
        println!("{}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = run_config(&cli).context("stage config")?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    match &cli.command {
        Command::Synth => synth(&cfg),
        Command::Normalize => normalize(&cfg),
        Command::Extract => extract(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Roc { report: r } => roc(&cfg, r.as_deref()),
        Command::Report { report: r } => report(&cfg, r.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
