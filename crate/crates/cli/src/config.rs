use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use layerprobe::eval::SweepConfig;
use layerprobe::model::{ModelSpec, Preset, TapIndex};
use layerprobe::synthgen::SynthConfig;
use serde::{Deserialize, Serialize};

/// One JSON document describing a run. Command-line flags override it.
///
/// `seed` is the only entropy source. `synth.seed` and `sweep.seed` are
/// overwritten with it; the split uses `derive_seed(seed, [SPLIT])` and
/// generated weights `derive_seed(seed, [WEIGHTS])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    /// `LPWT` weights; without one the preset gets seeded He-normal weights.
    pub weights: Option<PathBuf>,
    pub preset: Preset,
    /// `all`, or a list such as `1,4,10-12`.
    pub taps: String,
    pub split_fraction: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub synth: SynthConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            weights: None,
            preset: Preset::Mini,
            taps: "all".into(),
            split_fraction: 0.7,
            seed: 42,
            threads: None,
            out: PathBuf::from("out"),
            synth: SynthConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Pushes the top-level seed into the nested sections and checks ranges.
    pub fn finish(mut self) -> Result<Self> {
        self.synth.seed = self.seed;
        self.sweep.seed = self.seed;
        ensure!(
            self.split_fraction > 0.0 && self.split_fraction < 1.0,
            "split_fraction {} outside (0, 1)",
            self.split_fraction
        );
        ensure!(
            self.sweep.subsplit_keep > 0.0 && self.sweep.subsplit_keep < 1.0,
            "sweep.subsplit_keep {} outside (0, 1)",
            self.sweep.subsplit_keep
        );
        ensure!(self.threads != Some(0), "threads must be >= 1");
        for path in self.manifest.iter().chain(&self.weights) {
            ensure!(path.exists(), "{} does not exist", path.display());
        }
        Ok(self)
    }

    pub fn manifest(&self) -> Result<&Path> {
        self.manifest.as_deref().context("no dataset manifest given (--manifest or \"manifest\")")
    }

    pub fn tap_set(&self, model: &ModelSpec) -> Result<BTreeSet<TapIndex>> {
        parse_taps(&self.taps, model.conv_count())
    }
}

/// Parses `all` or comma-separated indices and inclusive ranges `a-b`.
pub fn parse_taps(spec: &str, conv_count: usize) -> Result<BTreeSet<TapIndex>> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("all") {
        return Ok((1..=conv_count).map(TapIndex::from_raw).collect());
    }
    let mut taps = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (part, part),
        };
        let lo: usize = lo.parse().with_context(|| format!("bad tap '{part}'"))?;
        let hi: usize = hi.parse().with_context(|| format!("bad tap '{part}'"))?;
        if lo > hi {
            bail!("empty tap range '{part}'");
        }
        for t in lo..=hi {
            taps.insert(TapIndex::new(t, conv_count)?);
        }
    }
    ensure!(!taps.is_empty(), "tap selection '{spec}' is empty");
    Ok(taps)
}
