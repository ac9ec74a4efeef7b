//! Model parameters in the `LPWT` container.
//!
//! Entry names per conv layer, in tap order:
//!
//! | entry                     | dims                |
//! |---------------------------|---------------------|
//! | `{base}_conv.weight`      | `[out, in, kh, kw]` |
//! | `{base}_conv.bias`        | `[out]` (optional)  |
//! | `{base}_bn.gamma`         | `[out]`             |
//! | `{base}_bn.beta`          | `[out]`             |
//! | `{base}_bn.mean`          | `[out]`             |
//! | `{base}_bn.var`           | `[out]`             |
//! | `{base}_bn.eps`           | `[1]`               |
//!
//! [`save_weights`] always writes this canonical order, so a canonical file
//! survives a load/save cycle byte for byte.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::arch::{ConvBn, ModelSpec, Preset};
use crate::container::{Archive, TensorEntry};
use crate::error::{Error, Result};

fn weight_name(layer: &ConvBn) -> String {
    format!("{}.weight", layer.conv_name())
}

fn bias_name(layer: &ConvBn) -> String {
    format!("{}.bias", layer.conv_name())
}

fn bn_names(layer: &ConvBn) -> [String; 5] {
    let bn = layer.bn_name();
    ["gamma", "beta", "mean", "var", "eps"].map(|p| format!("{bn}.{p}"))
}

impl ModelSpec {
    pub fn to_archive(&self) -> Archive {
        let mut archive = Archive::new();
        for layer in self.layers() {
            let mut push = |e: TensorEntry| archive.push(e).expect("layer names are unique");
            push(TensorEntry::new(
                weight_name(layer),
                layer.conv.weight_dims().to_vec(),
                layer.conv.weights.clone(),
            ));
            if let Some(bias) = &layer.conv.bias {
                push(TensorEntry::vector(bias_name(layer), bias.clone()));
            }
            let [gamma, beta, mean, var, eps] = bn_names(layer);
            push(TensorEntry::vector(gamma, layer.bn.gamma.clone()));
            push(TensorEntry::vector(beta, layer.bn.beta.clone()));
            push(TensorEntry::vector(mean, layer.bn.mean.clone()));
            push(TensorEntry::vector(var, layer.bn.variance.clone()));
            push(TensorEntry::scalar(eps, layer.bn.epsilon));
        }
        archive
    }

    /// Populates a preset from an archive. Every required entry must be
    /// present with the preset's exact shape; unknown entries are rejected.
    pub fn from_archive(archive: &Archive, preset: Preset) -> Result<Self> {
        let mut model = ModelSpec::zeros(preset);

        let mut known = BTreeSet::new();
        let mut missing = Vec::new();
        for layer in model.layers() {
            for name in std::iter::once(weight_name(layer)).chain(bn_names(layer)) {
                if archive.get(&name).is_none() {
                    missing.push(name.clone());
                }
                known.insert(name);
            }
            known.insert(bias_name(layer));
        }
        let extra: Vec<String> = archive
            .entries()
            .iter()
            .filter(|e| !known.contains(&e.name))
            .map(|e| e.name.clone())
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::Incomplete { missing, extra });
        }

        for layer in model.layers_mut() {
            let out = layer.conv.out_channels;
            let w_name = weight_name(layer);
            layer.conv.weights = archive.require(&w_name, &layer.conv.weight_dims())?.values.clone();
            layer.conv.bias = match archive.get(&bias_name(layer)) {
                Some(_) => Some(archive.require(&bias_name(layer), &[out])?.values.clone()),
                None => None,
            };
            let [gamma, beta, mean, var, eps] = bn_names(layer);
            layer.bn.gamma = archive.require(&gamma, &[out])?.values.clone();
            layer.bn.beta = archive.require(&beta, &[out])?.values.clone();
            layer.bn.mean = archive.require(&mean, &[out])?.values.clone();
            layer.bn.variance = archive.require(&var, &[out])?.values.clone();
            layer.bn.epsilon = archive.scalar(&eps)?;
            layer
                .bn
                .validate()
                .map_err(|e| Error::Parameter(format!("{}: {e}", layer.bn_name())))?;
        }
        Ok(model)
    }
}

pub fn load_weights(path: &Path, preset: Preset) -> Result<ModelSpec> {
    ModelSpec::from_archive(&Archive::read(path)?, preset)
}

pub fn save_weights(model: &ModelSpec, path: &Path) -> Result<()> {
    model.to_archive().write(path)
}

/// Writes the `tap_index,layer_name` mapping.
pub fn write_tap_table(model: &ModelSpec, path: &Path) -> Result<()> {
    let mut out = String::from("tap_index,layer_name\n");
    for (tap, name) in model.tap_table() {
        out.push_str(&format!("{tap},{name}\n"));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
