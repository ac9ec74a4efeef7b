use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::{add_inplace, batchnorm, conv2d, global_avg_pool, maxpool, relu, BatchNormParams, ConvSpec};
use crate::error::{Error, Result};
use crate::seed::rng;
use crate::tensor::Tensor;

/// Smallest spatial side the network accepts.
pub const MIN_INPUT_SIDE: usize = 32;

/// Keras' ResNet-50 batchnorm epsilon.
pub const DEFAULT_BN_EPSILON: f32 = 1.001e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Resnet50,
    Mini,
}

impl Preset {
    pub fn plan(self) -> ArchPlan {
        match self {
            Preset::Resnet50 => ArchPlan {
                stem_channels: 64,
                stages: vec![
                    StagePlan { blocks: 3, mid: 64, out: 256, stride: 1 },
                    StagePlan { blocks: 4, mid: 128, out: 512, stride: 2 },
                    StagePlan { blocks: 6, mid: 256, out: 1024, stride: 2 },
                    StagePlan { blocks: 3, mid: 512, out: 2048, stride: 2 },
                ],
            },
            Preset::Mini => ArchPlan {
                stem_channels: 8,
                stages: vec![StagePlan { blocks: 2, mid: 4, out: 16, stride: 1 }],
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Resnet50 => "resnet50",
            Preset::Mini => "mini",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resnet50" => Ok(Preset::Resnet50),
            "mini" => Ok(Preset::Mini),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected resnet50 or mini)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StagePlan {
    pub blocks: usize,
    pub mid: usize,
    pub out: usize,
    /// Applied by the first 1×1 conv and the projection of the stage's first block.
    pub stride: usize,
}

/// Channel plan of a bottleneck residual network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchPlan {
    pub stem_channels: usize,
    pub stages: Vec<StagePlan>,
}

impl ArchPlan {
    /// Conv layers: stem, three per block, one projection per stage.
    pub fn conv_count(&self) -> usize {
        1 + self.stages.iter().map(|s| 3 * s.blocks + 1).sum::<usize>()
    }
}

/// 1-based conv-layer index in forward enumeration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TapIndex(usize);

impl TapIndex {
    pub fn new(index: usize, conv_count: usize) -> Result<Self> {
        if index == 0 || index > conv_count {
            return Err(Error::TapOutOfRange { tap: index, max: conv_count });
        }
        Ok(Self(index))
    }

    /// Unchecked; validated again by the forward pass.
    pub fn from_raw(index: usize) -> Self {
        Self(index)
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for TapIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Where a tap reads a conv layer's activity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapPoint {
    /// Raw convolution output, before batchnorm.
    #[default]
    PreActivation,
    /// After batchnorm and, where the layer has one, its relu. The last conv
    /// of a block and the projection are read after batchnorm, before the
    /// residual add.
    PostActivation,
}

/// A conv layer followed by its batchnorm. `name` is the Keras-style base,
/// e.g. `conv3_block2_1`; the layers are `{name}_conv` and `{name}_bn`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBn {
    pub name: String,
    pub conv: ConvSpec,
    pub bn: BatchNormParams,
}

impl ConvBn {
    fn zeros(name: String, conv: ConvSpec) -> Self {
        let bn = BatchNormParams::identity(conv.out_channels, DEFAULT_BN_EPSILON);
        Self { name, conv, bn }
    }

    pub fn conv_name(&self) -> String {
        format!("{}_conv", self.name)
    }

    pub fn bn_name(&self) -> String {
        format!("{}_bn", self.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bottleneck {
    pub reduce: ConvBn,
    pub spatial: ConvBn,
    pub expand: ConvBn,
    pub projection: Option<ConvBn>,
}

impl Bottleneck {
    /// Layers in tap order: 1×1 reduce, 3×3, 1×1 expand, then the projection.
    pub fn layers(&self) -> impl Iterator<Item = &ConvBn> {
        [&self.reduce, &self.spatial, &self.expand]
            .into_iter()
            .chain(self.projection.as_ref())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvBn> {
        [&mut self.reduce, &mut self.spatial, &mut self.expand]
            .into_iter()
            .chain(self.projection.as_mut())
    }

    pub fn apply(&self, input: &Tensor) -> Result<Tensor> {
        let mut sink = TapSink::none();
        self.run(input, &mut sink)
    }

    fn run(&self, input: &Tensor, sink: &mut TapSink) -> Result<Tensor> {
        let x = sink.conv_bn(&self.reduce, input, true)?;
        let x = sink.conv_bn(&self.spatial, &x, true)?;
        let mut out = sink.conv_bn(&self.expand, &x, false)?;
        match &self.projection {
            Some(p) => {
                let shortcut = sink.conv_bn(p, input, false)?;
                add_inplace(&mut out, &shortcut)?;
            }
            None => add_inplace(&mut out, input)?,
        }
        Ok(relu(out))
    }
}

/// Records requested taps while the forward pass runs.
struct TapSink<'a> {
    next: usize,
    wanted: Option<&'a BTreeSet<TapIndex>>,
    point: TapPoint,
    taps: BTreeMap<TapIndex, Tensor>,
}

impl<'a> TapSink<'a> {
    fn none() -> Self {
        Self { next: 1, wanted: None, point: TapPoint::PreActivation, taps: BTreeMap::new() }
    }

    fn conv_bn(&mut self, layer: &ConvBn, input: &Tensor, activate: bool) -> Result<Tensor> {
        let index = TapIndex(self.next);
        self.next += 1;
        let wanted = self.wanted.is_some_and(|w| w.contains(&index));
        let raw = conv2d(input, &layer.conv).map_err(|e| named(e, &layer.conv_name()))?;
        if wanted && self.point == TapPoint::PreActivation {
            self.taps.insert(index, raw.clone());
        }
        let mut y = batchnorm(&raw, &layer.bn).map_err(|e| named(e, &layer.bn_name()))?;
        if activate {
            y = relu(y);
        }
        if wanted && self.point == TapPoint::PostActivation {
            self.taps.insert(index, y.clone());
        }
        Ok(y)
    }
}

fn named(e: Error, layer: &str) -> Error {
    match e {
        Error::Shape(msg) => Error::Shape(format!("{layer}: {msg}")),
        Error::Parameter(msg) => Error::Parameter(format!("{layer}: {msg}")),
        other => other,
    }
}

/// Bottleneck residual network: stem conv + maxpool, residual stages,
/// global average pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub preset: Preset,
    pub stem: ConvBn,
    pub blocks: Vec<Bottleneck>,
}

impl ModelSpec {
    /// All conv weights zero, batchnorm at identity.
    pub fn zeros(preset: Preset) -> Self {
        let plan = preset.plan();
        let stem = ConvBn::zeros(
            "conv1".into(),
            ConvSpec::zeros(3, plan.stem_channels, (7, 7), (2, 2), (3, 3)),
        );
        let mut blocks = Vec::new();
        let mut channels = plan.stem_channels;
        for (s, stage) in plan.stages.iter().enumerate() {
            for b in 0..stage.blocks {
                let base = format!("conv{}_block{}", s + 2, b + 1);
                let first = b == 0;
                let stride = if first { stage.stride } else { 1 };
                let (st, mid, out) = ((stride, stride), stage.mid, stage.out);
                blocks.push(Bottleneck {
                    reduce: ConvBn::zeros(format!("{base}_1"), ConvSpec::zeros(channels, mid, (1, 1), st, (0, 0))),
                    spatial: ConvBn::zeros(format!("{base}_2"), ConvSpec::zeros(mid, mid, (3, 3), (1, 1), (1, 1))),
                    expand: ConvBn::zeros(format!("{base}_3"), ConvSpec::zeros(mid, out, (1, 1), (1, 1), (0, 0))),
                    projection: first.then(|| {
                        ConvBn::zeros(format!("{base}_0"), ConvSpec::zeros(channels, out, (1, 1), st, (0, 0)))
                    }),
                });
                channels = out;
            }
        }
        Self { preset, stem, blocks }
    }

    /// He-normal conv weights from a ChaCha8 stream; batchnorm at identity.
    pub fn random(preset: Preset, seed: u64) -> Self {
        let mut model = Self::zeros(preset);
        let mut r = rng(seed);
        for layer in model.layers_mut() {
            let fan_in = layer.conv.in_channels * layer.conv.kernel.0 * layer.conv.kernel.1;
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            layer.conv.weights.iter_mut().for_each(|w| *w = normal.sample(&mut r) as f32);
        }
        model
    }

    /// Conv layers in tap order.
    pub fn layers(&self) -> impl Iterator<Item = &ConvBn> {
        std::iter::once(&self.stem).chain(self.blocks.iter().flat_map(Bottleneck::layers))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvBn> {
        std::iter::once(&mut self.stem).chain(self.blocks.iter_mut().flat_map(Bottleneck::layers_mut))
    }

    pub fn conv_count(&self) -> usize {
        self.layers().count()
    }

    pub fn tap(&self, index: usize) -> Result<TapIndex> {
        TapIndex::new(index, self.conv_count())
    }

    pub fn all_taps(&self) -> BTreeSet<TapIndex> {
        (1..=self.conv_count()).map(TapIndex).collect()
    }

    /// `(tap, conv layer name)` rows, e.g. `(1, "conv1_conv")`.
    pub fn tap_table(&self) -> Vec<(TapIndex, String)> {
        self.layers()
            .enumerate()
            .map(|(i, l)| (TapIndex(i + 1), l.conv_name()))
            .collect()
    }

    pub fn layer_name(&self, tap: TapIndex) -> Option<String> {
        self.layers().nth(tap.0.checked_sub(1)?).map(ConvBn::conv_name)
    }

    pub fn output_channels(&self) -> usize {
        self.blocks.last().map_or(self.stem.conv.out_channels, |b| b.expand.conv.out_channels)
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.height() < MIN_INPUT_SIDE || input.width() < MIN_INPUT_SIDE {
            return Err(Error::InputTooSmall {
                height: input.height(),
                width: input.width(),
                min: MIN_INPUT_SIDE,
            });
        }
        if input.channels() != self.stem.conv.in_channels {
            return Err(Error::Shape(format!(
                "network expects {} input channels, got {}",
                self.stem.conv.in_channels,
                input.channels()
            )));
        }
        Ok(())
    }

    fn run(&self, input: &Tensor, sink: &mut TapSink) -> Result<Tensor> {
        self.check_input(input)?;
        let x = sink.conv_bn(&self.stem, input, true)?;
        let mut x = maxpool(&x, (3, 3), (2, 2), (1, 1))?;
        for block in &self.blocks {
            x = block.run(&x, sink)?;
        }
        Ok(x)
    }

    /// Output of the last residual stage.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.run(input, &mut TapSink::none())
    }

    /// Global-average-pooled final features.
    pub fn embed(&self, input: &Tensor) -> Result<Vec<f32>> {
        Ok(global_avg_pool(&self.forward(input)?))
    }

    /// Runs the whole network and returns the activation at every requested tap.
    pub fn forward_with_taps(
        &self,
        input: &Tensor,
        taps: &BTreeSet<TapIndex>,
        point: TapPoint,
    ) -> Result<BTreeMap<TapIndex, Tensor>> {
        let count = self.conv_count();
        if let Some(bad) = taps.iter().find(|t| t.0 == 0 || t.0 > count) {
            return Err(Error::TapOutOfRange { tap: bad.0, max: count });
        }
        let mut sink = TapSink { next: 1, wanted: Some(taps), point, taps: BTreeMap::new() };
        self.run(input, &mut sink)?;
        Ok(sink.taps)
    }
}
