//! Fully-convolutional bottleneck residual network with per-conv taps.
//!
//! Conv layers are numbered from 1 in forward order: the stem, then for each
//! block its 1×1 reduce, 3×3 and 1×1 expand convs, and, on the first block of
//! a stage, the 1×1 projection after the expand conv. Stride-2 stages put
//! the stride on the reduce conv and the projection.
//!
//! Presets:
//!
//! | preset     | stem | stages `(blocks, mid, out, stride)`                          | convs |
//! |------------|------|--------------------------------------------------------------|-------|
//! | `resnet50` | 64   | (3,64,256,1) (4,128,512,2) (6,256,1024,2) (3,512,2048,2)      | 53    |
//! | `mini`     | 8    | (2,4,16,1)                                                   | 8     |

mod arch;
pub mod ops;
mod weights;

pub use arch::{
    ArchPlan, Bottleneck, ConvBn, ModelSpec, Preset, StagePlan, TapIndex, TapPoint,
    DEFAULT_BN_EPSILON, MIN_INPUT_SIDE,
};
pub use ops::{batchnorm, conv2d, global_avg_pool, maxpool, relu, BatchNormParams, ConvSpec};
pub use weights::{load_weights, save_weights, write_tap_table};
