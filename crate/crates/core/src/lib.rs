//! Layer-wise deep-feature evaluation for iris recognition.
//!
//! Pipeline: annotated eye images are unwrapped into a fixed polar sheet
//! ([`normalize`]), pushed through a residual network that records every conv
//! output ([`model`]), flattened and scaled ([`features`]), reduced with
//! randomized PCA ([`pca`]) and classified with a one-vs-rest linear SVM
//! ([`svm`]). [`eval`] runs that per tap and [`report`] writes the results.

pub mod container;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod model;
pub mod normalize;
pub mod pca;
pub mod report;
pub mod seed;
pub mod svm;
pub mod synthgen;
pub mod tensor;

pub use error::{Error, Result};
pub use features::{FeatureMatrix, MinMaxScaler};
pub use model::{ModelSpec, Preset, TapIndex, TapPoint};
pub use tensor::Tensor;
