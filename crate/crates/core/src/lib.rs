//! Desk-scale mmWave beam-selection simulator.
//!
//! The pipeline generates randomized urban cells, synthesizes a panoramic
//! point cloud of each cell, traces specular multipath channels between the
//! base station and mobile-station positions, labels every link with its
//! optimal transmit/receive beam pair by exhaustive codebook search, encodes
//! the cell as a voxelized scene feature, and trains a 3-D convolutional
//! network to predict the beam pair from the feature alone.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`scene`]: procedural cell generation and point-cloud synthesis
//! - [`raytrace`]: image-method specular ray tracer
//! - [`phy`]: UPA steering vectors, codebooks, geometric channels, beam labels
//! - [`features`]: panoramic and LIDAR-local voxel features
//! - [`neuralnet`]: from-scratch 3-D CNN, dual softmax heads, RMSProp
//! - [`harness`]: dataset build, environment-level splits, top-M evaluation,
//!   and the accuracy-trend experiments
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the dataset
//! pipeline instantiates `f64` and the aliases below name the common
//! instantiations.

pub mod error;
pub mod features;
pub mod geometry;
pub mod harness;
pub mod neuralnet;
pub mod phy;
pub mod raytrace;
pub mod scalar;
pub mod scene;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision 3-vector.
pub type Vec3f = geometry::Vec3<f32>;
/// Double-precision 3-vector (pipeline default).
pub type Vec3d = geometry::Vec3<f64>;
/// Single-precision tensor.
pub type Tensorf = tensor::Tensor<f32>;
/// Double-precision tensor (pipeline default).
pub type Tensord = tensor::Tensor<f64>;
/// Double-precision environment as produced by the dataset pipeline.
pub type Environmentd = scene::Environment<f64>;
/// Double-precision point cloud.
pub type PointCloudd = scene::PointCloud<f64>;
/// Double-precision propagation path.
pub type Pathd = raytrace::Path<f64>;
/// Double-precision panoramic scene feature.
pub type PanoramicFeatured = features::PanoramicFeature<f64>;
/// Double-precision beam-selection network.
pub type BeamSelectionNetd = neuralnet::BeamSelectionNet<f64>;
