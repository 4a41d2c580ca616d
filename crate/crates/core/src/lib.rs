//! Path-signature features and multi-stream fully-connected classifiers for
//! skeleton-based gesture recognition.
//!
//! The pipeline runs: normalize and resample a clip ([`transforms`]), pick
//! joints and joint pairs and compute raw-coordinate and signature features
//! ([`features`], built on [`signature`]), then classify with a one-, two- or
//! three-stream network ([`net`]) that can learn a temporal shift of its input
//! ([`ttm`]). [`data`] handles persistence, augmentation and a synthetic
//! gesture generator.

pub mod data;
pub mod error;
pub mod features;
pub mod net;
pub mod signature;
pub mod skeleton;
pub mod transforms;
pub mod ttm;

pub use error::{Error, Result};
pub use features::{AohConfig, FeatureBundle, FeatureConfig, FeatureDims, FeatureKind};
pub use signature::{Path, SigDepthConfig, Signature};
pub use skeleton::Skeleton;
