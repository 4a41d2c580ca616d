//! Sequence persistence, dataset manifests, training augmentations and a
//! synthetic gesture generator.

pub mod augment;
pub mod jsonl;
pub mod manifest;
pub mod synth;

pub use augment::{augment, stream_rng, AugmentConfig};
pub use jsonl::{load_jsonl, read_jsonl, save_jsonl, write_jsonl, SkeletonSequence};
pub use manifest::{DatasetManifest, Splits};
pub use synth::{synth_generate, SynthConfig, TEMPLATE_NAMES};
