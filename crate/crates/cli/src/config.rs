use std::path::{Path, PathBuf};

use anyhow::Context;
use gesture_sig::data::AugmentConfig;
use gesture_sig::net::{TrainConfig, Variant};
use gesture_sig::{FeatureConfig, FeatureKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// First 8 bytes of the SHA-256 of a JSON value's compact text, in hex.
pub fn content_hash(value: &serde_json::Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    hex::encode(&digest[..8])
}

/// Fully resolved settings of one run: config file first, flags on top.
/// Output locations are deliberately not part of it, so two runs that differ
/// only in where they write produce identical artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory holding `sequences.jsonl` and `manifest.json`.
    pub data: Option<PathBuf>,
    pub arch: Variant,
    pub ttm: bool,
    pub hidden: usize,
    /// Feature families of a one-stream net; multi-stream nets use all four.
    pub inputs: Vec<FeatureKind>,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            arch: Variant::ThreeStream,
            ttm: true,
            hidden: 64,
            inputs: FeatureKind::ALL.to_vec(),
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    /// Short content hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        content_hash(&self.to_json())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        if self.hidden == 0 {
            anyhow::bail!("hidden width must be positive");
        }
        if self.arch == Variant::OneStream && self.inputs.is_empty() {
            anyhow::bail!("a one-stream net needs at least one input family");
        }
        Ok(())
    }

    /// Values per frame of the raw-coordinate vector.
    pub fn frame_width(&self) -> usize {
        self.features.aoh.dim * self.features.aoh.single_joints.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: RunConfig = toml::from_str(
            "arch = \"1s\"\nttm = false\n[train]\nepochs = 3\n[features.depths]\ntemporal = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.arch, Variant::OneStream);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch, 56);
        assert_eq!(cfg.features.depths.temporal, 2);
        assert_eq!(cfg.features.depths.spatial, 2);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.train.seed = 9;
        assert_ne!(other.hash(), cfg.hash());
    }
}
