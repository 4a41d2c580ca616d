use serde::Serialize;

use super::model::Architecture;

/// Mult-adds of one dense layer: one per weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCount {
    pub name: String,
    pub input: usize,
    pub output: usize,
    pub multadds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub layers: Vec<LayerCount>,
}

impl OpCount {
    /// Network-side total, localization network included.
    pub fn total(&self) -> u64 {
        self.layers.iter().map(|l| l.multadds).sum()
    }

    /// Share spent in the localization network.
    pub fn ttm(&self) -> u64 {
        self.layers
            .iter()
            .filter(|l| l.name.starts_with("ttm."))
            .map(|l| l.multadds)
            .sum()
    }
}

/// Per-layer forward mult-adds. Signature extraction is counted separately
/// by [`crate::features::ps_multadds`].
pub fn count_multadds(arch: &Architecture) -> OpCount {
    let mut layers = Vec::new();
    let mut push = |name: String, input: usize, output: usize| {
        layers.push(LayerCount {
            name,
            input,
            output,
            multadds: (input * output) as u64,
        })
    };
    if let Some(t) = &arch.ttm {
        push("ttm.fc1".into(), t.input_dim(), t.hidden);
        push("ttm.fc2".into(), t.hidden, 1);
    }
    for (i, s) in arch.streams.iter().enumerate() {
        push(format!("stream{i}.fc1"), s.input_dim, arch.hidden);
        push(format!("stream{i}.fc2"), arch.hidden, arch.classes);
    }
    if arch.streams.len() > 1 {
        push("fusion".into(), arch.streams.len() * arch.classes, arch.classes);
    }
    OpCount { layers }
}
