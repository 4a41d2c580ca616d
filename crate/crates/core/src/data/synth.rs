//! Parametric upper-body gestures for desk-scale experiments.
//!
//! Coordinates are metres with `y` up and `z` towards the camera. Every
//! sample draws its own amplitude, speed, start time, body scale, yaw and
//! sensor noise from a stream keyed by `(seed, id)`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{rotate, rotation_matrix, stream_rng};
use super::jsonl::SkeletonSequence;
use super::manifest::{DatasetManifest, Splits};
use crate::error::{Error, Result};
use crate::skeleton::{layout, Skeleton};

pub const TEMPLATE_NAMES: [&str; 8] = [
    "circle",
    "swipe_horizontal",
    "swipe_vertical",
    "push",
    "wave",
    "figure_eight",
    "static_pose_a",
    "static_pose_b",
];

/// Epoch tag reserved for generator streams, disjoint from training epochs.
const SYNTH_STREAM: u64 = u64::MAX;

const BASE_AMPLITUDE: f64 = 0.15;
const BASE_START: f64 = 8.0;
const BASE_DURATION: f64 = 32.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub classes: usize,
    /// Training clips per class.
    pub per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
    /// Raw frames per clip (before resampling).
    pub frames: usize,
    /// Start-time jitter in frames, drawn uniformly from `-jitter..=jitter`.
    pub jitter: i64,
    /// Per-coordinate sensor noise, metres.
    pub noise: f64,
    pub fps: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            per_class: 100,
            val_per_class: 0,
            test_per_class: 0,
            seed: 1,
            frames: 60,
            jitter: 5,
            noise: 0.005,
            fps: 30.0,
        }
    }
}

impl SynthConfig {
    pub fn new(classes: usize, per_class: usize, seed: u64) -> Self {
        Self {
            classes,
            per_class,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=TEMPLATE_NAMES.len()).contains(&self.classes) {
            return Err(Error::Config(format!(
                "synthetic data supports 2..={} classes, got {}",
                TEMPLATE_NAMES.len(),
                self.classes
            )));
        }
        if self.per_class == 0 {
            return Err(Error::Config("need at least one training clip per class".into()));
        }
        let latest_end = BASE_START + self.jitter as f64 + BASE_DURATION / 0.7;
        if self.frames < 2 || latest_end > (self.frames - 1) as f64 + 0.5 {
            return Err(Error::Config(format!(
                "{} frames cannot hold a gesture with jitter {}",
                self.frames, self.jitter
            )));
        }
        if self.jitter < 0 || !(self.noise >= 0.0) {
            return Err(Error::Config("jitter and noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Generates labelled clips and their manifest. Output order is train, val,
/// test; class-major within a split.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Vec<SkeletonSequence>, DatasetManifest)> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    let mut splits = Splits::default();
    for (name, count, ids) in [
        ("train", cfg.per_class, &mut splits.train),
        ("val", cfg.val_per_class, &mut splits.val),
        ("test", cfg.test_per_class, &mut splits.test),
    ] {
        for class in 0..cfg.classes {
            for i in 0..count {
                let id = format!("{name}-{class:02}-{i:04}");
                ids.push(id.clone());
                jobs.push((id, class));
            }
        }
    }
    let seqs = jobs
        .into_par_iter()
        .map(|(id, class)| {
            let skeleton = generate_clip(cfg, class, &id)?;
            Ok(SkeletonSequence {
                id,
                label: Some(class),
                fps: Some(cfg.fps),
                source: format!("synth:{}", cfg.seed),
                skeleton,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        classes: TEMPLATE_NAMES[..cfg.classes].iter().map(|s| s.to_string()).collect(),
        layout: layout::NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), i))
            .collect::<BTreeMap<_, _>>(),
        splits,
        run_config: None,
    };
    Ok((seqs, manifest))
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Right-hand offset (in amplitude units) at gesture phase `u`.
fn template(class: usize, u: f64) -> [f64; 3] {
    match class {
        0 => [(TAU * u).sin(), 1.0 - (TAU * u).cos(), 0.0],
        1 => [3.0 * smoothstep(u) - 1.5, 0.0, 0.0],
        2 => [0.0, 1.5 - 3.0 * smoothstep(u), 0.0],
        3 => [0.0, 0.0, 2.0 * (PI * u).sin()],
        4 => [0.8 * (3.0 * TAU * u).sin(), 1.2, 0.0],
        5 => [(TAU * u).sin(), (2.0 * TAU * u).sin(), 0.0],
        6 => {
            let s = smoothstep(u / 0.3);
            [0.0, 3.0 * s, -s]
        }
        _ => {
            let s = smoothstep(u / 0.3);
            [2.5 * s, 0.0, -s]
        }
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

/// Elbow and wrist placed along a slightly bent shoulder-hand chain.
fn arm(shoulder: [f64; 3], hand: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let reach = ((hand[0] - shoulder[0]).powi(2)
        + (hand[1] - shoulder[1]).powi(2)
        + (hand[2] - shoulder[2]).powi(2))
    .sqrt();
    let bend = [0.0, -0.15 * reach, -0.1 * reach];
    let elbow = add(lerp(shoulder, hand, 0.5), bend);
    let wrist = add(lerp(shoulder, hand, 0.88), [0.0, -0.02 * reach, -0.01 * reach]);
    (elbow, wrist)
}

fn generate_clip(cfg: &SynthConfig, class: usize, id: &str) -> Result<Skeleton> {
    let mut rng = stream_rng(cfg.seed, id, SYNTH_STREAM);
    let amplitude = BASE_AMPLITUDE * rng.random_range(0.8..=1.2);
    let speed: f64 = rng.random_range(0.7..=1.3);
    let start = BASE_START + rng.random_range(-cfg.jitter..=cfg.jitter) as f64;
    let duration = BASE_DURATION / speed;
    let scale: f64 = rng.random_range(0.9..=1.1);
    let yaw = rng.random_range(-15.0f64..=15.0).to_radians();
    let offset = [
        rng.random_range(-0.1..=0.1),
        rng.random_range(-0.05..=0.05),
        rng.random_range(-0.1..=0.1),
    ];
    let sway_phase = rng.random_range(0.0..TAU);

    let head = [0.0, 1.70, 0.0];
    let neck = [0.0, 1.50, 0.0];
    let shoulder_l = [-0.20, 1.45, 0.0];
    let shoulder_r = [0.20, 1.45, 0.0];
    let rest_l = [-0.28, 0.85, 0.10];
    let ready_r = [0.15, 1.20, 0.35];
    let ready_l = [-0.15, 1.20, 0.35];
    let both_hands = class >= 6;

    let mut data = Vec::with_capacity(cfg.frames * layout::JOINT_COUNT * 3);
    for t in 0..cfg.frames {
        let u = ((t as f64 - start) / duration).clamp(0.0, 1.0);
        let g = template(class, u);
        let hand_r = add(ready_r, g.map(|v| v * amplitude));
        let hand_l = if both_hands {
            add(ready_l, [-g[0] * amplitude, g[1] * amplitude, g[2] * amplitude])
        } else {
            let s = 0.01 * (0.2 * t as f64 + sway_phase).sin();
            add(rest_l, [s, 0.0, s])
        };
        let (elbow_l, wrist_l) = arm(shoulder_l, hand_l);
        let (elbow_r, wrist_r) = arm(shoulder_r, hand_r);
        for p in [
            head, neck, shoulder_l, elbow_l, wrist_l, hand_l, shoulder_r, elbow_r, wrist_r,
            hand_r,
        ] {
            data.extend(p.iter().zip(&offset).map(|(v, o)| v * scale + o));
        }
    }
    let clip = Skeleton::new(cfg.frames, layout::JOINT_COUNT, 3, data)?;
    let mut clip = rotate(&clip, &rotation_matrix(0.0, yaw, 0.0));
    if cfg.noise > 0.0 {
        let normal = Normal::new(0.0, cfg.noise).expect("finite noise");
        for v in clip.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(clip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_balance() {
        let (seqs, m) = synth_generate(&SynthConfig::new(5, 4, 1)).unwrap();
        assert_eq!(seqs.len(), 20);
        for c in 0..5 {
            assert_eq!(seqs.iter().filter(|s| s.label == Some(c)).count(), 4);
        }
        m.validate(&seqs).unwrap();
        assert_eq!(m.classes.len(), 5);
        assert_eq!(m.layout["hand_right"], layout::HAND_R);
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig {
            test_per_class: 2,
            ..SynthConfig::new(3, 2, 7)
        };
        assert_eq!(synth_generate(&cfg).unwrap(), synth_generate(&cfg).unwrap());
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(synth_generate(&cfg).unwrap().0, synth_generate(&other).unwrap().0);
    }

    #[test]
    fn bad_class_count() {
        assert!(synth_generate(&SynthConfig::new(9, 1, 1)).is_err());
        assert!(synth_generate(&SynthConfig::new(1, 1, 1)).is_err());
    }
}
