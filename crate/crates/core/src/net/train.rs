//! Mini-batch SGD with momentum, exponential learning-rate decay and
//! per-epoch augmentation.

use std::borrow::Cow;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{MultiStreamNet, Params};
use crate::data::{augment, stream_rng, AugmentConfig, SkeletonSequence};
use crate::error::{Error, Result};
use crate::features::{assemble_kinds, FeatureBundle, FeatureConfig, FeatureKind};
use crate::skeleton::Skeleton;
use crate::transforms::{normalize_skeleton, resample_skeleton};
use crate::ttm::{ln_forward, temporal_shift};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch: usize,
    pub dropout: f64,
    pub momentum: f64,
    pub alpha0: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch: 56,
            dropout: 0.5,
            momentum: 0.7,
            alpha0: 0.01,
            lambda: 0.001,
            epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.alpha0 > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Config(
                "need momentum in [0, 1), alpha0 > 0 and lambda >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// `α(n) = α(0) · exp(−λ n)` after `n` mini-batches.
pub fn lr_at(n: u64, cfg: &TrainConfig) -> f64 {
    cfg.alpha0 * (-cfg.lambda * n as f64).exp()
}

/// Classical momentum: `v ← μ v − lr g`, then `θ ← θ + v`.
pub fn sgd_momentum_step(
    params: &mut Params,
    grads: &Params,
    velocity: &mut Params,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(velocity) {
        return Err(Error::Config("parameter, gradient and velocity shapes differ".into()));
    }
    for ((p, v), (_, g)) in params
        .groups_mut()
        .into_iter()
        .zip(velocity.groups_mut())
        .zip(grads.groups())
    {
        for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = momentum * *v - lr * g;
            *p += *v;
        }
    }
    Ok(())
}

/// A labelled clip ready for training: normalized, resampled, with its
/// unaugmented features precomputed.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub skeleton: Skeleton,
    pub bundle: FeatureBundle,
}

/// Normalizes, resamples and featurizes labelled sequences in parallel.
pub fn prepare_samples(
    seqs: &[&SkeletonSequence],
    cfg: &FeatureConfig,
    kinds: &[FeatureKind],
) -> Result<Vec<Sample>> {
    seqs.par_iter()
        .map(|s| {
            let wrap = |e: Error| Error::Sequence {
                id: s.id.clone(),
                message: e.to_string(),
            };
            let label = s.label.ok_or_else(|| Error::Sequence {
                id: s.id.clone(),
                message: "missing label".into(),
            })?;
            let skeleton =
                resample_skeleton(&normalize_skeleton(&s.skeleton), cfg.frames).map_err(wrap)?;
            let bundle = assemble_kinds(&skeleton, cfg, kinds).map_err(wrap)?;
            Ok(Sample {
                id: s.id.clone(),
                label,
                skeleton,
                bundle,
            })
        })
        .collect()
}

/// Normalizes, resamples and computes all four vectors for every sequence,
/// in parallel; labels may be absent.
pub fn featurize_sequences(
    seqs: &[SkeletonSequence],
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureBundle>> {
    seqs.par_iter()
        .map(|s| {
            resample_skeleton(&normalize_skeleton(&s.skeleton), cfg.frames)
                .and_then(|skel| assemble_kinds(&skel, cfg, &FeatureKind::ALL))
                .map_err(|e| Error::Sequence {
                    id: s.id.clone(),
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Turns samples into network inputs: applies augmentation and, for nets
/// with a temporal transformer, recomputes signature features from the
/// shifted clip. Raw coordinates stay unshifted; the network shifts them
/// itself so the shift stays differentiable.
#[derive(Debug, Clone)]
pub struct InputPipeline<'a> {
    pub features: &'a FeatureConfig,
    pub kinds: Vec<FeatureKind>,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl<'a> InputPipeline<'a> {
    pub fn new(features: &'a FeatureConfig, net: &MultiStreamNet, augment: AugmentConfig, seed: u64) -> Self {
        Self {
            features,
            kinds: net.arch.feature_kinds(),
            augment,
            seed,
        }
    }

    /// Inputs for one sample. `epoch` is `Some` in training, which enables
    /// augmentation.
    pub fn inputs<'s>(
        &self,
        net: &MultiStreamNet,
        sample: &'s Sample,
        epoch: Option<u64>,
    ) -> Result<Cow<'s, FeatureBundle>> {
        let wrap = |e: Error| Error::Sequence {
            id: sample.id.clone(),
            message: e.to_string(),
        };
        let (skel, mut bundle) = match epoch {
            Some(e) if self.augment.any() => {
                let mut rng = stream_rng(self.seed, &sample.id, e);
                let skel = augment(&sample.skeleton, &self.augment, &mut rng);
                let bundle = assemble_kinds(&skel, self.features, &self.kinds).map_err(wrap)?;
                (Cow::Owned(skel), Cow::Owned(bundle))
            }
            _ => (Cow::Borrowed(&sample.skeleton), Cow::Borrowed(&sample.bundle)),
        };
        let ps: Vec<FeatureKind> = self
            .kinds
            .iter()
            .copied()
            .filter(|&k| k != FeatureKind::Rc)
            .collect();
        if let Some(ln) = &net.params.ttm {
            if !ps.is_empty() {
                let (delta, _) = ln_forward(&bundle.rc, ln).map_err(wrap)?;
                // At Δ = 0 the shift is an exact copy; skip the recompute.
                if delta != 0.0 {
                    let width = skel.joints() * skel.dim();
                    let (shifted, _) = temporal_shift(skel.data(), width, delta).map_err(wrap)?;
                    let shifted = Skeleton::new(skel.frames(), skel.joints(), skel.dim(), shifted)
                        .map_err(wrap)?;
                    let fresh = assemble_kinds(&shifted, self.features, &ps).map_err(wrap)?;
                    let b = bundle.to_mut();
                    b.s_ps = fresh.s_ps;
                    b.t_ps = fresh.t_ps;
                    b.t_s_ps = fresh.t_s_ps;
                }
            }
        }
        Ok(bundle)
    }

    fn batch<'s>(
        &self,
        net: &MultiStreamNet,
        samples: &[&'s Sample],
        epoch: Option<u64>,
    ) -> Result<Vec<Cow<'s, FeatureBundle>>> {
        samples
            .par_iter()
            .map(|s| self.inputs(net, s, epoch))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean train-mode cross-entropy over the epoch.
    pub loss: f64,
    /// Train-mode accuracy over the epoch.
    pub train_acc: f64,
    /// Eval-mode validation accuracy; NaN without a validation set.
    pub val_acc: f64,
    /// Learning rate after the epoch's last step.
    pub lr: f64,
    /// Mean learned shift over the epoch's training samples (0 without TTM).
    pub mean_delta: f64,
}

pub fn write_metrics_csv<W: Write>(mut w: W, metrics: &[EpochMetrics]) -> Result<()> {
    writeln!(w, "epoch,loss,train_acc,val_acc,lr,mean_delta")?;
    for m in metrics {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.epoch, m.loss, m.train_acc, m.val_acc, m.lr, m.mean_delta
        )?;
    }
    Ok(())
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Trains `net` in place and returns per-epoch metrics. `on_epoch` sees each
/// epoch's metrics as soon as they are available.
pub fn train(
    net: &mut MultiStreamNet,
    train_set: &[Sample],
    val_set: &[Sample],
    pipeline: &InputPipeline,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if let Some(s) = train_set.iter().find(|s| s.label >= net.arch.classes) {
        return Err(Error::Sequence {
            id: s.id.clone(),
            message: format!("label {} out of range for {} classes", s.label, net.arch.classes),
        });
    }
    let mut velocity = net.params.zeros_like();
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = stream_rng(cfg.seed, "dropout", 0);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step: u64 = 0;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut delta_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let inputs = pipeline.batch(net, &samples, Some(epoch as u64))?;
            let refs: Vec<&FeatureBundle> = inputs.iter().map(|b| b.as_ref()).collect();
            let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
            let cache = net.forward(&refs, Some(&mut dropout_rng))?;
            let mut grads = net.params.zeros_like();
            let losses = net.backward(&cache, &labels, &mut grads)?;
            grads.scale(1.0 / samples.len() as f64);
            sgd_momentum_step(
                &mut net.params,
                &grads,
                &mut velocity,
                lr_at(step, cfg),
                cfg.momentum,
            )?;
            step += 1;
            if !net.params.all_finite() {
                return Err(Error::Domain(format!(
                    "parameters became non-finite in epoch {}",
                    epoch + 1
                )));
            }
            loss_sum += losses.iter().sum::<f64>();
            correct += cache
                .probs
                .iter()
                .zip(&labels)
                .filter(|(p, &l)| argmax(p) == l)
                .count();
            delta_sum += cache.deltas().iter().sum::<f64>();
        }
        let n = train_set.len() as f64;
        let val_acc = if val_set.is_empty() {
            f64::NAN
        } else {
            evaluate(net, val_set, pipeline)?.accuracy
        };
        let m = EpochMetrics {
            epoch: epoch + 1,
            loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_acc,
            lr: lr_at(step, cfg),
            mean_delta: delta_sum / n,
        };
        log::info!(
            "epoch {:>4}  loss {:.5}  train {:.4}  val {:.4}  lr {:.6}  Δ {:+.4}",
            m.epoch,
            m.loss,
            m.train_acc,
            m.val_acc,
            m.lr,
            m.mean_delta
        );
        on_epoch(&m);
        history.push(m);
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
    /// Per-sample shifts; empty without a temporal transformer.
    pub deltas: Vec<f64>,
    pub mean_abs_delta: f64,
}

const EVAL_BATCH: usize = 64;

/// Eval-mode accuracy, confusion matrix and learned shifts.
pub fn evaluate(net: &MultiStreamNet, samples: &[Sample], pipeline: &InputPipeline) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let c = net.arch.classes;
    let mut confusion = vec![vec![0usize; c]; c];
    let mut predictions = Vec::with_capacity(samples.len());
    let mut deltas = Vec::new();
    for chunk in samples.chunks(EVAL_BATCH) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let inputs = pipeline.batch(net, &refs, None)?;
        let bundles: Vec<&FeatureBundle> = inputs.iter().map(|b| b.as_ref()).collect();
        let cache = net.forward(&bundles, None)?;
        for (s, p) in chunk.iter().zip(&cache.probs) {
            if s.label >= c {
                return Err(Error::Sequence {
                    id: s.id.clone(),
                    message: format!("label {} out of range for {c} classes", s.label),
                });
            }
            let pred = argmax(p);
            confusion[s.label][pred] += 1;
            predictions.push(pred);
        }
        deltas.extend(cache.deltas());
    }
    let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
    let mean_abs_delta = if deltas.is_empty() {
        0.0
    } else {
        deltas.iter().map(|d| d.abs()).sum::<f64>() / deltas.len() as f64
    };
    Ok(EvalReport {
        accuracy: correct as f64 / samples.len() as f64,
        confusion,
        predictions,
        deltas,
        mean_abs_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_rate_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(0, &cfg), 0.01);
        assert!((lr_at(1000, &cfg) - 0.01 * (-1f64).exp()).abs() < 1e-18);
        assert!((lr_at(1000, &cfg) - 0.0036788).abs() < 1e-7);
        assert!(lr_at(10_000_000, &cfg) < 1e-300);
        for n in 0..100 {
            assert!(lr_at(n + 1, &cfg) < lr_at(n, &cfg));
        }
    }

    fn scalar_params(v: f64) -> Params {
        Params {
            ttm: None,
            streams: vec![super::super::model::StreamParams {
                fc1: super::super::dense::Dense {
                    input: 1,
                    output: 1,
                    weights: vec![v],
                    bias: vec![0.0],
                },
                fc2: super::super::dense::Dense::zeros(1, 1),
            }],
            fusion: None,
        }
    }

    #[test]
    fn momentum_steps() {
        let mut p = scalar_params(0.0);
        let mut v = scalar_params(0.0);
        let g = scalar_params(1.0);
        sgd_momentum_step(&mut p, &g, &mut v, 0.01, 0.7).unwrap();
        assert_eq!(p.streams[0].fc1.weights[0], -0.01);
        assert_eq!(v.streams[0].fc1.weights[0], -0.01);
        sgd_momentum_step(&mut p, &g, &mut v, 0.01, 0.7).unwrap();
        assert!((p.streams[0].fc1.weights[0] + 0.027).abs() < 1e-15);

        let zero = scalar_params(0.0);
        let mut v = scalar_params(1.0);
        let mut p = scalar_params(0.0);
        for k in 1..=5 {
            sgd_momentum_step(&mut p, &zero, &mut v, 0.01, 0.7).unwrap();
            assert!((v.streams[0].fc1.weights[0] - 0.7f64.powi(k)).abs() < 1e-15);
        }
    }
}
