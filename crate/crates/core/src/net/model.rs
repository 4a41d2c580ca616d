//! One-, two- and three-stream classifiers.
//!
//! Each stream is `fc1 -> activation -> dropout -> fc2 -> softmax`. With more
//! than one stream the stream probabilities are concatenated and fused by a
//! dense layer followed by a softmax; a single stream is its own output. An
//! optional temporal transformer shifts the raw-coordinate block of whichever
//! stream consumes it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::dense::{softmax, softmax_backward, Activation, Dense};
use crate::error::{Error, Result};
use crate::features::{FeatureBundle, FeatureDims, FeatureKind};
use crate::ttm::{ttm_backward, ttm_forward, LocalizationNet, TtmCache, LN_HIDDEN};

/// Floor applied to the target probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "1s")]
    OneStream,
    #[serde(rename = "2s")]
    TwoStream,
    #[serde(rename = "3s")]
    ThreeStream,
}

impl Variant {
    pub fn stream_count(self) -> usize {
        match self {
            Self::OneStream => 1,
            Self::TwoStream => 2,
            Self::ThreeStream => 3,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OneStream => "1s",
            Self::TwoStream => "2s",
            Self::ThreeStream => "3s",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1s" => Ok(Self::OneStream),
            "2s" => Ok(Self::TwoStream),
            "3s" => Ok(Self::ThreeStream),
            other => Err(Error::Config(format!(
                "unknown architecture {other:?}, expected 1s, 2s or 3s"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kinds: Vec<FeatureKind>,
    pub input_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtmSpec {
    /// Values per frame in the raw-coordinate vector (`d * N_J`).
    pub frame_width: usize,
    pub frames: usize,
    pub hidden: usize,
}

impl TtmSpec {
    pub fn input_dim(&self) -> usize {
        self.frame_width * self.frames
    }
}

/// Shape of a network, enough to rebuild it from a parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub variant: Variant,
    pub classes: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub streams: Vec<StreamSpec>,
    pub ttm: Option<TtmSpec>,
}

impl Architecture {
    /// Standard stream layout for `variant`.
    ///
    /// `inputs` picks the features of a one-stream net; two- and three-stream
    /// nets always use all four families, split as `{rc}, {s_ps, t_ps, t_s_ps}`
    /// and `{rc}, {s_ps}, {t_ps, t_s_ps}`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: Variant,
        inputs: &[FeatureKind],
        dims: FeatureDims,
        frame_width: usize,
        classes: usize,
        hidden: usize,
        dropout: f64,
        ttm: bool,
    ) -> Result<Self> {
        use FeatureKind::*;
        let groups: Vec<Vec<FeatureKind>> = match variant {
            Variant::OneStream => {
                let kinds: Vec<_> = FeatureKind::ALL
                    .into_iter()
                    .filter(|k| inputs.contains(k))
                    .collect();
                vec![kinds]
            }
            Variant::TwoStream => vec![vec![Rc], vec![SPs, TPs, TSPs]],
            Variant::ThreeStream => vec![vec![Rc], vec![SPs], vec![TPs, TSPs]],
        };
        let streams = groups
            .into_iter()
            .map(|kinds| StreamSpec {
                input_dim: kinds.iter().map(|&k| dims.get(k)).sum(),
                kinds,
            })
            .collect();
        let ttm = ttm.then(|| TtmSpec {
            frame_width,
            frames: if frame_width == 0 { 0 } else { dims.rc / frame_width },
            hidden: LN_HIDDEN,
        });
        let arch = Self {
            variant,
            classes,
            hidden,
            dropout,
            activation: Activation::Relu,
            streams,
            ttm,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.streams.len() != self.variant.stream_count() {
            return Err(Error::Config(format!(
                "{} expects {} streams, got {}",
                self.variant,
                self.variant.stream_count(),
                self.streams.len()
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        for (i, s) in self.streams.iter().enumerate() {
            if s.kinds.is_empty() || s.input_dim == 0 {
                return Err(Error::Config(format!("stream {i} has no input features")));
            }
        }
        if let Some(t) = &self.ttm {
            let Some(stream) = self.rc_stream() else {
                return Err(Error::Config(
                    "the temporal transformer needs a stream fed with raw coordinates".into(),
                ));
            };
            if self.streams[stream].kinds[0] != FeatureKind::Rc {
                return Err(Error::Config("raw coordinates must lead their stream".into()));
            }
            if t.frame_width == 0 || t.frames < 2 {
                return Err(Error::Config(format!(
                    "temporal transformer needs frame width > 0 and >= 2 frames, got {}x{}",
                    t.frame_width, t.frames
                )));
            }
        }
        Ok(())
    }

    /// Index of the stream that consumes raw coordinates, if any.
    pub fn rc_stream(&self) -> Option<usize> {
        self.streams
            .iter()
            .position(|s| s.kinds.contains(&FeatureKind::Rc))
    }

    /// Feature families read by any stream.
    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        FeatureKind::ALL
            .into_iter()
            .filter(|k| self.streams.iter().any(|s| s.kinds.contains(k)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamParams {
    pub fc1: Dense,
    pub fc2: Dense,
}

/// All trainable parameters; also used as the gradient and velocity buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub ttm: Option<LocalizationNet>,
    pub streams: Vec<StreamParams>,
    pub fusion: Option<Dense>,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        Self {
            ttm: self.ttm.as_ref().map(LocalizationNet::zeros_like),
            streams: self
                .streams
                .iter()
                .map(|s| StreamParams {
                    fc1: s.fc1.zeros_like(),
                    fc2: s.fc2.zeros_like(),
                })
                .collect(),
            fusion: self.fusion.as_ref().map(Dense::zeros_like),
        }
    }

    /// Named parameter groups in declared order.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        if let Some(ln) = &self.ttm {
            for (name, p) in LocalizationNet::param_names().into_iter().zip(ln.params()) {
                out.push((format!("ttm.{name}"), p));
            }
        }
        for (i, s) in self.streams.iter().enumerate() {
            out.push((format!("stream{i}.fc1.w"), &s.fc1.weights));
            out.push((format!("stream{i}.fc1.b"), &s.fc1.bias));
            out.push((format!("stream{i}.fc2.w"), &s.fc2.weights));
            out.push((format!("stream{i}.fc2.b"), &s.fc2.bias));
        }
        if let Some(f) = &self.fusion {
            out.push(("fusion.w".into(), &f.weights));
            out.push(("fusion.b".into(), &f.bias));
        }
        out
    }

    pub fn groups_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(ln) = &mut self.ttm {
            out.extend(ln.params_mut());
        }
        for s in &mut self.streams {
            out.push(&mut s.fc1.weights);
            out.push(&mut s.fc1.bias);
            out.push(&mut s.fc2.weights);
            out.push(&mut s.fc2.bias);
        }
        if let Some(f) = &mut self.fusion {
            out.push(&mut f.weights);
            out.push(&mut f.bias);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (_, g) in self.groups() {
            out.extend_from_slice(g);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: flat.len(),
                context: "flat parameter vector",
            });
        }
        let mut offset = 0;
        for g in self.groups_mut() {
            g.copy_from_slice(&flat[offset..offset + g.len()]);
            offset += g.len();
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        let a = self.groups();
        let b = other.groups();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.1.len() == y.1.len())
    }

    /// `self += other`, element-wise.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Config("parameter shapes differ".into()));
        }
        for (dst, (_, src)) in self.groups_mut().into_iter().zip(other.groups()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.groups_mut() {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|v| v.is_finite()))
    }
}

/// Intermediate values of one stream, one entry per sample.
#[derive(Debug, Clone)]
pub struct StreamCache {
    pub input: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers (`0` or `1/(1-p)`); `None` in eval mode.
    pub mask: Option<Vec<Vec<f64>>>,
    pub dropped: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
}

/// Everything [`MultiStreamNet::backward`] needs from a forward pass over a
/// batch of samples.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub ttm: Vec<TtmCache>,
    pub streams: Vec<StreamCache>,
    pub fused_input: Vec<Vec<f64>>,
    /// Output class probabilities per sample.
    pub probs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Per-sample shifts, empty without a temporal transformer.
    pub fn deltas(&self) -> Vec<f64> {
        self.ttm.iter().map(TtmCache::delta).collect()
    }
}

fn as_slices(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStreamNet {
    pub arch: Architecture,
    pub params: Params,
}

/// `-ln(max(p[label], 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::Domain(format!(
            "label {label} out of range for {} classes",
            probs.len()
        ))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

impl MultiStreamNet {
    /// Glorot-initialized streams and fusion; the localization network starts
    /// with a zero output layer so the transformer begins as the identity.
    pub fn new<R: Rng>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let ttm = arch
            .ttm
            .map(|t| LocalizationNet::init(t.input_dim(), t.hidden, rng));
        let streams = arch
            .streams
            .iter()
            .map(|s| StreamParams {
                fc1: Dense::glorot(s.input_dim, arch.hidden, rng),
                fc2: Dense::glorot(arch.hidden, arch.classes, rng),
            })
            .collect();
        let fusion = (arch.streams.len() > 1)
            .then(|| Dense::glorot(arch.streams.len() * arch.classes, arch.classes, rng));
        Ok(Self {
            arch,
            params: Params {
                ttm,
                streams,
                fusion,
            },
        })
    }

    pub fn from_params(arch: Architecture, params: Params) -> Result<Self> {
        arch.validate()?;
        let template = Self::zeros(arch.clone())?;
        if !template.params.same_shape(&params) {
            return Err(Error::Config("parameters do not match the architecture".into()));
        }
        Ok(Self { arch, params })
    }

    /// All parameters zero. Mostly useful as a shape template.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let ttm = arch
            .ttm
            .map(|t| LocalizationNet::zeros(t.input_dim(), t.hidden));
        let streams = arch
            .streams
            .iter()
            .map(|s| StreamParams {
                fc1: Dense::zeros(s.input_dim, arch.hidden),
                fc2: Dense::zeros(arch.hidden, arch.classes),
            })
            .collect();
        let fusion = (arch.streams.len() > 1)
            .then(|| Dense::zeros(arch.streams.len() * arch.classes, arch.classes));
        Ok(Self {
            arch,
            params: Params {
                ttm,
                streams,
                fusion,
            },
        })
    }

    /// Shift the localization network would apply to this input.
    pub fn delta(&self, bundle: &FeatureBundle) -> Result<Option<f64>> {
        match &self.params.ttm {
            Some(ln) => Ok(Some(crate::ttm::ln_forward(&bundle.rc, ln)?.0)),
            None => Ok(None),
        }
    }

    fn check_bundle(&self, bundle: &FeatureBundle) -> Result<()> {
        for (i, s) in self.arch.streams.iter().enumerate() {
            let got: usize = s.kinds.iter().map(|&k| bundle.get(k).len()).sum();
            if got != s.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: s.input_dim,
                    got,
                    context: if i == 0 {
                        "stream 0 input"
                    } else {
                        "stream input"
                    },
                });
            }
        }
        Ok(())
    }

    /// Forward pass over a batch. Passing an RNG enables inverted dropout
    /// (train mode); masks are drawn sample by sample, stream by stream.
    pub fn forward(
        &self,
        bundles: &[&FeatureBundle],
        mut dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardCache> {
        for b in bundles {
            self.check_bundle(b)?;
        }
        let mut ttm = Vec::new();
        let mut shifted_rc = Vec::new();
        if let (Some(ln), Some(spec)) = (&self.params.ttm, &self.arch.ttm) {
            for b in bundles {
                let (out, cache) = ttm_forward(&b.rc, spec.frame_width, ln)?;
                shifted_rc.push(out);
                ttm.push(cache);
            }
        }
        let keep = 1.0 - self.arch.dropout;
        let mut streams = Vec::with_capacity(self.arch.streams.len());
        for (spec, p) in self.arch.streams.iter().zip(&self.params.streams) {
            let input: Vec<Vec<f64>> = bundles
                .iter()
                .enumerate()
                .map(|(n, b)| {
                    let mut x = Vec::with_capacity(spec.input_dim);
                    for &k in &spec.kinds {
                        if k == FeatureKind::Rc && !shifted_rc.is_empty() {
                            x.extend_from_slice(&shifted_rc[n]);
                        } else {
                            x.extend_from_slice(b.get(k));
                        }
                    }
                    x
                })
                .collect();
            let pre = p.fc1.forward_batch(&as_slices(&input));
            let hidden: Vec<Vec<f64>> = pre
                .iter()
                .map(|z| z.iter().map(|&v| self.arch.activation.apply(v)).collect())
                .collect();
            let mask = dropout_rng.as_deref_mut().map(|rng| {
                hidden
                    .iter()
                    .map(|h| {
                        (0..h.len())
                            .map(|_| {
                                if rng.random::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect::<Vec<f64>>()
                    })
                    .collect::<Vec<_>>()
            });
            let dropped: Vec<Vec<f64>> = match &mask {
                Some(m) => hidden
                    .iter()
                    .zip(m)
                    .map(|(h, m)| h.iter().zip(m).map(|(a, b)| a * b).collect())
                    .collect(),
                None => hidden.clone(),
            };
            let probs = p
                .fc2
                .forward_batch(&as_slices(&dropped))
                .iter()
                .map(|z| softmax(z))
                .collect();
            streams.push(StreamCache {
                input,
                pre,
                hidden,
                mask,
                dropped,
                probs,
            });
        }
        let (fused_input, probs) = match &self.params.fusion {
            Some(fusion) => {
                let fused: Vec<Vec<f64>> = (0..bundles.len())
                    .map(|n| streams.iter().flat_map(|s| s.probs[n].clone()).collect())
                    .collect();
                let probs = fusion
                    .forward_batch(&as_slices(&fused))
                    .iter()
                    .map(|z| softmax(z))
                    .collect();
                (fused, probs)
            }
            None => (Vec::new(), streams[0].probs.clone()),
        };
        Ok(ForwardCache {
            ttm,
            streams,
            fused_input,
            probs,
        })
    }

    /// Eval-mode class probabilities of one sample.
    pub fn predict(&self, bundle: &FeatureBundle) -> Result<Vec<f64>> {
        Ok(self
            .forward(&[bundle], None)?
            .probs
            .pop()
            .expect("one sample in, one out"))
    }

    /// Accumulates summed cross-entropy gradients of the batch into `grads`
    /// and returns the per-sample losses.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        labels: &[usize],
        grads: &mut Params,
    ) -> Result<Vec<f64>> {
        let n = cache.len();
        if labels.len() != n
            || cache.streams.len() != self.params.streams.len()
            || cache.probs.iter().any(|p| p.len() != self.arch.classes)
            || (self.params.ttm.is_some() && cache.ttm.len() != n)
            || (self.params.ttm.is_none() && !cache.ttm.is_empty())
        {
            return Err(Error::StaleCache("forward cache does not match this network"));
        }
        if !grads.same_shape(&self.params) {
            return Err(Error::Config("gradient buffer does not match the network".into()));
        }
        let mut losses = Vec::with_capacity(n);
        let mut g_out = Vec::with_capacity(n);
        for (p, &label) in cache.probs.iter().zip(labels) {
            losses.push(cross_entropy(p, label)?);
            let mut g = p.clone();
            g[label] -= 1.0;
            g_out.push(g);
        }

        let c = self.arch.classes;
        // Gradient on each stream's logits, [stream][sample].
        let stream_grads: Vec<Vec<Vec<f64>>> = match &self.params.fusion {
            Some(fusion) => {
                fusion.accumulate_batch(
                    &as_slices(&cache.fused_input),
                    &as_slices(&g_out),
                    grads.fusion.as_mut().expect("shape checked"),
                );
                let g_in: Vec<Vec<f64>> = g_out
                    .iter()
                    .map(|g| fusion.input_grad(g, fusion.input))
                    .collect();
                (0..cache.streams.len())
                    .map(|i| {
                        (0..n)
                            .map(|s| {
                                softmax_backward(
                                    &cache.streams[i].probs[s],
                                    &g_in[s][i * c..(i + 1) * c],
                                )
                            })
                            .collect()
                    })
                    .collect()
            }
            None => vec![g_out],
        };

        let rc_stream = self.arch.rc_stream();
        for (i, ((s, p), gz2)) in cache
            .streams
            .iter()
            .zip(&self.params.streams)
            .zip(stream_grads)
            .enumerate()
        {
            let g = &mut grads.streams[i];
            p.fc2
                .accumulate_batch(&as_slices(&s.dropped), &as_slices(&gz2), &mut g.fc2);
            let gz1: Vec<Vec<f64>> = (0..n)
                .map(|k| {
                    let mut gh = p.fc2.input_grad(&gz2[k], self.arch.hidden);
                    if let Some(mask) = &s.mask {
                        for (x, m) in gh.iter_mut().zip(&mask[k]) {
                            *x *= m;
                        }
                    }
                    gh.iter()
                        .zip(s.pre[k].iter().zip(&s.hidden[k]))
                        .map(|(g, (&z, &a))| g * self.arch.activation.derivative(z, a))
                        .collect()
                })
                .collect();
            p.fc1
                .accumulate_batch(&as_slices(&s.input), &as_slices(&gz1), &mut g.fc1);

            if let (Some(ln), Some(true)) = (&self.params.ttm, rc_stream.map(|r| r == i)) {
                let gttm = grads.ttm.as_mut().expect("shape checked");
                for (ttm, gz) in cache.ttm.iter().zip(&gz1) {
                    let g_rc = p.fc1.input_grad(gz, ttm.input.len());
                    ttm_backward(&g_rc, ttm, ln, gttm)?;
                }
            }
        }
        Ok(losses)
    }
}
