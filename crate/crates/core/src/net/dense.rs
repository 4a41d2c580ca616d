use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully-connected layer, `weights` stored `input × output` with row `i`
/// holding the fan-out of input `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            input,
            output,
            weights: vec![0.0; input * output],
            bias: vec![0.0; output],
        }
    }

    /// Weights uniform in `±sqrt(6 / (in + out))`, zero biases.
    pub fn glorot<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(input, output);
        let limit = (6.0 / (input + output) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input, self.output)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input);
        let mut z = self.bias.clone();
        for (&xi, row) in x.iter().zip(self.weights.chunks_exact(self.output)) {
            if xi == 0.0 {
                continue;
            }
            for (zk, &w) in z.iter_mut().zip(row) {
                *zk += xi * w;
            }
        }
        z
    }

    /// `grads.W += x ⊗ gz`, `grads.b += gz`.
    pub fn accumulate(&self, x: &[f64], gz: &[f64], grads: &mut Dense) {
        for (gb, &g) in grads.bias.iter_mut().zip(gz) {
            *gb += g;
        }
        for (&xi, row) in x.iter().zip(grads.weights.chunks_exact_mut(self.output)) {
            if xi == 0.0 {
                continue;
            }
            for (gw, &g) in row.iter_mut().zip(gz) {
                *gw += xi * g;
            }
        }
    }

    /// Forward pass over a batch; each weight row is read once per batch.
    /// Per-sample results are bitwise equal to [`Dense::forward`].
    pub fn forward_batch(&self, xs: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = xs.iter().map(|_| self.bias.clone()).collect();
        let mut col = vec![0.0; xs.len()];
        for (i, row) in self.weights.chunks_exact(self.output).enumerate() {
            for (c, x) in col.iter_mut().zip(xs) {
                *c = x[i];
            }
            for (z, &xi) in zs.iter_mut().zip(&col) {
                if xi == 0.0 {
                    continue;
                }
                for (zk, &w) in z.iter_mut().zip(row) {
                    *zk += xi * w;
                }
            }
        }
        zs
    }

    /// Batched [`Dense::accumulate`]; samples are added in batch order.
    pub fn accumulate_batch(&self, xs: &[&[f64]], gzs: &[&[f64]], grads: &mut Dense) {
        for gz in gzs {
            for (gb, &g) in grads.bias.iter_mut().zip(gz.iter()) {
                *gb += g;
            }
        }
        let mut col = vec![0.0; xs.len()];
        for (i, row) in grads.weights.chunks_exact_mut(self.output).enumerate() {
            for (c, x) in col.iter_mut().zip(xs) {
                *c = x[i];
            }
            for (&xi, gz) in col.iter().zip(gzs) {
                if xi == 0.0 {
                    continue;
                }
                for (gw, &g) in row.iter_mut().zip(gz.iter()) {
                    *gw += xi * g;
                }
            }
        }
    }

    /// `W gz` restricted to the first `rows` inputs.
    pub fn input_grad(&self, gz: &[f64], rows: usize) -> Vec<f64> {
        self.weights
            .chunks_exact(self.output)
            .take(rows)
            .map(|row| row.iter().zip(gz).map(|(w, g)| w * g).sum())
            .collect()
    }

    pub fn multadds(&self) -> u64 {
        (self.input * self.output) as u64
    }
}

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Relu => z.max(0.0),
            Self::Tanh => z.tanh(),
        }
    }

    /// Derivative given pre-activation `z` and output `a`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - a * a,
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Pulls a gradient on softmax outputs back to its logits.
pub fn softmax_backward(p: &[f64], gp: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(gp).map(|(a, b)| a * b).sum();
    p.iter().zip(gp).map(|(pi, gi)| pi * (gi - dot)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0; 4]);
        assert!(p.iter().all(|&v| v == 0.25));
        let p = softmax(&[1000.0, -1000.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_forward_and_grads() {
        let mut d = Dense::zeros(2, 3);
        d.weights = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        d.bias = vec![0.5, 0.0, -0.5];
        assert_eq!(d.forward(&[1.0, -1.0]), vec![-2.5, -3.0, -3.5]);
        let mut g = d.zeros_like();
        d.accumulate(&[2.0, 0.0], &[1.0, 0.0, -1.0], &mut g);
        assert_eq!(g.weights, vec![2.0, 0.0, -2.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.bias, vec![1.0, 0.0, -1.0]);
        assert_eq!(d.input_grad(&[1.0, 1.0, 1.0], 2), vec![6.0, 15.0]);
        assert_eq!(d.multadds(), 6);
    }

    #[test]
    fn batch_paths_match_single_sample_bitwise() {
        let mut rng = rand::rng();
        let d = Dense::glorot(7, 5, &mut rng);
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let gs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let gr: Vec<&[f64]> = gs.iter().map(Vec::as_slice).collect();
        for (z, x) in d.forward_batch(&xr).iter().zip(&xs) {
            assert_eq!(z, &d.forward(x));
        }
        let mut batched = d.zeros_like();
        d.accumulate_batch(&xr, &gr, &mut batched);
        let mut single = d.zeros_like();
        for (x, g) in xs.iter().zip(&gs) {
            d.accumulate(x, g, &mut single);
        }
        assert_eq!(batched, single);
    }
}
