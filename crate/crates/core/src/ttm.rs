//! Temporal transformer: a small localization network regresses one shift
//! `Δ` per sequence and the frame axis is resampled at `x - Δ` by linear
//! interpolation, with positions clamped to the valid frame range.
//!
//! Inputs are frame-major vectors (`frames` rows of `width` values), the same
//! layout as the raw-coordinate feature. Frame indices are 0-based, so
//! positions are clamped to `[0, frames - 1]`.
//!
//! At an integer position the interpolation weight is 0 and the sample is
//! taken from the interval `[p, p + 1)`; the derivative with respect to `Δ`
//! uses the same interval. Positions outside the range (or exactly on the last
//! frame) are treated as clamped and carry no `Δ` gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the localization network's hidden layer.
pub const LN_HIDDEN: usize = 64;

/// `input -> tanh(hidden) -> 1` regressor producing `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationNet {
    pub input_dim: usize,
    pub hidden: usize,
    /// `input_dim × hidden`, row `i` holds the fan-out of input `i`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl LocalizationNet {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w1: vec![0.0; input_dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Glorot-uniform first layer, zero output layer: `Δ = 0` at init.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input_dim, hidden);
        let limit = (6.0 / (input_dim + hidden) as f64).sqrt();
        for w in &mut net.w1 {
            *w = rng.random_range(-limit..limit);
        }
        net
    }

    /// Parameter slices in declared order: w1, b1, w2, b2.
    pub fn params(&self) -> Vec<&[f64]> {
        vec![&self.w1, &self.b1, &self.w2, std::slice::from_ref(&self.b2)]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            std::slice::from_mut(&mut self.b2),
        ]
    }

    pub fn param_names() -> [&'static str; 4] {
        ["w1", "b1", "w2", "b2"]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden)
    }

    pub fn multadds(&self) -> u64 {
        (self.input_dim * self.hidden + self.hidden) as u64
    }
}

/// Hidden activations of one localization forward pass.
#[derive(Debug, Clone)]
pub struct LnCache {
    pub hidden: Vec<f64>,
}

/// `Δ = w2 · tanh(W1ᵀ I + b1) + b2`.
pub fn ln_forward(input: &[f64], net: &LocalizationNet) -> Result<(f64, LnCache)> {
    if input.len() != net.input_dim {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim,
            got: input.len(),
            context: "localization network input",
        });
    }
    let mut z = net.b1.clone();
    for (&x, row) in input.iter().zip(net.w1.chunks_exact(net.hidden)) {
        if x == 0.0 {
            continue;
        }
        for (zk, &w) in z.iter_mut().zip(row) {
            *zk += x * w;
        }
    }
    let hidden: Vec<f64> = z.into_iter().map(f64::tanh).collect();
    let delta = net.b2 + hidden.iter().zip(&net.w2).map(|(h, w)| h * w).sum::<f64>();
    Ok((delta, LnCache { hidden }))
}

/// Accumulates parameter gradients into `grads` and returns `∂Δ/∂I · grad_delta`.
pub fn ln_backward(
    input: &[f64],
    cache: &LnCache,
    net: &LocalizationNet,
    grad_delta: f64,
    grads: &mut LocalizationNet,
) -> Vec<f64> {
    grads.b2 += grad_delta;
    let mut gz = vec![0.0; net.hidden];
    for k in 0..net.hidden {
        let h = cache.hidden[k];
        grads.w2[k] += grad_delta * h;
        gz[k] = grad_delta * net.w2[k] * (1.0 - h * h);
        grads.b1[k] += gz[k];
    }
    let mut grad_input = vec![0.0; input.len()];
    for (i, &x) in input.iter().enumerate() {
        let row = &net.w1[i * net.hidden..(i + 1) * net.hidden];
        let grow = &mut grads.w1[i * net.hidden..(i + 1) * net.hidden];
        let mut acc = 0.0;
        for k in 0..net.hidden {
            grow[k] += x * gz[k];
            acc += row[k] * gz[k];
        }
        grad_input[i] = acc;
    }
    grad_input
}

/// Source frames and weight for one output frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnShift {
    pub lo: usize,
    pub hi: usize,
    pub alpha: f64,
    /// Position fell outside the frame range (or on the last frame).
    pub clamped: bool,
}

/// Everything the backward pass needs from [`temporal_shift`].
#[derive(Debug, Clone)]
pub struct ShiftCache {
    pub delta: f64,
    pub width: usize,
    pub frames: usize,
    pub columns: Vec<ColumnShift>,
}

fn column_shift(x: usize, delta: f64, frames: usize) -> ColumnShift {
    let last = frames - 1;
    let pos = x as f64 - delta;
    if !(pos >= 0.0) {
        // Also catches NaN.
        return ColumnShift {
            lo: 0,
            hi: 0,
            alpha: 0.0,
            clamped: true,
        };
    }
    if pos >= last as f64 {
        return ColumnShift {
            lo: last,
            hi: last,
            alpha: 0.0,
            clamped: true,
        };
    }
    let lo = pos.floor() as usize;
    ColumnShift {
        lo,
        hi: lo + 1,
        alpha: pos - lo as f64,
        clamped: false,
    }
}

/// Resamples every frame-major row at `x - Δ`.
pub fn temporal_shift(input: &[f64], width: usize, delta: f64) -> Result<(Vec<f64>, ShiftCache)> {
    if width == 0 || input.len() % width != 0 {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: input.len(),
            context: "temporal shift frame width",
        });
    }
    let frames = input.len() / width;
    if frames < 2 {
        return Err(Error::Domain(format!(
            "temporal shift needs at least 2 frames, got {frames}"
        )));
    }
    let columns: Vec<ColumnShift> = (0..frames).map(|x| column_shift(x, delta, frames)).collect();
    let mut out = Vec::with_capacity(input.len());
    for c in &columns {
        let lo = &input[c.lo * width..(c.lo + 1) * width];
        if c.alpha == 0.0 {
            out.extend_from_slice(lo);
        } else {
            let hi = &input[c.hi * width..(c.hi + 1) * width];
            out.extend(lo.iter().zip(hi).map(|(a, b)| (1.0 - c.alpha) * a + c.alpha * b));
        }
    }
    Ok((
        out,
        ShiftCache {
            delta,
            width,
            frames,
            columns,
        },
    ))
}

/// Gradients of a temporal shift: `(∂L/∂input, ∂L/∂Δ)`.
pub fn temporal_shift_backward(
    grad_out: &[f64],
    input: &[f64],
    cache: &ShiftCache,
) -> Result<(Vec<f64>, f64)> {
    let n = cache.width * cache.frames;
    if grad_out.len() != n || input.len() != n {
        return Err(Error::StaleCache("temporal shift cache does not match tensors"));
    }
    let w = cache.width;
    let mut grad_in = vec![0.0; n];
    let mut grad_delta = 0.0;
    for (x, c) in cache.columns.iter().enumerate() {
        let g = &grad_out[x * w..(x + 1) * w];
        for r in 0..w {
            grad_in[c.lo * w + r] += (1.0 - c.alpha) * g[r];
            if c.alpha != 0.0 {
                grad_in[c.hi * w + r] += c.alpha * g[r];
            }
        }
        if !c.clamped {
            let lo = &input[c.lo * w..(c.lo + 1) * w];
            let hi = &input[c.hi * w..(c.hi + 1) * w];
            for r in 0..w {
                grad_delta += g[r] * (lo[r] - hi[r]);
            }
        }
    }
    Ok((grad_in, grad_delta))
}

/// Caches of one [`ttm_forward`] call.
#[derive(Debug, Clone)]
pub struct TtmCache {
    pub input: Vec<f64>,
    pub ln: LnCache,
    pub shift: ShiftCache,
}

impl TtmCache {
    pub fn delta(&self) -> f64 {
        self.shift.delta
    }
}

/// `O = shift(I, f_LN(I))` for a frame-major input of row width `width`.
pub fn ttm_forward(
    input: &[f64],
    width: usize,
    net: &LocalizationNet,
) -> Result<(Vec<f64>, TtmCache)> {
    let (delta, ln) = ln_forward(input, net)?;
    let (out, shift) = temporal_shift(input, width, delta)?;
    Ok((
        out,
        TtmCache {
            input: input.to_vec(),
            ln,
            shift,
        },
    ))
}

/// Backpropagates through the shift and the localization network.
/// Parameter gradients are accumulated into `grads`; returns `∂L/∂I`.
pub fn ttm_backward(
    grad_out: &[f64],
    cache: &TtmCache,
    net: &LocalizationNet,
    grads: &mut LocalizationNet,
) -> Result<Vec<f64>> {
    if cache.input.len() != net.input_dim || cache.ln.hidden.len() != net.hidden {
        return Err(Error::StaleCache("TTM cache does not match the localization network"));
    }
    let (mut grad_in, grad_delta) = temporal_shift_backward(grad_out, &cache.input, &cache.shift)?;
    let via_ln = ln_backward(&cache.input, &cache.ln, net, grad_delta, grads);
    for (g, l) in grad_in.iter_mut().zip(via_ln) {
        *g += l;
    }
    Ok(grad_in)
}
