//! Reference implementations written straight from the definitions, kept
//! apart from the library code they check.
#![allow(dead_code)]

use rand::Rng;

/// Flat index of a word inside its level, first letter varying slowest.
pub fn word_index(word: &[usize], d: usize) -> usize {
    word.iter().fold(0, |acc, &i| acc * d + i)
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `d + d^2 + ... + d^m` via the geometric-series closed form.
pub fn geometric_dim(d: usize, m: usize) -> usize {
    if d == 1 {
        m
    } else {
        (d.pow(m as u32 + 1) - d) / (d - 1)
    }
}

/// Truncated tensor product `a ⊗ b` of two group-like elements given as
/// levels `1..=m` (level 0 is 1 for both).
pub fn tensor_mul(a: &[Vec<f64>], b: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let m = a.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 1..=m {
        let mut level: Vec<f64> = a[k - 1].iter().zip(&b[k - 1]).map(|(x, y)| x + y).collect();
        for j in 1..k {
            let right = d.pow((k - j) as u32);
            for (ia, &x) in a[j - 1].iter().enumerate() {
                for (ib, &y) in b[k - j - 1].iter().enumerate() {
                    level[ia * right + ib] += x * y;
                }
            }
        }
        out.push(level);
    }
    out
}

/// Signature of one straight segment from `Π Δ^{i_j} / k!`, word by word.
pub fn segment_levels(inc: &[f64], m: usize) -> Vec<Vec<f64>> {
    let d = inc.len();
    (1..=m)
        .map(|k| {
            (0..d.pow(k as u32))
                .map(|mut idx| {
                    let mut p = 1.0;
                    for _ in 0..k {
                        p *= inc[idx % d];
                        idx /= d;
                    }
                    p / factorial(k)
                })
                .collect()
        })
        .collect()
}

/// Left-point iterated sums with every segment cut into `n` equal steps:
/// `Σ_{t_1 < ... < t_k} dX^{i_1}_{t_1} ... dX^{i_k}_{t_k}`.
pub fn riemann_levels(vertices: &[Vec<f64>], m: usize, n: usize) -> Vec<Vec<f64>> {
    let d = vertices[0].len();
    let mut acc: Vec<Vec<f64>> = (1..=m).map(|k| vec![0.0; d.pow(k as u32)]).collect();
    let mut dx = vec![0.0; d];
    for w in vertices.windows(2) {
        for i in 0..d {
            dx[i] = (w[1][i] - w[0][i]) / n as f64;
        }
        for _ in 0..n {
            // Top-down so level k sees level k-1 from strictly earlier steps.
            for k in (2..=m).rev() {
                let (lower, upper) = acc.split_at_mut(k - 1);
                let prev = &lower[k - 2];
                let cur = &mut upper[0];
                for (p, &v) in prev.iter().enumerate() {
                    for i in 0..d {
                        cur[p * d + i] += v * dx[i];
                    }
                }
            }
            for i in 0..d {
                acc[0][i] += dx[i];
            }
        }
    }
    acc
}

/// Riemann sums extrapolated to zero step.
///
/// On a piecewise-linear path the level-k sum is a polynomial of degree
/// `k - 1` in `1/n`, so two Richardson steps over `n, 2n, 4n` remove the
/// discretization error completely for `k <= 3`.
pub fn riemann_extrapolated(vertices: &[Vec<f64>], m: usize, n: usize) -> Vec<Vec<f64>> {
    assert!(m <= 3, "two Richardson steps are exact only up to level 3");
    let r1 = riemann_levels(vertices, m, n);
    let r2 = riemann_levels(vertices, m, 2 * n);
    let r4 = riemann_levels(vertices, m, 4 * n);
    r1.iter()
        .zip(&r2)
        .zip(&r4)
        .map(|((a, b), c)| {
            a.iter()
                .zip(b)
                .zip(c)
                .map(|((x, y), z)| (x - 6.0 * y + 8.0 * z) / 3.0)
                .collect()
        })
        .collect()
}

pub fn flatten(levels: &[Vec<f64>]) -> Vec<f64> {
    levels.iter().flatten().copied().collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn random_vertices<R: Rng>(rng: &mut R, d: usize, n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

/// Coordinates on the grid `k / 1024`, `|k| <= 4096`: sums and differences
/// of such numbers are exact in f64.
pub fn grid_vertices<R: Rng>(rng: &mut R, d: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| rng.random_range(-4096i32..=4096) as f64 / 1024.0)
                .collect()
        })
        .collect()
}

pub fn random_word<R: Rng>(rng: &mut R, d: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..d)).collect()
}

/// Random temporal-transformer configuration whose shift sits at least 0.2
/// frames away from the integer grid, where the interpolation has kinks.
pub struct TtmCase {
    pub input: Vec<f64>,
    pub width: usize,
    pub net: gesture_sig::ttm::LocalizationNet,
    pub grad_out: Vec<f64>,
}

pub fn random_ttm_case<R: Rng>(rng: &mut R) -> TtmCase {
    use gesture_sig::ttm::{ln_forward, LocalizationNet};
    let frames = rng.random_range(4..=10);
    let width = rng.random_range(1..=4);
    let hidden = rng.random_range(2..=6);
    let n = frames * width;
    let mut u = |s: f64| rng.random_range(-s..s);
    let input: Vec<f64> = (0..n).map(|_| u(1.0)).collect();
    let mut net = LocalizationNet::zeros(n, hidden);
    net.w1.iter_mut().for_each(|w| *w = u(0.5));
    net.b1.iter_mut().for_each(|w| *w = u(0.5));
    net.w2.iter_mut().for_each(|w| *w = u(0.5));
    let grad_out: Vec<f64> = (0..n).map(|_| u(1.0)).collect();
    let half = frames as i64 / 2;
    let target = rng.random_range(-half..=half) as f64 + rng.random_range(0.2..0.8);
    let (d0, _) = ln_forward(&input, &net).unwrap();
    net.b2 = target - d0;
    TtmCase {
        input,
        width,
        net,
        grad_out,
    }
}

/// `L = <grad_out, ttm(input)>`.
pub fn ttm_loss(case: &TtmCase, input: &[f64], net: &gesture_sig::ttm::LocalizationNet) -> f64 {
    let (out, _) = gesture_sig::ttm::ttm_forward(input, case.width, net).unwrap();
    out.iter().zip(&case.grad_out).map(|(a, b)| a * b).sum()
}

/// Worst relative error between analytic and central-difference gradients
/// over the groups input, w1, b1, w2, b2.
pub fn ttm_fd_error(case: &TtmCase, h: f64) -> f64 {
    use gesture_sig::ttm::{ttm_backward, ttm_forward};
    let (_, cache) = ttm_forward(&case.input, case.width, &case.net).unwrap();
    let mut grads = case.net.zeros_like();
    let g_in = ttm_backward(&case.grad_out, &cache, &case.net, &mut grads).unwrap();

    let central = |f: &mut dyn FnMut(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
    let mut worst = 0.0f64;

    let num_in: Vec<f64> = (0..case.input.len())
        .map(|i| {
            central(&mut |e| {
                let mut x = case.input.clone();
                x[i] += e;
                ttm_loss(case, &x, &case.net)
            })
        })
        .collect();
    worst = worst.max(rel_err(&g_in, &num_in));

    let analytic = grads.params();
    for (g, a) in analytic.iter().enumerate() {
        let numeric: Vec<f64> = (0..a.len())
            .map(|i| {
                central(&mut |e| {
                    let mut net = case.net.clone();
                    net.params_mut()[g][i] += e;
                    ttm_loss(case, &case.input, &net)
                })
            })
            .collect();
        worst = worst.max(rel_err(a, &numeric));
    }
    worst
}

/// Feature lengths `[rc, s_ps, t_ps, t_s_ps]` counted from first principles.
pub fn expected_dims(cfg: &gesture_sig::FeatureConfig) -> [usize; 4] {
    let d = cfg.aoh.dim;
    let nj = cfg.aoh.single_joints.len();
    let p = cfg.aoh.pairs_within_hand.len()
        + cfg.aoh.pairs_cross_hands.len()
        + cfg.aoh.pairs_hand_body.len();
    let sub = |l: usize| 2usize.pow(l as u32 + 1) - 1;
    [
        d * nj * cfg.frames,
        p * geometric_dim(d, cfg.depths.spatial) * cfg.frames,
        nj * sub(cfg.dyadic.temporal) * geometric_dim(d + 1, cfg.depths.temporal),
        p * geometric_dim(d, 2)
            * sub(cfg.dyadic.temporal_spatial)
            * geometric_dim(2, cfg.depths.temporal_spatial),
    ]
}

/// Hand sum of dense-layer mult-adds: one per weight, localization network
/// `rc -> 64 -> 1` included when `ttm`.
pub fn hand_multadds(
    streams: usize,
    dims: gesture_sig::FeatureDims,
    classes: usize,
    hidden: usize,
    ttm: bool,
) -> u64 {
    let ps = dims.s_ps + dims.t_ps + dims.t_s_ps;
    let inputs: Vec<usize> = match streams {
        1 => vec![dims.rc + ps],
        2 => vec![dims.rc, ps],
        _ => vec![dims.rc, dims.s_ps, dims.t_ps + dims.t_s_ps],
    };
    let mut total: u64 = inputs
        .iter()
        .map(|&d| (d * hidden + hidden * classes) as u64)
        .sum();
    if streams > 1 {
        total += (streams * classes * classes) as u64;
    }
    if ttm {
        total += (dims.rc * 64 + 64) as u64;
    }
    total
}
