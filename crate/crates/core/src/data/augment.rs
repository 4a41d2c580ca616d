use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::skeleton::Skeleton;

/// Which training augmentations run, and how strongly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub temporal: bool,
    /// Shifts are drawn uniformly from `-max_shift..=max_shift`.
    pub max_shift: i64,
    pub rotation: bool,
    /// Angle limits about x, y, z in radians.
    pub rotation_limits: [f64; 3],
    pub noise: bool,
    pub noise_sigma: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            temporal: true,
            max_shift: 5,
            rotation: true,
            rotation_limits: [PI / 36.0, PI / 18.0, PI / 36.0],
            noise: true,
            noise_sigma: 0.001,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            temporal: false,
            rotation: false,
            noise: false,
            ..Self::default()
        }
    }

    pub fn any(&self) -> bool {
        self.temporal || self.rotation || self.noise
    }
}

/// Independent RNG stream for one sequence in one epoch. Depends only on its
/// arguments, so results do not depend on scheduling.
pub fn stream_rng(seed: u64, id: &str, epoch: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((id.len() as u64).to_le_bytes());
    h.update(id.as_bytes());
    h.update(epoch.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// `out[x] = in[clamp(x - k)]`: positive `k` delays the clip, repeating the
/// first frame; negative `k` advances it, repeating the last.
pub fn shift_frames(seq: &Skeleton, k: i64) -> Skeleton {
    let f = seq.frames() as i64;
    let mut out = seq.clone();
    let w = seq.joints() * seq.dim();
    for x in 0..f {
        let src = (x - k).clamp(0, f - 1) as usize;
        out.data_mut()[x as usize * w..(x as usize + 1) * w].copy_from_slice(seq.frame(src));
    }
    out
}

pub fn augment_temporal<R: Rng + ?Sized>(seq: &Skeleton, max_shift: i64, rng: &mut R) -> Skeleton {
    let k = rng.random_range(-max_shift..=max_shift);
    shift_frames(seq, k)
}

/// Adds i.i.d. `N(0, σ²)` to every coordinate.
pub fn augment_noise<R: Rng + ?Sized>(seq: &Skeleton, sigma: f64, rng: &mut R) -> Skeleton {
    let mut out = seq.clone();
    if sigma == 0.0 {
        return out;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for v in out.data_mut() {
        *v += normal.sample(rng);
    }
    out
}

/// `Rz · Ry · Rx`: rotate about x first, then y, then z.
pub fn rotation_matrix(ax: f64, ay: f64, az: f64) -> [[f64; 3]; 3] {
    let (sx, cx) = ax.sin_cos();
    let (sy, cy) = ay.sin_cos();
    let (sz, cz) = az.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    matmul(&rz, &matmul(&ry, &rx))
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Applies `r` to every joint of every frame. Requires `dim == 3`.
pub fn rotate(seq: &Skeleton, r: &[[f64; 3]; 3]) -> Skeleton {
    assert_eq!(seq.dim(), 3, "rotation needs 3-D coordinates");
    let mut out = seq.clone();
    for p in out.data_mut().chunks_exact_mut(3) {
        let v = [p[0], p[1], p[2]];
        for (o, row) in p.iter_mut().zip(r) {
            *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
    }
    out
}

/// One random rotation per clip; a no-op (with a warning) unless `dim == 3`.
pub fn augment_rotation<R: Rng + ?Sized>(
    seq: &Skeleton,
    limits: [f64; 3],
    rng: &mut R,
) -> Skeleton {
    if seq.dim() != 3 {
        log::warn!("rotation augmentation skipped for {}-D coordinates", seq.dim());
        return seq.clone();
    }
    let mut angle = |l: f64| if l > 0.0 { rng.random_range(-l..=l) } else { 0.0 };
    let (ax, ay, az) = (angle(limits[0]), angle(limits[1]), angle(limits[2]));
    rotate(seq, &rotation_matrix(ax, ay, az))
}

/// Temporal shift, then rotation, then noise (noise last keeps σ calibrated).
pub fn augment<R: Rng + ?Sized>(seq: &Skeleton, cfg: &AugmentConfig, rng: &mut R) -> Skeleton {
    let mut out = if cfg.temporal {
        augment_temporal(seq, cfg.max_shift, rng)
    } else {
        seq.clone()
    };
    if cfg.rotation {
        out = augment_rotation(&out, cfg.rotation_limits, rng);
    }
    if cfg.noise {
        out = augment_noise(&out, cfg.noise_sigma, rng);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(frames: usize) -> Skeleton {
        let data = (0..frames * 4 * 3).map(|i| (i as f64 * 0.7).cos()).collect();
        Skeleton::new(frames, 4, 3, data).unwrap()
    }

    #[test]
    fn temporal_shift_edges() {
        let s = clip(39);
        assert_eq!(shift_frames(&s, 0), s);
        let t = shift_frames(&s, 5);
        assert_eq!(t.frames(), 39);
        for x in 0..=5 {
            assert_eq!(t.frame(x), s.frame(0));
        }
        assert_eq!(t.frame(20), s.frame(15));
        let t = shift_frames(&s, -5);
        assert_eq!(t.frame(38), s.frame(38));
        assert_eq!(t.frame(33), s.frame(38));
        assert_eq!(t.frame(0), s.frame(5));
    }

    #[test]
    fn rotation_definitions() {
        let r = rotation_matrix(0.0, PI / 18.0, 0.0);
        let s = Skeleton::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let out = rotate(&s, &r);
        let want = [(PI / 18.0).cos(), 0.0, -(PI / 18.0).sin()];
        for (a, b) in out.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(rotate(&clip(3), &rotation_matrix(0.0, 0.0, 0.0)), clip(3));
    }

    #[test]
    fn rotation_skipped_in_2d() {
        let s = Skeleton::new(2, 1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut rng = stream_rng(1, "x", 0);
        assert_eq!(augment_rotation(&s, [0.1; 3], &mut rng), s);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = clip(5);
        assert_eq!(augment_noise(&s, 0.0, &mut stream_rng(0, "a", 0)), s);
    }

    #[test]
    fn streams_differ_by_id_and_epoch() {
        let a: u64 = stream_rng(1, "a", 0).random();
        assert_eq!(a, stream_rng(1, "a", 0).random::<u64>());
        assert_ne!(a, stream_rng(1, "b", 0).random::<u64>());
        assert_ne!(a, stream_rng(1, "a", 1).random::<u64>());
        assert_ne!(a, stream_rng(2, "a", 0).random::<u64>());
    }
}
