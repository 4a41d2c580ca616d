//! Sequence-level transforms applied before signature extraction.
//!
//! Frame and vertex indices are 0-based here. Dyadic intervals are inclusive
//! `(start, end)` vertex pairs; neighbouring intervals share their endpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::Path;
use crate::skeleton::{FrameSequence, Skeleton};

/// Deepest supported dyadic level.
pub const MAX_DYADIC_LEVEL: usize = 6;

/// Dyadic levels for the two temporal feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DyadicConfig {
    /// Level used for per-joint temporal signatures.
    pub temporal: usize,
    /// Level used for the temporal-spatial signatures.
    pub temporal_spatial: usize,
}

impl Default for DyadicConfig {
    fn default() -> Self {
        Self {
            temporal: 3,
            temporal_spatial: 2,
        }
    }
}

impl DyadicConfig {
    pub fn validate(&self) -> Result<()> {
        for l in [self.temporal, self.temporal_spatial] {
            if l > MAX_DYADIC_LEVEL {
                return Err(Error::Config(format!(
                    "dyadic level must be <= {MAX_DYADIC_LEVEL}, got {l}"
                )));
            }
        }
        Ok(())
    }
}

/// Number of subpaths produced by a dyadic decomposition of depth `level`.
pub fn dyadic_count(level: usize) -> usize {
    (1usize << (level + 1)) - 1
}

/// Lifts a 1D sequence to the 2D lead-lag path with `2n - 1` vertices.
///
/// Vertex `2i` is `(x_i, x_i)` and vertex `2i + 1` is `(x_{i+1}, x_i)`: the
/// lead coordinate (index 0) steps first, the lag coordinate follows.
pub fn lead_lag(seq: &[f64]) -> Result<Path> {
    if seq.len() < 2 {
        return Err(Error::Domain(format!(
            "lead-lag needs at least 2 samples, got {}",
            seq.len()
        )));
    }
    let mut points = Vec::with_capacity(2 * (2 * seq.len() - 1));
    for (i, &x) in seq.iter().enumerate() {
        points.extend_from_slice(&[x, x]);
        if let Some(&next) = seq.get(i + 1) {
            points.extend_from_slice(&[next, x]);
        }
    }
    Path::new(2, points)
}

/// `round(num / den)` with ties rounded up, for non-negative integers.
fn round_half_up(num: usize, den: usize) -> usize {
    (2 * num + den) / (2 * den)
}

/// Dyadic decomposition of `frames` vertices up to `level`.
///
/// Level `l` contributes `2^l` intervals with split points
/// `round_half_up(j * (frames - 1) / 2^l)`; the result is level-major and
/// holds `2^(level + 1) - 1` intervals.
pub fn dyadic_subpaths(frames: usize, level: usize) -> Result<Vec<(usize, usize)>> {
    if level > MAX_DYADIC_LEVEL {
        return Err(Error::Config(format!(
            "dyadic level must be <= {MAX_DYADIC_LEVEL}, got {level}"
        )));
    }
    if frames < 2 {
        return Err(Error::Domain(format!(
            "dyadic decomposition needs at least 2 vertices, got {frames}"
        )));
    }
    let mut out = Vec::with_capacity(dyadic_count(level));
    for l in 0..=level {
        let pieces = 1usize << l;
        let split = |j: usize| round_half_up(j * (frames - 1), pieces);
        for j in 0..pieces {
            let (start, end) = (split(j), split(j + 1));
            if end <= start {
                return Err(Error::DegenerateDyadic {
                    level: l,
                    start,
                    end,
                    frames,
                });
            }
            out.push((start, end));
        }
    }
    Ok(out)
}

/// Resamples to `target` frames: linear interpolation when upsampling,
/// uniform index sampling when downsampling, identity when equal.
pub fn resample(seq: &FrameSequence, target: usize) -> Result<FrameSequence> {
    let n = seq.len();
    if target < 2 {
        return Err(Error::Domain(format!(
            "resampling target must be >= 2, got {target}"
        )));
    }
    if n == target {
        return Ok(seq.clone());
    }
    let width = seq.width();
    let mut data = Vec::with_capacity(target * width);
    if n < target {
        for j in 0..target {
            let pos = j as f64 * (n - 1) as f64 / (target - 1) as f64;
            let lo = (pos.floor() as usize).min(n - 1);
            let alpha = pos - lo as f64;
            if alpha == 0.0 || lo == n - 1 {
                data.extend_from_slice(seq.frame(lo));
            } else {
                let (a, b) = (seq.frame(lo), seq.frame(lo + 1));
                data.extend(a.iter().zip(b).map(|(x, y)| (1.0 - alpha) * x + alpha * y));
            }
        }
    } else {
        for j in 0..target {
            let idx = round_half_up(j * (n - 1), target - 1);
            data.extend_from_slice(seq.frame(idx));
        }
    }
    Ok(FrameSequence::from_parts(width, data))
}

/// Centers a clip on its global mean joint position and scales it by a
/// single factor so the largest absolute coordinate is 1.
pub fn normalize_skeleton(skel: &Skeleton) -> Skeleton {
    let dim = skel.dim();
    let count = (skel.frames() * skel.joints()) as f64;
    let mut mean = vec![0.0; dim];
    for p in skel.data().chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut out = skel.clone();
    let mut max_abs = 0.0f64;
    for p in out.data_mut().chunks_exact_mut(dim) {
        for (v, m) in p.iter_mut().zip(&mean) {
            *v -= m;
            max_abs = max_abs.max(v.abs());
        }
    }
    if max_abs > 0.0 {
        for v in out.data_mut() {
            *v /= max_abs;
        }
    }
    out
}

/// Resamples a skeleton clip along its frame axis.
pub fn resample_skeleton(skel: &Skeleton, target: usize) -> Result<Skeleton> {
    let frames = FrameSequence::new(skel.joints() * skel.dim(), skel.data().to_vec())?;
    Skeleton::from_frame_sequence(resample(&frames, target)?, skel.joints(), skel.dim())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_seq(v: &[f64]) -> FrameSequence {
        FrameSequence::new(1, v.to_vec()).unwrap()
    }

    #[test]
    fn lead_lag_vertices() {
        let p = lead_lag(&[1.0, 2.0]).unwrap();
        assert_eq!(p.as_flat(), &[1.0, 1.0, 2.0, 1.0, 2.0, 2.0]);

        let p = lead_lag(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            p.as_flat(),
            &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0]
        );
        assert!(lead_lag(&[3.0]).is_err());
    }

    #[test]
    fn constant_lead_lag_has_zero_signature() {
        let p = lead_lag(&[0.7; 6]).unwrap();
        assert_eq!(p.len(), 11);
        let s = crate::signature::path_signature(&p, 3).unwrap();
        assert!(s.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dyadic_examples() {
        assert_eq!(
            dyadic_subpaths(9, 1).unwrap(),
            vec![(0, 8), (0, 4), (4, 8)]
        );
        // Split point round_half_up(2.5) = 3 (0-based), i.e. frame 4 counted from 1.
        assert_eq!(
            dyadic_subpaths(6, 1).unwrap(),
            vec![(0, 5), (0, 3), (3, 5)]
        );
        assert_eq!(dyadic_subpaths(39, 3).unwrap().len(), 15);
        assert_eq!(dyadic_subpaths(39, 2).unwrap().len(), 7);
        assert_eq!(dyadic_subpaths(2, 0).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn dyadic_degeneracy() {
        assert!(matches!(
            dyadic_subpaths(3, 2),
            Err(Error::DegenerateDyadic { .. })
        ));
        assert!(dyadic_subpaths(5, 2).is_ok());
        assert!(dyadic_subpaths(39, 7).is_err());
    }

    #[test]
    fn resample_examples() {
        let up = resample(&FrameSequence::new(2, vec![0.0, 2.0, 4.0, 6.0]).unwrap(), 3).unwrap();
        assert_eq!(up.as_flat(), &[0.0, 2.0, 2.0, 4.0, 4.0, 6.0]);

        let same = scalar_seq(&[0.1, 0.2, 0.3]);
        assert_eq!(resample(&same, 3).unwrap(), same);

        let down = resample(&scalar_seq(&[1.0, 2.0, 3.0, 4.0, 5.0]), 3).unwrap();
        assert_eq!(down.as_flat(), &[1.0, 3.0, 5.0]);

        assert!(resample(&same, 1).is_err());
    }

    #[test]
    fn normalize_examples() {
        let flat = Skeleton::new(2, 2, 3, vec![5.0; 12]).unwrap();
        assert!(normalize_skeleton(&flat).data().iter().all(|&v| v == 0.0));

        let line = Skeleton::new(2, 1, 3, vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            normalize_skeleton(&line).data(),
            &[-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]
        );
    }
}
