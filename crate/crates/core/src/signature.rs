//! Truncated path signatures of piecewise-linear paths.
//!
//! A signature truncated at depth `m` stores levels `1..=m`; level `k` is a
//! flat array of `d^k` coefficients addressed by the multi-index
//! `(i_1, ..., i_k)` in lexicographic order, `i_1` varying slowest. The
//! level-0 coefficient is always 1 and is never stored.
//!
//! Words (multi-indices) are 0-based throughout this crate: the word `[0, 1]`
//! is the coefficient usually written `S^{1,2}`.
//!
//! Straight segments have the closed form `S^{i_1..i_k} = (1/k!) Π Δ^{i_j}`;
//! whole paths are a left fold of [`chen_combine`] over their segments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on truncation depth.
pub const MAX_DEPTH: usize = 6;
/// Largest admissible single level `d^m`.
pub const MAX_LEVEL_SIZE: usize = 100_000;

/// Number of stored coefficients `d + d^2 + ... + d^m`.
pub fn sig_dimension(dim: usize, depth: usize) -> Result<usize> {
    if dim < 1 || depth < 1 {
        return Err(Error::Domain(format!(
            "signature dimension needs d >= 1 and m >= 1, got d={dim}, m={depth}"
        )));
    }
    let mut total = 0usize;
    let mut level = 1usize;
    for _ in 0..depth {
        level = level
            .checked_mul(dim)
            .ok_or_else(|| Error::Domain("signature dimension overflows".into()))?;
        total = total
            .checked_add(level)
            .ok_or_else(|| Error::Domain("signature dimension overflows".into()))?;
    }
    Ok(total)
}

pub(crate) fn check_shape(dim: usize, depth: usize) -> Result<()> {
    if dim < 1 {
        return Err(Error::Domain("path dimension must be >= 1".into()));
    }
    if depth < 1 || depth > MAX_DEPTH {
        return Err(Error::Domain(format!(
            "truncation depth must lie in 1..={MAX_DEPTH}, got {depth}"
        )));
    }
    match dim.checked_pow(depth as u32) {
        Some(n) if n <= MAX_LEVEL_SIZE => Ok(()),
        _ => Err(Error::Domain(format!(
            "d^m = {dim}^{depth} exceeds the {MAX_LEVEL_SIZE} coefficient guard"
        ))),
    }
}

/// Ordered vertices of a piecewise-linear path in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    dim: usize,
    points: Vec<f64>,
}

impl Path {
    /// Builds a path from a flat row-major buffer of `F * dim` coordinates.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidPath("dimension must be >= 1".into()));
        }
        if points.len() % dim != 0 {
            return Err(Error::InvalidPath(format!(
                "{} coordinates do not form {dim}-dimensional vertices",
                points.len()
            )));
        }
        if points.len() / dim < 2 {
            return Err(Error::InvalidPath(format!(
                "a path needs at least 2 vertices, got {}",
                points.len() / dim
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPath(format!(
                "non-finite coordinate at vertex {}",
                pos / dim
            )));
        }
        Ok(Self { dim, points })
    }

    pub fn from_vertices<V: AsRef<[f64]>>(vertices: &[V]) -> Result<Self> {
        let dim = vertices.first().map(|v| v.as_ref().len()).unwrap_or(0);
        let mut points = Vec::with_capacity(dim * vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::InvalidPath(format!(
                    "vertex {i} has dimension {} but vertex 0 has {dim}",
                    v.len()
                )));
            }
            points.extend_from_slice(v);
        }
        Self::new(dim, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Vertices `start..=end` as a new path.
    pub fn subpath(&self, start: usize, end: usize) -> Result<Self> {
        if end >= self.len() || start >= end {
            return Err(Error::InvalidPath(format!(
                "subpath [{start}, {end}] invalid for {} vertices",
                self.len()
            )));
        }
        Ok(Self {
            dim: self.dim,
            points: self.points[start * self.dim..(end + 1) * self.dim].to_vec(),
        })
    }

    /// Adds `offset` to every vertex.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: offset.len(),
                context: "path translation offset",
            });
        }
        let points = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|v| v.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        Self::new(self.dim, points)
    }
}

/// Levels `1..=depth` of the signature of a path in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl Signature {
    /// The signature of a constant path: every stored level is zero.
    pub fn identity(dim: usize, depth: usize) -> Result<Self> {
        check_shape(dim, depth)?;
        let levels = (1..=depth).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        Ok(Self { dim, depth, levels })
    }

    /// Wraps explicit level arrays. Used for tests and for feeding
    /// arbitrary tensors to [`shuffle_residual`].
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        let depth = levels.len();
        check_shape(dim, depth)?;
        for (k, level) in levels.iter().enumerate() {
            let expected = dim.pow(k as u32 + 1);
            if level.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: level.len(),
                    context: "signature level length",
                });
            }
        }
        Ok(Self { dim, depth, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Level `k` for `1 <= k <= depth`.
    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k - 1]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Total stored coefficient count.
    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficient of a 0-based word. The empty word returns 1.
    pub fn coefficient(&self, word: &[usize]) -> Result<f64> {
        if word.is_empty() {
            return Ok(1.0);
        }
        if word.len() > self.depth {
            return Err(Error::WordTooLong {
                len: word.len(),
                depth: self.depth,
            });
        }
        let mut offset = 0usize;
        for &letter in word {
            if letter >= self.dim {
                return Err(Error::Domain(format!(
                    "letter {letter} out of range for dimension {}",
                    self.dim
                )));
            }
            offset = offset * self.dim + letter;
        }
        Ok(self.levels[word.len() - 1][offset])
    }

    /// All levels concatenated, level 1 first.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.extend_flat(&mut out);
        out
    }

    pub fn extend_flat(&self, out: &mut Vec<f64>) {
        for level in &self.levels {
            out.extend_from_slice(level);
        }
    }
}

/// Closed-form signature of the straight segment `start -> end`.
pub fn segment_signature(start: &[f64], end: &[f64], depth: usize) -> Result<Signature> {
    if start.len() != end.len() {
        return Err(Error::DimensionMismatch {
            expected: start.len(),
            got: end.len(),
            context: "segment endpoints",
        });
    }
    let dim = start.len();
    check_shape(dim, depth)?;
    let increment: Vec<f64> = end.iter().zip(start).map(|(e, s)| e - s).collect();
    Ok(segment_from_increment(&increment, depth))
}

pub(crate) fn segment_from_increment(increment: &[f64], depth: usize) -> Signature {
    let dim = increment.len();
    let mut levels = Vec::with_capacity(depth);
    levels.push(increment.to_vec());
    for k in 2..=depth {
        let prev = &levels[k - 2];
        let scale = 1.0 / k as f64;
        let mut next = Vec::with_capacity(prev.len() * dim);
        for &p in prev {
            let p = p * scale;
            next.extend(increment.iter().map(|&x| p * x));
        }
        levels.push(next);
    }
    Signature { dim, depth, levels }
}

/// Truncated tensor product `a ⊗ b`: the signature of path `a` followed by
/// path `b`.
pub fn chen_combine(a: &Signature, b: &Signature) -> Result<Signature> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
            context: "chen_combine dimension",
        });
    }
    if a.depth != b.depth {
        return Err(Error::DimensionMismatch {
            expected: a.depth,
            got: b.depth,
            context: "chen_combine depth",
        });
    }
    let mut levels = Vec::with_capacity(a.depth);
    for n in 1..=a.depth {
        // Empty-word terms: a_n * 1 + 1 * b_n.
        let mut out: Vec<f64> = a.levels[n - 1]
            .iter()
            .zip(&b.levels[n - 1])
            .map(|(x, y)| x + y)
            .collect();
        for k in 1..n {
            let left = &a.levels[k - 1];
            let right = &b.levels[n - k - 1];
            let width = right.len();
            for (u, &au) in left.iter().enumerate() {
                if au == 0.0 {
                    continue;
                }
                let row = &mut out[u * width..(u + 1) * width];
                for (o, &bv) in row.iter_mut().zip(right) {
                    *o += au * bv;
                }
            }
        }
        levels.push(out);
    }
    Ok(Signature {
        dim: a.dim,
        depth: a.depth,
        levels,
    })
}

/// Writes the segment signature of `increment` into preallocated levels.
fn segment_into(increment: &[f64], levels: &mut [Vec<f64>]) {
    levels[0].copy_from_slice(increment);
    for k in 2..=levels.len() {
        let (done, rest) = levels.split_at_mut(k - 1);
        let prev = &done[k - 2];
        let next = &mut rest[0];
        let scale = 1.0 / k as f64;
        for (chunk, &p) in next.chunks_exact_mut(increment.len()).zip(prev) {
            let p = p * scale;
            for (o, &x) in chunk.iter_mut().zip(increment) {
                *o = p * x;
            }
        }
    }
}

/// `acc ← acc ⊗ seg`, in place. Levels are updated top-down so every read of
/// a lower level still sees the old value; the summation order matches
/// [`chen_combine`] exactly.
fn chen_in_place(acc: &mut [Vec<f64>], seg: &[Vec<f64>]) {
    for n in (1..=acc.len()).rev() {
        let (lower, upper) = acc.split_at_mut(n - 1);
        let out = &mut upper[0];
        for (o, &b) in out.iter_mut().zip(&seg[n - 1]) {
            *o += b;
        }
        for k in 1..n {
            let left = &lower[k - 1];
            let right = &seg[n - k - 1];
            let width = right.len();
            for (u, &au) in left.iter().enumerate() {
                if au == 0.0 {
                    continue;
                }
                let row = &mut out[u * width..(u + 1) * width];
                for (o, &bv) in row.iter_mut().zip(right) {
                    *o += au * bv;
                }
            }
        }
    }
}

/// Signature of a piecewise-linear path: Chen fold over its segments.
pub fn path_signature(path: &Path, depth: usize) -> Result<Signature> {
    check_shape(path.dim(), depth)?;
    let dim = path.dim();
    let mut increment = vec![0.0; dim];
    let shape: Vec<usize> = (1..=depth).map(|k| dim.pow(k as u32)).collect();
    let mut acc: Vec<Vec<f64>> = shape.iter().map(|&n| vec![0.0; n]).collect();
    let mut seg = acc.clone();
    for i in 1..path.len() {
        for ((inc, a), b) in increment
            .iter_mut()
            .zip(path.vertex(i - 1))
            .zip(path.vertex(i))
        {
            *inc = b - a;
        }
        if i == 1 {
            segment_into(&increment, &mut acc);
        } else {
            segment_into(&increment, &mut seg);
            chen_in_place(&mut acc, &seg);
        }
    }
    Ok(Signature {
        dim,
        depth,
        levels: acc,
    })
}

/// Appends a time coordinate `j / (F - 1)` to vertex `j`.
pub fn time_augment(path: &Path) -> Path {
    let n = path.len();
    let dim = path.dim() + 1;
    let mut points = Vec::with_capacity(n * dim);
    for (j, v) in path.vertices().enumerate() {
        points.extend_from_slice(v);
        points.push(j as f64 / (n - 1) as f64);
    }
    Path { dim, points }
}

/// All interleavings of two words, with multiplicity.
pub fn shuffles(w1: &[usize], w2: &[usize]) -> Vec<Vec<usize>> {
    fn go(a: &[usize], b: &[usize], prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if a.is_empty() || b.is_empty() {
            let mut w = prefix.clone();
            w.extend_from_slice(a);
            w.extend_from_slice(b);
            out.push(w);
            return;
        }
        prefix.push(a[0]);
        go(&a[1..], b, prefix, out);
        prefix.pop();
        prefix.push(b[0]);
        go(a, &b[1..], prefix, out);
        prefix.pop();
    }
    let mut out = Vec::new();
    go(w1, w2, &mut Vec::new(), &mut out);
    out
}

/// `S[w1] * S[w2] - Σ_{w ∈ w1 ⧢ w2} S[w]`. Zero for any genuine signature.
pub fn shuffle_residual(sig: &Signature, w1: &[usize], w2: &[usize]) -> Result<f64> {
    let len = w1.len() + w2.len();
    if len > sig.depth {
        return Err(Error::WordTooLong {
            len,
            depth: sig.depth,
        });
    }
    let product = sig.coefficient(w1)? * sig.coefficient(w2)?;
    let mut sum = 0.0;
    for w in shuffles(w1, w2) {
        sum += sig.coefficient(&w)?;
    }
    Ok(product - sum)
}

/// Truncation depths for the three signature feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigDepthConfig {
    /// Depth of per-frame joint-pair signatures.
    pub spatial: usize,
    /// Depth of per-joint trajectory signatures.
    pub temporal: usize,
    /// Depth of the lead-lag signatures over spatial-signature evolutions.
    pub temporal_spatial: usize,
}

impl Default for SigDepthConfig {
    fn default() -> Self {
        Self {
            spatial: 2,
            temporal: 4,
            temporal_spatial: 3,
        }
    }
}

impl SigDepthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("spatial", self.spatial),
            ("temporal", self.temporal),
            ("temporal_spatial", self.temporal_spatial),
        ] {
            if !(1..=MAX_DEPTH).contains(&m) {
                return Err(Error::Config(format!(
                    "{name} depth must lie in 1..={MAX_DEPTH}, got {m}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_formula() {
        assert_eq!(sig_dimension(3, 2).unwrap(), 12);
        assert_eq!(sig_dimension(4, 4).unwrap(), 340);
        assert_eq!(sig_dimension(2, 3).unwrap(), 14);
        assert!(sig_dimension(0, 2).is_err());
        assert!(sig_dimension(2, 0).is_err());
    }

    #[test]
    fn segment_closed_form() {
        let s = segment_signature(&[0.0, 0.0], &[1.0, 2.0], 2).unwrap();
        assert_eq!(s.level(1), &[1.0, 2.0]);
        assert_eq!(s.level(2), &[0.5, 1.0, 1.0, 2.0]);

        let z = segment_signature(&[0.3, -1.0, 2.0], &[0.3, -1.0, 2.0], 3).unwrap();
        assert!(z.to_flat().iter().all(|&v| v == 0.0));

        let one_d = segment_signature(&[0.0], &[2.0], 3).unwrap();
        assert_eq!(one_d.to_flat(), vec![2.0, 2.0, 4.0 / 3.0]);
    }

    #[test]
    fn segment_rejects_mismatched_endpoints() {
        assert!(matches!(
            segment_signature(&[0.0, 0.0], &[1.0], 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn chen_of_two_segments() {
        let a = segment_signature(&[0.0, 0.0], &[1.0, 0.0], 2).unwrap();
        let b = segment_signature(&[1.0, 0.0], &[1.0, 1.0], 2).unwrap();
        let ab = chen_combine(&a, &b).unwrap();
        assert_eq!(ab.level(1), &[1.0, 1.0]);
        assert_eq!(ab.level(2), &[0.5, 1.0, 0.0, 0.5]);
    }

    #[test]
    fn identity_is_neutral() {
        let b = segment_signature(&[0.1, 0.2, 0.3], &[-1.0, 0.5, 2.0], 3).unwrap();
        let e = Signature::identity(3, 3).unwrap();
        assert_eq!(chen_combine(&e, &b).unwrap(), b);
        assert_eq!(chen_combine(&b, &e).unwrap(), b);
    }

    #[test]
    fn chen_rejects_mismatch() {
        let a = Signature::identity(2, 2).unwrap();
        let b = Signature::identity(3, 2).unwrap();
        let c = Signature::identity(2, 3).unwrap();
        assert!(chen_combine(&a, &b).is_err());
        assert!(chen_combine(&a, &c).is_err());
    }

    #[test]
    fn two_vertex_path_is_segment() {
        let p = Path::from_vertices(&[[0.5, 1.0], [2.0, -1.0]]).unwrap();
        assert_eq!(
            path_signature(&p, 4).unwrap(),
            segment_signature(&[0.5, 1.0], &[2.0, -1.0], 4).unwrap()
        );
    }

    #[test]
    fn l_shaped_path_area_terms() {
        let p = Path::from_vertices(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let s = path_signature(&p, 2).unwrap();
        assert_eq!(s.coefficient(&[0, 1]).unwrap(), 1.0);
        assert_eq!(s.coefficient(&[1, 0]).unwrap(), 0.0);
        assert_eq!(shuffle_residual(&s, &[0], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn time_augmentation_appends_unit_time() {
        let p = Path::from_vertices(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]).unwrap();
        let t = time_augment(&p);
        assert_eq!(t.dim(), 3);
        let times: Vec<f64> = t.vertices().map(|v| v[2]).collect();
        assert_eq!(times, vec![0.0, 0.5, 1.0]);

        let two = Path::from_vertices(&[[7.0], [8.0]]).unwrap();
        let times: Vec<f64> = time_augment(&two).vertices().map(|v| v[1]).collect();
        assert_eq!(times, vec![0.0, 1.0]);

        // Not idempotent: a second pass appends another time axis.
        assert_eq!(time_augment(&t).dim(), 4);
    }

    #[test]
    fn shuffle_counts() {
        assert_eq!(shuffles(&[0], &[1]).len(), 2);
        assert_eq!(shuffles(&[0, 1], &[2]).len(), 3);
        assert_eq!(shuffles(&[0, 1], &[2, 3]).len(), 6);
        assert_eq!(shuffles(&[], &[1, 0]), vec![vec![1, 0]]);
    }

    #[test]
    fn shuffle_residual_detects_non_signatures() {
        let fake = Signature::from_levels(2, vec![vec![1.0, 2.0], vec![0.3, 0.1, -0.7, 0.9]]).unwrap();
        assert!(shuffle_residual(&fake, &[0], &[1]).unwrap().abs() > 1e-3);
        assert!(matches!(
            shuffle_residual(&fake, &[0, 1], &[1]),
            Err(Error::WordTooLong { .. })
        ));
    }

    #[test]
    fn path_validation() {
        assert!(Path::new(2, vec![0.0, 1.0]).is_err());
        assert!(Path::new(2, vec![0.0, 1.0, 2.0]).is_err());
        assert!(Path::new(1, vec![0.0, f64::NAN]).is_err());
        assert!(Path::new(0, vec![]).is_err());
    }

    #[test]
    fn depth_guard() {
        assert!(Signature::identity(2, 7).is_err());
        assert!(Signature::identity(20, 4).is_err());
        assert!(Signature::identity(10, 5).is_ok());
        let p = Path::from_vertices(&[[0.0], [1.0]]).unwrap();
        assert!(path_signature(&p, 0).is_err());
    }

    #[test]
    fn depth_config_defaults() {
        let c = SigDepthConfig::default();
        assert_eq!((c.spatial, c.temporal, c.temporal_spatial), (2, 4, 3));
        c.validate().unwrap();
        assert!(SigDepthConfig { spatial: 7, ..c }.validate().is_err());
    }
}
