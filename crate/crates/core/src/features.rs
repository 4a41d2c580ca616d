//! Joint selection and the four per-sequence feature vectors.
//!
//! Layouts are fixed so checkpoints stay portable:
//!
//! * `rc`: frame-major, `dim` coordinates of each selected joint per frame.
//! * `s_ps`: frame-major, then pair order (within-hand, cross-hands,
//!   hand-body), one segment signature per pair.
//! * `t_ps`: joint-major, then dyadic subpath order.
//! * `t_s_ps`: spatial-signature dimension major, then dyadic subpath order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signature::{
    path_signature, segment_from_increment, sig_dimension, time_augment, Path, SigDepthConfig,
};
use crate::skeleton::{layout, Skeleton};
use crate::transforms::{dyadic_count, dyadic_subpaths, lead_lag, DyadicConfig};

/// Depth of the spatial signatures whose evolution feeds `t_s_ps`.
pub const TS_SOURCE_DEPTH: usize = 2;

/// Frame count every clip is resampled to.
pub const DEFAULT_FRAMES: usize = 39;

/// Which joints and joint pairs enter the features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AohConfig {
    pub single_joints: Vec<usize>,
    pub pairs_within_hand: Vec<(usize, usize)>,
    pub pairs_cross_hands: Vec<(usize, usize)>,
    pub pairs_hand_body: Vec<(usize, usize)>,
    pub dim: usize,
}

impl Default for AohConfig {
    fn default() -> Self {
        use layout::*;
        Self {
            single_joints: vec![ELBOW_L, WRIST_L, HAND_L, ELBOW_R, WRIST_R, HAND_R],
            pairs_within_hand: vec![
                (ELBOW_L, WRIST_L),
                (WRIST_L, HAND_L),
                (ELBOW_L, HAND_L),
                (ELBOW_R, WRIST_R),
                (WRIST_R, HAND_R),
                (ELBOW_R, HAND_R),
            ],
            pairs_cross_hands: vec![(ELBOW_L, ELBOW_R), (WRIST_L, WRIST_R), (HAND_L, HAND_R)],
            pairs_hand_body: vec![(HEAD, HAND_L), (NECK, HAND_L), (HEAD, HAND_R), (NECK, HAND_R)],
            dim: 3,
        }
    }
}

impl AohConfig {
    /// All pairs in feature order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs_within_hand
            .iter()
            .chain(&self.pairs_cross_hands)
            .chain(&self.pairs_hand_body)
            .copied()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs_within_hand.len() + self.pairs_cross_hands.len() + self.pairs_hand_body.len()
    }

    pub fn validate(&self, joints: usize) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config("coordinate dimension must be >= 1".into()));
        }
        if self.single_joints.is_empty() {
            return Err(Error::Config("at least one single joint is required".into()));
        }
        for (i, &j) in self.single_joints.iter().enumerate() {
            if j >= joints {
                return Err(Error::Config(format!(
                    "single joint {j} out of range for {joints} joints"
                )));
            }
            if self.single_joints[..i].contains(&j) {
                return Err(Error::Config(format!("single joint {j} listed twice")));
            }
        }
        let pairs: Vec<_> = self.pairs().collect();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if a >= joints || b >= joints {
                return Err(Error::Config(format!(
                    "pair ({a}, {b}) out of range for {joints} joints"
                )));
            }
            if a == b {
                return Err(Error::Config(format!("pair ({a}, {b}) has identical members")));
            }
            if pairs[..i].contains(&(a, b)) {
                return Err(Error::Config(format!("pair ({a}, {b}) listed twice")));
            }
        }
        Ok(())
    }

    /// Largest joint index referenced anywhere in the config.
    pub fn max_joint(&self) -> usize {
        self.single_joints
            .iter()
            .copied()
            .chain(self.pairs().flat_map(|(a, b)| [a, b]))
            .max()
            .unwrap_or(0)
    }
}

/// Everything that determines the feature layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub aoh: AohConfig,
    pub depths: SigDepthConfig,
    pub dyadic: DyadicConfig,
    pub frames: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            aoh: AohConfig::default(),
            depths: SigDepthConfig::default(),
            dyadic: DyadicConfig::default(),
            frames: DEFAULT_FRAMES,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        self.depths.validate()?;
        self.dyadic.validate()?;
        if self.frames < 2 {
            return Err(Error::Config(format!(
                "frame count must be >= 2, got {}",
                self.frames
            )));
        }
        // Surface dyadic degeneracy before any sequence is touched.
        dyadic_subpaths(self.frames, self.dyadic.temporal)?;
        dyadic_subpaths(self.frames, self.dyadic.temporal_spatial)?;
        self.aoh.validate(self.aoh.max_joint() + 1)?;
        self.dims().map(|_| ())
    }

    /// Closed-form dimensionalities of the four vectors.
    pub fn dims(&self) -> Result<FeatureDims> {
        let d = self.aoh.dim;
        let nj = self.aoh.single_joints.len();
        let p = self.aoh.pair_count();
        let f = self.frames;
        Ok(FeatureDims {
            rc: d * nj * f,
            s_ps: p * sig_dimension(d, self.depths.spatial)? * f,
            t_ps: nj
                * dyadic_count(self.dyadic.temporal)
                * sig_dimension(d + 1, self.depths.temporal)?,
            t_s_ps: p
                * sig_dimension(d, TS_SOURCE_DEPTH)?
                * dyadic_count(self.dyadic.temporal_spatial)
                * sig_dimension(2, self.depths.temporal_spatial)?,
        })
    }

    /// Short content hash identifying the feature layout.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("feature config serializes");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..8])
    }
}

/// Lengths of the four feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub rc: usize,
    pub s_ps: usize,
    pub t_ps: usize,
    pub t_s_ps: usize,
}

impl FeatureDims {
    pub fn get(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::Rc => self.rc,
            FeatureKind::SPs => self.s_ps,
            FeatureKind::TPs => self.t_ps,
            FeatureKind::TSPs => self.t_s_ps,
        }
    }

    pub fn total(&self) -> usize {
        self.rc + self.s_ps + self.t_ps + self.t_s_ps
    }
}

/// One of the four feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "rc")]
    Rc,
    #[serde(rename = "s_ps")]
    SPs,
    #[serde(rename = "t_ps")]
    TPs,
    #[serde(rename = "t_s_ps")]
    TSPs,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [Self::Rc, Self::SPs, Self::TPs, Self::TSPs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rc => "rc",
            Self::SPs => "s_ps",
            Self::TPs => "t_ps",
            Self::TSPs => "t_s_ps",
        }
    }
}

/// The four feature vectors of one sequence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub rc: Vec<f64>,
    pub s_ps: Vec<f64>,
    pub t_ps: Vec<f64>,
    pub t_s_ps: Vec<f64>,
}

impl FeatureBundle {
    pub fn get(&self, kind: FeatureKind) -> &[f64] {
        match kind {
            FeatureKind::Rc => &self.rc,
            FeatureKind::SPs => &self.s_ps,
            FeatureKind::TPs => &self.t_ps,
            FeatureKind::TSPs => &self.t_s_ps,
        }
    }

    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            rc: self.rc.len(),
            s_ps: self.s_ps.len(),
            t_ps: self.t_ps.len(),
            t_s_ps: self.t_s_ps.len(),
        }
    }

    /// Bundle holding only raw coordinates; the signature vectors are empty.
    pub fn rc_only(rc: Vec<f64>) -> Self {
        Self {
            rc,
            s_ps: Vec::new(),
            t_ps: Vec::new(),
            t_s_ps: Vec::new(),
        }
    }
}

fn check_skeleton(skel: &Skeleton, cfg: &AohConfig) -> Result<()> {
    if skel.dim() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            got: skel.dim(),
            context: "skeleton coordinate dimension",
        });
    }
    if skel.frames() < 2 {
        return Err(Error::Domain(format!(
            "feature extraction needs at least 2 frames, got {}",
            skel.frames()
        )));
    }
    cfg.validate(skel.joints())
}

/// Raw coordinates of the selected joints, frame-major.
pub fn build_rc(skel: &Skeleton, cfg: &AohConfig) -> Result<Vec<f64>> {
    check_skeleton(skel, cfg)?;
    let mut out = Vec::with_capacity(cfg.dim * cfg.single_joints.len() * skel.frames());
    for f in 0..skel.frames() {
        for &j in &cfg.single_joints {
            out.extend_from_slice(skel.joint(f, j));
        }
    }
    Ok(out)
}

/// Per-frame segment signatures of every configured joint pair.
pub fn s_ps_features(skel: &Skeleton, cfg: &AohConfig, depth: usize) -> Result<Vec<f64>> {
    check_skeleton(skel, cfg)?;
    let per = sig_dimension(cfg.dim, depth)?;
    crate::signature::check_shape(cfg.dim, depth)?;
    let mut out = Vec::with_capacity(per * cfg.pair_count() * skel.frames());
    let mut inc = vec![0.0; cfg.dim];
    for f in 0..skel.frames() {
        for (a, b) in cfg.pairs() {
            for ((x, s), e) in inc.iter_mut().zip(skel.joint(f, a)).zip(skel.joint(f, b)) {
                *x = e - s;
            }
            segment_from_increment(&inc, depth).extend_flat(&mut out);
        }
    }
    Ok(out)
}

/// Dyadic signatures of each selected joint's time-augmented trajectory.
pub fn t_ps_features(
    skel: &Skeleton,
    cfg: &AohConfig,
    depth: usize,
    dyadic_level: usize,
) -> Result<Vec<f64>> {
    check_skeleton(skel, cfg)?;
    let intervals = dyadic_subpaths(skel.frames(), dyadic_level)?;
    let per = sig_dimension(cfg.dim + 1, depth)?;
    let mut out = Vec::with_capacity(cfg.single_joints.len() * intervals.len() * per);
    for &j in &cfg.single_joints {
        let mut traj = Vec::with_capacity(skel.frames() * cfg.dim);
        for f in 0..skel.frames() {
            traj.extend_from_slice(skel.joint(f, j));
        }
        let path = time_augment(&Path::new(cfg.dim, traj)?);
        for &(start, end) in &intervals {
            path_signature(&path.subpath(start, end)?, depth)?.extend_flat(&mut out);
        }
    }
    Ok(out)
}

/// Dyadic lead-lag signatures of every depth-2 spatial-signature coordinate
/// viewed as a time series.
///
/// The dyadic split is taken on the frame axis; each piece is then lifted
/// with [`lead_lag`]. Pieces share their boundary frame, so the lifted
/// pieces concatenate to the lift of the whole series.
pub fn t_s_ps_features(
    skel: &Skeleton,
    cfg: &AohConfig,
    depth: usize,
    dyadic_level: usize,
) -> Result<Vec<f64>> {
    let source = s_ps_features(skel, cfg, TS_SOURCE_DEPTH)?;
    let frames = skel.frames();
    let series_count = source.len() / frames;
    let intervals = dyadic_subpaths(frames, dyadic_level)?;
    let per = sig_dimension(2, depth)?;
    let mut out = Vec::with_capacity(series_count * intervals.len() * per);
    let mut series = vec![0.0; frames];
    for s in 0..series_count {
        for (f, v) in series.iter_mut().enumerate() {
            *v = source[f * series_count + s];
        }
        for &(start, end) in &intervals {
            path_signature(&lead_lag(&series[start..=end])?, depth)?.extend_flat(&mut out);
        }
    }
    Ok(out)
}

/// Computes all four vectors for one normalized, resampled clip.
pub fn assemble_features(skel: &Skeleton, cfg: &FeatureConfig) -> Result<FeatureBundle> {
    if skel.frames() != cfg.frames {
        return Err(Error::DimensionMismatch {
            expected: cfg.frames,
            got: skel.frames(),
            context: "frame count (resample before extraction)",
        });
    }
    Ok(FeatureBundle {
        rc: build_rc(skel, &cfg.aoh)?,
        s_ps: s_ps_features(skel, &cfg.aoh, cfg.depths.spatial)?,
        t_ps: t_ps_features(skel, &cfg.aoh, cfg.depths.temporal, cfg.dyadic.temporal)?,
        t_s_ps: t_s_ps_features(
            skel,
            &cfg.aoh,
            cfg.depths.temporal_spatial,
            cfg.dyadic.temporal_spatial,
        )?,
    })
}

/// Like [`assemble_features`] but computes only `kinds`; the other vectors
/// are left empty.
pub fn assemble_kinds(
    skel: &Skeleton,
    cfg: &FeatureConfig,
    kinds: &[FeatureKind],
) -> Result<FeatureBundle> {
    if skel.frames() != cfg.frames {
        return Err(Error::DimensionMismatch {
            expected: cfg.frames,
            got: skel.frames(),
            context: "frame count (resample before extraction)",
        });
    }
    let want = |k| kinds.contains(&k);
    let mut b = FeatureBundle::default();
    if want(FeatureKind::Rc) {
        b.rc = build_rc(skel, &cfg.aoh)?;
    }
    if want(FeatureKind::SPs) {
        b.s_ps = s_ps_features(skel, &cfg.aoh, cfg.depths.spatial)?;
    }
    if want(FeatureKind::TPs) {
        b.t_ps = t_ps_features(skel, &cfg.aoh, cfg.depths.temporal, cfg.dyadic.temporal)?;
    }
    if want(FeatureKind::TSPs) {
        b.t_s_ps = t_s_ps_features(
            skel,
            &cfg.aoh,
            cfg.depths.temporal_spatial,
            cfg.dyadic.temporal_spatial,
        )?;
    }
    Ok(b)
}

/// Extracts bundles for many clips in parallel; output order matches input.
pub fn assemble_batch(skels: &[Skeleton], cfg: &FeatureConfig) -> Result<Vec<FeatureBundle>> {
    skels
        .par_iter()
        .map(|s| assemble_features(s, cfg))
        .collect()
}

/// Multiply-adds of one segment signature: one per coefficient above level 1.
pub fn segment_multadds(dim: usize, depth: usize) -> u64 {
    (2..=depth).map(|k| (dim as u64).pow(k as u32)).sum()
}

/// Multiply-adds of one truncated tensor product.
pub fn chen_multadds(dim: usize, depth: usize) -> u64 {
    (2..=depth)
        .map(|n| (n as u64 - 1) * (dim as u64).pow(n as u32))
        .sum()
}

/// Multiply-adds of a Chen fold over a path with `vertices` vertices.
pub fn path_multadds(dim: usize, depth: usize, vertices: usize) -> u64 {
    let segments = vertices as u64 - 1;
    segments * segment_multadds(dim, depth) + (segments - 1) * chen_multadds(dim, depth)
}

/// Multiply-adds spent on signature extraction for one clip, per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PsCost {
    pub s_ps: u64,
    pub t_ps: u64,
    pub t_s_ps: u64,
}

impl PsCost {
    pub fn total(&self) -> u64 {
        self.s_ps + self.t_ps + self.t_s_ps
    }
}

pub fn ps_multadds(cfg: &FeatureConfig) -> Result<PsCost> {
    let d = cfg.aoh.dim;
    let p = cfg.aoh.pair_count() as u64;
    let f = cfg.frames as u64;
    let s_ps = p * f * segment_multadds(d, cfg.depths.spatial);

    let mut t_ps = 0;
    for (a, b) in dyadic_subpaths(cfg.frames, cfg.dyadic.temporal)? {
        t_ps += path_multadds(d + 1, cfg.depths.temporal, b - a + 1);
    }
    t_ps *= cfg.aoh.single_joints.len() as u64;

    let series = p * sig_dimension(d, TS_SOURCE_DEPTH)? as u64;
    let mut per_series = 0;
    for (a, b) in dyadic_subpaths(cfg.frames, cfg.dyadic.temporal_spatial)? {
        let n = b - a + 1;
        per_series += path_multadds(2, cfg.depths.temporal_spatial, 2 * n - 1);
    }
    let t_s_ps = p * f * segment_multadds(d, TS_SOURCE_DEPTH) + series * per_series;
    Ok(PsCost { s_ps, t_ps, t_s_ps })
}
