use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `frames × joints × dim` coordinate array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    frames: usize,
    joints: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Skeleton {
    pub fn new(frames: usize, joints: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || joints == 0 || dim == 0 {
            return Err(Error::Domain(format!(
                "skeleton shape must be non-empty, got {frames}x{joints}x{dim}"
            )));
        }
        if data.len() != frames * joints * dim {
            return Err(Error::DimensionMismatch {
                expected: frames * joints * dim,
                got: data.len(),
                context: "skeleton buffer",
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("skeleton contains non-finite coordinates".into()));
        }
        Ok(Self {
            frames,
            joints,
            dim,
            data,
        })
    }

    /// Builds from nested `[frame][joint][coord]` vectors, rejecting ragged input.
    pub fn from_nested(frames: &[Vec<Vec<f64>>]) -> Result<Self> {
        let f = frames.len();
        let j = frames.first().map(Vec::len).unwrap_or(0);
        let d = frames
            .first()
            .and_then(|fr| fr.first())
            .map(Vec::len)
            .unwrap_or(0);
        let mut data = Vec::with_capacity(f * j * d);
        for (fi, frame) in frames.iter().enumerate() {
            if frame.len() != j {
                return Err(Error::Domain(format!(
                    "frame {fi} has {} joints, expected {j}",
                    frame.len()
                )));
            }
            for (ji, joint) in frame.iter().enumerate() {
                if joint.len() != d {
                    return Err(Error::Domain(format!(
                        "frame {fi} joint {ji} has {} coordinates, expected {d}",
                        joint.len()
                    )));
                }
                data.extend_from_slice(joint);
            }
        }
        Self::new(f, j, d, data)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.frames)
            .map(|f| (0..self.joints).map(|j| self.joint(f, j).to_vec()).collect())
            .collect()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        let w = self.joints * self.dim;
        &self.data[f * w..(f + 1) * w]
    }

    pub fn joint(&self, f: usize, j: usize) -> &[f64] {
        let start = (f * self.joints + j) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn joint_mut(&mut self, f: usize, j: usize) -> &mut [f64] {
        let start = (f * self.joints + j) * self.dim;
        &mut self.data[start..start + self.dim]
    }

    /// Frames flattened to rows of `joints * dim` values.
    pub fn to_frame_sequence(&self) -> FrameSequence {
        FrameSequence {
            width: self.joints * self.dim,
            data: self.data.clone(),
        }
    }

    pub fn from_frame_sequence(seq: FrameSequence, joints: usize, dim: usize) -> Result<Self> {
        if seq.width != joints * dim {
            return Err(Error::DimensionMismatch {
                expected: joints * dim,
                got: seq.width,
                context: "frame width vs joints*dim",
            });
        }
        let frames = seq.len();
        Self::new(frames, joints, dim, seq.data)
    }
}

/// `F` equal-width real frames, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    width: usize,
    data: Vec<f64>,
}

impl FrameSequence {
    pub fn new(width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || data.len() % width != 0 {
            return Err(Error::Domain(format!(
                "{} values do not form frames of width {width}",
                data.len()
            )));
        }
        if data.len() / width < 2 {
            return Err(Error::Domain("a frame sequence needs at least 2 frames".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("frame sequence contains non-finite values".into()));
        }
        Ok(Self { width, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn from_parts(width: usize, data: Vec<f64>) -> Self {
        Self { width, data }
    }
}

/// Joint indices of the 10-joint upper-body layout used by the synthetic
/// generator and the default joint selection.
pub mod layout {
    pub const HEAD: usize = 0;
    pub const NECK: usize = 1;
    pub const SHOULDER_L: usize = 2;
    pub const ELBOW_L: usize = 3;
    pub const WRIST_L: usize = 4;
    pub const HAND_L: usize = 5;
    pub const SHOULDER_R: usize = 6;
    pub const ELBOW_R: usize = 7;
    pub const WRIST_R: usize = 8;
    pub const HAND_R: usize = 9;

    pub const JOINT_COUNT: usize = 10;

    pub const NAMES: [&str; JOINT_COUNT] = [
        "head",
        "neck",
        "shoulder_left",
        "elbow_left",
        "wrist_left",
        "hand_left",
        "shoulder_right",
        "elbow_right",
        "wrist_right",
        "hand_right",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_round_trip_and_ragged_rejection() {
        let nested = vec![
            vec![vec![0.0, 1.0, 2.0], vec![3.0, 4.0, 5.0]],
            vec![vec![6.0, 7.0, 8.0], vec![9.0, 10.0, 11.0]],
        ];
        let s = Skeleton::from_nested(&nested).unwrap();
        assert_eq!((s.frames(), s.joints(), s.dim()), (2, 2, 3));
        assert_eq!(s.joint(1, 0), &[6.0, 7.0, 8.0]);
        assert_eq!(s.to_nested(), nested);

        let mut ragged = nested.clone();
        ragged[1].pop();
        assert!(Skeleton::from_nested(&ragged).is_err());
    }
}
