//! Spatial augmentation of frame sequences and class balancing.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::manifest::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    None,
    Rot90,
    Rot180,
    Rot270,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flip {
    None,
    /// Mirror left and right.
    Horizontal,
    /// Mirror top and bottom.
    Vertical,
}

/// A rotation followed by a flip, applied identically to every frame.
///
/// `Rot90` maps `[[a,b],[c,d]]` to `[[c,a],[d,b]]`: counter-clockwise when
/// the row index grows upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Rotation,
    pub flip: Flip,
}

impl Transform {
    pub const IDENTITY: Transform = Transform::new(Rotation::None, Flip::None);

    /// The eleven non-identity transforms balancing draws from: every
    /// rotation with every flip, plus the two pure flips.
    pub const AUGMENTATIONS: [Transform; 11] = [
        Transform::new(Rotation::Rot90, Flip::None),
        Transform::new(Rotation::Rot180, Flip::None),
        Transform::new(Rotation::Rot270, Flip::None),
        Transform::new(Rotation::Rot90, Flip::Horizontal),
        Transform::new(Rotation::Rot180, Flip::Horizontal),
        Transform::new(Rotation::Rot270, Flip::Horizontal),
        Transform::new(Rotation::Rot90, Flip::Vertical),
        Transform::new(Rotation::Rot180, Flip::Vertical),
        Transform::new(Rotation::Rot270, Flip::Vertical),
        Transform::new(Rotation::None, Flip::Horizontal),
        Transform::new(Rotation::None, Flip::Vertical),
    ];

    pub const fn new(rotation: Rotation, flip: Flip) -> Self {
        Self { rotation, flip }
    }

    /// Source pixel `(y, x)` of output pixel `(i, j)` in an `h×w` frame,
    /// with `(oh, ow)` the output size.
    fn source(self, i: usize, j: usize, h: usize, w: usize) -> (usize, usize) {
        let (oh, ow) = match self.rotation {
            Rotation::Rot90 | Rotation::Rot270 => (w, h),
            _ => (h, w),
        };
        let (i, j) = match self.flip {
            Flip::None => (i, j),
            Flip::Horizontal => (i, ow - 1 - j),
            Flip::Vertical => (oh - 1 - i, j),
        };
        match self.rotation {
            Rotation::None => (i, j),
            Rotation::Rot90 => (h - 1 - j, i),
            Rotation::Rot180 => (h - 1 - i, w - 1 - j),
            Rotation::Rot270 => (j, w - 1 - i),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rot = match self.rotation {
            Rotation::None => None,
            Rotation::Rot90 => Some("rot90"),
            Rotation::Rot180 => Some("rot180"),
            Rotation::Rot270 => Some("rot270"),
        };
        let flip = match self.flip {
            Flip::None => None,
            Flip::Horizontal => Some("flip_h"),
            Flip::Vertical => Some("flip_v"),
        };
        match (rot, flip) {
            (None, None) => f.write_str("identity"),
            (Some(r), None) => f.write_str(r),
            (None, Some(l)) => f.write_str(l),
            (Some(r), Some(l)) => write!(f, "{r}+{l}"),
        }
    }
}

/// Applies `t` to every frame of a `[N,H,W,C]` sequence.
pub fn augment(sequence: &Tensor, t: Transform) -> Result<Tensor> {
    let &[n, h, w, c] = sequence.shape() else {
        return Err(Error::shape("augment", format!("expected [N,H,W,C], got {:?}", sequence.shape())));
    };
    let quarter = matches!(t.rotation, Rotation::Rot90 | Rotation::Rot270);
    if quarter && h != w {
        return Err(Error::shape("augment", format!("{t} needs square frames, got {h}×{w}")));
    }
    let src = sequence.data();
    let mut out = Vec::with_capacity(src.len());
    for f in 0..n {
        let frame = &src[f * h * w * c..][..h * w * c];
        for i in 0..h {
            for j in 0..w {
                let (y, x) = t.source(i, j, h, w);
                out.extend_from_slice(&frame[(y * w + x) * c..][..c]);
            }
        }
    }
    Tensor::new(vec![n, h, w, c], out)
}

/// A subject's views held in memory, possibly augmented.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSample {
    pub subject_id: String,
    pub label: Label,
    pub views: Vec<Tensor>,
    /// `Some` for synthetic copies made by [`balance_augment`].
    pub augmentation: Option<Transform>,
}

impl LoadedSample {
    pub fn is_augmented(&self) -> bool {
        self.augmentation.is_some()
    }
}

/// Appends augmented copies until each class has `target_per_class`
/// samples. Classes already at or above the target are left alone.
///
/// Sources cycle through the originals of the class in order; each copy
/// draws its transform uniformly from [`Transform::AUGMENTATIONS`].
pub fn balance_augment(samples: &[LoadedSample], target_per_class: usize, seed: u64) -> Result<Vec<LoadedSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = samples.to_vec();
    for label in Label::ALL {
        let originals: Vec<&LoadedSample> = samples
            .iter()
            .filter(|s| s.label == label && !s.is_augmented())
            .collect();
        if originals.is_empty() {
            return Err(Error::Data(format!("cannot balance: no {label} samples")));
        }
        let have = samples.iter().filter(|s| s.label == label).count();
        for k in 0..target_per_class.saturating_sub(have) {
            let src = originals[k % originals.len()];
            let t = Transform::AUGMENTATIONS[rng.gen_range(0..Transform::AUGMENTATIONS.len())];
            let views = src.views.iter().map(|v| augment(v, t)).collect::<Result<Vec<_>>>()?;
            out.push(LoadedSample {
                subject_id: format!("{}#aug{k}", src.subject_id),
                label,
                views,
                augmentation: Some(t),
            });
        }
    }
    Ok(out)
}

/// The subject an (augmented) sample id derives from.
pub fn source_subject(sample_id: &str) -> &str {
    sample_id.split_once('#').map_or(sample_id, |(id, _)| id)
}
