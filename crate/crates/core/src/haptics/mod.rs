//! A deterministic ray-march grasp and the haptic likelihood.
//!
//! The hand is sixteen joint rays fixed relative to the grid center. Each
//! joint closes until its ray meets the object: the free travel before the
//! first occupied voxel, times the joint's gain, is its angle.

use std::io::{self, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::object::{viewpoint_grid, Occupancy, RotatedView, Viewpoint, VoxelObject};

pub const JOINTS: usize = 16;
pub const MAX_ANGLE: f64 = 90.0;
pub const HAND_JSON: &str = include_str!("../../data/hand.json");

#[derive(Debug, Error)]
pub enum HapticsError {
    #[error("invalid hand model: {0}")]
    Hand(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// Ray start in voxels, relative to the grid center.
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    /// Degrees of closure per voxel of free travel.
    pub gain: f64,
    pub max_travel: usize,
}

/// Four fingers of four joints. Each finger wraps one end of the object:
/// its tip closes along the end's axis and the other joints close onto the
/// end from three sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    pub joints: Vec<Joint>,
}

impl HandModel {
    pub fn from_json(text: &str) -> Result<Self, HapticsError> {
        let hand: HandModel = serde_json::from_str(text)?;
        hand.validate()?;
        Ok(hand)
    }

    pub fn shipped() -> Self {
        HandModel::from_json(HAND_JSON).expect("shipped hand model is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hand serializes")
    }

    pub fn validate(&self) -> Result<(), HapticsError> {
        let bad = |m: String| Err(HapticsError::Hand(m));
        if self.joints.len() != JOINTS {
            return bad(format!("{} joints, expected {JOINTS}", self.joints.len()));
        }
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        for (i, j) in self.joints.iter().enumerate() {
            if (dot(j.direction, j.direction) - 1.0).abs() > 1e-9 {
                return bad(format!("joint {} direction must be a unit vector", j.name));
            }
            if !(j.gain > 0.0) || j.max_travel == 0 {
                return bad(format!("joint {} needs positive gain and travel", j.name));
            }
            if self.joints[..i].iter().any(|k| k.name == j.name) {
                return bad(format!("duplicate joint {}", j.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspVector {
    pub angles: [f64; JOINTS],
}

impl GraspVector {
    pub fn new(angles: [f64; JOINTS]) -> Self {
        GraspVector { angles }
    }

    pub fn scaled(&self, c: f64) -> Self {
        GraspVector {
            angles: self.angles.map(|a| a * c),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.angles.iter().all(|&a| a == 0.0)
    }

    /// Sixteen little-endian `f64` values.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for a in self.angles {
            w.write_all(&a.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(8 * JOINTS);
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, HapticsError> {
        let mut angles = [0.0; JOINTS];
        let mut b = [0u8; 8];
        for a in &mut angles {
            r.read_exact(&mut b)?;
            *a = f64::from_le_bytes(b);
        }
        Ok(GraspVector { angles })
    }
}

/// Free travel of every joint ray before its first occupied voxel, capped
/// at the joint's maximum. For a union of objects this is the per-joint
/// minimum over the parts.
pub fn free_travel(o: &impl Occupancy, hand: &HandModel) -> [usize; JOINTS] {
    let c = o.dim() as f64 / 2.0;
    let mut out = [0; JOINTS];
    for (f, j) in out.iter_mut().zip(&hand.joints) {
        *f = (0..=j.max_travel)
            .find(|&t| {
                let p = [0, 1, 2].map(|k| (c + j.origin[k] + t as f64 * j.direction[k]).floor() as i64);
                o.occupied_at(p)
            })
            .unwrap_or(j.max_travel);
    }
    out
}

/// Joint angles for the given free travels.
pub fn grasp_from_travel(travel: &[usize; JOINTS], hand: &HandModel) -> GraspVector {
    let mut angles = [0.0; JOINTS];
    for ((a, &t), j) in angles.iter_mut().zip(travel).zip(&hand.joints) {
        *a = (j.gain * t as f64).clamp(0.0, MAX_ANGLE);
    }
    GraspVector { angles }
}

/// Closes every joint on an already oriented object.
pub fn grasp_view(o: &impl Occupancy, hand: &HandModel) -> GraspVector {
    grasp_from_travel(&free_travel(o, hand), hand)
}

pub fn grasp(v: &VoxelObject, hand: &HandModel) -> GraspVector {
    grasp_view(v, hand)
}

/// Grasp of `v` rotated to `vp`.
pub fn grasp_at(v: &VoxelObject, vp: Viewpoint, hand: &HandModel) -> GraspVector {
    grasp_view(&RotatedView::new(v, vp), hand)
}

/// Cosine similarity `1 − dCos`. Two zero vectors are identical (1); a zero
/// vector against a nonzero one scores 0.
pub fn cosine_similarity(a: &GraspVector, b: &GraspVector) -> f64 {
    match (a.is_zero(), b.is_zero()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let dot: f64 = a.angles.iter().zip(&b.angles).map(|(x, y)| x * y).sum();
    let na = a.angles.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.angles.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Maximum similarity of `observed` to any of the candidate grasps.
pub fn best_similarity(observed: &GraspVector, candidates: &[GraspVector]) -> f64 {
    candidates
        .iter()
        .map(|g| cosine_similarity(observed, g))
        .fold(0.0, f64::max)
}

/// Grasps of `v` at every viewpoint in `vps`, in order.
pub fn grasps_over(v: &VoxelObject, hand: &HandModel, vps: &[Viewpoint]) -> Vec<GraspVector> {
    vps.par_iter().map(|&vp| grasp_at(v, vp, hand)).collect()
}

/// Haptic likelihood over the 27-view grid.
pub fn haptic_likelihood(observed: &GraspVector, hypothesis: &VoxelObject, hand: &HandModel) -> f64 {
    best_similarity(observed, &grasps_over(hypothesis, hand, &viewpoint_grid()))
}
