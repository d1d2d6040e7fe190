use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Bounds, Occupancy, VoxelObject};

pub const GRID_HEADINGS: [f64; 9] = [0.0, 40.0, 80.0, 120.0, 160.0, 200.0, 240.0, 280.0, 320.0];
pub const GRID_PITCHES: [f64; 3] = [-25.0, 0.0, 25.0];

/// Object orientation in degrees. Heading turns about the vertical `y` axis,
/// pitch about `x`; roll is never applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub heading: f64,
    pub pitch: f64,
}

impl Viewpoint {
    pub const IDENTITY: Viewpoint = Viewpoint {
        heading: 0.0,
        pitch: 0.0,
    };

    pub fn new(heading: f64, pitch: f64) -> Self {
        Viewpoint { heading, pitch }
    }

    /// Forward rotation: heading first, then pitch.
    pub fn matrix(&self) -> Mat3 {
        Mat3::rot_x(self.pitch).mul(&Mat3::rot_y(self.heading))
    }
}

/// The 27 standard views: 9 headings × 3 pitches, pitch varying fastest.
pub fn viewpoint_grid() -> Vec<Viewpoint> {
    GRID_HEADINGS
        .iter()
        .flat_map(|&h| GRID_PITCHES.iter().map(move |&p| Viewpoint::new(h, p)))
        .collect()
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

/// Sine and cosine of an angle in degrees, exact at multiples of 90°.
pub(crate) fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        r.to_radians().sin_cos()
    }
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rot_x(deg: f64) -> Mat3 {
        let (s, c) = sin_cos_deg(deg);
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(deg: f64) -> Mat3 {
        let (s, c) = sin_cos_deg(deg);
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(deg: f64) -> Mat3 {
        let (s, c) = sin_cos_deg(deg);
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(m)
    }

    pub fn transpose(&self) -> Mat3 {
        let m = self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

/// An object seen through a rotation about the grid center, resampled on
/// demand with nearest-neighbor lookup. Destination voxel `q` is occupied
/// iff the source voxel containing `R⁻¹(q_center - c) + c` is occupied.
pub struct RotatedView<'a> {
    src: &'a VoxelObject,
    inverse: Mat3,
    center: f64,
    src_bounds: Option<Bounds>,
    bounds: Option<Bounds>,
}

impl<'a> RotatedView<'a> {
    pub fn new(src: &'a VoxelObject, vp: Viewpoint) -> Self {
        let forward = vp.matrix();
        let inverse = forward.transpose();
        let n = src.dim();
        let center = n as f64 / 2.0;
        let src_bounds = src.bounds();
        let bounds = src_bounds.and_then(|b| {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for corner in 0..8 {
                let p = [0, 1, 2].map(|a| {
                    let v = if corner >> a & 1 == 0 { b.min[a] as f64 } else { (b.max[a] + 1) as f64 };
                    v - center
                });
                let q = forward.apply(p);
                for a in 0..3 {
                    lo[a] = lo[a].min(q[a] + center);
                    hi[a] = hi[a].max(q[a] + center);
                }
            }
            // One voxel of slack on each side absorbs nearest-neighbor rounding.
            let min = lo.map(|v| (v.floor() - 1.0).max(0.0) as usize);
            let max = hi.map(|v| (v.ceil() + 1.0).min(n as f64 - 1.0) as usize);
            if (0..3).any(|a| min[a] > max[a]) {
                None
            } else {
                Some(Bounds { min, max })
            }
        });
        RotatedView {
            src,
            inverse,
            center,
            src_bounds,
            bounds,
        }
    }

    #[inline]
    fn source_point(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        let c = self.center;
        let s = self.inverse.apply([x + 0.5 - c, y + 0.5 - c, z + 0.5 - c]);
        [s[0] + c, s[1] + c, s[2] + c]
    }
}

impl Occupancy for RotatedView<'_> {
    fn dim(&self) -> usize {
        self.src.dim()
    }

    #[inline]
    fn occupied(&self, x: usize, y: usize, z: usize) -> bool {
        let Some(b) = self.src_bounds else {
            return false;
        };
        let s = self.source_point(x as f64, y as f64, z as f64);
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = s[a].floor();
            if f < b.min[a] as f64 || f > b.max[a] as f64 {
                return false;
            }
            idx[a] = f as usize;
        }
        self.src.occupied(idx[0], idx[1], idx[2])
    }

    fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }

    /// Restricts the column to the `z` interval whose preimage meets the
    /// source bounding box (with one voxel of slack).
    fn column_range(&self, x: usize, y: usize) -> Range<usize> {
        let (Some(b), Some(sb)) = (self.bounds, self.src_bounds) else {
            return 0..0;
        };
        if !(b.min[0]..=b.max[0]).contains(&x) || !(b.min[1]..=b.max[1]).contains(&y) {
            return 0..0;
        }
        let base = self.source_point(x as f64, y as f64, 0.0);
        let (mut lo, mut hi) = (b.min[2] as f64, b.max[2] as f64);
        for a in 0..3 {
            let slope = self.inverse.0[a][2];
            let (amin, amax) = (sb.min[a] as f64 - 1.0, sb.max[a] as f64 + 2.0);
            if slope.abs() < 1e-12 {
                if base[a] < amin || base[a] > amax {
                    return 0..0;
                }
            } else {
                let t0 = (amin - base[a]) / slope;
                let t1 = (amax - base[a]) / slope;
                lo = lo.max(t0.min(t1).floor());
                hi = hi.min(t0.max(t1).ceil());
            }
        }
        if lo > hi {
            return 0..0;
        }
        lo as usize..hi as usize + 1
    }
}

/// Materialized rotation of `v` about the grid center.
pub fn rotate(v: &VoxelObject, vp: Viewpoint) -> VoxelObject {
    VoxelObject::from_occupancy(&RotatedView::new(v, vp), v.scale())
}
