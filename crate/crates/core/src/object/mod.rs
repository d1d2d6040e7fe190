//! Voxel realization of derivations.
//!
//! Objects live in a cubic boolean occupancy grid. Voxel `(x, y, z)` covers
//! the unit cube `[x, x+1) × [y, y+1) × [z, z+1)`; the grid center sits at
//! `dim / 2` on every axis. `y` is up and `z` points toward the viewer.

mod parts;
mod rotate;

use std::io::{self, Read, Write};
use std::ops::Range;

use thiserror::Error;

pub use parts::{
    realize, realize_in, PartLibrary, PartSpec, Primitive, PARTS47_JSON,
};
pub use rotate::{rotate, viewpoint_grid, Mat3, RotatedView, Viewpoint, GRID_HEADINGS, GRID_PITCHES};

pub const DEFAULT_GRID: usize = 64;

#[derive(Debug, Error)]
pub enum ObjectError {
    #[error("unknown part `{0}`")]
    UnknownPart(String),
    #[error("part `{part}` at scale {scale} exceeds the {dim}^3 grid")]
    OutOfBounds { part: String, scale: f64, dim: usize },
    #[error("scale {0} outside [0.1, 2.0]")]
    BadScale(f64),
    #[error("invalid part library: {0}")]
    Library(String),
    #[error("bad voxel file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Inclusive voxel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl Bounds {
    pub fn extents(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.max[a] - self.min[a] + 1)
    }

    fn include(&mut self, p: [usize; 3]) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }
}

/// Read access to a cubic occupancy grid, materialized or not.
pub trait Occupancy {
    fn dim(&self) -> usize;

    fn occupied(&self, x: usize, y: usize, z: usize) -> bool;

    /// A box containing every occupied voxel; may be loose. `None` when
    /// nothing can be occupied.
    fn bounds(&self) -> Option<Bounds>;

    /// The `z` values of column `(x, y)` that can be occupied.
    fn column_range(&self, x: usize, y: usize) -> Range<usize> {
        match self.bounds() {
            Some(b) if (b.min[0]..=b.max[0]).contains(&x) && (b.min[1]..=b.max[1]).contains(&y) => {
                b.min[2]..b.max[2] + 1
            }
            _ => 0..0,
        }
    }

    /// Signed lookup; anything outside the grid is empty.
    fn occupied_at(&self, p: [i64; 3]) -> bool {
        let n = self.dim() as i64;
        if p.iter().any(|&c| c < 0 || c >= n) {
            return false;
        }
        self.occupied(p[0] as usize, p[1] as usize, p[2] as usize)
    }
}

/// Materialized occupancy grid with the scale it was realized at.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelObject {
    dim: usize,
    scale: f64,
    cells: Vec<bool>,
    bounds: Option<Bounds>,
}

impl VoxelObject {
    pub fn empty(dim: usize, scale: f64) -> Self {
        VoxelObject {
            dim,
            scale,
            cells: vec![false; dim * dim * dim],
            bounds: None,
        }
    }

    /// Materializes any occupancy source, visiting only its bounding box.
    pub fn from_occupancy(src: &impl Occupancy, scale: f64) -> Self {
        let n = src.dim();
        let mut out = VoxelObject::empty(n, scale);
        if let Some(b) = src.bounds() {
            for y in b.min[1]..=b.max[1] {
                for x in b.min[0]..=b.max[0] {
                    for z in src.column_range(x, y) {
                        if src.occupied(x, y, z) {
                            out.set(x, y, z);
                        }
                    }
                }
            }
        }
        out
    }

    #[inline]
    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dim * (y + self.dim * z)
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize) {
        let i = self.index(x, y, z);
        self.cells[i] = true;
        match &mut self.bounds {
            Some(b) => b.include([x, y, z]),
            None => {
                self.bounds = Some(Bounds {
                    min: [x, y, z],
                    max: [x, y, z],
                })
            }
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_none()
    }

    /// Occupied voxel coordinates in x-fastest order.
    pub fn voxels(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.dim;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| [i % n, (i / n) % n, i / (n * n)])
    }

    /// Fraction of cells on which two equally sized grids agree.
    pub fn agreement(&self, other: &VoxelObject) -> f64 {
        assert_eq!(self.dim, other.dim);
        let same = self
            .cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.cells.len() as f64
    }

    /// Intersection over union of occupied sets.
    pub fn iou(&self, other: &VoxelObject) -> f64 {
        assert_eq!(self.dim, other.dim);
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.cells.iter().zip(&other.cells) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Raw export: 16-byte header (`FVOX`, three little-endian `u16`
    /// dimensions, a reserved `u16`, little-endian `f32` scale) followed by
    /// occupancy bits packed LSB-first in x-fastest order.
    pub fn write_raw<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.dim as u16;
        w.write_all(b"FVOX")?;
        for v in [d, d, d, 0] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.scale as f32).to_le_bytes())?;
        let mut bytes = vec![0u8; self.cells.len().div_ceil(8)];
        for (i, &c) in self.cells.iter().enumerate() {
            if c {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&bytes)
    }

    pub fn to_raw(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_raw(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_raw<R: Read>(mut r: R) -> Result<Self, ObjectError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..4] != b"FVOX" {
            return Err(ObjectError::Format("bad magic".into()));
        }
        let dims: Vec<usize> = (0..3)
            .map(|i| u16::from_le_bytes([header[4 + 2 * i], header[5 + 2 * i]]) as usize)
            .collect();
        if dims[0] != dims[1] || dims[1] != dims[2] || dims[0] == 0 {
            return Err(ObjectError::Format(format!("non-cubic grid {dims:?}")));
        }
        let scale = f32::from_le_bytes([header[12], header[13], header[14], header[15]]) as f64;
        let n = dims[0];
        let mut bytes = vec![0u8; (n * n * n).div_ceil(8)];
        r.read_exact(&mut bytes)?;
        let mut out = VoxelObject::empty(n, scale);
        for i in 0..n * n * n {
            if bytes[i / 8] >> (i % 8) & 1 == 1 {
                out.set(i % n, (i / n) % n, i / (n * n));
            }
        }
        Ok(out)
    }
}

impl Occupancy for VoxelObject {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn occupied(&self, x: usize, y: usize, z: usize) -> bool {
        self.cells[self.index(x, y, z)]
    }

    fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }
}
