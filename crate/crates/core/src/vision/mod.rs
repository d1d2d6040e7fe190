//! Silhouettes, HoG descriptors and the vision likelihood.

mod hog;

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::object::{viewpoint_grid, Occupancy, RotatedView, Viewpoint, VoxelObject};

pub use hog::{hog, HogDescriptor, BINS, BLOCK, BLOCK_LEN, CELL, DESCRIPTOR_LEN, EPSILON};

pub const IMAGE_SIZE: usize = 128;
/// Longer side of the normalized silhouette's bounding box, in pixels.
pub const NORMALIZED_SIDE: f64 = 96.0;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("cannot project an empty object")]
    EmptyObject,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// 128×128 grayscale image, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pixels: Vec<f64>,
}

impl Silhouette {
    pub fn blank() -> Self {
        Silhouette {
            pixels: vec![0.0; IMAGE_SIZE * IMAGE_SIZE],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * IMAGE_SIZE + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * IMAGE_SIZE + x] = v;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// 3×3 box blur; border pixels average their in-image neighbors.
    pub fn blurred(&self) -> Silhouette {
        let n = IMAGE_SIZE as isize;
        let mut out = Silhouette::blank();
        for y in 0..n {
            for x in 0..n {
                let (mut sum, mut k) = (0.0, 0.0);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (xx, yy) = (x + dx, y + dy);
                        if (0..n).contains(&xx) && (0..n).contains(&yy) {
                            sum += self.get(xx as usize, yy as usize);
                            k += 1.0;
                        }
                    }
                }
                out.set(x as usize, y as usize, sum / k);
            }
        }
        out
    }

    /// Fraction of pixels on opposite sides of 0.5.
    pub fn disagreement(&self, other: &Silhouette) -> f64 {
        let differ = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .filter(|(&a, &b)| (a >= 0.5) != (b >= 0.5))
            .count();
        differ as f64 / self.pixels.len() as f64
    }

    /// 8-bit binary PGM.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n")?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)
    }
}

/// Which `(x, y)` columns of an oriented object hold any voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMask {
    dim: usize,
    cells: Vec<bool>,
}

impl ColumnMask {
    pub fn empty(dim: usize) -> Self {
        ColumnMask {
            dim,
            cells: vec![false; dim * dim],
        }
    }

    /// Orthographic projection along `z`.
    pub fn of(o: &impl Occupancy) -> Self {
        let n = o.dim();
        let mut m = ColumnMask::empty(n);
        if let Some(b) = o.bounds() {
            for y in b.min[1]..=b.max[1] {
                for x in b.min[0]..=b.max[0] {
                    if o.column_range(x, y).any(|z| o.occupied(x, y, z)) {
                        m.cells[y * n + x] = true;
                    }
                }
            }
        }
        m
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.dim + x]
    }

    /// The mask of a union of objects is the union of their masks.
    pub fn union_with(&mut self, other: &ColumnMask) {
        assert_eq!(self.dim, other.dim, "mask sizes differ");
        for (a, &b) in self.cells.iter_mut().zip(&other.cells) {
            *a |= b;
        }
    }

    /// Normalized binary silhouette of the mask.
    ///
    /// The mask's centroid is moved to the image center and the mask is
    /// rescaled so the longer side of its bounding box spans 96 pixels,
    /// sampling nearest neighbors. Image rows run downward, so `+y` points
    /// up in the picture.
    pub fn silhouette(&self) -> Result<Silhouette, VisionError> {
        let n = self.dim;
        let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
        let (mut lo, mut hi) = ([usize::MAX; 2], [0usize; 2]);
        for y in 0..n {
            for x in 0..n {
                if self.cells[y * n + x] {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    count += 1;
                    lo = [lo[0].min(x), lo[1].min(y)];
                    hi = [hi[0].max(x), hi[1].max(y)];
                }
            }
        }
        if count == 0 {
            return Err(VisionError::EmptyObject);
        }
        let (cx, cy) = (sx / count as f64, sy / count as f64);
        let side = (hi[0] - lo[0] + 1).max(hi[1] - lo[1] + 1) as f64;
        let step = side / NORMALIZED_SIDE;
        let half = IMAGE_SIZE as f64 / 2.0;
        let mut out = Silhouette::blank();
        for v in 0..IMAGE_SIZE {
            let my = (cy - (v as f64 + 0.5 - half) * step).floor();
            if my < 0.0 || my >= n as f64 {
                continue;
            }
            for u in 0..IMAGE_SIZE {
                let mx = (cx + (u as f64 + 0.5 - half) * step).floor();
                if mx >= 0.0 && mx < n as f64 && self.cells[my as usize * n + mx as usize] {
                    out.set(u, v, 1.0);
                }
            }
        }
        Ok(out)
    }
}

/// Orthographic silhouette along `z`, normalized but not yet smoothed.
pub fn project_binary(o: &impl Occupancy) -> Result<Silhouette, VisionError> {
    ColumnMask::of(o).silhouette()
}

/// Smoothed, normalized silhouette of an already oriented object.
pub fn project_view(o: &impl Occupancy) -> Result<Silhouette, VisionError> {
    Ok(project_binary(o)?.blurred())
}

/// Silhouette of `v` seen from `vp`.
pub fn project(v: &VoxelObject, vp: Viewpoint) -> Result<Silhouette, VisionError> {
    project_view(&RotatedView::new(v, vp))
}

/// HoG descriptor of `v` seen from `vp`.
pub fn descriptor(v: &VoxelObject, vp: Viewpoint) -> Result<HogDescriptor, VisionError> {
    Ok(hog(&project(v, vp)?))
}

/// Pearson correlation clipped below at zero; 0 when either input has no
/// variance.
pub fn dcor(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "descriptor lengths differ");
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(0.0, 1.0)
}

/// Maximum of `dcor(observed, hog(project(hypothesis, vp)))` over `vps`.
pub fn vision_likelihood_over(
    observed: &HogDescriptor,
    hypothesis: &VoxelObject,
    vps: &[Viewpoint],
) -> Result<f64, VisionError> {
    if hypothesis.is_empty() {
        return Err(VisionError::EmptyObject);
    }
    vps.par_iter()
        .map(|&vp| descriptor(hypothesis, vp).map(|d| dcor(observed.values(), d.values())))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Vision likelihood over the 27-view grid.
pub fn vision_likelihood(observed: &HogDescriptor, hypothesis: &VoxelObject) -> Result<f64, VisionError> {
    vision_likelihood_over(observed, hypothesis, &viewpoint_grid())
}
