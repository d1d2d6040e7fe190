use std::io::{self, Read, Write};

use super::{Silhouette, VisionError, IMAGE_SIZE};

pub const CELL: usize = 8;
pub const BINS: usize = 9;
pub const BLOCK: usize = 2;
pub const EPSILON: f64 = 1e-6;
const CELLS: usize = IMAGE_SIZE / CELL;
const BLOCKS: usize = CELLS - BLOCK + 1;
pub const BLOCK_LEN: usize = BLOCK * BLOCK * BINS;
pub const DESCRIPTOR_LEN: usize = BLOCKS * BLOCKS * BLOCK_LEN;

#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    values: Vec<f64>,
}

impl HogDescriptor {
    pub fn from_values(values: Vec<f64>) -> Self {
        HogDescriptor { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The normalized 36-value sub-vector of block `(row, col)`.
    pub fn block(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * BLOCKS + col) * BLOCK_LEN;
        &self.values[start..start + BLOCK_LEN]
    }

    /// Little-endian `u32` length followed by `f32` values.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.values.len() as u32).to_le_bytes())?;
        for &v in &self.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(4 + 4 * self.values.len());
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, VisionError> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let n = u32::from_le_bytes(len) as usize;
        let mut bytes = vec![0u8; 4 * n];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(HogDescriptor { values })
    }
}

/// Histogram-of-gradients descriptor of a 128×128 silhouette.
///
/// Gradients are centered differences with replicated borders. Unsigned
/// orientations in `[0°, 180°)` are split linearly between the two nearest
/// of nine bins centered at 0°, 20°, ..., 160° (wrapping), weighted by
/// magnitude and accumulated per 8×8 cell. Each 2×2 block of cells, taken
/// with a stride of one cell, is normalized as `v / sqrt(|v|² + ε²)`; blocks
/// are concatenated row-major, cells within a block row-major.
pub fn hog(s: &Silhouette) -> HogDescriptor {
    let n = IMAGE_SIZE;
    let px = |x: usize, y: usize| s.get(x, y);
    let mut cells = vec![[0.0f64; BINS]; CELLS * CELLS];
    for y in 0..n {
        for x in 0..n {
            let gx = px((x + 1).min(n - 1), y) - px(x.saturating_sub(1), y);
            let gy = px(x, (y + 1).min(n - 1)) - px(x, y.saturating_sub(1));
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let pos = angle / (180.0 / BINS as f64);
            let lo = (pos.floor() as usize).min(BINS - 1);
            let frac = pos - lo as f64;
            let hist = &mut cells[(y / CELL) * CELLS + x / CELL];
            hist[lo] += mag * (1.0 - frac);
            if frac > 0.0 {
                hist[(lo + 1) % BINS] += mag * frac;
            }
        }
    }

    let mut values = Vec::with_capacity(DESCRIPTOR_LEN);
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            let start = values.len();
            for cy in by..by + BLOCK {
                for cx in bx..bx + BLOCK {
                    values.extend_from_slice(&cells[cy * CELLS + cx]);
                }
            }
            let block = &mut values[start..];
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + EPSILON * EPSILON).sqrt();
            for v in block {
                *v /= norm;
            }
        }
    }
    HogDescriptor { values }
}
