//! Histogram of oriented gradients for a whole frame.
//!
//! Centered-difference gradients with border replication, unsigned
//! orientations hard-assigned to equal-width bins, square cells, overlapping
//! square blocks normalised with L2-Hys. Pixels in trailing partial cells
//! contribute nothing (they still serve as gradient neighbours).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Frame;

pub const HOG_MAGIC: &[u8; 4] = b"HOG1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HogParams {
    /// Cell side in pixels.
    pub cell: u32,
    /// Block side in cells.
    pub block: u32,
    /// Block stride in cells.
    pub block_stride: u32,
    /// Unsigned orientation bins over [0°, 180°).
    pub n_orient_bins: u32,
    /// L2-Hys clipping value.
    pub clip: f64,
    pub eps_norm: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell: 8,
            block: 2,
            block_stride: 1,
            n_orient_bins: 9,
            clip: 0.2,
            eps_norm: 1e-6,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell == 0 || self.block == 0 || self.block_stride == 0 || self.n_orient_bins == 0 {
            return Err(Error::InvalidParam("HOG cell, block, stride and bin count must be positive".into()));
        }
        if !(self.clip > 0.0) || !(self.eps_norm > 0.0) {
            return Err(Error::InvalidParam("HOG clip and eps_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Cell and block counts for a given frame size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HogLayout {
    pub cells_x: usize,
    pub cells_y: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_len: usize,
}

impl HogLayout {
    pub fn new(width: u32, height: u32, params: &HogParams) -> Result<Self> {
        params.validate()?;
        let cells_x = (width / params.cell) as usize;
        let cells_y = (height / params.cell) as usize;
        let block = params.block as usize;
        if cells_x < block || cells_y < block {
            return Err(Error::FrameTooSmall {
                width,
                height,
                block_px: params.cell * params.block,
            });
        }
        let stride = params.block_stride as usize;
        Ok(HogLayout {
            cells_x,
            cells_y,
            blocks_x: (cells_x - block) / stride + 1,
            blocks_y: (cells_y - block) / stride + 1,
            block_len: block * block * params.n_orient_bins as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.blocks_x * self.blocks_y * self.block_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HogDescriptor {
    pub values: Vec<f64>,
    pub params: HogParams,
    /// (height, width) of the source frame.
    pub frame_dims: (u32, u32),
}

pub fn hog(frame: &Frame, params: &HogParams) -> Result<HogDescriptor> {
    let layout = HogLayout::new(frame.width(), frame.height(), params)?;
    let cells = cell_histograms(frame, params, &layout);
    let n_bins = params.n_orient_bins as usize;
    let block = params.block as usize;
    let stride = params.block_stride as usize;

    let mut values = Vec::with_capacity(layout.len());
    let mut buf = Vec::with_capacity(layout.block_len);
    for by in 0..layout.blocks_y {
        for bx in 0..layout.blocks_x {
            buf.clear();
            for cy in by * stride..by * stride + block {
                for cx in bx * stride..bx * stride + block {
                    let at = (cy * layout.cells_x + cx) * n_bins;
                    buf.extend_from_slice(&cells[at..at + n_bins]);
                }
            }
            l2_hys(&mut buf, params.clip, params.eps_norm);
            values.extend_from_slice(&buf);
        }
    }
    Ok(HogDescriptor {
        values,
        params: *params,
        frame_dims: (frame.height(), frame.width()),
    })
}

/// Orientation histograms for every full cell, cell-major then bin.
fn cell_histograms(frame: &Frame, params: &HogParams, layout: &HogLayout) -> Vec<f64> {
    let n_bins = params.n_orient_bins as usize;
    let cell = params.cell as usize;
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let px = frame.pixels();
    let bin_width = 180.0 / n_bins as f64;

    let mut cells = vec![0.0; layout.cells_x * layout.cells_y * n_bins];
    for y in 0..layout.cells_y * cell {
        let row = &px[y * w..(y + 1) * w];
        let up = &px[y.saturating_sub(1) * w..][..w];
        let down = &px[(y + 1).min(h - 1) * w..][..w];
        let cell_row = (y / cell) * layout.cells_x;
        for x in 0..layout.cells_x * cell {
            let gx = row[(x + 1).min(w - 1)] as f64 - row[x.saturating_sub(1)] as f64;
            let gy = down[x] as f64 - up[x] as f64;
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            let mag = (gx * gx + gy * gy).sqrt();
            let theta = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let bin = (theta / bin_width) as usize % n_bins;
            cells[(cell_row + x / cell) * n_bins + bin] += mag;
        }
    }
    cells
}

fn l2_hys(v: &mut [f64], clip: f64, eps: f64) {
    let scale = |v: &mut [f64]| {
        let norm = (v.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    };
    scale(v);
    v.iter_mut().for_each(|x| *x = x.min(clip));
    scale(v);
}

/// Writes descriptors as `[magic "HOG1"][dims u32][count u32][count × dims f64]`,
/// all little-endian.
pub fn write_hog_block<W: Write>(mut w: W, dims: usize, descriptors: &[Vec<f64>]) -> Result<()> {
    let dims32 = u32::try_from(dims).map_err(|_| Error::InvalidParam("descriptor too long".into()))?;
    let count = u32::try_from(descriptors.len()).map_err(|_| Error::InvalidParam("too many descriptors".into()))?;
    w.write_all(HOG_MAGIC)?;
    w.write_all(&dims32.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for d in descriptors {
        if d.len() != dims {
            return Err(Error::Shape {
                expected: dims,
                got: d.len(),
            });
        }
        for v in d {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns `(dims, descriptors)`.
pub fn read_hog_block<R: Read>(mut r: R) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)
        .map_err(|_| Error::Truncated { offset: 0, what: "HOG block header".into() })?;
    if &head[..4] != HOG_MAGIC {
        return Err(Error::Format("bad HOG block magic".into()));
    }
    let dims = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(count);
    let mut raw = vec![0u8; dims * 8];
    for i in 0..count {
        r.read_exact(&mut raw).map_err(|_| Error::Truncated {
            offset: 12 + (i * dims * 8) as u64,
            what: format!("descriptor {i} of {count}"),
        })?;
        out.push(
            raw.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        );
    }
    Ok((dims, out))
}
