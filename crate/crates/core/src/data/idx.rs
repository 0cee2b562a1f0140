//! IDX binary files (the MNIST container format).
//!
//! Header: a big-endian `u32` magic (`0x00000803` for rank-3 unsigned-byte
//! images, `0x00000801` for rank-1 labels) followed by one big-endian `u32`
//! per dimension, then the raw bytes.

use std::path::Path;

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::numerics::Vector;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                message: format!("truncated {what}: needed {n} bytes at offset {}", self.pos),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let magic = self.u32("magic number")?;
        if magic != expected {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
            });
        }
        Ok(())
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let mut cur = Cursor { bytes, pos: 0 };
    cur.magic(IMAGES_MAGIC)?;
    let count = cur.u32("image count")? as usize;
    let rows = cur.u32("row count")? as usize;
    let cols = cur.u32("column count")? as usize;
    let size = rows * cols;
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        images.push(cur.take(size, &format!("image {i}"))?.to_vec());
    }
    Ok(IdxImages { rows, cols, images })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut cur = Cursor { bytes, pos: 0 };
    cur.magic(LABELS_MAGIC)?;
    let count = cur.u32("label count")? as usize;
    Ok(cur.take(count, "labels")?.to_vec())
}

pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.images.len() * images.rows * images.cols);
    for word in [IMAGES_MAGIC, images.images.len() as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in &images.images {
        out.extend_from_slice(img);
    }
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Loads an image file with pixels scaled to `[0, 1]`, at native resolution.
pub fn load_idx(path: impl AsRef<Path>) -> Result<Dataset> {
    load_idx_with(path, None)
}

/// Like [`load_idx`], optionally area-averaging every image down to `side×side`.
pub fn load_idx_with(path: impl AsRef<Path>, downscale: Option<usize>) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let parsed = parse_idx_images(&bytes)?;
    let points = parsed
        .images
        .iter()
        .map(|img| {
            let scaled: Vector = img.iter().map(|&b| f64::from(b) / 255.0).collect();
            match downscale {
                Some(side) => area_downscale(&scaled, parsed.rows, parsed.cols, side),
                None => scaled,
            }
        })
        .collect();
    Ok(Dataset::new(points, Provenance::IdxFile, None))
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&std::fs::read(path)?)
}

/// Area-weighted resampling of a `rows×cols` image to `side×side`.
///
/// Output pixel `(i, j)` averages the source over the cell
/// `[i·rows/side, (i+1)·rows/side) × [j·cols/side, (j+1)·cols/side)`;
/// source pixels straddling a cell edge contribute in proportion to the
/// overlap, so 28→8 averages 3.5×3.5 pixel boxes.
pub fn area_downscale(pixels: &[f64], rows: usize, cols: usize, side: usize) -> Vector {
    assert_eq!(pixels.len(), rows * cols, "pixel buffer does not match the image shape");
    let row_w = overlap_weights(rows, side);
    let col_w = overlap_weights(cols, side);
    let cell_area = (rows as f64 / side as f64) * (cols as f64 / side as f64);
    let mut out = vec![0.0; side * side];
    for (i, rw) in row_w.iter().enumerate() {
        for (j, cw) in col_w.iter().enumerate() {
            let mut acc = 0.0;
            for &(r, wr) in rw {
                for &(c, wc) in cw {
                    acc += wr * wc * pixels[r * cols + c];
                }
            }
            out[i * side + j] = acc / cell_area;
        }
    }
    out
}

/// For each output cell, the source indices it covers and their overlap lengths.
fn overlap_weights(src: usize, side: usize) -> Vec<Vec<(usize, f64)>> {
    let step = src as f64 / side as f64;
    (0..side)
        .map(|cell| {
            let (a, b) = (cell as f64 * step, (cell + 1) as f64 * step);
            let first = a.floor() as usize;
            let last = (b.ceil() as usize).min(src);
            (first..last)
                .filter_map(|p| {
                    let w = (b.min(p as f64 + 1.0) - a.max(p as f64)).max(0.0);
                    (w > 0.0).then_some((p, w))
                })
                .collect()
        })
        .collect()
}
