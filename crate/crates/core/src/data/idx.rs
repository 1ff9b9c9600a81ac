//! IDX decoding (big-endian header, unsigned byte payload).

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images with pixels rescaled to `[0, 1]`, row-major per image.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.pixels_per_image();
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx(format!("truncated header at byte {at}")))
}

fn check_magic(bytes: &[u8], want: u32) -> Result<()> {
    let got = be_u32(bytes, 0)?;
    if got != want {
        return Err(Error::Idx(format!("bad magic {got:#010x}, expected {want:#010x}")));
    }
    Ok(())
}

fn payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    if bytes.len() < offset + len {
        return Err(Error::Idx(format!(
            "truncated payload: {} bytes, header promises {}",
            bytes.len(),
            offset + len
        )));
    }
    if bytes.len() > offset + len {
        return Err(Error::Idx(format!("{} trailing bytes", bytes.len() - offset - len)));
    }
    Ok(&bytes[offset..])
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let body = payload(bytes, 16, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.iter().map(|&b| b as f64 / 255.0).collect(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}
