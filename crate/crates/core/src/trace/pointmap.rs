//! Per-pixel metric point maps and their binary container.
//!
//! Layout (little-endian): `b"PMAP"`, `u32` height, `u32` width, then
//! `height * width` row-major records of `3 × f32` world coordinates in meters
//! followed by one `u8` validity flag (0 or 1).

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PMAP";
const HEADER_LEN: usize = 12;
const RECORD_LEN: usize = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    height: usize,
    width: usize,
    points: Vec<[f64; 3]>,
    valid: Vec<bool>,
}

impl PointMap {
    pub fn new(height: usize, width: usize, points: Vec<[f64; 3]>, valid: Vec<bool>) -> Result<Self> {
        let n = height * width;
        if points.len() != n || valid.len() != n {
            return Err(Error::validation(
                "point_map",
                format!(
                    "{} points / {} flags for a {height}x{width} map",
                    points.len(),
                    valid.len()
                ),
            ));
        }
        if let Some(i) = (0..n).find(|&i| valid[i] && !points[i].iter().all(|c| c.is_finite())) {
            return Err(Error::validation(
                format!("point_map[{}][{}]", i / width, i % width),
                "valid point has a non-finite coordinate",
            ));
        }
        Ok(Self { height, width, points, valid })
    }

    /// Every pixel valid, coordinates from `f(row, col)`.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut points = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                points.push(f(r, c));
            }
        }
        Self::new(height, width, points, vec![true; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The point at a pixel, or `None` when the pixel is invalid.
    pub fn point(&self, row: usize, col: usize) -> Option<[f64; 3]> {
        let i = row * self.width + col;
        self.valid[i].then(|| self.points[i])
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.width + col]
    }

    pub fn set_valid(&mut self, row: usize, col: usize, valid: bool) -> Result<()> {
        let i = row * self.width + col;
        if valid && !self.points[i].iter().all(|c| c.is_finite()) {
            return Err(Error::validation("point_map", "cannot validate a non-finite point"));
        }
        self.valid[i] = valid;
        Ok(())
    }

    /// Applies `f` to every valid point.
    pub fn map_points(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self> {
        let points = self
            .points
            .iter()
            .zip(&self.valid)
            .map(|(p, v)| if *v { f(*p) } else { *p })
            .collect();
        Self::new(self.height, self.width, points, self.valid.clone())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::validation("point_map", "truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::validation("point_map.magic", "expected PMAP"));
        }
        let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if height == 0 || width == 0 {
            return Err(Error::validation("point_map", "zero dimension"));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(RECORD_LEN))
            .and_then(|n| n.checked_add(HEADER_LEN));
        if expected != Some(bytes.len()) {
            return Err(Error::validation(
                "point_map",
                format!("{} bytes for a {height}x{width} map", bytes.len()),
            ));
        }
        let n = height * width;
        let mut points = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for rec in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN) {
            let coord = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
            points.push([coord(0), coord(1), coord(2)]);
            valid.push(match rec[12] {
                0 => false,
                1 => true,
                other => {
                    return Err(Error::validation(
                        format!("point_map[{}]", points.len() - 1),
                        format!("validity byte {other}"),
                    ))
                }
            });
        }
        Self::new(height, width, points, valid)
    }

    /// Binary container; coordinates are narrowed to `f32`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.points.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for (p, v) in self.points.iter().zip(&self.valid) {
            for c in p {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
            out.push(u8::from(*v));
        }
        out
    }
}
