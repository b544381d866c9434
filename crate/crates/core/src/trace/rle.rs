//! Row-major run-length encoding of binary masks, COCO style: runs alternate
//! absent/present and always start with an absent run (possibly of length 0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `height × width` binary grid in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(height: usize, width: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != height * width {
            return Err(Error::validation(
                "grid",
                format!("{} cells for a {height}x{width} grid", cells.len()),
            ));
        }
        Ok(Self { height, width, cells })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            cells: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                cells.push(f(r, c));
            }
        }
        Self { height, width, cells }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.width + col] = value;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.cells.iter().any(|c| *c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RleMask {
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    /// Sum of all runs, `None` on overflow.
    pub fn total(&self) -> Option<u64> {
        self.counts.iter().try_fold(0u64, |acc, c| acc.checked_add(*c))
    }
}

pub fn rle_decode(mask: &RleMask, height: usize, width: usize) -> Result<BinaryGrid> {
    let expected = (height as u64).checked_mul(width as u64);
    let total = mask.total();
    if total.is_none() || total != expected {
        return Err(Error::validation(
            "mask",
            format!(
                "run lengths sum to {}, expected {height}x{width}",
                total.map_or_else(|| "overflow".to_string(), |t| t.to_string())
            ),
        ));
    }
    let mut cells = Vec::with_capacity(height * width);
    let mut value = false;
    for &run in &mask.counts {
        cells.extend(std::iter::repeat_n(value, run as usize));
        value = !value;
    }
    Ok(BinaryGrid { height, width, cells })
}

pub fn rle_encode(grid: &BinaryGrid) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for &cell in &grid.cells {
        if cell == current {
            run += 1;
        } else {
            counts.push(run);
            current = cell;
            run = 1;
        }
    }
    counts.push(run);
    RleMask { counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_grids(h: usize, w: usize) -> impl Iterator<Item = BinaryGrid> {
        let n = h * w;
        (0u32..(1 << n)).map(move |bits| {
            BinaryGrid::new(h, w, (0..n).map(|i| bits >> i & 1 == 1).collect()).unwrap()
        })
    }

    #[test]
    fn leading_zero_run() {
        let g = rle_decode(&RleMask::new(vec![0, 4]), 2, 2).unwrap();
        assert_eq!(g, BinaryGrid::filled(2, 2, true));
        assert_eq!(rle_encode(&g).counts, vec![0, 4]);
    }

    #[test]
    fn all_absent() {
        let g = rle_decode(&RleMask::new(vec![4]), 2, 2).unwrap();
        assert_eq!(g, BinaryGrid::filled(2, 2, false));
        assert_eq!(rle_encode(&g).counts, vec![4]);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let err = rle_decode(&RleMask::new(vec![1, 2]), 2, 2).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
        let err = rle_decode(&RleMask::new(vec![u64::MAX, 5]), 2, 2).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn exhaustive_round_trip_up_to_4x4() {
        for (h, w) in [(1, 1), (2, 2), (3, 3), (2, 3), (3, 4), (4, 4)] {
            for g in all_grids(h, w) {
                let rle = rle_encode(&g);
                assert_eq!(rle.total(), Some((h * w) as u64));
                // canonical: only the first run may be zero
                assert!(rle.counts.iter().skip(1).all(|c| *c > 0));
                assert_eq!(rle_decode(&rle, h, w).unwrap(), g);
            }
        }
    }

    #[test]
    fn row_major_order() {
        // counts [1, 1, 2]: (0,0)=0 (0,1)=1 (1,0)=0 (1,1)=0
        let g = rle_decode(&RleMask::new(vec![1, 1, 2]), 2, 2).unwrap();
        assert!(!g.get(0, 0) && g.get(0, 1) && !g.get(1, 0) && !g.get(1, 1));
    }
}
