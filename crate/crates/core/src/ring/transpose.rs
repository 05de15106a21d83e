//! Quadrant-swap matrix transpose.
//!
//! A `K×K` block is transposed by swapping its off-diagonal quadrants and
//! recursing into all four; `log2 K` layers in total. Rectangular `g×e`
//! inputs (`g < e`) are handled as `e/g` square `g×g` blocks, which is what
//! bypassing the outer swap layers amounts to.

use serde::{Deserialize, Serialize};

use super::RingError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Timing of the pipelined transpose unit.
///
/// Each quadrant swap runs three `K/2`-cycle steps; step 3 of one block
/// overlaps step 1 of the next, so throughput is one `E`-element row per
/// cycle once full and the fill latency is `3K/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransposeTiming {
    pub block: usize,
    pub step_cycles: usize,
    pub latency: usize,
    /// Swap layers in the unit (`log2` of the larger dimension).
    pub layers: u32,
    /// Layers bypassed for rectangular inputs.
    pub bypassed_layers: u32,
    /// Output rows emitted per cycle in steady state.
    pub rows_per_cycle: usize,
}

impl TransposeTiming {
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        let big = rows.max(cols);
        let small = rows.min(cols);
        Self {
            block: big,
            step_cycles: big / 2,
            latency: 3 * big / 2,
            layers: big.trailing_zeros(),
            bypassed_layers: big.trailing_zeros() - small.trailing_zeros(),
            rows_per_cycle: if rows < cols { cols / rows } else { 1 },
        }
    }
}

fn quadrant_swap<T: Copy>(data: &mut [T], stride: usize, r0: usize, c0: usize, k: usize) {
    if k < 2 {
        return;
    }
    let h = k / 2;
    for i in 0..h {
        for j in 0..h {
            data.swap((r0 + i) * stride + c0 + h + j, (r0 + h + i) * stride + c0 + j);
        }
    }
    quadrant_swap(data, stride, r0, c0, h);
    quadrant_swap(data, stride, r0, c0 + h, h);
    quadrant_swap(data, stride, r0 + h, c0, h);
    quadrant_swap(data, stride, r0 + h, c0 + h, h);
}

pub fn transpose_quadrant_swap<T: Copy>(mat: &Matrix<T>) -> Result<(Matrix<T>, TransposeTiming), RingError> {
    let (rows, cols) = (mat.rows, mat.cols);
    if !rows.is_power_of_two() || !cols.is_power_of_two() {
        return Err(RingError::BadShape {
            g: rows,
            e: cols,
            n: rows * cols,
        });
    }
    let k = rows.min(cols);
    let blocks = rows.max(cols) / k;
    let mut out = Vec::with_capacity(rows * cols);
    for b in 0..blocks {
        // Copy block b into a k×k scratch, transpose in place, append.
        let mut block = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let (r, c) = if rows <= cols { (i, b * k + j) } else { (b * k + i, j) };
                block.push(mat.get(r, c));
            }
        }
        quadrant_swap(&mut block, k, 0, 0, k);
        out.push(block);
    }
    let data = if rows <= cols {
        // blocks stack vertically in the cols×rows result
        out.concat()
    } else {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..k {
            for block in &out {
                data.extend_from_slice(&block[i * k..(i + 1) * k]);
            }
        }
        data
    };
    Ok((Matrix::new(cols, rows, data), TransposeTiming::for_shape(rows, cols)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn direct<T: Copy>(m: &Matrix<T>) -> Matrix<T> {
        let mut d = Vec::with_capacity(m.rows * m.cols);
        for c in 0..m.cols {
            for r in 0..m.rows {
                d.push(m.get(r, c));
            }
        }
        Matrix::new(m.cols, m.rows, d)
    }

    #[test]
    fn two_by_two() {
        let m = Matrix::new(2, 2, vec!['a', 'b', 'c', 'd']);
        let (t, _) = transpose_quadrant_swap(&m).unwrap();
        assert_eq!(t.data(), &['a', 'c', 'b', 'd']);
    }

    #[test]
    fn eight_by_eight_has_three_layers() {
        let m = Matrix::new(8, 8, (0..64u32).map(|x| x * 7 % 61).collect());
        let (t, timing) = transpose_quadrant_swap(&m).unwrap();
        assert_eq!(t, direct(&m));
        assert_eq!(timing.layers, 3);
        assert_eq!(timing.bypassed_layers, 0);
    }

    #[test]
    fn rectangular() {
        let m = Matrix::new(2, 8, (0..16u32).collect());
        let (t, timing) = transpose_quadrant_swap(&m).unwrap();
        assert_eq!(t, direct(&m));
        assert_eq!(timing.bypassed_layers, 2);
        assert_eq!(timing.rows_per_cycle, 4);
        let (back, _) = transpose_quadrant_swap(&t).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn timing_at_128_lanes() {
        let t = TransposeTiming::for_shape(128, 128);
        assert_eq!(t.latency, 192);
        assert_eq!(t.step_cycles, 64);
        assert_eq!(t.rows_per_cycle, 1);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(transpose_quadrant_swap(&Matrix::new(3, 4, vec![0; 12])).is_err());
    }

    proptest! {
        #[test]
        fn involution(lr in 0u32..5, lc in 0u32..5, seed in any::<u64>()) {
            let (r, c) = (1usize << lr, 1usize << lc);
            let data: Vec<u64> = (0..r * c).map(|i| seed.wrapping_mul(i as u64 + 1)).collect();
            let m = Matrix::new(r, c, data);
            let (t, _) = transpose_quadrant_swap(&m).unwrap();
            prop_assert_eq!(&t, &direct(&m));
            let (tt, _) = transpose_quadrant_swap(&t).unwrap();
            prop_assert_eq!(tt, m);
        }
    }
}
