//! im2col lowering of a convolution onto PE tiles.
//!
//! The kernel matrix has one row per `(k_h, k_w, k_in)` position (in that
//! nesting order) and one column per output channel. A PE holds an `N × M`
//! block of it; every output vector is one MVM per PE, with partial sums of
//! vertically stacked tiles added up.

use std::ops::Range;

use nn_ir::interp::Tensor;
use nn_ir::{KernelSpec, TensorShape};

use crate::arch::ArchConfig;

/// One PE's share of the kernel matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeTile {
    /// Position in the tile grid (vertical, horizontal).
    pub v: usize,
    pub h: usize,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

/// Cuts the kernel matrix into PE tiles, row-major over the tile grid.
pub fn tiles(kernel: &KernelSpec, arch: &ArchConfig) -> Vec<PeTile> {
    let rows = kernel.unrolled_len();
    let cols = kernel.k_out;
    let mut out = Vec::new();
    for (v, r0) in (0..rows).step_by(arch.pe_cols).enumerate() {
        for (h, c0) in (0..cols).step_by(arch.pe_rows).enumerate() {
            out.push(PeTile {
                v,
                h,
                rows: r0..(r0 + arch.pe_cols).min(rows),
                cols: c0..(c0 + arch.pe_rows).min(cols),
            });
        }
    }
    out
}

/// Unrolled input patch feeding output position `(r, c)` of a valid conv.
pub fn patch(x: &Tensor, kernel: &KernelSpec, r: usize, c: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(kernel.unrolled_len());
    for i in 0..kernel.k_h {
        for j in 0..kernel.k_w {
            for ci in 0..kernel.k_in {
                v.push(x.at(r * kernel.stride_h + i, c * kernel.stride_w + j, ci));
            }
        }
    }
    v
}

/// Valid convolution evaluated as tiled MVMs. `weights` uses the
/// `[k_h][k_w][k_in][k_out]` layout, which is the kernel matrix in row-major
/// order.
pub fn conv_tiled(x: &Tensor, kernel: &KernelSpec, weights: &[f64], arch: &ArchConfig) -> Tensor {
    assert_eq!(weights.len(), kernel.weight_count());
    let oh = (x.shape.height - kernel.k_h) / kernel.stride_h + 1;
    let ow = (x.shape.width - kernel.k_w) / kernel.stride_w + 1;
    let ko = kernel.k_out;
    let grid = tiles(kernel, arch);
    let mut y = Tensor::zeros(TensorShape::new(oh, ow, ko));
    for r in 0..oh {
        for c in 0..ow {
            let p = patch(x, kernel, r, c);
            for t in &grid {
                for o in t.cols.clone() {
                    let partial: f64 = t.rows.clone().map(|k| p[k] * weights[k * ko + o]).sum();
                    let i = y.index(r, c, o);
                    y.data[i] += partial;
                }
            }
        }
    }
    y
}
