use nn_ir::{KernelSpec, TensorShape};
use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;

/// PE tiling of one kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileGrid {
    /// Tiles along the unrolled input dimension, `ceil(K_W·K_H·K_I / N)`.
    pub tiles_v: usize,
    /// Tiles along the output channels, `ceil(K_O / M)`.
    pub tiles_h: usize,
    pub pe_count: usize,
}

/// Number of `M×N` PEs needed to hold a kernel once.
pub fn pe_count(kernel: &KernelSpec, arch: &ArchConfig) -> TileGrid {
    let tiles_v = kernel.unrolled_len().div_ceil(arch.pe_cols);
    let tiles_h = kernel.k_out.div_ceil(arch.pe_rows);
    TileGrid {
        tiles_v,
        tiles_h,
        pe_count: tiles_v * tiles_h,
    }
}

/// Cycles to produce an OFM with intra-layer scheduling: one MVM per output
/// vector.
pub fn intra_layer_latency(ofm: &TensorShape) -> u64 {
    (ofm.height * ofm.width) as u64
}
