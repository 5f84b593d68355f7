use serde::{Deserialize, Serialize};

/// Abstract tiled CIM architecture: `num_pe` crossbars of `pe_rows × pe_cols`
/// cells, each finishing one matrix-vector multiply per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub num_pe: usize,
    /// Output columns held by one PE (`M`).
    pub pe_rows: usize,
    /// Input rows held by one PE (`N`).
    pub pe_cols: usize,
    pub t_mvm_ns: f64,
}

impl ArchConfig {
    pub const DEFAULT_PE_DIM: usize = 256;
    pub const DEFAULT_T_MVM_NS: f64 = 1400.0;

    /// 256×256 crossbars with a 1400 ns MVM.
    pub fn new(num_pe: usize) -> Self {
        ArchConfig {
            num_pe,
            pe_rows: Self::DEFAULT_PE_DIM,
            pe_cols: Self::DEFAULT_PE_DIM,
            t_mvm_ns: Self::DEFAULT_T_MVM_NS,
        }
    }

    pub fn with_pe_dims(mut self, rows: usize, cols: usize) -> Self {
        self.pe_rows = rows;
        self.pe_cols = cols;
        self
    }

    pub fn with_num_pe(mut self, num_pe: usize) -> Self {
        self.num_pe = num_pe;
        self
    }

    pub fn cycles_to_ns(&self, cycles: u64) -> f64 {
        cycles as f64 * self.t_mvm_ns
    }
}
