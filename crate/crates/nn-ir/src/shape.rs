use std::fmt;

use serde::{Deserialize, Serialize};

/// Feature-map shape in HWC layout. Dense outputs are `(1, 1, units)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TensorShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl TensorShape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        TensorShape {
            height,
            width,
            channels,
        }
    }

    /// Number of spatial positions, i.e. output vectors of a layer.
    pub fn spatial(&self) -> usize {
        self.height * self.width
    }

    pub fn volume(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_positive(&self) -> bool {
        self.height > 0 && self.width > 0 && self.channels > 0
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PadAmounts {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl PadAmounts {
    pub const fn new(top: usize, bottom: usize, left: usize, right: usize) -> Self {
        PadAmounts {
            top,
            bottom,
            left,
            right,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.top == 0 && self.bottom == 0 && self.left == 0 && self.right == 0
    }

    /// Explicit padding equivalent to "same" padding for a window sliding over
    /// an `in_h × in_w` map. Odd totals put the extra row/column on the
    /// bottom/right.
    pub fn same(in_h: usize, in_w: usize, k_h: usize, k_w: usize, s_h: usize, s_w: usize) -> Self {
        let total = |i: usize, k: usize, s: usize| {
            let out = i.div_ceil(s);
            ((out - 1) * s + k).saturating_sub(i)
        };
        let th = total(in_h, k_h, s_h);
        let tw = total(in_w, k_w, s_w);
        PadAmounts::new(th / 2, th - th / 2, tw / 2, tw - tw / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Valid,
    /// Output size `ceil(I / stride)`; only present before canonicalization.
    Same,
    Explicit(PadAmounts),
}

impl Padding {
    /// Resolves the padding to explicit amounts for a given input extent.
    pub fn amounts(&self, kernel: &KernelSpec, in_h: usize, in_w: usize) -> PadAmounts {
        match *self {
            Padding::Valid => PadAmounts::default(),
            Padding::Explicit(p) => p,
            Padding::Same => PadAmounts::same(
                in_h,
                in_w,
                kernel.k_h,
                kernel.k_w,
                kernel.stride_h,
                kernel.stride_w,
            ),
        }
    }
}

/// Convolution kernel geometry. Dense layers are kernels with `k_h = k_w = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub k_h: usize,
    pub k_w: usize,
    pub k_in: usize,
    pub k_out: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub padding: Padding,
}

impl KernelSpec {
    pub fn conv(k_h: usize, k_w: usize, k_in: usize, k_out: usize, stride: usize) -> Self {
        KernelSpec {
            k_h,
            k_w,
            k_in,
            k_out,
            stride_h: stride,
            stride_w: stride,
            padding: Padding::Valid,
        }
    }

    pub fn dense(inputs: usize, units: usize) -> Self {
        KernelSpec::conv(1, 1, inputs, units, 1)
    }

    /// Length of one unrolled kernel column (`K_W·K_H·K_I`).
    pub fn unrolled_len(&self) -> usize {
        self.k_w * self.k_h * self.k_in
    }

    pub fn weight_count(&self) -> usize {
        self.unrolled_len() * self.k_out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolSpec {
    pub size_h: usize,
    pub size_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl PoolSpec {
    pub const fn new(size: usize, stride: usize) -> Self {
        PoolSpec {
            size_h: size,
            size_w: size,
            stride_h: stride,
            stride_w: stride,
        }
    }
}

/// `floor((i - k) / s) + 1`, or `None` when the window does not fit.
pub(crate) fn window_out(i: usize, k: usize, s: usize) -> Option<usize> {
    if i < k || s == 0 {
        None
    } else {
        Some((i - k) / s + 1)
    }
}
