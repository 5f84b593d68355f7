use std::fmt;

use nn_ir::{ConcatAxis, KernelSpec, LayerNode, Op, PoolSpec, TensorShape};
use serde::{Deserialize, Serialize};

/// Half-open spatial rectangle `[row_begin, row_end) × [col_begin, col_end)`.
/// Serialized as `[r0, r1, c0, c1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 4]", try_from = "[usize; 4]")]
pub struct Region {
    pub row_begin: usize,
    pub row_end: usize,
    pub col_begin: usize,
    pub col_end: usize,
}

impl Region {
    /// `None` when either extent is empty.
    pub fn new(row_begin: usize, row_end: usize, col_begin: usize, col_end: usize) -> Option<Self> {
        (row_begin < row_end && col_begin < col_end).then_some(Region {
            row_begin,
            row_end,
            col_begin,
            col_end,
        })
    }

    pub fn full(shape: &TensorShape) -> Self {
        Region::new(0, shape.height, 0, shape.width).expect("shapes are positive")
    }

    pub fn height(&self) -> usize {
        self.row_end - self.row_begin
    }

    pub fn width(&self) -> usize {
        self.col_end - self.col_begin
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    pub fn intersect(&self, other: &Region) -> Option<Region> {
        Region::new(
            self.row_begin.max(other.row_begin),
            self.row_end.min(other.row_end),
            self.col_begin.max(other.col_begin),
            self.col_end.min(other.col_end),
        )
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.intersect(other).is_some()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_begin..self.row_end).contains(&row)
            && (self.col_begin..self.col_end).contains(&col)
    }

    /// Clips to `[0, height) × [0, width)`.
    pub fn clip(&self, shape: &TensorShape) -> Option<Region> {
        self.intersect(&Region::full(shape))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {})x[{}, {})",
            self.row_begin, self.row_end, self.col_begin, self.col_end
        )
    }
}

impl From<Region> for [usize; 4] {
    fn from(r: Region) -> Self {
        [r.row_begin, r.row_end, r.col_begin, r.col_end]
    }
}

impl TryFrom<[usize; 4]> for Region {
    type Error = String;

    fn try_from(v: [usize; 4]) -> Result<Self, Self::Error> {
        Region::new(v[0], v[1], v[2], v[3]).ok_or_else(|| format!("empty region {v:?}"))
    }
}

/// Input window of a sliding-window op in (possibly padded) input
/// coordinates: rows `[r0·S, (r1−1)·S + K)`.
fn window_back(
    out: &Region,
    k_h: usize,
    k_w: usize,
    s_h: usize,
    s_w: usize,
) -> (usize, usize, usize, usize) {
    (
        out.row_begin * s_h,
        (out.row_end - 1) * s_h + k_h,
        out.col_begin * s_w,
        (out.col_end - 1) * s_w + k_w,
    )
}

/// Shifts a padded-coordinate window back by the leading pads and clips it
/// to the unpadded input. Windows lying entirely in padding give `None`.
fn unpad(
    (r0, r1, c0, c1): (usize, usize, usize, usize),
    top: usize,
    left: usize,
    input: &TensorShape,
) -> Option<Region> {
    let r0 = r0.saturating_sub(top);
    let r1 = r1.saturating_sub(top).min(input.height);
    let c0 = c0.saturating_sub(left);
    let c1 = c1.saturating_sub(left).min(input.width);
    Region::new(r0, r1, c0, c1)
}

fn conv_back(k: &KernelSpec, out: &Region, input: &TensorShape) -> Option<Region> {
    let p = k.padding.amounts(k, input.height, input.width);
    unpad(
        window_back(out, k.k_h, k.k_w, k.stride_h, k.stride_w),
        p.top,
        p.left,
        input,
    )
}

fn pool_back(p: &PoolSpec, out: &Region, input: &TensorShape) -> Option<Region> {
    unpad(
        window_back(out, p.size_h, p.size_w, p.stride_h, p.stride_w),
        0,
        0,
        input,
    )
}

/// Smallest region of each input of `node` needed to produce `out`. `inputs`
/// are the input shapes in order; `None` marks an input that contributes
/// nothing (for example a region covering only padding).
pub fn region_backward(
    node: &LayerNode,
    inputs: &[TensorShape],
    out: &Region,
) -> Vec<Option<Region>> {
    match &node.op {
        Op::Conv2d { kernel, .. } => vec![conv_back(kernel, out, &inputs[0])],
        // A dense layer reads the whole flattened input.
        Op::Dense { .. } => vec![Some(Region::full(&inputs[0]))],
        Op::MaxPool2d(p) | Op::AvgPool2d(p) => vec![pool_back(p, out, &inputs[0])],
        Op::Pad(p) => vec![unpad(
            (out.row_begin, out.row_end, out.col_begin, out.col_end),
            p.top,
            p.left,
            &inputs[0],
        )],
        Op::Upsample2d { factor } => {
            let f = *factor;
            vec![Region::new(
                out.row_begin / f,
                out.row_end.div_ceil(f),
                out.col_begin / f,
                out.col_end.div_ceil(f),
            )
            .and_then(|r| r.clip(&inputs[0]))]
        }
        Op::Slice { begin, .. } => vec![Region::new(
            out.row_begin + begin[0],
            out.row_end + begin[0],
            out.col_begin + begin[1],
            out.col_end + begin[1],
        )
        .and_then(|r| r.clip(&inputs[0]))],
        Op::Concat {
            axis: ConcatAxis::C,
        } => inputs.iter().map(|s| out.clip(s)).collect(),
        Op::Concat { axis } => {
            let along_h = *axis == ConcatAxis::H;
            let mut offset = 0;
            inputs
                .iter()
                .map(|s| {
                    let start = offset;
                    let extent = if along_h { s.height } else { s.width };
                    offset += extent;
                    let (lo, hi) = if along_h {
                        (out.row_begin, out.row_end)
                    } else {
                        (out.col_begin, out.col_end)
                    };
                    let (b, e) = (lo.max(start), hi.min(start + extent));
                    if b >= e {
                        return None;
                    }
                    let r = if along_h {
                        Region::new(b - start, e - start, out.col_begin, out.col_end)
                    } else {
                        Region::new(out.row_begin, out.row_end, b - start, e - start)
                    };
                    r.and_then(|r| r.clip(s))
                })
                .collect()
        }
        Op::Input { .. } => Vec::new(),
        Op::BiasAdd | Op::Activation(_) | Op::BatchNorm { .. } | Op::Add | Op::Output => {
            inputs.iter().map(|s| out.clip(s)).collect()
        }
    }
}
