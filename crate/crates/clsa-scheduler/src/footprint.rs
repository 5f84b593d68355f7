//! Exact input footprints for dependency analysis.
//!
//! A rectangle over-approximates what a strided window reads when the stride
//! exceeds the window (a 1×1 stride-2 convolution skips every other row).
//! Every supported op acts on rows and columns independently, so the exact
//! set of pixels an output region needs is a product of one index set per
//! axis, kept here as sorted disjoint intervals.

use nn_ir::{ConcatAxis, LayerNode, Op, TensorShape};

use crate::region::Region;

/// Sorted, disjoint, non-adjacent half-open intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Span(Vec<(usize, usize)>);

impl Span {
    fn new(mut v: Vec<(usize, usize)>) -> Option<Span> {
        v.retain(|(a, b)| a < b);
        v.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        (!out.is_empty()).then_some(Span(out))
    }

    fn map(&self, f: impl Fn(usize, usize) -> (usize, usize)) -> Vec<(usize, usize)> {
        self.0.iter().map(|&(a, b)| f(a, b)).collect()
    }

    /// Shifts down by `lead` and clips to `[0, extent)`.
    fn unpad(v: Vec<(usize, usize)>, lead: usize, extent: usize) -> Option<Span> {
        Span::new(
            v.into_iter()
                .map(|(a, b)| (a.saturating_sub(lead), b.saturating_sub(lead).min(extent)))
                .collect(),
        )
    }

    /// Input positions read by a window of size `k` and stride `s`, in padded
    /// coordinates.
    fn window(&self, k: usize, s: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for &(a, b) in &self.0 {
            if k >= s {
                v.push((a * s, (b - 1) * s + k));
            } else {
                v.extend((a..b).map(|r| (r * s, r * s + k)));
            }
        }
        v
    }

    /// Whether any interval meets `[lo, hi)`.
    pub(crate) fn meets(&self, lo: usize, hi: usize) -> bool {
        let i = self.0.partition_point(|r| r.1 <= lo);
        i < self.0.len() && self.0[i].0 < hi
    }
}

/// Product of a row span and a column span.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Footprint {
    pub rows: Span,
    pub cols: Span,
}

impl Footprint {
    pub fn from_region(r: &Region) -> Footprint {
        Footprint {
            rows: Span(vec![(r.row_begin, r.row_end)]),
            cols: Span(vec![(r.col_begin, r.col_end)]),
        }
    }

    fn full(s: &TensorShape) -> Footprint {
        Footprint::from_region(&Region::full(s))
    }

    fn clip(&self, s: &TensorShape) -> Option<Footprint> {
        Some(Footprint {
            rows: Span::unpad(self.rows.0.clone(), 0, s.height)?,
            cols: Span::unpad(self.cols.0.clone(), 0, s.width)?,
        })
    }

    fn window(
        &self,
        k: (usize, usize),
        s: (usize, usize),
        lead: (usize, usize),
        input: &TensorShape,
    ) -> Option<Self> {
        Some(Footprint {
            rows: Span::unpad(self.rows.window(k.0, s.0), lead.0, input.height)?,
            cols: Span::unpad(self.cols.window(k.1, s.1), lead.1, input.width)?,
        })
    }
}

/// Maps the row and column intervals, then clips to `input`.
fn remap(
    out: &Footprint,
    rows: impl Fn(usize, usize) -> (usize, usize),
    cols: impl Fn(usize, usize) -> (usize, usize),
    input: &TensorShape,
) -> Option<Footprint> {
    Footprint {
        rows: Span::new(out.rows.map(rows))?,
        cols: Span::new(out.cols.map(cols))?,
    }
    .clip(input)
}

/// The part of `span` inside `[start, start + extent)`, relative to `start`.
fn local(span: &Span, start: usize, extent: usize) -> Option<Span> {
    Span::new(
        span.0
            .iter()
            .map(|&(a, b)| (a.max(start), b.min(start + extent)))
            .filter(|(a, b)| a < b)
            .map(|(a, b)| (a - start, b - start))
            .collect(),
    )
}

/// Pixel-exact counterpart of [`crate::region_backward`].
pub(crate) fn footprint_backward(
    node: &LayerNode,
    inputs: &[TensorShape],
    out: &Footprint,
) -> Vec<Option<Footprint>> {
    match &node.op {
        Op::Conv2d { kernel: k, .. } => {
            let p = k.padding.amounts(k, inputs[0].height, inputs[0].width);
            vec![out.window(
                (k.k_h, k.k_w),
                (k.stride_h, k.stride_w),
                (p.top, p.left),
                &inputs[0],
            )]
        }
        Op::Dense { .. } => vec![Some(Footprint::full(&inputs[0]))],
        Op::MaxPool2d(p) | Op::AvgPool2d(p) => {
            vec![out.window(
                (p.size_h, p.size_w),
                (p.stride_h, p.stride_w),
                (0, 0),
                &inputs[0],
            )]
        }
        Op::Pad(p) => vec![out.window((1, 1), (1, 1), (p.top, p.left), &inputs[0])],
        Op::Upsample2d { factor } => {
            let f = *factor;
            let up = |a: usize, b: usize| (a / f, b.div_ceil(f));
            vec![remap(out, up, up, &inputs[0])]
        }
        Op::Slice { begin, .. } => {
            let (dr, dc) = (begin[0], begin[1]);
            vec![remap(
                out,
                |a, b| (a + dr, b + dr),
                |a, b| (a + dc, b + dc),
                &inputs[0],
            )]
        }
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
                    offset += if along_h { s.height } else { s.width };
                    let fp = if along_h {
                        Footprint {
                            rows: local(&out.rows, start, s.height)?,
                            cols: out.cols.clone(),
                        }
                    } else {
                        Footprint {
                            rows: out.rows.clone(),
                            cols: local(&out.cols, start, s.width)?,
                        }
                    };
                    fp.clip(s)
                })
                .collect()
        }
        Op::Input { .. } => Vec::new(),
        Op::BiasAdd | Op::Activation(_) | Op::BatchNorm { .. } | Op::Add | Op::Output => {
            inputs.iter().map(|s| out.clip(s)).collect()
        }
    }
}
