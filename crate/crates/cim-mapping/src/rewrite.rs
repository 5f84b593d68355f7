use std::collections::BTreeMap;

use nn_ir::{infer_shapes, ConcatAxis, DuplicateOf, LayerNode, NNGraph, Op, Padding};

use serde::{Deserialize, Serialize};

use crate::error::{MappingError, Result};
use crate::plan::MappingPlan;

/// Splits `n` into `parts` contiguous half-open ranges whose lengths differ by
/// at most one; longer ranges come first.
pub fn balanced_split(n: usize, parts: usize) -> Vec<(usize, usize)> {
    assert!(
        parts >= 1 && parts <= n.max(1),
        "cannot split {n} into {parts} parts"
    );
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// How the OFM of a duplicated layer is cut. `parts` are `(r0, r1, c0, c1)`
/// in row-major order; part `k` is computed by duplicate `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateGrid {
    pub rows: usize,
    pub cols: usize,
    /// Parts per grid row; fewer than `cols` where unused cells were merged.
    pub row_parts: Vec<usize>,
    pub parts: Vec<(usize, usize, usize, usize)>,
}

impl DuplicateGrid {
    /// Number of spatial dimensions that are cut (the concat tree depth).
    pub fn cut_dims(&self) -> usize {
        usize::from(self.rows > 1) + usize::from(self.row_parts.iter().any(|p| *p > 1))
    }
}

/// How duplicates of a layer share its OFM.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuplicateSplit {
    /// Near-square grid, see [`duplicate_grid`].
    #[default]
    Grid,
    /// Full-height column strips, so every duplicate sweeps the rows at the
    /// same pace as its neighbours. Falls back to the grid when `d > O_W`.
    Columns,
    /// Full-width row strips. Falls back to the grid when `d > O_H`.
    Rows,
}

/// Cuts an `oh × ow` OFM into `d` parts following `split`.
pub fn duplicate_split(
    d: usize,
    oh: usize,
    ow: usize,
    split: DuplicateSplit,
) -> Option<DuplicateGrid> {
    let strips = |n: usize, along_rows: bool| {
        let parts: Vec<_> = balanced_split(n, d)
            .into_iter()
            .map(|(a, b)| {
                if along_rows {
                    (a, b, 0, ow)
                } else {
                    (0, oh, a, b)
                }
            })
            .collect();
        let (rows, cols, row_parts) = if along_rows {
            (d, 1, vec![1; d])
        } else {
            (1, d, vec![d])
        };
        DuplicateGrid {
            rows,
            cols,
            row_parts,
            parts,
        }
    };
    match split {
        DuplicateSplit::Columns if d >= 1 && d <= ow => Some(strips(ow, false)),
        DuplicateSplit::Rows if d >= 1 && d <= oh => Some(strips(oh, true)),
        _ => duplicate_grid(d, oh, ow),
    }
}

/// Picks a `rows × cols` grid with `rows·cols ≥ d` and the fewest unused
/// cells, then the most square one, then more rows than columns. Unused cells
/// are merged into their row neighbours. `None` if `d` exceeds the number of
/// output vectors.
pub fn duplicate_grid(d: usize, oh: usize, ow: usize) -> Option<DuplicateGrid> {
    if d == 0 || d > oh * ow {
        return None;
    }
    let mut best: Option<(usize, usize, usize, usize)> = None; // (waste, skew, rows, cols)
    for rows in 1..=d.min(oh) {
        let cols = d.div_ceil(rows);
        if cols > ow {
            continue;
        }
        let waste = rows * cols - d;
        let skew = rows.abs_diff(cols);
        let key = (waste, skew, usize::MAX - rows, cols);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    let (_, _, inv_rows, cols) = best?;
    let rows = usize::MAX - inv_rows;
    let row_parts: Vec<usize> = balanced_split(d, rows).iter().map(|(a, b)| b - a).collect();
    let mut parts = Vec::with_capacity(d);
    for ((r0, r1), &n) in balanced_split(oh, rows).into_iter().zip(&row_parts) {
        for (c0, c1) in balanced_split(ow, n) {
            parts.push((r0, r1, c0, c1));
        }
    }
    Some(DuplicateGrid {
        rows,
        cols,
        row_parts,
        parts,
    })
}

/// Replaces every base layer with `d_i > 1` by `d_i` duplicates, each reading
/// a slice of the IFM and producing one spatial part of the OFM, followed by a
/// concatenation tree restoring the original OFM.
pub fn apply_duplication(graph: &NNGraph, plan: &MappingPlan) -> Result<NNGraph> {
    apply_duplication_with(graph, plan, DuplicateSplit::Grid)
}

/// [`apply_duplication`] with an explicit split policy.
pub fn apply_duplication_with(
    graph: &NNGraph,
    plan: &MappingPlan,
    split: DuplicateSplit,
) -> Result<NNGraph> {
    if !graph.has_shapes() {
        return Err(MappingError::NotCanonical(graph.name.clone()));
    }
    let mut out: Vec<LayerNode> = Vec::with_capacity(graph.len());
    let mut renames: BTreeMap<String, String> = BTreeMap::new();

    for node in graph.iter() {
        let mut node = node.clone();
        for input in node.inputs.iter_mut() {
            if let Some(to) = renames.get(input) {
                *input = to.clone();
            }
        }
        let d = if node.is_base() {
            plan.layer(&node.name)
                .ok_or_else(|| MappingError::UnknownLayer(node.name.clone()))?
                .duplicates
        } else {
            1
        };
        if d == 1 {
            out.push(node);
            continue;
        }

        let Op::Conv2d { kernel, .. } = node.op else {
            // Dense layers have a single output vector.
            return Err(MappingError::TooManyDuplicates {
                layer: node.name.clone(),
                duplicates: d,
                outputs: 1,
            });
        };
        if kernel.padding != Padding::Valid {
            return Err(MappingError::NotCanonical(node.name.clone()));
        }
        let ofm = graph.require_shape(&node.name)?;
        let ifm = graph.require_shape(&graph.node(&node.name).unwrap().inputs[0])?;
        let grid = duplicate_split(d, ofm.height, ofm.width, split).ok_or_else(|| {
            MappingError::TooManyDuplicates {
                layer: node.name.clone(),
                duplicates: d,
                outputs: ofm.spatial(),
            }
        })?;

        let source = node.inputs[0].clone();
        let mut part_names = Vec::with_capacity(d);
        for (k, &(r0, r1, c0, c1)) in grid.parts.iter().enumerate() {
            let in_r0 = r0 * kernel.stride_h;
            let in_r1 = (r1 - 1) * kernel.stride_h + kernel.k_h;
            let in_c0 = c0 * kernel.stride_w;
            let in_c1 = (c1 - 1) * kernel.stride_w + kernel.k_w;
            let slice_name = format!("{}/dup{k}/slice", node.name);
            out.push(LayerNode::new(
                slice_name.clone(),
                Op::Slice {
                    begin: [in_r0, in_c0, 0],
                    size: [in_r1 - in_r0, in_c1 - in_c0, ifm.channels],
                },
                vec![source.clone()],
            ));
            let mut dup = node.clone();
            dup.name = format!("{}/dup{k}", node.name);
            dup.inputs = vec![slice_name];
            dup.duplicate_of = Some(DuplicateOf {
                layer: node.name.clone(),
                index: k,
            });
            dup.weights_path = None;
            part_names.push(dup.name.clone());
            out.push(dup);
        }

        // Concat tree: along W within each grid row, then along H.
        let root = format!("{}/concat", node.name);
        let mut row_outputs = Vec::with_capacity(grid.rows);
        let mut next = 0;
        let multi_row = grid.rows > 1;
        for (i, &n) in grid.row_parts.iter().enumerate() {
            let members: Vec<String> = part_names[next..next + n].to_vec();
            next += n;
            if n == 1 {
                row_outputs.push(members[0].clone());
            } else {
                let name = if multi_row {
                    format!("{}/row{i}", node.name)
                } else {
                    root.clone()
                };
                out.push(LayerNode::new(
                    name.clone(),
                    Op::Concat {
                        axis: ConcatAxis::W,
                    },
                    members,
                ));
                row_outputs.push(name);
            }
        }
        if multi_row {
            out.push(LayerNode::new(
                root.clone(),
                Op::Concat {
                    axis: ConcatAxis::H,
                },
                row_outputs,
            ));
        }
        renames.insert(node.name.clone(), root);
    }

    Ok(infer_shapes(NNGraph::from_nodes(graph.name.clone(), out)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_split_puts_longer_parts_first() {
        assert_eq!(balanced_split(13, 2), vec![(0, 7), (7, 13)]);
        assert_eq!(balanced_split(4, 4), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(balanced_split(10, 3), vec![(0, 4), (4, 7), (7, 10)]);
    }

    #[test]
    fn grid_choice() {
        let g = duplicate_grid(4, 4, 4).unwrap();
        assert_eq!((g.rows, g.cols), (2, 2));
        assert_eq!(g.cut_dims(), 2);
        assert_eq!(
            g.parts,
            vec![(0, 2, 0, 2), (0, 2, 2, 4), (2, 4, 0, 2), (2, 4, 2, 4)]
        );

        let g = duplicate_grid(3, 10, 10).unwrap();
        assert_eq!((g.rows, g.cols), (3, 1));
        assert_eq!(g.parts, vec![(0, 4, 0, 10), (4, 7, 0, 10), (7, 10, 0, 10)]);
        assert_eq!(g.cut_dims(), 1);

        let g = duplicate_grid(6, 100, 100).unwrap();
        assert_eq!((g.rows, g.cols), (3, 2));

        // 7 parts on a 4x4 map: 7x1 does not fit; 4x2 and 2x4 both waste
        // one cell and are equally square, so rows win.
        let g = duplicate_grid(7, 4, 4).unwrap();
        assert_eq!((g.rows, g.cols), (4, 2));
        assert_eq!(g.row_parts, vec![2, 2, 2, 1]);
        assert_eq!(g.parts.len(), 7);

        assert!(duplicate_grid(17, 4, 4).is_none());
    }
}
