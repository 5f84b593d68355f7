use std::collections::{BTreeMap, BTreeSet};

use cim_mapping::balanced_split;
use nn_ir::{NNGraph, Op, TensorShape};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScheduleError};
use crate::region::Region;

/// Default number of sets per base layer (a 4×4 grid where possible).
pub const DEFAULT_SETS_PER_LAYER: usize = 16;

/// Largest allowed ratio between the biggest and smallest set of a layer.
const MAX_AREA_RATIO: usize = 2;

/// OFM partition of one base node (a layer or one of its duplicates).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetPartition {
    /// Graph node holding the weights.
    pub node: String,
    /// Original layer name; differs from `node` for duplicates.
    pub layer: String,
    pub duplicate: usize,
    pub ofm: TensorShape,
    /// Row ranges of the set grid.
    pub rows: Vec<(usize, usize)>,
    /// Column ranges of the set grid.
    pub cols: Vec<(usize, usize)>,
    /// Sets in intra-layer execution order (row-major over the grid).
    pub sets: Vec<Region>,
}

impl SetPartition {
    pub fn cycles_per_set(&self) -> Vec<u64> {
        self.sets.iter().map(|s| s.area() as u64).collect()
    }

    pub fn total_cycles(&self) -> u64 {
        self.sets.iter().map(|s| s.area() as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    /// Indices of the sets intersecting `region`, in execution order.
    pub fn intersecting(&self, region: &Region) -> impl Iterator<Item = usize> + '_ {
        let span = |ranges: &[(usize, usize)], lo: usize, hi: usize| {
            let first = ranges.partition_point(|r| r.1 <= lo);
            let last = ranges.partition_point(|r| r.0 < hi);
            first..last.max(first)
        };
        let rs = span(&self.rows, region.row_begin, region.row_end);
        let cs = span(&self.cols, region.col_begin, region.col_end);
        let gw = self.cols.len();
        rs.flat_map(move |i| cs.clone().map(move |j| i * gw + j))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Alignment unit `(rows, cols)` for the sets of `node`: the lcm of every
/// pooling window and stride met before the next base layers, so pooled
/// outputs never straddle two sets.
pub fn alignment_unit(graph: &NNGraph, node: &str) -> (usize, usize) {
    unit_with(graph, &graph.consumer_map(), node)
}

fn unit_with(graph: &NNGraph, consumers: &BTreeMap<&str, Vec<&str>>, node: &str) -> (usize, usize) {
    let mut unit = (1, 1);
    let mut stack = vec![node];
    let mut seen = BTreeSet::new();
    while let Some(name) = stack.pop() {
        for &next in consumers.get(name).into_iter().flatten() {
            let n = graph.node(next).expect("consumer exists");
            if n.is_base() || !seen.insert(next) {
                continue;
            }
            if let Op::MaxPool2d(p) | Op::AvgPool2d(p) = &n.op {
                unit.0 = lcm(lcm(unit.0, p.size_h), p.stride_h);
                unit.1 = lcm(lcm(unit.1, p.size_w), p.stride_w);
            }
            stack.push(next);
        }
    }
    unit
}

/// Splits `n` into `parts` ranges whose lengths are multiples of `unit`
/// (balanced in units, longer first); the remainder `n mod unit` joins the
/// last range.
fn aligned_split(n: usize, unit: usize, parts: usize) -> Option<Vec<(usize, usize)>> {
    if parts == 1 {
        return Some(vec![(0, n)]);
    }
    let units = n / unit;
    if parts > units {
        return None;
    }
    let mut out: Vec<(usize, usize)> = balanced_split(units, parts)
        .into_iter()
        .map(|(a, b)| (a * unit, b * unit))
        .collect();
    out.last_mut().expect("parts ≥ 1").1 = n;
    Some(out)
}

/// Geometry of the sets of one OFM.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetShape {
    /// Near-square grid of rectangles.
    #[default]
    Grid,
    /// Full-width row bands. With an unbounded target every set is one
    /// aligned output row, the granularity of a line buffer.
    Rows,
}

/// Chooses the set grid for an OFM: as many sets as possible up to `target`,
/// then the most square grid, then more rows. Grids whose sets are not
/// aligned or whose areas differ by more than a factor of two are skipped;
/// one set always qualifies.
pub fn set_grid(
    ofm: &TensorShape,
    unit: (usize, usize),
    target: usize,
) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    set_grid_with(ofm, unit, target, SetShape::Grid)
}

/// [`set_grid`] restricted to `shape`.
pub fn set_grid_with(
    ofm: &TensorShape,
    unit: (usize, usize),
    target: usize,
    shape: SetShape,
) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut best: Option<(
        (usize, usize, usize),
        Vec<(usize, usize)>,
        Vec<(usize, usize)>,
    )> = None;
    for gh in 1..=target.min(ofm.height) {
        let Some(rows) = aligned_split(ofm.height, unit.0, gh) else {
            continue;
        };
        let max_w = match shape {
            SetShape::Grid => (target / gh).min(ofm.width),
            SetShape::Rows => 1,
        };
        for gw in 1..=max_w {
            let Some(cols) = aligned_split(ofm.width, unit.1, gw) else {
                continue;
            };
            let len = |r: &(usize, usize)| r.1 - r.0;
            let max = rows.iter().map(len).max().unwrap() * cols.iter().map(len).max().unwrap();
            let min = rows.iter().map(len).min().unwrap() * cols.iter().map(len).min().unwrap();
            if max > MAX_AREA_RATIO * min {
                continue;
            }
            // Larger key wins: count, squareness, rows.
            let key = (gh * gw, usize::MAX - gh.abs_diff(gw), gh);
            if best.as_ref().is_none_or(|(k, _, _)| key > *k) {
                best = Some((key, rows.clone(), cols));
            }
        }
    }
    let (_, rows, cols) = best.expect("a single set always qualifies");
    (rows, cols)
}

/// Intra-layer order of a partition's sets: row-major over the grid, top-left
/// first. Returns indices into `sets`.
pub fn order_sets(sets: &[Region]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sets.len()).collect();
    idx.sort_by_key(|&i| (sets[i].row_begin, sets[i].col_begin));
    idx
}

/// Partitions the OFM of every base node into at most `target` sets. Returns
/// one partition per base node in topological order.
pub fn determine_sets(graph: &NNGraph, target: usize) -> Result<Vec<SetPartition>> {
    determine_sets_with(graph, target, SetShape::Grid)
}

/// [`determine_sets`] with an explicit set geometry.
pub fn determine_sets_with(
    graph: &NNGraph,
    target: usize,
    shape: SetShape,
) -> Result<Vec<SetPartition>> {
    if target == 0 {
        return Err(ScheduleError::InvalidTarget);
    }
    let consumers = graph.consumer_map();
    let mut out = Vec::new();
    for node in graph.base_layers() {
        let ofm = graph.require_shape(&node.name)?;
        let unit = unit_with(graph, &consumers, &node.name);
        let (rows, cols) = set_grid_with(&ofm, unit, target, shape);
        let mut sets = Vec::with_capacity(rows.len() * cols.len());
        for &(r0, r1) in &rows {
            for &(c0, c1) in &cols {
                sets.push(Region::new(r0, r1, c0, c1).expect("splits are non-empty"));
            }
        }
        debug_assert!(order_sets(&sets).iter().enumerate().all(|(i, &j)| i == j));
        let (layer, duplicate) = node.layer_identity();
        out.push(SetPartition {
            node: node.name.clone(),
            layer: layer.to_string(),
            duplicate,
            ofm,
            rows,
            cols,
            sets,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(v: &[(usize, usize)]) -> Vec<usize> {
        v.iter().map(|(a, b)| b - a).collect()
    }

    #[test]
    fn pooled_four_by_four() {
        let (rows, cols) = set_grid(&TensorShape::new(4, 4, 8), (2, 2), 4);
        assert_eq!(rows, vec![(0, 2), (2, 4)]);
        assert_eq!(cols, vec![(0, 2), (2, 4)]);
    }

    #[test]
    fn unpooled_thirteen() {
        let (rows, cols) = set_grid(&TensorShape::new(13, 13, 8), (1, 1), 4);
        assert_eq!(sizes(&rows), vec![7, 6]);
        assert_eq!(sizes(&cols), vec![7, 6]);
        let (rows, cols) = set_grid(&TensorShape::new(13, 13, 8), (1, 1), 16);
        assert_eq!(sizes(&rows), vec![4, 3, 3, 3]);
        assert_eq!(sizes(&cols), vec![4, 3, 3, 3]);
    }

    #[test]
    fn single_set_fallbacks() {
        let (rows, cols) = set_grid(&TensorShape::new(13, 13, 8), (1, 1), 1);
        assert_eq!((rows, cols), (vec![(0, 13)], vec![(0, 13)]));
        // Smaller than the alignment unit.
        let (rows, cols) = set_grid(&TensorShape::new(1, 1, 8), (2, 2), 16);
        assert_eq!((rows, cols), (vec![(0, 1)], vec![(0, 1)]));
    }

    #[test]
    fn row_bands() {
        let (rows, cols) = set_grid_with(
            &TensorShape::new(13, 13, 8),
            (2, 2),
            usize::MAX,
            SetShape::Rows,
        );
        assert_eq!(sizes(&rows), vec![2, 2, 2, 2, 2, 3]);
        assert_eq!(cols, vec![(0, 13)]);
        let (rows, _) = set_grid_with(&TensorShape::new(5, 7, 8), (1, 1), 3, SetShape::Rows);
        assert_eq!(sizes(&rows), vec![2, 2, 1]);
    }

    #[test]
    fn remainder_joins_last_set() {
        assert_eq!(
            aligned_split(13, 2, 4),
            Some(vec![(0, 4), (4, 8), (8, 10), (10, 13)])
        );
        assert_eq!(aligned_split(3, 2, 2), None);
    }

    #[test]
    fn row_major_order() {
        let r = |a, b, c, d| Region::new(a, b, c, d).unwrap();
        let sets = [r(2, 4, 2, 4), r(0, 2, 2, 4), r(2, 4, 0, 2), r(0, 2, 0, 2)];
        assert_eq!(order_sets(&sets), vec![3, 1, 2, 0]);
        assert_eq!(order_sets(&sets[..1]), vec![0]);
    }
}
