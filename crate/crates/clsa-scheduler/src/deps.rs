use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use nn_ir::{NNGraph, Op};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScheduleError};
use crate::footprint::{footprint_backward, Footprint};
use crate::sets::SetPartition;

/// A set, addressed by partition index and position in the intra-layer
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SetId {
    pub layer: usize,
    pub set: usize,
}

impl SetId {
    pub const fn new(layer: usize, set: usize) -> Self {
        SetId { layer, set }
    }
}

/// Data dependencies between sets of different base nodes plus the implicit
/// resource chain `(l, k) → (l, k + 1)` of each base node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetDependencyGraph {
    set_counts: Vec<usize>,
    producers: Vec<Vec<Vec<SetId>>>,
    consumers: Vec<Vec<Vec<SetId>>>,
}

impl SetDependencyGraph {
    /// Builds the graph from explicit data edges `(producer, consumer)`.
    pub fn from_edges(
        set_counts: Vec<usize>,
        edges: impl IntoIterator<Item = (SetId, SetId)>,
    ) -> Self {
        let empty = |n: &usize| vec![Vec::new(); *n];
        let mut producers: Vec<Vec<Vec<SetId>>> = set_counts.iter().map(empty).collect();
        let mut consumers: Vec<Vec<Vec<SetId>>> = set_counts.iter().map(empty).collect();
        let mut edges: Vec<(SetId, SetId)> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        for (p, c) in edges {
            producers[c.layer][c.set].push(p);
            consumers[p.layer][p.set].push(c);
        }
        SetDependencyGraph {
            set_counts,
            producers,
            consumers,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.set_counts.len()
    }

    pub fn set_count(&self, layer: usize) -> usize {
        self.set_counts[layer]
    }

    pub fn node_count(&self) -> usize {
        self.set_counts.iter().sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = SetId> + '_ {
        self.set_counts
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| (0..n).map(move |s| SetId::new(l, s)))
    }

    /// Producer sets a set waits for, sorted.
    pub fn producers(&self, id: SetId) -> &[SetId] {
        &self.producers[id.layer][id.set]
    }

    pub fn consumers(&self, id: SetId) -> &[SetId] {
        &self.consumers[id.layer][id.set]
    }

    /// In-degree `P` over data edges.
    pub fn p(&self, id: SetId) -> usize {
        self.producers(id).len()
    }

    /// Out-degree `Q` over data edges.
    pub fn q(&self, id: SetId) -> usize {
        self.consumers(id).len()
    }

    pub fn resource_predecessor(&self, id: SetId) -> Option<SetId> {
        (id.set > 0).then(|| SetId::new(id.layer, id.set - 1))
    }

    pub fn data_edges(&self) -> Vec<(SetId, SetId)> {
        self.ids()
            .flat_map(|c| self.producers(c).iter().map(move |&p| (p, c)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn resource_edges(&self) -> Vec<(SetId, SetId)> {
        self.ids()
            .filter_map(|id| self.resource_predecessor(id).map(|p| (p, id)))
            .collect()
    }

    /// Kahn order over data and resource edges.
    pub fn topological_order(&self) -> Result<Vec<SetId>> {
        let mut offset = Vec::with_capacity(self.set_counts.len());
        let mut total = 0;
        for &n in &self.set_counts {
            offset.push(total);
            total += n;
        }
        let mut indegree = vec![0usize; total];
        for id in self.ids() {
            indegree[offset[id.layer] + id.set] = self.p(id) + usize::from(id.set > 0);
        }
        let mut ready: VecDeque<SetId> = self
            .ids()
            .filter(|id| indegree[offset[id.layer] + id.set] == 0)
            .collect();
        let mut order = Vec::with_capacity(total);
        while let Some(id) = ready.pop_front() {
            order.push(id);
            let next =
                (id.set + 1 < self.set_counts[id.layer]).then(|| SetId::new(id.layer, id.set + 1));
            for &succ in self.consumers(id).iter().chain(next.iter()) {
                let d = &mut indegree[offset[succ.layer] + succ.set];
                *d -= 1;
                if *d == 0 {
                    ready.push_back(succ);
                }
            }
        }
        if order.len() != total {
            return Err(ScheduleError::Cycle {
                unscheduled: total - order.len(),
            });
        }
        Ok(order)
    }

    /// Graphviz rendering; resource edges are dashed.
    pub fn to_dot(&self, partitions: &[SetPartition]) -> String {
        let mut out =
            String::from("digraph sets {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n");
        for (l, part) in partitions.iter().enumerate() {
            let _ = writeln!(
                out,
                "  subgraph \"cluster_{l}\" {{\n    label=\"{}\";",
                part.node
            );
            for (s, region) in part.sets.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "    \"{l}:{s}\" [label=\"{} #{s}\\n{region}\"];",
                    part.node
                );
            }
            out.push_str("  }\n");
        }
        for (p, c) in self.data_edges() {
            let _ = writeln!(
                out,
                "  \"{}:{}\" -> \"{}:{}\";",
                p.layer, p.set, c.layer, c.set
            );
        }
        for (p, c) in self.resource_edges() {
            let _ = writeln!(
                out,
                "  \"{}:{}\" -> \"{}:{}\" [style=dashed];",
                p.layer, p.set, c.layer, c.set
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Walks the footprint of node `name` backwards through non-base nodes and
/// records the footprint reached at each base producer.
fn propagate<'g>(
    graph: &'g NNGraph,
    name: &'g str,
    fp: Footprint,
    seen: &mut HashSet<(&'g str, Footprint)>,
    hits: &mut Vec<(&'g str, Footprint)>,
) -> Result<()> {
    if !seen.insert((name, fp.clone())) {
        return Ok(());
    }
    let node = graph
        .node(name)
        .ok_or_else(|| ScheduleError::UnknownNode(name.to_string()))?;
    if node.is_base() {
        hits.push((name, fp));
        return Ok(());
    }
    if matches!(node.op, Op::Input { .. }) {
        return Ok(());
    }
    let shapes = graph.input_shapes(name)?;
    for (input, f) in node
        .inputs
        .iter()
        .zip(footprint_backward(node, &shapes, &fp))
    {
        if let Some(f) = f {
            propagate(graph, input, f, seen, hits)?;
        }
    }
    Ok(())
}

/// Grid cells of `part` holding at least one pixel of `fp`.
fn touched<'a>(part: &'a SetPartition, fp: &'a Footprint) -> impl Iterator<Item = usize> + 'a {
    let gw = part.cols.len();
    let cols: Vec<usize> = (0..gw)
        .filter(|&j| fp.cols.meets(part.cols[j].0, part.cols[j].1))
        .collect();
    (0..part.rows.len())
        .filter(move |&i| fp.rows.meets(part.rows[i].0, part.rows[i].1))
        .flat_map(move |i| cols.clone().into_iter().map(move |j| i * gw + j))
}

/// Connects every consumer set to the producer sets holding pixels it reads,
/// following non-base paths between base nodes. The propagated footprints
/// are exact per axis, so a strided window that skips a producer set adds no
/// edge to it.
pub fn determine_dependencies(
    graph: &NNGraph,
    partitions: &[SetPartition],
) -> Result<SetDependencyGraph> {
    let index: BTreeMap<&str, usize> = partitions
        .iter()
        .enumerate()
        .map(|(i, p)| (p.node.as_str(), i))
        .collect();
    let mut edges = Vec::new();
    for (ci, part) in partitions.iter().enumerate() {
        let node = graph
            .node(&part.node)
            .ok_or_else(|| ScheduleError::UnknownNode(part.node.clone()))?;
        let shapes = graph.input_shapes(&node.name)?;
        for (si, set) in part.sets.iter().enumerate() {
            let mut seen = HashSet::new();
            let mut hits = Vec::new();
            let out = Footprint::from_region(set);
            for (input, f) in node
                .inputs
                .iter()
                .zip(footprint_backward(node, &shapes, &out))
            {
                if let Some(f) = f {
                    propagate(graph, input, f, &mut seen, &mut hits)?;
                }
            }
            for (producer, fp) in hits {
                let pi = *index
                    .get(producer)
                    .ok_or_else(|| ScheduleError::UnknownNode(producer.to_string()))?;
                for ps in touched(&partitions[pi], &fp) {
                    edges.push((SetId::new(pi, ps), SetId::new(ci, si)));
                }
            }
        }
    }
    Ok(SetDependencyGraph::from_edges(
        partitions.iter().map(SetPartition::len).collect(),
        edges,
    ))
}
