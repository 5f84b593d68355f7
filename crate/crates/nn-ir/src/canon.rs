use std::collections::BTreeSet;

use crate::error::Result;
use crate::fold::fold_batchnorm;
use crate::graph::{LayerNode, NNGraph, Op, Params};
use crate::infer::infer_shapes;
use crate::shape::Padding;

/// Cell resolution attached to base layers when none is requested.
pub const DEFAULT_QUANT_BITS: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanonicalizeOptions {
    pub quant_bits: u8,
}

impl Default for CanonicalizeOptions {
    fn default() -> Self {
        CanonicalizeOptions {
            quant_bits: DEFAULT_QUANT_BITS,
        }
    }
}

pub fn canonicalize(graph: NNGraph) -> Result<NNGraph> {
    canonicalize_with(graph, &CanonicalizeOptions::default())
}

/// Shape inference, batchnorm folding, then padding/bias decoupling and base
/// layer annotation. Idempotent.
pub fn canonicalize_with(graph: NNGraph, opts: &CanonicalizeOptions) -> Result<NNGraph> {
    let graph = fold_batchnorm(infer_shapes(graph)?)?;

    let name = graph.name.clone();
    let mut taken: BTreeSet<String> = graph.nodes().map(|n| n.name.clone()).collect();
    let mut fresh = |base: String| -> String {
        let mut candidate = base.clone();
        let mut k = 1;
        while taken.contains(&candidate) {
            candidate = format!("{base}_{k}");
            k += 1;
        }
        taken.insert(candidate.clone());
        candidate
    };

    let mut out: Vec<LayerNode> = Vec::with_capacity(graph.len());
    // (old producer, new producer) pairs applied to later consumers.
    let mut renames: Vec<(String, String)> = Vec::new();

    for node in graph.iter() {
        let mut node = node.clone();
        for input in node.inputs.iter_mut() {
            if let Some((_, to)) = renames.iter().find(|(from, _)| from == input) {
                *input = to.clone();
            }
        }

        if let Op::Conv2d { kernel, .. } = &mut node.op {
            let ifm = graph.require_shape(&graph.node(&node.name).unwrap().inputs[0])?;
            let pads = kernel.padding.amounts(kernel, ifm.height, ifm.width);
            kernel.padding = Padding::Valid;
            if !pads.is_zero() {
                let pad_name = fresh(format!("{}/pad", node.name));
                out.push(LayerNode::new(
                    pad_name.clone(),
                    Op::Pad(pads),
                    node.inputs.clone(),
                ));
                node.inputs = vec![pad_name];
            }
        }

        let mut bias_node = None;
        if let Op::Conv2d { bias, .. } | Op::Dense { bias, .. } = &mut node.op {
            if *bias {
                *bias = false;
                let bias_name = fresh(format!("{}/bias", node.name));
                let mut b = LayerNode::new(bias_name.clone(), Op::BiasAdd, vec![node.name.clone()]);
                if let Some(Params::Kernel { bias: payload, .. }) = node.params.as_mut() {
                    b.params = payload.take().map(Params::Bias);
                }
                renames.push((node.name.clone(), bias_name));
                bias_node = Some(b);
            }
        }

        if node.is_base() {
            node.quant_bits = Some(opts.quant_bits);
        }
        out.push(node);
        out.extend(bias_node);
    }

    infer_shapes(NNGraph::from_nodes(name, out)?)
}
