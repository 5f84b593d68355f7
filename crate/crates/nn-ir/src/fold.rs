use crate::error::{IrError, Result};
use crate::graph::{LayerNode, NNGraph, Op, Params};
use crate::infer::infer_shapes;

/// Merges every batchnorm into the base layer feeding it.
///
/// `conv → batchnorm` becomes `conv → bias_add` (the bias_add keeps the
/// batchnorm's name so consumers stay wired), and `conv → bias_add →
/// batchnorm` drops the batchnorm and rewires its consumers to the existing
/// bias_add. When both sides carry numeric payloads the kernel is scaled by
/// `γ/√(σ²+ε)` per output channel and the bias becomes `(b−μ)·γ/√(σ²+ε) + β`.
pub fn fold_batchnorm(graph: NNGraph) -> Result<NNGraph> {
    let had_shapes = graph.has_shapes();
    let name = graph.name.clone();
    let mut nodes = graph.into_nodes();

    loop {
        let Some(bn_idx) = nodes
            .iter()
            .position(|n| matches!(n.op, Op::BatchNorm { .. }))
        else {
            break;
        };
        fold_one(&mut nodes, bn_idx)?;
    }

    let g = NNGraph::from_nodes(name, nodes)?;
    if had_shapes {
        infer_shapes(g)
    } else {
        Ok(g)
    }
}

fn index_of(nodes: &[LayerNode], name: &str) -> usize {
    nodes
        .iter()
        .position(|n| n.name == name)
        .expect("references are validated")
}

fn consumer_count(nodes: &[LayerNode], name: &str) -> usize {
    nodes
        .iter()
        .filter(|n| n.inputs.iter().any(|i| i == name))
        .count()
}

fn fold_one(nodes: &mut Vec<LayerNode>, bn_idx: usize) -> Result<()> {
    let bn = nodes[bn_idx].clone();
    let no_base = || IrError::BatchNormWithoutBase(bn.name.clone());
    let epsilon = match bn.op {
        Op::BatchNorm { epsilon } => epsilon,
        _ => unreachable!(),
    };
    let src = bn.inputs.first().ok_or_else(no_base)?.clone();
    let src_idx = index_of(nodes, &src);

    // Optional bias_add between the base layer and the batchnorm.
    let (base_idx, bias_idx) = if matches!(nodes[src_idx].op, Op::BiasAdd) {
        if consumer_count(nodes, &src) != 1 {
            return Err(no_base());
        }
        let base = nodes[src_idx].inputs.first().ok_or_else(no_base)?.clone();
        (index_of(nodes, &base), Some(src_idx))
    } else {
        (src_idx, None)
    };
    if !nodes[base_idx].is_base() || consumer_count(nodes, &nodes[base_idx].name.clone()) != 1 {
        return Err(no_base());
    }

    let k_out = match nodes[base_idx].op {
        Op::Conv2d { kernel, .. } => kernel.k_out,
        Op::Dense { units, .. } => units,
        _ => unreachable!(),
    };

    let new_bias = match &bn.params {
        None => {
            if nodes[base_idx].params.is_some() {
                return Err(IrError::weights(
                    &bn.name,
                    "base layer has weights but batchnorm has none",
                ));
            }
            None
        }
        Some(Params::BatchNorm {
            gamma,
            beta,
            mean,
            variance,
        }) => {
            for (what, v) in [
                ("gamma", gamma),
                ("beta", beta),
                ("mean", mean),
                ("variance", variance),
            ] {
                if v.len() != k_out {
                    return Err(IrError::weights(
                        &bn.name,
                        format!("`{what}` has {} entries, expected {k_out}", v.len()),
                    ));
                }
            }
            let scale: Vec<f64> = gamma
                .iter()
                .zip(variance)
                .map(|(g, var)| g / (var + epsilon).sqrt())
                .collect();

            let base = &mut nodes[base_idx];
            let Some(Params::Kernel { weights, bias }) = base.params.as_mut() else {
                return Err(IrError::weights(
                    &bn.name,
                    "batchnorm has weights but base layer has none",
                ));
            };
            for (i, w) in weights.iter_mut().enumerate() {
                *w *= scale[i % k_out];
            }
            let mut b = bias.take().unwrap_or_else(|| vec![0.0; k_out]);
            if let Some(bias_idx) = bias_idx {
                match &nodes[bias_idx].params {
                    Some(Params::Bias(explicit)) => {
                        for (acc, e) in b.iter_mut().zip(explicit) {
                            *acc += e;
                        }
                    }
                    _ => {
                        return Err(IrError::weights(
                            &nodes[bias_idx].name,
                            "bias_add has no bias",
                        ))
                    }
                }
            }
            if b.len() != k_out {
                return Err(IrError::weights(
                    &nodes[base_idx].name,
                    "bias length mismatch",
                ));
            }
            Some(
                b.iter()
                    .enumerate()
                    .map(|(c, b)| (b - mean[c]) * scale[c] + beta[c])
                    .collect::<Vec<f64>>(),
            )
        }
        Some(_) => return Err(IrError::weights(&bn.name, "expected batchnorm parameters")),
    };

    let base = &mut nodes[base_idx];
    base.folded = true;
    match &mut base.op {
        Op::Conv2d { bias, .. } | Op::Dense { bias, .. } => *bias = false,
        _ => unreachable!(),
    }

    match bias_idx {
        Some(bias_idx) => {
            if let Some(b) = new_bias {
                nodes[bias_idx].params = Some(Params::Bias(b));
            }
            let bias_name = nodes[bias_idx].name.clone();
            nodes.remove(bn_idx);
            for n in nodes.iter_mut() {
                for i in n.inputs.iter_mut() {
                    if *i == bn.name {
                        *i = bias_name.clone();
                    }
                }
            }
        }
        None => {
            let node = &mut nodes[bn_idx];
            node.op = Op::BiasAdd;
            node.params = new_bias.map(Params::Bias);
            node.weights_path = None;
        }
    }
    Ok(())
}
