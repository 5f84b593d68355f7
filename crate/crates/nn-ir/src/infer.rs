use std::collections::BTreeMap;

use crate::error::{IrError, Result};
use crate::graph::{ConcatAxis, LayerNode, NNGraph, Op};
use crate::shape::{window_out, TensorShape};

fn arity(node: &LayerNode, ok: bool, expected: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(IrError::Arity {
            node: node.name.clone(),
            expected,
            found: node.inputs.len(),
        })
    }
}

pub(crate) fn output_shape(node: &LayerNode, inputs: &[TensorShape]) -> Result<TensorShape> {
    let name = node.name.as_str();
    let n = inputs.len();
    let out = match &node.op {
        Op::Input { shape } => {
            arity(node, n == 0, "0")?;
            *shape
        }
        Op::Conv2d { kernel, .. } => {
            arity(node, n == 1, "1")?;
            let i = inputs[0];
            if i.channels != kernel.k_in {
                return Err(IrError::shape(
                    name,
                    format!(
                        "kernel expects {} input channels, got {}",
                        kernel.k_in, i.channels
                    ),
                ));
            }
            let p = kernel.padding.amounts(kernel, i.height, i.width);
            let h = window_out(i.height + p.top + p.bottom, kernel.k_h, kernel.stride_h);
            let w = window_out(i.width + p.left + p.right, kernel.k_w, kernel.stride_w);
            match (h, w) {
                (Some(h), Some(w)) => TensorShape::new(h, w, kernel.k_out),
                _ => return Err(IrError::NonPositiveDim(name.to_string())),
            }
        }
        Op::Dense { units, .. } => {
            arity(node, n == 1, "1")?;
            TensorShape::new(1, 1, *units)
        }
        Op::Pad(p) => {
            arity(node, n == 1, "1")?;
            let i = inputs[0];
            TensorShape::new(
                i.height + p.top + p.bottom,
                i.width + p.left + p.right,
                i.channels,
            )
        }
        Op::BiasAdd | Op::Activation(_) | Op::BatchNorm { .. } | Op::Output => {
            arity(node, n == 1, "1")?;
            inputs[0]
        }
        Op::MaxPool2d(p) | Op::AvgPool2d(p) => {
            arity(node, n == 1, "1")?;
            let i = inputs[0];
            match (
                window_out(i.height, p.size_h, p.stride_h),
                window_out(i.width, p.size_w, p.stride_w),
            ) {
                (Some(h), Some(w)) => TensorShape::new(h, w, i.channels),
                _ => return Err(IrError::NonPositiveDim(name.to_string())),
            }
        }
        Op::Add => {
            arity(node, n >= 2, "at least 2")?;
            if inputs.iter().any(|s| *s != inputs[0]) {
                return Err(IrError::shape(
                    name,
                    format!("add inputs differ: {inputs:?}"),
                ));
            }
            inputs[0]
        }
        Op::Concat { axis } => {
            arity(node, n >= 1, "at least 1")?;
            let first = inputs[0];
            let mut out = first;
            for s in &inputs[1..] {
                let compatible = match axis {
                    ConcatAxis::H => s.width == first.width && s.channels == first.channels,
                    ConcatAxis::W => s.height == first.height && s.channels == first.channels,
                    ConcatAxis::C => s.height == first.height && s.width == first.width,
                };
                if !compatible {
                    return Err(IrError::shape(
                        name,
                        format!("concat along {} of {first} and {s}", axis.as_str()),
                    ));
                }
                match axis {
                    ConcatAxis::H => out.height += s.height,
                    ConcatAxis::W => out.width += s.width,
                    ConcatAxis::C => out.channels += s.channels,
                }
            }
            out
        }
        Op::Upsample2d { factor } => {
            arity(node, n == 1, "1")?;
            let i = inputs[0];
            TensorShape::new(i.height * factor, i.width * factor, i.channels)
        }
        Op::Slice { begin, size } => {
            arity(node, n == 1, "1")?;
            let i = inputs[0];
            let dims = [i.height, i.width, i.channels];
            for d in 0..3 {
                if begin[d] + size[d] > dims[d] {
                    return Err(IrError::shape(
                        name,
                        format!("slice {begin:?}+{size:?} exceeds input {i}"),
                    ));
                }
            }
            TensorShape::new(size[0], size[1], size[2])
        }
    };
    if !out.is_positive() {
        return Err(IrError::NonPositiveDim(name.to_string()));
    }
    Ok(out)
}

/// Computes the output shape of every node.
pub fn infer_shapes(graph: NNGraph) -> Result<NNGraph> {
    let mut shapes: BTreeMap<String, TensorShape> = BTreeMap::new();
    for node in graph.iter() {
        let inputs: Vec<TensorShape> = node.inputs.iter().map(|i| shapes[i]).collect();
        let out = output_shape(node, &inputs)?;
        shapes.insert(node.name.clone(), out);
    }
    Ok(graph.with_shapes(shapes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{KernelSpec, Padding, PoolSpec};

    fn conv(
        name: &str,
        input: &str,
        k: usize,
        ki: usize,
        ko: usize,
        s: usize,
        padding: Padding,
    ) -> LayerNode {
        let mut kernel = KernelSpec::conv(k, k, ki, ko, s);
        kernel.padding = padding;
        LayerNode::new(
            name,
            Op::Conv2d {
                kernel,
                bias: false,
            },
            vec![input.into()],
        )
    }

    fn input(name: &str, h: usize, w: usize, c: usize) -> LayerNode {
        LayerNode::new(
            name,
            Op::Input {
                shape: TensorShape::new(h, w, c),
            },
            vec![],
        )
    }

    fn single_conv(ifm: TensorShape, k: usize, ko: usize, s: usize) -> TensorShape {
        let g = NNGraph::from_nodes(
            "t",
            vec![
                input("in", ifm.height, ifm.width, ifm.channels),
                conv("c", "in", k, ifm.channels, ko, s, Padding::Valid),
            ],
        )
        .unwrap();
        infer_shapes(g).unwrap().shape("c").unwrap()
    }

    #[test]
    fn conv_output_shapes_from_layer_table() {
        assert_eq!(
            single_conv(TensorShape::new(417, 417, 3), 3, 32, 2),
            TensorShape::new(208, 208, 32)
        );
        assert_eq!(
            single_conv(TensorShape::new(209, 209, 32), 3, 64, 2),
            TensorShape::new(104, 104, 64)
        );
        assert_eq!(
            single_conv(TensorShape::new(13, 13, 512), 1, 255, 1),
            TensorShape::new(13, 13, 255)
        );
    }

    #[test]
    fn same_padding_shapes() {
        let g = NNGraph::from_nodes(
            "t",
            vec![
                input("in", 416, 416, 3),
                conv("c", "in", 3, 3, 32, 2, Padding::Same),
            ],
        )
        .unwrap();
        assert_eq!(
            infer_shapes(g).unwrap().shape("c"),
            Some(TensorShape::new(208, 208, 32))
        );
    }

    #[test]
    fn add_and_concat_mismatch() {
        let add = NNGraph::from_nodes(
            "t",
            vec![
                input("a", 4, 4, 2),
                input("b", 4, 4, 3),
                LayerNode::new("s", Op::Add, vec!["a".into(), "b".into()]),
            ],
        )
        .unwrap();
        assert!(matches!(
            infer_shapes(add),
            Err(IrError::ShapeMismatch { .. })
        ));

        let cat = NNGraph::from_nodes(
            "t",
            vec![
                input("a", 4, 4, 2),
                input("b", 4, 5, 3),
                LayerNode::new(
                    "s",
                    Op::Concat {
                        axis: ConcatAxis::C,
                    },
                    vec!["a".into(), "b".into()],
                ),
            ],
        )
        .unwrap();
        assert!(matches!(
            infer_shapes(cat),
            Err(IrError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn kernel_larger_than_input_is_non_positive() {
        let g = NNGraph::from_nodes(
            "t",
            vec![
                input("in", 2, 2, 1),
                conv("c", "in", 3, 1, 1, 1, Padding::Valid),
            ],
        )
        .unwrap();
        assert!(matches!(infer_shapes(g), Err(IrError::NonPositiveDim(_))));
    }

    #[test]
    fn pool_upsample_slice() {
        let g = NNGraph::from_nodes(
            "t",
            vec![
                input("in", 26, 26, 8),
                LayerNode::new("p", Op::MaxPool2d(PoolSpec::new(2, 2)), vec!["in".into()]),
                LayerNode::new("u", Op::Upsample2d { factor: 2 }, vec!["p".into()]),
                LayerNode::new(
                    "s",
                    Op::Slice {
                        begin: [0, 0, 4],
                        size: [26, 26, 4],
                    },
                    vec!["u".into()],
                ),
            ],
        )
        .unwrap();
        let g = infer_shapes(g).unwrap();
        assert_eq!(g.shape("p"), Some(TensorShape::new(13, 13, 8)));
        assert_eq!(g.shape("u"), Some(TensorShape::new(26, 26, 8)));
        assert_eq!(g.shape("s"), Some(TensorShape::new(26, 26, 4)));
    }
}
