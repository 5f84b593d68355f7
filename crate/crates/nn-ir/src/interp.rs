//! Reference evaluator for graphs carrying numeric payloads. Used to check
//! that graph rewrites preserve semantics.

use std::collections::BTreeMap;

use crate::error::{IrError, Result};
use crate::graph::{ConcatAxis, LayerNode, NNGraph, Op, Params};
use crate::shape::{KernelSpec, PoolSpec, TensorShape};

/// Dense HWC tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: TensorShape,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: TensorShape) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.volume()],
        }
    }

    pub fn from_vec(shape: TensorShape, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.volume(),
            data.len(),
            "tensor data does not match {shape}"
        );
        Tensor { shape, data }
    }

    #[inline]
    pub fn index(&self, h: usize, w: usize, c: usize) -> usize {
        (h * self.shape.width + w) * self.shape.channels + c
    }

    #[inline]
    pub fn at(&self, h: usize, w: usize, c: usize) -> f64 {
        self.data[self.index(h, w, c)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, w: usize, c: usize, v: f64) {
        let i = self.index(h, w, c);
        self.data[i] = v;
    }

    /// Largest absolute difference, or infinity on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates every node. `inputs` maps input-node names to tensors.
pub fn evaluate(
    graph: &NNGraph,
    inputs: &BTreeMap<String, Tensor>,
) -> Result<BTreeMap<String, Tensor>> {
    let mut values: BTreeMap<String, Tensor> = BTreeMap::new();
    for node in graph.iter() {
        let args: Vec<&Tensor> = node.inputs.iter().map(|i| &values[i]).collect();
        let out = eval_node(graph, node, &args, inputs)?;
        values.insert(node.name.clone(), out);
    }
    Ok(values)
}

fn kernel_params<'a>(node: &'a LayerNode) -> Result<(&'a [f64], Option<&'a [f64]>)> {
    match &node.params {
        Some(Params::Kernel { weights, bias }) => Ok((weights, bias.as_deref())),
        _ => Err(IrError::weights(
            &node.name,
            "kernel payload required for evaluation",
        )),
    }
}

fn eval_node(
    graph: &NNGraph,
    node: &LayerNode,
    args: &[&Tensor],
    inputs: &BTreeMap<String, Tensor>,
) -> Result<Tensor> {
    let out = match &node.op {
        Op::Input { shape } => {
            let t = inputs
                .get(&node.name)
                .ok_or_else(|| IrError::weights(&node.name, "no value bound to input"))?;
            if t.shape != *shape {
                return Err(IrError::shape(
                    &node.name,
                    format!("bound tensor is {}", t.shape),
                ));
            }
            t.clone()
        }
        Op::Conv2d { kernel, bias } => {
            let (w, b) = kernel_params(node)?;
            let x = pad_for(kernel, args[0]);
            let mut y = conv2d(&x, kernel, w);
            if *bias {
                add_bias(
                    &mut y,
                    b.ok_or_else(|| IrError::weights(&node.name, "fused bias missing"))?,
                );
            }
            y
        }
        Op::Dense { units, bias } => {
            let (w, b) = kernel_params(node)?;
            let x = args[0];
            let k = KernelSpec::dense(x.shape.volume(), *units);
            let flat = Tensor::from_vec(TensorShape::new(1, 1, x.shape.volume()), x.data.clone());
            let mut y = conv2d(&flat, &k, w);
            if *bias {
                add_bias(
                    &mut y,
                    b.ok_or_else(|| IrError::weights(&node.name, "fused bias missing"))?,
                );
            }
            y
        }
        Op::Pad(p) => pad(args[0], p.top, p.bottom, p.left, p.right),
        Op::BiasAdd => {
            let mut y = args[0].clone();
            match &node.params {
                Some(Params::Bias(b)) => add_bias(&mut y, b),
                _ => {
                    return Err(IrError::weights(
                        &node.name,
                        "bias payload required for evaluation",
                    ))
                }
            }
            y
        }
        Op::Activation(f) => {
            let mut y = args[0].clone();
            y.data.iter_mut().for_each(|v| *v = f.apply(*v));
            y
        }
        Op::BatchNorm { epsilon } => {
            let Some(Params::BatchNorm {
                gamma,
                beta,
                mean,
                variance,
            }) = &node.params
            else {
                return Err(IrError::weights(
                    &node.name,
                    "batchnorm payload required for evaluation",
                ));
            };
            let mut y = args[0].clone();
            let c = y.shape.channels;
            for (i, v) in y.data.iter_mut().enumerate() {
                let ch = i % c;
                *v = (*v - mean[ch]) / (variance[ch] + epsilon).sqrt() * gamma[ch] + beta[ch];
            }
            y
        }
        Op::MaxPool2d(p) => pool(args[0], p, true),
        Op::AvgPool2d(p) => pool(args[0], p, false),
        Op::Add => {
            let mut y = args[0].clone();
            for other in &args[1..] {
                for (a, b) in y.data.iter_mut().zip(&other.data) {
                    *a += b;
                }
            }
            y
        }
        Op::Concat { axis } => concat(args, *axis),
        Op::Upsample2d { factor } => {
            let x = args[0];
            let shape = TensorShape::new(
                x.shape.height * factor,
                x.shape.width * factor,
                x.shape.channels,
            );
            let mut y = Tensor::zeros(shape);
            for h in 0..shape.height {
                for w in 0..shape.width {
                    for c in 0..shape.channels {
                        y.set(h, w, c, x.at(h / factor, w / factor, c));
                    }
                }
            }
            y
        }
        Op::Slice { begin, size } => {
            let x = args[0];
            let mut y = Tensor::zeros(TensorShape::new(size[0], size[1], size[2]));
            for h in 0..size[0] {
                for w in 0..size[1] {
                    for c in 0..size[2] {
                        y.set(h, w, c, x.at(h + begin[0], w + begin[1], c + begin[2]));
                    }
                }
            }
            y
        }
        Op::Output => args[0].clone(),
    };
    if let Some(expected) = graph.shape(&node.name) {
        debug_assert_eq!(expected, out.shape, "evaluated shape of {}", node.name);
    }
    Ok(out)
}

fn pad_for(kernel: &KernelSpec, x: &Tensor) -> Tensor {
    let p = kernel
        .padding
        .amounts(kernel, x.shape.height, x.shape.width);
    if p.is_zero() {
        x.clone()
    } else {
        pad(x, p.top, p.bottom, p.left, p.right)
    }
}

fn pad(x: &Tensor, top: usize, bottom: usize, left: usize, right: usize) -> Tensor {
    let s = x.shape;
    let mut y = Tensor::zeros(TensorShape::new(
        s.height + top + bottom,
        s.width + left + right,
        s.channels,
    ));
    for h in 0..s.height {
        for w in 0..s.width {
            for c in 0..s.channels {
                y.set(h + top, w + left, c, x.at(h, w, c));
            }
        }
    }
    y
}

/// Direct convolution, valid padding. Kernel layout `[k_h][k_w][k_in][k_out]`.
fn conv2d(x: &Tensor, k: &KernelSpec, w: &[f64]) -> Tensor {
    let oh = (x.shape.height - k.k_h) / k.stride_h + 1;
    let ow = (x.shape.width - k.k_w) / k.stride_w + 1;
    let mut y = Tensor::zeros(TensorShape::new(oh, ow, k.k_out));
    for r in 0..oh {
        for c in 0..ow {
            for o in 0..k.k_out {
                let mut acc = 0.0;
                for i in 0..k.k_h {
                    for j in 0..k.k_w {
                        for ci in 0..k.k_in {
                            let wi = ((i * k.k_w + j) * k.k_in + ci) * k.k_out + o;
                            acc += x.at(r * k.stride_h + i, c * k.stride_w + j, ci) * w[wi];
                        }
                    }
                }
                y.set(r, c, o, acc);
            }
        }
    }
    y
}

fn add_bias(y: &mut Tensor, b: &[f64]) {
    let c = y.shape.channels;
    for (i, v) in y.data.iter_mut().enumerate() {
        *v += b[i % c];
    }
}

fn pool(x: &Tensor, p: &PoolSpec, max: bool) -> Tensor {
    let oh = (x.shape.height - p.size_h) / p.stride_h + 1;
    let ow = (x.shape.width - p.size_w) / p.stride_w + 1;
    let mut y = Tensor::zeros(TensorShape::new(oh, ow, x.shape.channels));
    let n = (p.size_h * p.size_w) as f64;
    for r in 0..oh {
        for c in 0..ow {
            for ch in 0..x.shape.channels {
                let mut acc = if max { f64::NEG_INFINITY } else { 0.0 };
                for i in 0..p.size_h {
                    for j in 0..p.size_w {
                        let v = x.at(r * p.stride_h + i, c * p.stride_w + j, ch);
                        acc = if max { acc.max(v) } else { acc + v };
                    }
                }
                y.set(r, c, ch, if max { acc } else { acc / n });
            }
        }
    }
    y
}

fn concat(args: &[&Tensor], axis: ConcatAxis) -> Tensor {
    let first = args[0].shape;
    let mut shape = first;
    for a in &args[1..] {
        match axis {
            ConcatAxis::H => shape.height += a.shape.height,
            ConcatAxis::W => shape.width += a.shape.width,
            ConcatAxis::C => shape.channels += a.shape.channels,
        }
    }
    let mut y = Tensor::zeros(shape);
    let mut offset = 0;
    for a in args {
        let s = a.shape;
        for h in 0..s.height {
            for w in 0..s.width {
                for c in 0..s.channels {
                    let (th, tw, tc) = match axis {
                        ConcatAxis::H => (h + offset, w, c),
                        ConcatAxis::W => (h, w + offset, c),
                        ConcatAxis::C => (h, w, c + offset),
                    };
                    y.set(th, tw, tc, a.at(h, w, c));
                }
            }
        }
        offset += match axis {
            ConcatAxis::H => s.height,
            ConcatAxis::W => s.width,
            ConcatAxis::C => s.channels,
        };
    }
    y
}
