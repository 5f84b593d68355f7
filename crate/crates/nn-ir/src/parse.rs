//! JSON model format.
//!
//! ```json
//! {"name": "net", "layers": [
//!   {"name": "in", "op": "input", "inputs": [], "attrs": {"shape": [32, 32, 3]}},
//!   {"name": "c0", "op": "conv2d", "inputs": ["in"],
//!    "attrs": {"kernel": [3, 3, 3, 16], "stride": [1, 1], "padding": "same", "bias": true}}
//! ]}
//! ```
//!
//! Layers may carry `"weights": "<path>"` pointing at a JSON payload, resolved
//! relative to the model file by [`load_model`].

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{IrError, Result};
use crate::graph::{ActivationFn, ConcatAxis, LayerNode, NNGraph, Op, OpKind, Params};
use crate::shape::{KernelSpec, PadAmounts, Padding, PoolSpec, TensorShape};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    name: String,
    op: String,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    attrs: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputAttrs {
    shape: [usize; 3],
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PaddingAttr {
    Mode(String),
    Explicit([usize; 4]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvAttrs {
    kernel: [usize; 4],
    #[serde(default = "unit_stride")]
    stride: [usize; 2],
    #[serde(default)]
    padding: Option<PaddingAttr>,
    #[serde(default)]
    bias: bool,
}

fn unit_stride() -> [usize; 2] {
    [1, 1]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseAttrs {
    units: usize,
    #[serde(default)]
    bias: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolAttrs {
    size: [usize; 2],
    #[serde(default)]
    stride: Option<[usize; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PadAttrs {
    pads: [usize; 4],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivationAttrs {
    function: String,
    #[serde(default)]
    alpha: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchNormAttrs {
    #[serde(default = "default_epsilon")]
    epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-3
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConcatAttrs {
    axis: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UpsampleAttrs {
    factor: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceAttrs {
    begin: [usize; 3],
    size: [usize; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

/// Payload file contents; which keys are required depends on the op.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightFile {
    kernel: Option<Vec<f64>>,
    bias: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    mean: Option<Vec<f64>>,
    variance: Option<Vec<f64>>,
}

fn attrs<T: DeserializeOwned>(node: &str, attrs: &Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(attrs.clone()))
        .map_err(|e| IrError::attrs(node, e.to_string()))
}

fn positive(node: &str, what: &str, values: &[usize]) -> Result<()> {
    if values.iter().any(|v| *v == 0) {
        return Err(IrError::attrs(node, format!("{what} must be positive")));
    }
    Ok(())
}

fn decode_op(entry: &LayerEntry) -> Result<Op> {
    let name = entry.name.as_str();
    let kind = OpKind::parse(&entry.op).ok_or_else(|| IrError::UnknownOp {
        node: name.to_string(),
        op: entry.op.clone(),
    })?;
    let a = &entry.attrs;
    let op = match kind {
        OpKind::Input => {
            let at: InputAttrs = attrs(name, a)?;
            positive(name, "shape", &at.shape)?;
            Op::Input {
                shape: TensorShape::new(at.shape[0], at.shape[1], at.shape[2]),
            }
        }
        OpKind::Conv2d => {
            let at: ConvAttrs = attrs(name, a)?;
            positive(name, "kernel", &at.kernel)?;
            positive(name, "stride", &at.stride)?;
            let padding = match at.padding {
                None => Padding::Valid,
                Some(PaddingAttr::Mode(m)) => match m.as_str() {
                    "valid" => Padding::Valid,
                    "same" => Padding::Same,
                    other => {
                        return Err(IrError::attrs(name, format!("unknown padding `{other}`")))
                    }
                },
                Some(PaddingAttr::Explicit([t, b, l, r])) => {
                    let p = PadAmounts::new(t, b, l, r);
                    if p.is_zero() {
                        Padding::Valid
                    } else {
                        Padding::Explicit(p)
                    }
                }
            };
            Op::Conv2d {
                kernel: KernelSpec {
                    k_h: at.kernel[0],
                    k_w: at.kernel[1],
                    k_in: at.kernel[2],
                    k_out: at.kernel[3],
                    stride_h: at.stride[0],
                    stride_w: at.stride[1],
                    padding,
                },
                bias: at.bias,
            }
        }
        OpKind::Dense => {
            let at: DenseAttrs = attrs(name, a)?;
            positive(name, "units", &[at.units])?;
            Op::Dense {
                units: at.units,
                bias: at.bias,
            }
        }
        OpKind::Pad => {
            let at: PadAttrs = attrs(name, a)?;
            let [t, b, l, r] = at.pads;
            Op::Pad(PadAmounts::new(t, b, l, r))
        }
        OpKind::BiasAdd => {
            attrs::<Empty>(name, a)?;
            Op::BiasAdd
        }
        OpKind::Activation => {
            let at: ActivationAttrs = attrs(name, a)?;
            let f = match at.function.as_str() {
                "linear" => ActivationFn::Linear,
                "relu" => ActivationFn::Relu,
                "leaky_relu" => ActivationFn::LeakyRelu(at.alpha.unwrap_or(0.1)),
                "sigmoid" => ActivationFn::Sigmoid,
                "tanh" => ActivationFn::Tanh,
                other => {
                    return Err(IrError::attrs(
                        name,
                        format!("unknown activation `{other}`"),
                    ))
                }
            };
            if at.alpha.is_some() && !matches!(f, ActivationFn::LeakyRelu(_)) {
                return Err(IrError::attrs(name, "`alpha` only applies to leaky_relu"));
            }
            Op::Activation(f)
        }
        OpKind::BatchNorm => {
            let at: BatchNormAttrs = attrs(name, a)?;
            if !(at.epsilon >= 0.0) {
                return Err(IrError::attrs(name, "epsilon must be non-negative"));
            }
            Op::BatchNorm {
                epsilon: at.epsilon,
            }
        }
        OpKind::MaxPool2d | OpKind::AvgPool2d => {
            let at: PoolAttrs = attrs(name, a)?;
            let stride = at.stride.unwrap_or(at.size);
            positive(name, "size", &at.size)?;
            positive(name, "stride", &stride)?;
            let spec = PoolSpec {
                size_h: at.size[0],
                size_w: at.size[1],
                stride_h: stride[0],
                stride_w: stride[1],
            };
            if kind == OpKind::MaxPool2d {
                Op::MaxPool2d(spec)
            } else {
                Op::AvgPool2d(spec)
            }
        }
        OpKind::Add => {
            attrs::<Empty>(name, a)?;
            Op::Add
        }
        OpKind::Concat => {
            let at: ConcatAttrs = attrs(name, a)?;
            let axis = match at.axis.as_str() {
                "h" => ConcatAxis::H,
                "w" => ConcatAxis::W,
                "c" => ConcatAxis::C,
                other => return Err(IrError::attrs(name, format!("unknown axis `{other}`"))),
            };
            Op::Concat { axis }
        }
        OpKind::Upsample2d => {
            let at: UpsampleAttrs = attrs(name, a)?;
            positive(name, "factor", &[at.factor])?;
            Op::Upsample2d { factor: at.factor }
        }
        OpKind::Slice => {
            let at: SliceAttrs = attrs(name, a)?;
            positive(name, "size", &at.size)?;
            Op::Slice {
                begin: at.begin,
                size: at.size,
            }
        }
        OpKind::Output => {
            attrs::<Empty>(name, a)?;
            Op::Output
        }
    };
    Ok(op)
}

/// Parses a model file. Shapes are not inferred.
pub fn parse_model(text: &str) -> Result<NNGraph> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| IrError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut nodes = Vec::with_capacity(file.layers.len());
    for entry in &file.layers {
        let op = decode_op(entry)?;
        let mut node = LayerNode::new(entry.name.clone(), op, entry.inputs.clone());
        node.weights_path = entry.weights.clone();
        nodes.push(node);
    }
    NNGraph::from_nodes(file.name, nodes)
}

/// Reads a model file and any weight payloads it references.
pub fn load_model(path: impl AsRef<Path>) -> Result<NNGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IrError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let graph = parse_model(&text)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    load_weights(graph, dir)
}

/// Attaches the payloads named by `weights` entries, resolved against `base_dir`.
pub fn load_weights(graph: NNGraph, base_dir: &Path) -> Result<NNGraph> {
    let name = graph.name.clone();
    let mut nodes = graph.into_nodes();
    for node in &mut nodes {
        let Some(rel) = node.weights_path.clone() else {
            continue;
        };
        let path = base_dir.join(&rel);
        let text = std::fs::read_to_string(&path).map_err(|source| IrError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: WeightFile =
            serde_json::from_str(&text).map_err(|e| IrError::weights(&node.name, e.to_string()))?;
        node.params = Some(params_for(node, file)?);
    }
    NNGraph::from_nodes(name, nodes)
}

fn params_for(node: &LayerNode, file: WeightFile) -> Result<Params> {
    let missing = |what: &str| IrError::weights(&node.name, format!("missing `{what}`"));
    match node.op {
        Op::Conv2d { .. } | Op::Dense { .. } => Ok(Params::Kernel {
            weights: file.kernel.ok_or_else(|| missing("kernel"))?,
            bias: file.bias,
        }),
        Op::BiasAdd => Ok(Params::Bias(file.bias.ok_or_else(|| missing("bias"))?)),
        Op::BatchNorm { .. } => Ok(Params::BatchNorm {
            gamma: file.gamma.ok_or_else(|| missing("gamma"))?,
            beta: file.beta.ok_or_else(|| missing("beta"))?,
            mean: file.mean.ok_or_else(|| missing("mean"))?,
            variance: file.variance.ok_or_else(|| missing("variance"))?,
        }),
        _ => Err(IrError::weights(
            &node.name,
            format!("op `{}` takes no weights", node.op.kind()),
        )),
    }
}

fn encode_attrs(op: &Op) -> Map<String, Value> {
    let v = match op {
        Op::Input { shape } => json!({"shape": [shape.height, shape.width, shape.channels]}),
        Op::Conv2d { kernel, bias } => {
            let padding = match kernel.padding {
                Padding::Valid => json!("valid"),
                Padding::Same => json!("same"),
                Padding::Explicit(p) => json!([p.top, p.bottom, p.left, p.right]),
            };
            json!({
                "kernel": [kernel.k_h, kernel.k_w, kernel.k_in, kernel.k_out],
                "stride": [kernel.stride_h, kernel.stride_w],
                "padding": padding,
                "bias": bias,
            })
        }
        Op::Dense { units, bias } => json!({"units": units, "bias": bias}),
        Op::Pad(p) => json!({"pads": [p.top, p.bottom, p.left, p.right]}),
        Op::Activation(f) => match f {
            ActivationFn::LeakyRelu(alpha) => json!({"function": f.name(), "alpha": alpha}),
            _ => json!({"function": f.name()}),
        },
        Op::BatchNorm { epsilon } => json!({"epsilon": epsilon}),
        Op::MaxPool2d(p) | Op::AvgPool2d(p) => {
            json!({"size": [p.size_h, p.size_w], "stride": [p.stride_h, p.stride_w]})
        }
        Op::Concat { axis } => json!({"axis": axis.as_str()}),
        Op::Upsample2d { factor } => json!({"factor": factor}),
        Op::Slice { begin, size } => json!({"begin": begin, "size": size}),
        Op::BiasAdd | Op::Add | Op::Output => json!({}),
    };
    match v {
        Value::Object(m) => m,
        _ => unreachable!("attrs are objects"),
    }
}

/// Serializes a graph to the model format in topological order. Numeric
/// payloads are not written; `weights` references are kept.
pub fn write_model(graph: &NNGraph) -> String {
    let file = ModelFile {
        name: graph.name.clone(),
        layers: graph
            .iter()
            .map(|n| LayerEntry {
                name: n.name.clone(),
                op: n.op.kind().as_str().to_string(),
                inputs: n.inputs.clone(),
                attrs: encode_attrs(&n.op),
                weights: n.weights_path.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("model serializes");
    out.push('\n');
    out
}
