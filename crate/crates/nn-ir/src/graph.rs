use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{IrError, Result};
use crate::shape::{KernelSpec, PadAmounts, PoolSpec, TensorShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConcatAxis {
    H,
    W,
    C,
}

impl ConcatAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConcatAxis::H => "h",
            ConcatAxis::W => "w",
            ConcatAxis::C => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationFn {
    Linear,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl ActivationFn {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationFn::Linear => x,
            ActivationFn::Relu => x.max(0.0),
            ActivationFn::LeakyRelu(alpha) => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            ActivationFn::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationFn::Tanh => x.tanh(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationFn::Linear => "linear",
            ActivationFn::Relu => "relu",
            ActivationFn::LeakyRelu(_) => "leaky_relu",
            ActivationFn::Sigmoid => "sigmoid",
            ActivationFn::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input { shape: TensorShape },
    Conv2d { kernel: KernelSpec, bias: bool },
    Dense { units: usize, bias: bool },
    Pad(PadAmounts),
    BiasAdd,
    Activation(ActivationFn),
    BatchNorm { epsilon: f64 },
    MaxPool2d(PoolSpec),
    AvgPool2d(PoolSpec),
    Add,
    Concat { axis: ConcatAxis },
    Upsample2d { factor: usize },
    Slice { begin: [usize; 3], size: [usize; 3] },
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Input,
    Conv2d,
    Dense,
    Pad,
    BiasAdd,
    Activation,
    BatchNorm,
    MaxPool2d,
    AvgPool2d,
    Add,
    Concat,
    Upsample2d,
    Slice,
    Output,
}

impl OpKind {
    pub const ALL: [OpKind; 14] = [
        OpKind::Input,
        OpKind::Conv2d,
        OpKind::Dense,
        OpKind::Pad,
        OpKind::BiasAdd,
        OpKind::Activation,
        OpKind::BatchNorm,
        OpKind::MaxPool2d,
        OpKind::AvgPool2d,
        OpKind::Add,
        OpKind::Concat,
        OpKind::Upsample2d,
        OpKind::Slice,
        OpKind::Output,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OpKind::Input => "input",
            OpKind::Conv2d => "conv2d",
            OpKind::Dense => "dense",
            OpKind::Pad => "pad",
            OpKind::BiasAdd => "bias_add",
            OpKind::Activation => "activation",
            OpKind::BatchNorm => "batchnorm",
            OpKind::MaxPool2d => "maxpool2d",
            OpKind::AvgPool2d => "avgpool2d",
            OpKind::Add => "add",
            OpKind::Concat => "concat",
            OpKind::Upsample2d => "upsample2d",
            OpKind::Slice => "slice",
            OpKind::Output => "output",
        }
    }

    pub fn parse(s: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Input { .. } => OpKind::Input,
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::Dense { .. } => OpKind::Dense,
            Op::Pad(_) => OpKind::Pad,
            Op::BiasAdd => OpKind::BiasAdd,
            Op::Activation(_) => OpKind::Activation,
            Op::BatchNorm { .. } => OpKind::BatchNorm,
            Op::MaxPool2d(_) => OpKind::MaxPool2d,
            Op::AvgPool2d(_) => OpKind::AvgPool2d,
            Op::Add => OpKind::Add,
            Op::Concat { .. } => OpKind::Concat,
            Op::Upsample2d { .. } => OpKind::Upsample2d,
            Op::Slice { .. } => OpKind::Slice,
            Op::Output => OpKind::Output,
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Op::Conv2d { .. } | Op::Dense { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Lowered to crossbar matrix-vector multiplications.
    Base,
    /// Executed on the tile's vector unit.
    NonBase,
}

/// Marks a base node created by weight duplication.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DuplicateOf {
    pub layer: String,
    pub index: usize,
}

/// Optional numeric payload of a node.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    /// Kernel in `[k_h][k_w][k_in][k_out]` order plus an optional fused bias.
    Kernel {
        weights: Vec<f64>,
        bias: Option<Vec<f64>>,
    },
    Bias(Vec<f64>),
    BatchNorm {
        gamma: Vec<f64>,
        beta: Vec<f64>,
        mean: Vec<f64>,
        variance: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNode {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<String>,
    /// Set once a batchnorm has been folded into this base layer.
    pub folded: bool,
    /// Crossbar cell resolution annotation for base layers.
    pub quant_bits: Option<u8>,
    pub duplicate_of: Option<DuplicateOf>,
    pub params: Option<Params>,
    pub weights_path: Option<String>,
}

impl LayerNode {
    pub fn new(name: impl Into<String>, op: Op, inputs: Vec<String>) -> Self {
        LayerNode {
            name: name.into(),
            op,
            inputs,
            folded: false,
            quant_bits: None,
            duplicate_of: None,
            params: None,
            weights_path: None,
        }
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = Some(params);
        self
    }

    pub fn role(&self) -> Role {
        if self.op.is_base() {
            Role::Base
        } else {
            Role::NonBase
        }
    }

    pub fn is_base(&self) -> bool {
        self.op.is_base()
    }

    /// The original layer this node computes and its duplicate index.
    pub fn layer_identity(&self) -> (&str, usize) {
        match &self.duplicate_of {
            Some(d) => (d.layer.as_str(), d.index),
            None => (self.name.as_str(), 0),
        }
    }
}

/// Directed acyclic network graph with a deterministic topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct NNGraph {
    pub name: String,
    nodes: BTreeMap<String, LayerNode>,
    order: Vec<String>,
    shapes: BTreeMap<String, TensorShape>,
}

impl NNGraph {
    /// Builds a graph, checking names, references and acyclicity. Shapes are
    /// not inferred.
    pub fn from_nodes(name: impl Into<String>, nodes: Vec<LayerNode>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for node in nodes {
            if map.contains_key(&node.name) {
                return Err(IrError::DuplicateNode(node.name));
            }
            map.insert(node.name.clone(), node);
        }
        for node in map.values() {
            for input in &node.inputs {
                if !map.contains_key(input) {
                    return Err(IrError::DanglingInput {
                        node: node.name.clone(),
                        input: input.clone(),
                    });
                }
            }
        }
        let order = topo_order(&map)?;
        Ok(NNGraph {
            name: name.into(),
            nodes: map,
            order,
            shapes: BTreeMap::new(),
        })
    }

    pub(crate) fn with_shapes(mut self, shapes: BTreeMap<String, TensorShape>) -> Self {
        self.shapes = shapes;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, name: &str) -> Option<&LayerNode> {
        self.nodes.get(name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &LayerNode> {
        self.nodes.values()
    }

    /// Nodes in topological order.
    pub fn iter(&self) -> impl Iterator<Item = &LayerNode> {
        self.order.iter().map(move |n| &self.nodes[n])
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn into_nodes(self) -> Vec<LayerNode> {
        let NNGraph {
            mut nodes, order, ..
        } = self;
        order
            .iter()
            .map(|n| nodes.remove(n).expect("order lists every node"))
            .collect()
    }

    pub fn shape(&self, name: &str) -> Option<TensorShape> {
        self.shapes.get(name).copied()
    }

    pub fn shapes(&self) -> &BTreeMap<String, TensorShape> {
        &self.shapes
    }

    pub fn has_shapes(&self) -> bool {
        self.shapes.len() == self.nodes.len()
    }

    pub fn require_shape(&self, name: &str) -> Result<TensorShape> {
        self.shape(name)
            .ok_or_else(|| IrError::MissingShape(name.to_string()))
    }

    pub fn input_shapes(&self, name: &str) -> Result<Vec<TensorShape>> {
        let node = self
            .node(name)
            .ok_or_else(|| IrError::MissingShape(name.to_string()))?;
        node.inputs.iter().map(|i| self.require_shape(i)).collect()
    }

    /// Names of the nodes consuming `name`, in topological order.
    pub fn consumers(&self, name: &str) -> Vec<&str> {
        self.iter()
            .filter(|n| n.inputs.iter().any(|i| i == name))
            .map(|n| n.name.as_str())
            .collect()
    }

    pub fn consumer_map(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> = self
            .order
            .iter()
            .map(|n| (n.as_str(), Vec::new()))
            .collect();
        for node in self.iter() {
            for input in &node.inputs {
                let list = map.get_mut(input.as_str()).expect("inputs are validated");
                if !list.contains(&node.name.as_str()) {
                    list.push(node.name.as_str());
                }
            }
        }
        map
    }

    /// Base layers (conv2d/dense) in topological order.
    pub fn base_layers(&self) -> impl Iterator<Item = &LayerNode> {
        self.iter().filter(|n| n.is_base())
    }

    pub fn base_count(&self) -> usize {
        self.base_layers().count()
    }

    pub fn count_op(&self, kind: OpKind) -> usize {
        self.nodes.values().filter(|n| n.op.kind() == kind).count()
    }

    /// Kernel geometry of a base layer. Dense layers flatten their input, so
    /// this needs inferred shapes for them.
    pub fn kernel_of(&self, name: &str) -> Result<Option<KernelSpec>> {
        let Some(node) = self.node(name) else {
            return Ok(None);
        };
        match &node.op {
            Op::Conv2d { kernel, .. } => Ok(Some(*kernel)),
            Op::Dense { units, .. } => {
                let input = self.require_shape(&node.inputs[0])?;
                Ok(Some(KernelSpec::dense(input.volume(), *units)))
            }
            _ => Ok(None),
        }
    }
}

/// Kahn's algorithm; among ready nodes the lexicographically smallest name
/// goes first.
fn topo_order(nodes: &BTreeMap<String, LayerNode>) -> Result<Vec<String>> {
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    let mut consumers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for node in nodes.values() {
        indegree.insert(&node.name, node.inputs.len());
        for input in &node.inputs {
            consumers
                .entry(input.as_str())
                .or_default()
                .push(&node.name);
        }
    }
    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.to_string());
        if let Some(cs) = consumers.get(next) {
            for c in cs {
                let d = indegree.get_mut(c).expect("known node");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    if order.len() != nodes.len() {
        let stuck = indegree
            .iter()
            .find(|(_, d)| **d > 0)
            .map(|(n, _)| n.to_string())
            .unwrap_or_default();
        return Err(IrError::Cycle(stuck));
    }
    Ok(order)
}
